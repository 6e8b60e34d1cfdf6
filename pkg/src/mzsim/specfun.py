"""Special-function kernels: log-factorials, Hermite values at zero and
Wigner small-d rotation matrix elements.

Half-integer quantum numbers are passed around as doubled integers
(``two_j = 2j``, ``two_mu = 2mu``) so that index arithmetic stays exact.

Wigner elements follow the convention

    d^j_{mu,nu}(theta) = <j mu| exp(-i theta J_y) |j nu>,

with Condon-Shortley phases, so that ``d^{1/2}_{1/2,1/2} = cos(theta/2)`` and
``d^{1/2}_{-1/2,1/2} = sin(theta/2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.special import gammaln

#: Refuse Wigner blocks needing more than this many bytes.
BLOCK_MEMORY_CEILING = 512 * 1024**2

_RESCALE_AT = 1e200


class MemoryCeilingError(MemoryError):
    """Raised when a dense block would exceed :data:`BLOCK_MEMORY_CEILING`."""


@dataclass(frozen=True)
class SignedLog:
    """A real number stored as ``sign * exp(log_magnitude)``."""

    log_magnitude: float
    sign: int

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or +1, got {self.sign}")
        if (self.sign == 0) != (self.log_magnitude == -math.inf):
            raise ValueError("sign is 0 exactly when log_magnitude is -inf")

    @classmethod
    def zero(cls) -> "SignedLog":
        return cls(-math.inf, 0)

    @classmethod
    def from_float(cls, x: float) -> "SignedLog":
        if x == 0:
            return cls.zero()
        return cls(math.log(abs(x)), 1 if x > 0 else -1)

    def __float__(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_magnitude)

    def __mul__(self, other: "SignedLog") -> "SignedLog":
        if self.sign == 0 or other.sign == 0:
            return SignedLog.zero()
        return SignedLog(self.log_magnitude + other.log_magnitude, self.sign * other.sign)


def log_factorial(n):
    """Natural log of ``n!``; accepts scalars or integer arrays."""
    n_arr = np.asarray(n)
    if np.any(n_arr < 0):
        raise ValueError("log_factorial is defined for n >= 0")
    out = gammaln(n_arr + 1.0)
    return float(out) if out.ndim == 0 else out


def hermite_at_zero(m: int) -> SignedLog:
    """Physicists' Hermite polynomial ``H_m(0)``.

    Odd orders vanish; for ``m = 2k`` the value is ``(-1)^k (2k)!/k!``.
    """
    if m < 0:
        raise ValueError("Hermite order must be non-negative")
    if m % 2:
        return SignedLog.zero()
    k = m // 2
    return SignedLog(log_factorial(m) - log_factorial(k), -1 if k % 2 else 1)


# ---------------------------------------------------------------------------
# Wigner d


def _check_indices(two_j: int, two_mu: int, two_nu: int) -> None:
    if two_j < 0:
        raise ValueError("j must be non-negative")
    for name, two_m in (("mu", two_mu), ("nu", two_nu)):
        if abs(two_m) > two_j or (two_j - two_m) % 2:
            raise ValueError(
                f"{name}={two_m}/2 is not in the j={two_j}/2 multiplet"
            )


@numba.njit(cache=True)
def _shift(nu, mu, c, omc, opc):
    # nu - mu*cos(theta)
    if c >= 0.0:
        return (nu - mu) + mu * omc
    return (nu + mu) - mu * opc


@numba.njit(cache=True)
def _column(two_j, two_nu, c, s, half_c, half_s, out):
    """Fill ``out[k] = d^j_{mu_k, nu}`` for ``mu_k = -j + k``, ``k = 0..2j``.

    Column ``nu`` of the rotation matrix is the eigenvector of the tridiagonal
    matrix ``cos(theta) J_z + sin(theta) J_x`` with eigenvalue ``nu``.  The
    three-term relation is iterated inward from both edges (the directions in
    which the solution grows), the two branches are matched by least squares
    on a three-row overlap around the classical centre ``mu = nu cos(theta)``
    and the result is normalised to unit length.
    """
    n = two_j
    nu = 0.5 * two_nu
    j = 0.5 * two_j
    if n == 0:
        out[0] = 1.0
        return
    # 1 -/+ cos(theta) without cancellation near theta = 0 and pi
    omc = 2.0 * half_s * half_s
    opc = 2.0 * half_c * half_c
    centre = int(round(nu * c + j))
    if centre < 1:
        centre = 1
    if centre > n - 1:
        centre = n - 1

    # the lowest row d_{-j,nu} ~ cos(theta/2)^(j-nu) sin(theta/2)^(j+nu)
    p_cos = (two_j - two_nu) // 2
    p_sin = (two_j + two_nu) // 2
    sign_low = 1.0
    if half_c < 0 and p_cos % 2 == 1:
        sign_low = -sign_low
    if half_s < 0 and p_sin % 2 == 1:
        sign_low = -sign_low

    up = np.zeros(n + 1)
    up[0] = sign_low
    prev = 0.0
    for k in range(0, min(centre + 1, n)):
        mu = k - j
        a_k = math.sqrt((n - k) * (k + 1.0))
        a_km1 = math.sqrt((n - k + 1.0) * k) if k > 0 else 0.0
        nxt = (2.0 * _shift(nu, mu, c, omc, opc) / s * up[k] - a_km1 * prev) / a_k
        prev = up[k]
        up[k + 1] = nxt
        if abs(nxt) > _RESCALE_AT:
            for q in range(k + 2):
                up[q] /= _RESCALE_AT
            prev /= _RESCALE_AT

    down = np.zeros(n + 1)
    down[n] = 1.0
    prev = 0.0
    for k in range(n, max(centre - 1, 0), -1):
        mu = k - j
        a_k = math.sqrt((n - k) * (k + 1.0))
        a_km1 = math.sqrt((n - k + 1.0) * k)
        nxt = (2.0 * _shift(nu, mu, c, omc, opc) / s * down[k] - a_k * prev) / a_km1
        prev = down[k]
        down[k - 1] = nxt
        if abs(nxt) > _RESCALE_AT:
            for q in range(k - 1, n + 1):
                down[q] /= _RESCALE_AT
            prev /= _RESCALE_AT

    # bring both branches to unit size on the overlap before matching
    u_max = 0.0
    d_max = 0.0
    for k in range(centre - 1, centre + 2):
        u_max = max(u_max, abs(up[k]))
        d_max = max(d_max, abs(down[k]))
    for k in range(n + 1):
        up[k] /= u_max
        down[k] /= d_max
    num = 0.0
    den = 0.0
    for k in range(centre - 1, centre + 2):
        num += up[k] * down[k]
        den += down[k] * down[k]
    lam = num / den

    scale = 0.0
    for k in range(n + 1):
        v = up[k] if k <= centre else lam * down[k]
        out[k] = v
        if abs(v) > scale:
            scale = abs(v)
    norm = 0.0
    for k in range(n + 1):
        out[k] /= scale
        norm += out[k] * out[k]
    norm = math.sqrt(norm)
    for k in range(n + 1):
        out[k] /= norm


@numba.njit(cache=True)
def _columns(two_j, theta, two_nus, out):
    c = math.cos(theta)
    s = math.sin(theta)
    half_c = math.cos(0.5 * theta)
    half_s = math.sin(0.5 * theta)
    n = two_j
    for col in range(two_nus.shape[0]):
        two_nu = two_nus[col]
        if min(abs(half_s), abs(half_c)) * (n + 2) < 1e-17:
            # theta within rounding of a multiple of pi: off-diagonal terms
            # are below 1e-17 and the block is a signed permutation
            for k in range(n + 1):
                out[k, col] = 0.0
            if abs(half_s) < 0.5:
                # d = cos(theta/2)^(2j) * identity
                val = 1.0 if (half_c > 0 or n % 2 == 0) else -1.0
                out[(two_nu + n) // 2, col] = val
            else:
                # d_{mu,nu} = (-1)^(j-nu) sin(theta/2)^(2j) delta_{mu,-nu}
                val = -1.0 if ((n - two_nu) // 2) % 2 == 1 else 1.0
                if half_s < 0 and n % 2 == 1:
                    val = -val
                out[(n - two_nu) // 2, col] = val
            continue
        _column(two_j, two_nu, c, s, half_c, half_s, out[:, col])


def wigner_d_columns(two_j: int, theta: float, two_nus) -> np.ndarray:
    """Selected columns of the spin-j rotation matrix.

    Parameters
    ----------
    two_j : int
        Twice the multiplet label ``j``.
    theta : float
        Rotation angle in radians.
    two_nus : array of int
        Doubled column indices ``2 nu``.

    Returns
    -------
    ndarray, shape (2j+1, len(two_nus))
        Row ``k`` holds ``mu = -j + k``.
    """
    two_nus = np.ascontiguousarray(two_nus, dtype=np.int64).reshape(-1)
    if two_j < 0:
        raise ValueError("j must be non-negative")
    if np.any(np.abs(two_nus) > two_j) or np.any((two_j - two_nus) % 2):
        raise ValueError(f"column index outside the j={two_j}/2 multiplet")
    # column-major storage keeps each column contiguous for the kernel
    out = np.zeros((two_nus.size, two_j + 1)).T
    if two_nus.size:
        _columns(int(two_j), float(theta), two_nus, out)
    return out


def wigner_d(two_j: int, two_mu: int, two_nu: int, theta: float) -> float:
    """Single element ``d^j_{mu,nu}(theta)`` (doubled-integer indices)."""
    _check_indices(two_j, two_mu, two_nu)
    col = wigner_d_columns(two_j, theta, [two_nu])
    return float(col[(two_mu + two_j) // 2, 0])


@dataclass(frozen=True)
class WignerBlock:
    """Full ``(2j+1) x (2j+1)`` rotation block; ``entries[k, l]`` is
    ``d^j_{-j+k, -j+l}(theta)``."""

    two_j: int
    theta: float
    entries: np.ndarray

    @property
    def j(self) -> float:
        return self.two_j / 2

    def element(self, two_mu: int, two_nu: int) -> float:
        _check_indices(self.two_j, two_mu, two_nu)
        return float(self.entries[(two_mu + self.two_j) // 2, (two_nu + self.two_j) // 2])


def wigner_d_block(two_j: int, theta: float, memory_ceiling: int | None = None) -> WignerBlock:
    """Full rotation block at angle ``theta``.

    Raises :class:`MemoryCeilingError` when ``(2j+1)^2`` doubles exceed the
    ceiling.
    """
    if two_j < 0:
        raise ValueError("j must be non-negative")
    ceiling = BLOCK_MEMORY_CEILING if memory_ceiling is None else memory_ceiling
    need = 8 * (two_j + 1) ** 2
    if need > ceiling:
        raise MemoryCeilingError(
            f"Wigner block for j={two_j}/2 needs {need} bytes, ceiling is {ceiling}"
        )
    entries = wigner_d_columns(two_j, theta, np.arange(-two_j, two_j + 1, 2))
    entries = np.ascontiguousarray(entries)
    entries.setflags(write=False)
    return WignerBlock(two_j, float(theta), entries)


def jy_generator(two_j: int) -> np.ndarray:
    """Dense ``J_y`` on the multiplet, rows/cols ordered ``mu = -j..j``."""
    n = two_j
    k = np.arange(n)
    coupling = np.sqrt((n - k) * (k + 1.0)) / 2.0
    jy = np.zeros((n + 1, n + 1), dtype=complex)
    # <mu+1|J_y|mu> = -i/2 * sqrt((j-mu)(j+mu+1))
    jy[k + 1, k] = -1j * coupling
    jy[k, k + 1] = 1j * coupling
    return jy


def jx_generator(two_j: int) -> np.ndarray:
    """Dense ``J_x`` on the multiplet, rows/cols ordered ``mu = -j..j``."""
    n = two_j
    k = np.arange(n)
    coupling = np.sqrt((n - k) * (k + 1.0)) / 2.0
    jx = np.zeros((n + 1, n + 1))
    jx[k + 1, k] = coupling
    jx[k, k + 1] = coupling
    return jx
