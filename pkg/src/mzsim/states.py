"""Fock-basis amplitudes of the two interferometer inputs.

Mode ``a`` carries the coherent state ``|alpha>`` and mode ``b`` the squeezed
vacuum ``|zeta>``.  Amplitudes are kept as log-magnitudes plus phases so that
factorial-sized intermediates never overflow; conversion to complex numbers
happens only when probabilities are assembled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

DEFAULT_TAIL_TOLERANCE = 1e-10
DEFAULT_HARD_CAP = 4096


class TruncationError(RuntimeError):
    """The photon-number cutoff cannot honour the requested tail tolerance."""


@dataclass(frozen=True)
class CoherentParams:
    magnitude: float
    phase: float = 0.0

    def __post_init__(self):
        if not (self.magnitude >= 0 and math.isfinite(self.magnitude)):
            raise ValueError(f"coherent magnitude must be finite and >= 0, got {self.magnitude}")
        object.__setattr__(self, "phase", math.fmod(self.phase, 2 * math.pi))

    @property
    def mean_photons(self) -> float:
        return self.magnitude**2


@dataclass(frozen=True)
class SqueezeParams:
    strength: float
    phase: float = 0.0

    def __post_init__(self):
        if not (self.strength >= 0 and math.isfinite(self.strength)):
            raise ValueError(f"squeezing strength must be finite and >= 0, got {self.strength}")
        object.__setattr__(self, "phase", math.fmod(self.phase, 2 * math.pi))

    @property
    def mean_photons(self) -> float:
        return math.sinh(self.strength) ** 2


@dataclass(frozen=True)
class TruncationPolicy:
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE
    hard_cap: int = DEFAULT_HARD_CAP

    def __post_init__(self):
        if not 0 < self.tail_tolerance < 1:
            raise ValueError(f"tail_tolerance must lie in (0, 1), got {self.tail_tolerance}")
        if int(self.hard_cap) != self.hard_cap or self.hard_cap < 1:
            raise ValueError(f"hard_cap must be a positive integer, got {self.hard_cap}")


@dataclass(frozen=True)
class InputSpec:
    """Physical parameters of one simulated experiment."""

    coherent: CoherentParams
    squeeze: SqueezeParams
    truncation: TruncationPolicy = field(default_factory=TruncationPolicy)

    @classmethod
    def from_alpha2(
        cls,
        alpha2: float,
        r: float,
        theta_c: float = 0.0,
        theta_s: float = 0.0,
        tail_tolerance: float = DEFAULT_TAIL_TOLERANCE,
        hard_cap: int = DEFAULT_HARD_CAP,
    ) -> "InputSpec":
        if alpha2 < 0:
            raise ValueError(f"|alpha|^2 must be >= 0, got {alpha2}")
        return cls(
            CoherentParams(math.sqrt(alpha2), theta_c),
            SqueezeParams(r, theta_s),
            TruncationPolicy(tail_tolerance, hard_cap),
        )

    @classmethod
    def optimal_split(cls, n_bar: float, **kwargs) -> "InputSpec":
        """``|alpha|^2 = sinh^2 r = n_bar / 2``."""
        half = n_bar / 2
        return cls.from_alpha2(half, math.asinh(math.sqrt(half)), **kwargs)

    @property
    def alpha2(self) -> float:
        return self.coherent.mean_photons

    @property
    def r(self) -> float:
        return self.squeeze.strength

    @property
    def n_bar(self) -> float:
        return self.coherent.mean_photons + self.squeeze.mean_photons


@dataclass(frozen=True)
class AmplitudeVector:
    """Amplitudes ``exp(log_magnitude[m] + i phase[m])`` for ``m = 0..n_max``."""

    log_magnitude: np.ndarray
    phase: np.ndarray
    tail_mass: float

    @property
    def n_max(self) -> int:
        return len(self.log_magnitude) - 1

    def probabilities(self) -> np.ndarray:
        return np.exp(2 * self.log_magnitude)

    def to_complex(self) -> np.ndarray:
        return np.exp(self.log_magnitude + 1j * self.phase)


@dataclass(frozen=True)
class CutoffChoice:
    n_max_a: int
    n_max_b: int
    tail_a: float
    tail_b: float
    capped: bool


@dataclass(frozen=True)
class SectorState:
    """Fixed-N two-mode state ``sum_mu A_mu |N/2-mu>_a |N/2+mu>_b``.

    ``amplitudes[i]`` belongs to ``mu = -N/2 + i``, so index ``i`` is the
    photon number in mode ``b``.  ``weight`` is the probability of the sector
    before renormalisation (``nan`` when the state was built by hand).
    """

    total_n: int
    amplitudes: np.ndarray
    weight: float = math.nan

    @property
    def two_mus(self) -> np.ndarray:
        return 2 * np.arange(self.total_n + 1) - self.total_n


# ---------------------------------------------------------------------------
# log amplitudes on 0..n


def _coherent_log(params: CoherentParams, n: int):
    m = np.arange(n + 1)
    if params.magnitude == 0:
        logmag = np.full(n + 1, -np.inf)
        logmag[0] = 0.0
    else:
        logmag = m * math.log(params.magnitude) - params.magnitude**2 / 2 - 0.5 * gammaln(m + 1.0)
    return logmag, m * params.phase


def _squeezed_log(params: SqueezeParams, n: int):
    m = np.arange(n + 1)
    k = m // 2
    logmag = np.full(n + 1, -np.inf)
    phase = np.zeros(n + 1)
    r = params.strength
    if r == 0:
        logmag[0] = 0.0
        return logmag, phase
    even = m % 2 == 0
    ke = k[even]
    # |S_2k| = (2k)!/k! * tanh^k r / (2^k sqrt((2k)! cosh r))
    logmag[even] = (
        ke * (math.log(math.tanh(r)) - math.log(2.0))
        + 0.5 * gammaln(2 * ke + 1.0)
        - gammaln(ke + 1.0)
        - 0.5 * math.log(math.cosh(r))
    )
    # H_2k(0) carries (-1)^k
    phase[even] = ke * params.phase + np.pi * (ke % 2)
    return logmag, phase


def _cutoff(logmag: np.ndarray, tolerance: float):
    """Smallest index whose discarded tail is within tolerance."""
    probs = np.exp(2 * logmag)
    kept = np.cumsum(probs)
    tails = np.maximum(1.0 - kept, 0.0)
    ok = np.nonzero(tails <= tolerance)[0]
    if ok.size:
        n = int(ok[0])
        return n, float(tails[n]), False
    return len(logmag) - 1, float(tails[-1]), True


def choose_cutoff(spec: InputSpec) -> CutoffChoice:
    """Per-mode photon cutoffs for ``spec``.

    The returned ``capped`` flag is set when the hard cap stopped the search
    before the tail tolerance was met.
    """
    pol = spec.truncation
    na, ta, ca = _cutoff(_coherent_log(spec.coherent, pol.hard_cap)[0], pol.tail_tolerance)
    nb, tb, cb = _cutoff(_squeezed_log(spec.squeeze, pol.hard_cap)[0], pol.tail_tolerance)
    return CutoffChoice(na, nb, ta, tb, ca or cb)


def _truncated(logmag, phase, policy: TruncationPolicy, what: str) -> AmplitudeVector:
    n, tail, capped = _cutoff(logmag, policy.tail_tolerance)
    if capped:
        raise TruncationError(
            f"{what}: hard_cap={policy.hard_cap} leaves tail mass {tail:.3e} "
            f"> tolerance {policy.tail_tolerance:.1e}"
        )
    return AmplitudeVector(logmag[: n + 1].copy(), phase[: n + 1].copy(), tail)


def coherent_amplitudes(params: CoherentParams, policy: TruncationPolicy | None = None) -> AmplitudeVector:
    """``C_m = alpha^m exp(-|alpha|^2/2) / sqrt(m!)`` truncated per ``policy``."""
    policy = policy or TruncationPolicy()
    logmag, phase = _coherent_log(params, policy.hard_cap)
    return _truncated(logmag, phase, policy, "coherent mode")


def squeezed_vacuum_amplitudes(params: SqueezeParams, policy: TruncationPolicy | None = None) -> AmplitudeVector:
    """Squeezed-vacuum amplitudes; odd entries are exactly zero."""
    policy = policy or TruncationPolicy()
    logmag, phase = _squeezed_log(params, policy.hard_cap)
    return _truncated(logmag, phase, policy, "squeezed mode")


def input_amplitudes(spec: InputSpec) -> tuple[np.ndarray, np.ndarray]:
    """Complex amplitude arrays ``(C, S)`` of both modes, truncated."""
    a = coherent_amplitudes(spec.coherent, spec.truncation)
    b = squeezed_vacuum_amplitudes(spec.squeeze, spec.truncation)
    return a.to_complex(), b.to_complex()


def sector_amplitudes(spec: InputSpec, total_n: int) -> SectorState:
    """Post-selected state with exactly ``total_n`` photons.

    ``A_mu`` is proportional to ``C_{N/2-mu} S_{N/2+mu}``; whatever zero
    pattern the squeezed-mode parity produces follows from that product.
    """
    if total_n < 0:
        raise ValueError("total_n must be non-negative")
    if total_n > spec.truncation.hard_cap:
        raise TruncationError(f"total_n={total_n} exceeds hard_cap={spec.truncation.hard_cap}")
    la, pa = _coherent_log(spec.coherent, total_n)
    lb, pb = _squeezed_log(spec.squeeze, total_n)
    i = np.arange(total_n + 1)  # photons in mode b
    logmag = la[total_n - i] + lb[i]
    if not np.any(np.isfinite(logmag)):
        raise ValueError(f"sector N={total_n} has zero weight for this input")
    peak = logmag.max()
    amps = np.exp(logmag - peak + 1j * (pa[total_n - i] + pb[i]))
    amps[~np.isfinite(logmag)] = 0.0
    norm2 = float(np.sum(np.abs(amps) ** 2))
    weight = norm2 * math.exp(2 * peak)
    return SectorState(total_n, amps / math.sqrt(norm2), weight)
