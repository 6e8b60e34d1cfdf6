"""Photon-counting statistics at the interferometer output.

The interferometer acts as ``exp(-i theta J_y)`` with the Jordan-Schwinger
operators ``J_y = (a^dag b - b^dag a) / 2i`` and ``J_z = (a^dag a - b^dag b)/2``.
Output port ``c`` inherits the ``a`` label and port ``d`` the ``b`` label, so a
coherent input leaves port ``c`` with mean ``|alpha|^2 cos^2(theta/2)`` and
port ``d`` with ``|alpha|^2 sin^2(theta/2)``.  At ``theta = 0`` the
interferometer is the identity.

Within the sector of ``N`` photons the input has ``J_z`` label
``nu = N/2 - n`` (``n`` photons in the squeezed mode) and the outcome
``(n_c, n_d)`` has ``mu = (n_c - n_d)/2``, hence

    P(n_c, n_d | theta) = |sum_n C_{N-n} S_n d^{N/2}_{mu, N/2-n}(theta)|^2.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .specfun import MemoryCeilingError, wigner_d_columns
from .states import InputSpec, input_amplitudes

#: Tables larger than this (bytes, for the three outcome arrays) are refused.
TABLE_MEMORY_CEILING = 1024**3

#: Convention label recorded in output metadata.
PORT_CONVENTION = "port c = mode a label; coherent light exits c with weight cos^2(theta/2)"


@dataclass(frozen=True)
class Sector:
    """Input content of one total-photon-number sector."""

    total_n: int
    two_nus: np.ndarray  # doubled J_z labels of the populated input columns
    psi: np.ndarray  # complex input amplitudes for those columns
    weight: float


@dataclass(frozen=True)
class SectorPlan:
    """All sectors of a spec that survive joint truncation."""

    spec: InputSpec
    sectors: tuple[Sector, ...]
    input_mass: float  # (1 - tail_a)(1 - tail_b)
    skipped_mass: float

    @property
    def n_outcomes(self) -> int:
        return sum(s.total_n + 1 for s in self.sectors)


_PLANS: dict[InputSpec, SectorPlan] = {}


def sector_plan(spec: InputSpec) -> SectorPlan:
    """Enumerate sectors ``N = 0 .. n_max_a + n_max_b``.

    Sectors whose input weight is below ``tail_tolerance / 100`` are skipped
    and their weight recorded in ``skipped_mass``.  Plans are cached per spec.
    """
    if spec in _PLANS:
        return _PLANS[spec]
    ca, cb = input_amplitudes(spec)
    na, nb = len(ca) - 1, len(cb) - 1
    nz_b = np.nonzero(cb)[0]
    threshold = spec.truncation.tail_tolerance / 100
    sectors = []
    skipped = 0.0
    for total in range(na + nb + 1):
        n = nz_b[(nz_b <= total) & (nz_b >= total - na)]
        if n.size == 0:
            continue
        psi = ca[total - n] * cb[n]
        weight = float(np.sum(np.abs(psi) ** 2))
        if weight < threshold:
            skipped += weight
            continue
        sectors.append(Sector(total, (total - 2 * n).astype(np.int64), psi, weight))
    input_mass = float(np.sum(np.abs(ca) ** 2) * np.sum(np.abs(cb) ** 2))
    plan = SectorPlan(spec, tuple(sectors), input_mass, skipped)
    needed = 3 * 8 * plan.n_outcomes
    if needed > TABLE_MEMORY_CEILING:
        raise MemoryCeilingError(
            f"outcome table would need {needed} bytes (> {TABLE_MEMORY_CEILING}); "
            f"{len(sectors)} sectors up to N={na + nb}"
        )
    _PLANS[spec] = plan
    return plan


def sector_output(sector: Sector, theta: float) -> np.ndarray:
    """Complex output amplitudes of one sector; index ``k`` is ``n_c = k``."""
    cols = wigner_d_columns(sector.total_n, theta, sector.two_nus)
    return cols @ sector.psi


def _probabilities(plan: SectorPlan, theta: float) -> np.ndarray:
    out = np.empty(plan.n_outcomes)
    pos = 0
    for sec in plan.sectors:
        amp = sector_output(sec, theta)
        out[pos : pos + sec.total_n + 1] = amp.real**2 + amp.imag**2
        pos += sec.total_n + 1
    return out


def _check_theta(theta: float) -> None:
    if not 0.0 <= theta <= math.pi:
        raise ValueError(f"theta must lie in [0, pi], got {theta}")


def outcome_probability(spec: InputSpec, theta: float, n_c: int, n_d: int) -> float:
    """``P(n_c, n_d | theta)`` for the truncated inputs of ``spec``."""
    _check_theta(theta)
    if n_c < 0 or n_d < 0:
        raise ValueError("photon counts must be non-negative")
    ca, cb = input_amplitudes(spec)
    total = n_c + n_d
    n = np.nonzero(cb)[0]
    n = n[(n <= total) & (total - n < len(ca))]
    if n.size == 0:
        return 0.0
    psi = ca[total - n] * cb[n]
    col = wigner_d_columns(total, theta, total - 2 * n)
    amp = col[n_c] @ psi
    return float(abs(amp) ** 2)


@dataclass(frozen=True)
class OutcomeTable:
    """Outcome distribution at one phase, stored sector by sector.

    ``probs`` is indexed like ``n_c`` / ``n_d``; ``slack`` is the input mass
    lost to sector skipping, ``input_tail`` the mass lost to per-mode cutoffs.
    """

    theta: float
    n_c: np.ndarray
    n_d: np.ndarray
    probs: np.ndarray
    spec: InputSpec
    slack: float
    input_tail: float

    @property
    def kept_mass(self) -> float:
        return float(self.probs.sum())

    @cached_property
    def _index(self) -> dict[tuple[int, int], int]:
        return {(int(c), int(d)): i for i, (c, d) in enumerate(zip(self.n_c, self.n_d))}

    def prob(self, n_c: int, n_d: int) -> float:
        i = self._index.get((n_c, n_d))
        return 0.0 if i is None else float(self.probs[i])

    def as_dict(self) -> dict[tuple[int, int], float]:
        return {k: float(self.probs[i]) for k, i in self._index.items()}

    def sector_totals(self) -> dict[int, float]:
        """``P(N)`` for every kept sector."""
        total = self.n_c + self.n_d
        sums = np.bincount(total, weights=self.probs)
        return {int(n): float(sums[n]) for n in np.unique(total)}

    def write_csv(self, path_or_file) -> None:
        """Dump as ``n_c,n_d,prob`` rows (round-trip float formatting)."""
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n_c", "n_d", "prob"])
            for c, d, p in zip(self.n_c, self.n_d, self.probs):
                w.writerow([int(c), int(d), repr(float(p))])
        finally:
            if own:
                fh.close()


def _outcome_labels(plan: SectorPlan):
    n_c = np.concatenate([np.arange(s.total_n + 1) for s in plan.sectors]) if plan.sectors else np.zeros(0, int)
    n_d = np.concatenate([s.total_n - np.arange(s.total_n + 1) for s in plan.sectors]) if plan.sectors else np.zeros(0, int)
    return n_c, n_d


def outcome_table(spec: InputSpec, theta: float) -> OutcomeTable:
    """Full table of ``P(n_c, n_d | theta)`` over the truncated support."""
    _check_theta(theta)
    return _table(spec, theta)


def _table(spec: InputSpec, theta: float) -> OutcomeTable:
    plan = sector_plan(spec)
    n_c, n_d = _outcome_labels(plan)
    probs = _probabilities(plan, theta)
    return OutcomeTable(
        float(theta), n_c, n_d, probs, spec, plan.skipped_mass, 1.0 - plan.input_mass
    )


def probabilities_at(spec: InputSpec, theta: float) -> np.ndarray:
    """Table probabilities at any real ``theta`` (no range check), in the
    fixed outcome order of :func:`outcome_table`."""
    return _probabilities(sector_plan(spec), theta)


@dataclass(frozen=True)
class MomentSummary:
    mean_M: float
    var_M: float
    mean_N: float
    var_N: float
    truncated: bool = False


def moments(table: OutcomeTable) -> MomentSummary:
    """Mean and variance of ``N_c - N_d`` and ``N_c + N_d``.

    Moments are taken under the renormalised table; ``truncated`` is set when
    the table keeps less than ``1 - 1e-6`` of the probability.
    """
    kept = table.kept_mass
    if kept == 0:
        raise ValueError("empty outcome table")
    w = table.probs / kept
    m = (table.n_c - table.n_d).astype(float)
    n = (table.n_c + table.n_d).astype(float)
    mean_m = float(w @ m)
    mean_n = float(w @ n)
    var_m = max(float(w @ (m - mean_m) ** 2), 0.0)
    var_n = max(float(w @ (n - mean_n) ** 2), 0.0)
    return MomentSummary(mean_m, var_m, mean_n, var_n, kept < 1 - 1e-6)


def marginal_one_port(table: OutcomeTable, port: str) -> np.ndarray:
    """Distribution of the photon count at output ``port`` (``"c"`` or ``"d"``)."""
    return _marginal(table.n_c, table.n_d, table.probs, port)


def _marginal(n_c, n_d, probs, port: str) -> np.ndarray:
    if port == "c":
        counts = n_c
    elif port == "d":
        counts = n_d
    else:
        raise ValueError(f"port must be 'c' or 'd', got {port!r}")
    if counts.size == 0:
        return np.zeros(1)
    return np.bincount(counts, weights=probs)
