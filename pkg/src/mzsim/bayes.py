"""Monte-Carlo phase-estimation experiments with Bayesian inversion.

Likelihood curves on the phase grid use the Fourier form of the rotation
matrix,

    d^j_{mu,nu}(theta) = i^{mu-nu} sum_m d^j_{m,mu}(pi/2) d^j_{m,nu}(pi/2) e^{-i m theta},

so every outcome's amplitude is a trigonometric polynomial in the phase and a
whole grid costs one FFT.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .outcome import OutcomeTable, outcome_table, sector_plan
from .specfun import wigner_d_columns
from .states import InputSpec

DEFAULT_GRID = 4096
MAX_GRID = 2**16
CONFIDENCE_MEASURE = "contiguous highest-density interval grown from the MAP point"


class LikelihoodError(RuntimeError):
    """An observed outcome has zero likelihood everywhere on the grid."""


class UndercoveredTableError(ValueError):
    """The outcome table misses too much probability to be sampled."""


def trial_seed(seed: int, index: int) -> np.random.SeedSequence:
    """Seed of trial ``index``; independent of how many trials run or in
    which order."""
    return np.random.SeedSequence(seed, spawn_key=(index,))


@dataclass(frozen=True)
class MeasurementRecord:
    outcomes: np.ndarray  # shape (p, 2): columns n_c, n_d
    seed: int
    theta_true: float

    def __len__(self) -> int:
        return len(self.outcomes)

    @property
    def photons(self) -> int:
        return int(self.outcomes.sum())


class OutcomeSampler:
    """Inverse-CDF sampler over a renormalised outcome table."""

    def __init__(self, table: OutcomeTable, min_mass: float = 1 - 1e-6):
        if table.kept_mass < min_mass:
            raise UndercoveredTableError(
                f"table keeps {table.kept_mass:.10f} of the probability (< {min_mass})"
            )
        self.table = table
        self.cdf = np.cumsum(table.probs)
        self.cdf /= self.cdf[-1]

    def draw(self, p: int, seed) -> np.ndarray:
        rng = np.random.default_rng(seed)
        idx = np.searchsorted(self.cdf, rng.random(p), side="right")
        idx = np.minimum(idx, len(self.cdf) - 1)
        return np.column_stack([self.table.n_c[idx], self.table.n_d[idx]])


def sample_outcomes(table: OutcomeTable, p: int, seed: int) -> MeasurementRecord:
    """Draw ``p`` independent outcomes from ``table``."""
    if p < 0:
        raise ValueError("p must be non-negative")
    outcomes = OutcomeSampler(table).draw(p, seed)
    return MeasurementRecord(outcomes, seed, table.theta)


def phase_grid(grid_size: int) -> np.ndarray:
    return np.linspace(0.0, math.pi, grid_size)


class LikelihoodGrid:
    """``P(n_c, n_d | phi)`` on a uniform grid over ``[0, pi]``, cached per
    outcome."""

    def __init__(self, spec: InputSpec, grid_size: int = DEFAULT_GRID):
        if grid_size < 64:
            raise ValueError("grid_size must be at least 64")
        self.spec = spec
        self.grid = phase_grid(grid_size)
        self.plan = sector_plan(spec)
        self._by_n = {s.total_n: s for s in self.plan.sectors}
        self._rows: dict[tuple[int, int], np.ndarray] = {}
        self._fft_len = 2 * (grid_size - 1)

    def _sector_rows(self, total_n: int, n_cs: np.ndarray) -> np.ndarray:
        sec = self._by_n.get(total_n)
        if sec is None:
            return np.zeros((len(n_cs), len(self.grid)))
        two_mus = 2 * n_cs - total_n
        half_pi = wigner_d_columns(total_n, math.pi / 2, np.concatenate([sec.two_nus, two_mus]))
        k = len(sec.two_nus)
        coeff = half_pi[:, :k] @ (np.exp(-0.5j * math.pi * sec.two_nus / 2) * sec.psi)
        q = half_pi[:, k:] * coeff[:, None]
        L = self._fft_len
        if q.shape[0] > L:
            pad = (-q.shape[0]) % L
            q = np.pad(q, ((0, pad), (0, 0))).reshape(-1, L, q.shape[1]).sum(axis=0)
        amp = np.fft.fft(q, n=L, axis=0)[: len(self.grid)]
        return (amp.real**2 + amp.imag**2).T

    def probabilities(self, outcomes: np.ndarray) -> np.ndarray:
        """Rows of likelihood values, one per outcome in ``outcomes``."""
        outcomes = np.asarray(outcomes, dtype=np.int64).reshape(-1, 2)
        missing = {}
        for c, d in outcomes:
            key = (int(c), int(d))
            if key not in self._rows:
                missing.setdefault(key[0] + key[1], set()).add(key[0])
        for total_n, n_cs in missing.items():
            n_cs = np.array(sorted(n_cs))
            for c, row in zip(n_cs, self._sector_rows(total_n, n_cs)):
                self._rows[(int(c), int(total_n - c))] = row
        if not len(outcomes):
            return np.zeros((0, len(self.grid)))
        return np.stack([self._rows[(int(c), int(d))] for c, d in outcomes])

    def log_probabilities(self, outcomes: np.ndarray) -> np.ndarray:
        rows = self.probabilities(outcomes)
        dead = ~np.any(rows > 0, axis=1)
        if np.any(dead):
            bad = np.asarray(outcomes).reshape(-1, 2)[dead][0]
            raise LikelihoodError(
                f"outcome (n_c={bad[0]}, n_d={bad[1]}) is impossible at every grid phase; "
                "the truncation is probably too tight"
            )
        with np.errstate(divide="ignore"):
            return np.log(rows)


@dataclass(frozen=True)
class Posterior:
    grid: np.ndarray
    log_weights: np.ndarray

    @property
    def spacing(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def weights(self) -> np.ndarray:
        """Density on the grid with ``sum(weights) * spacing == 1``."""
        w = np.exp(self.log_weights - np.max(self.log_weights))
        return w / (w.sum() * self.spacing)


def _posterior_from_counts(grid: np.ndarray, log_rows: np.ndarray, counts: np.ndarray) -> Posterior:
    if len(counts):
        # counts are positive, so -inf rows never meet a zero weight
        lw = counts @ log_rows
    else:
        lw = np.zeros(len(grid))
    if not np.any(np.isfinite(lw)):
        raise LikelihoodError("the measurement record is impossible at every grid phase")
    lw = lw - np.max(lw)
    return Posterior(grid, lw)


def posterior(
    spec: InputSpec,
    record: MeasurementRecord,
    grid_size: int = DEFAULT_GRID,
    likelihood: LikelihoodGrid | None = None,
) -> Posterior:
    """Flat-prior posterior over ``[0, pi]`` for the outcomes in ``record``."""
    lik = likelihood or LikelihoodGrid(spec, grid_size)
    if len(record) == 0:
        return Posterior(lik.grid, np.zeros(len(lik.grid)))
    uniq, counts = np.unique(record.outcomes, axis=0, return_counts=True)
    return _posterior_from_counts(lik.grid, lik.log_probabilities(uniq), counts.astype(float))


def map_estimate(post: Posterior) -> float:
    """Grid phase of maximal posterior weight (first one on ties)."""
    return float(post.grid[int(np.argmax(post.log_weights))])


def _grow(mass: np.ndarray, start: int, level: float):
    lo = hi = start
    total = mass[start]
    last = mass[start]
    n = len(mass)
    while total < level and (lo > 0 or hi < n - 1):
        left = mass[lo - 1] if lo > 0 else -1.0
        right = mass[hi + 1] if hi < n - 1 else -1.0
        if right > left:
            hi += 1
            last = right
        else:
            lo -= 1
            last = left
        total += last
    return lo, hi, total, last


def confidence_interval(post: Posterior, level: float = 0.68) -> float:
    """Half-width of the ``level`` credible interval around the MAP point.

    The interval is grown one grid cell at a time towards the heavier
    neighbour; the last cell is counted fractionally.  The result never
    drops below one grid spacing.
    """
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    dphi = post.spacing
    mass = post.weights * dphi
    lo, hi, total, last = _grow(mass, int(np.argmax(post.log_weights)), level)
    width = (hi - lo + 1) * dphi
    if last > 0:
        width -= (total - level) / last * dphi
    return max(width / 2, dphi)


def secondary_peak_ratio(post: Posterior, level: float = 0.68) -> float:
    """Largest weight outside (twice) the credible interval, relative to the
    MAP weight.  Values near one signal a multi-modal posterior."""
    w = post.weights
    k = int(np.argmax(w))
    lo, hi, _, _ = _grow(w * post.spacing, k, level)
    half = hi - lo + 1
    mask = np.ones(len(w), dtype=bool)
    mask[max(lo - half, 0) : hi + half + 1] = False
    return float(w[mask].max() / w[k]) if mask.any() else 0.0


@dataclass(frozen=True)
class SensitivityResult:
    delta_theta: float  # mean over trials of the per-trial half-width
    map_phase: float  # mean MAP estimate
    trials: int
    dispersion: float  # std-dev of the per-trial half-widths
    per_trial: np.ndarray = field(repr=False)
    map_per_trial: np.ndarray = field(repr=False)
    photons_per_trial: np.ndarray = field(repr=False)
    grid_sizes: np.ndarray = field(repr=False)
    multimodal_trials: int = 0
    confidence_measure: str = CONFIDENCE_MEASURE

    @property
    def mean_photons(self) -> float:
        return float(self.photons_per_trial.mean())


def sensitivity_experiment(
    spec: InputSpec,
    theta_true: float,
    p: int,
    trials: int,
    seed: int,
    grid_size: int = DEFAULT_GRID,
    level: float = 0.68,
    max_grid: int = MAX_GRID,
) -> SensitivityResult:
    """Repeat the sample / invert / measure-width protocol ``trials`` times.

    Trial ``i`` draws its ``p`` outcomes with :func:`trial_seed` ``(seed, i)``.
    A trial whose half-width spans fewer than four grid cells is redone on a
    grid of twice the size (up to ``max_grid``).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if p < 1:
        raise ValueError("p must be >= 1")
    sampler = OutcomeSampler(outcome_table(spec, theta_true))
    records = [sampler.draw(p, trial_seed(seed, i)) for i in range(trials)]

    grids = {grid_size: LikelihoodGrid(spec, grid_size)}
    uniq, inverse = np.unique(np.concatenate(records), axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    log_rows = grids[grid_size].log_probabilities(uniq)

    widths = np.empty(trials)
    maps = np.empty(trials)
    sizes = np.empty(trials, dtype=int)
    multimodal = 0
    for i in range(trials):
        ids, counts = np.unique(inverse[i * p : (i + 1) * p], return_counts=True)
        try:
            post = _posterior_from_counts(grids[grid_size].grid, log_rows[ids], counts.astype(float))
            g = grid_size
            width = confidence_interval(post, level)
            while width < 4 * post.spacing and g < max_grid:
                g *= 2
                lik = grids.setdefault(g, LikelihoodGrid(spec, g))
                post = _posterior_from_counts(lik.grid, lik.log_probabilities(uniq[ids]), counts.astype(float))
                width = confidence_interval(post, level)
        except LikelihoodError as exc:
            raise LikelihoodError(f"trial {i}: {exc}") from exc
        widths[i] = width
        maps[i] = map_estimate(post)
        sizes[i] = g
        if secondary_peak_ratio(post, level) > 0.1:
            multimodal += 1

    photons = np.array([r.sum() for r in records], dtype=float)
    return SensitivityResult(
        delta_theta=float(widths.mean()),
        map_phase=float(maps.mean()),
        trials=trials,
        dispersion=float(widths.std(ddof=1)) if trials > 1 else 0.0,
        per_trial=widths,
        map_per_trial=maps,
        photons_per_trial=photons,
        grid_sizes=sizes,
        multimodal_trials=multimodal,
    )
