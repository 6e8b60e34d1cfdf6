"""Fixed-budget scans: how the Bayesian sensitivity depends on splitting a
photon budget ``N_T = p * n_bar`` into ``p`` measurements."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .bayes import sensitivity_experiment
from .sensitivity import crlb, fisher_analytic, shot_noise
from .states import InputSpec, TruncationError

SCAN_TAIL_TOLERANCE = 1e-8
MAX_N_BAR = 100.0
FIT_RESIDUAL_THRESHOLD = 0.1
DEFAULT_THETA = math.pi / 2


@dataclass(frozen=True)
class ScanPoint:
    p: int
    n_bar: float
    mean_delta_theta: float
    dispersion: float
    mean_photons: float = math.nan
    multimodal_trials: int = 0
    note: str = ""

    @property
    def feasible(self) -> bool:
        return not self.note


@dataclass(frozen=True)
class BudgetScan:
    total_budget: float
    points: tuple[ScanPoint, ...]
    tail_tolerance: float = SCAN_TAIL_TOLERANCE
    theta_true: float = DEFAULT_THETA

    def feasible_points(self) -> list[ScanPoint]:
        return [pt for pt in self.points if pt.feasible]


def point_seed(seed: int, total_budget: float, p: int) -> int:
    """Seed of the experiment at ``(budget, p)``, independent of the other
    scan points."""
    # budget enters in milli-photons so that non-integer budgets stay distinct
    ss = np.random.SeedSequence(seed, spawn_key=(int(round(total_budget * 1000)), p))
    return int(ss.generate_state(1, np.uint64)[0])


def scan_p(
    total_budget: float,
    p_values: Sequence[int],
    trials: int,
    seed: int,
    theta_true: float = DEFAULT_THETA,
    tail_tolerance: float = SCAN_TAIL_TOLERANCE,
    max_n_bar: float = MAX_N_BAR,
    grid_size: int = 4096,
) -> BudgetScan:
    """One Bayesian sensitivity experiment per ``p`` at fixed budget, each with
    the optimal split ``|alpha|^2 = sinh^2 r = n_bar / 2``.

    Points with ``n_bar > max_n_bar`` or whose truncation fails are kept in
    the scan with a ``note`` and NaN results.
    """
    if total_budget <= 0:
        raise ValueError("total budget must be positive")
    points = []
    for p in sorted(set(int(p) for p in p_values)):
        if p < 1:
            raise ValueError(f"p must be >= 1, got {p}")
        n_bar = total_budget / p
        if n_bar > max_n_bar:
            points.append(ScanPoint(p, n_bar, math.nan, math.nan, note=f"n_bar={n_bar:.4g} above ceiling {max_n_bar:g}"))
            continue
        spec = InputSpec.optimal_split(n_bar, tail_tolerance=tail_tolerance)
        try:
            res = sensitivity_experiment(
                spec, theta_true, p, trials, point_seed(seed, total_budget, p), grid_size=grid_size
            )
        except TruncationError as exc:
            points.append(ScanPoint(p, n_bar, math.nan, math.nan, note=str(exc)))
            continue
        points.append(
            ScanPoint(p, n_bar, res.delta_theta, res.dispersion, res.mean_photons, res.multimodal_trials)
        )
    return BudgetScan(float(total_budget), tuple(points), tail_tolerance, theta_true)


class OptimalP(NamedTuple):
    p: int
    interior: bool  # False when the minimum sits on the first or last scanned p


def find_p_opt(scan: BudgetScan) -> OptimalP:
    """``p`` with the smallest mean sensitivity (smaller ``p`` wins ties)."""
    pts = scan.feasible_points()
    if len(pts) < 3:
        raise ValueError("need at least three feasible scan points")
    values = np.array([pt.mean_delta_theta for pt in pts])
    k = int(np.argmin(values))
    return OptimalP(pts[k].p, 0 < k < len(pts) - 1)


@dataclass(frozen=True)
class PrefactorFit:
    prefactor: float
    fit_residual: float  # rms of log(delta_theta * N_T) about log(prefactor)
    poor_fit: bool
    slope: float  # free log-log slope, for reference


def fit_prefactor(budgets: Sequence[float], deltas: Sequence[float],
                  threshold: float = FIT_RESIDUAL_THRESHOLD) -> PrefactorFit:
    """Least-squares fit of ``delta = c / N_T`` on log-log axes."""
    b = np.asarray(budgets, dtype=float)
    d = np.asarray(deltas, dtype=float)
    if b.size < 3:
        raise ValueError("need at least three budgets")
    resid_log = np.log(d) + np.log(b)
    log_c = float(resid_log.mean())
    rms = float(np.sqrt(np.mean((resid_log - log_c) ** 2)))
    slope = float(np.polyfit(np.log(b), np.log(d), 1)[0])
    return PrefactorFit(math.exp(log_c), rms, rms > threshold, slope)


@dataclass(frozen=True)
class HeisenbergFit:
    budgets: np.ndarray
    p_opt: int
    delta_theta: np.ndarray
    dispersion: np.ndarray
    fit: PrefactorFit
    crlb_overlay: np.ndarray = field(repr=False)  # 1/sqrt(p F) with F = |a|^2 e^{2r} + sinh^2 r
    caption_overlay: np.ndarray = field(repr=False)  # 1/sqrt(p (|a|^2 + sinh^2 r))
    shot_noise: np.ndarray = field(repr=False)

    @property
    def prefactor(self) -> float:
        return self.fit.prefactor

    @property
    def fit_residual(self) -> float:
        return self.fit.fit_residual


def model_curves(budgets: Sequence[float], p_opt: int):
    """The two candidate overlays and the shot-noise line at each budget."""
    crl, cap, sn = [], [], []
    for nt in budgets:
        spec = InputSpec.optimal_split(nt / p_opt)
        crl.append(1 / math.sqrt(p_opt * fisher_analytic(spec)))
        cap.append(1 / math.sqrt(p_opt * (spec.alpha2 + math.sinh(spec.r) ** 2)))
        sn.append(shot_noise(nt))
    return np.array(crl), np.array(cap), np.array(sn)


def heisenberg_fit(
    budgets: Sequence[float],
    p_opt: int,
    trials: int,
    seed: int,
    theta_true: float = DEFAULT_THETA,
    tail_tolerance: float = SCAN_TAIL_TOLERANCE,
    grid_size: int = 4096,
) -> HeisenbergFit:
    """Run experiments at ``p_opt`` for each budget and fit ``c / N_T``."""
    budgets = np.asarray(sorted(budgets), dtype=float)
    if budgets.size < 3:
        raise ValueError("need at least three budgets")
    deltas, disp = [], []
    for nt in budgets:
        spec = InputSpec.optimal_split(nt / p_opt, tail_tolerance=tail_tolerance)
        res = sensitivity_experiment(
            spec, theta_true, p_opt, trials, point_seed(seed, nt, p_opt), grid_size=grid_size
        )
        deltas.append(res.delta_theta)
        disp.append(res.dispersion)
    crl, cap, sn = model_curves(budgets, p_opt)
    return HeisenbergFit(
        budgets, p_opt, np.array(deltas), np.array(disp), fit_prefactor(budgets, deltas), crl, cap, sn
    )


def crlb_prefactor(total_budget: float, p: int) -> float:
    """``N_T * crlb`` for the optimal split; equals ``sqrt(p) n_bar / sqrt(F)``."""
    return total_budget * crlb(InputSpec.optimal_split(total_budget / p), p)
