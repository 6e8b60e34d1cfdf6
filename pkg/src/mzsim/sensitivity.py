"""Phase-sensitivity bounds: Fisher information, Cramer-Rao bound and the
moment-based baselines it is compared against."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .outcome import _marginal, _outcome_labels, probabilities_at, sector_plan
from .states import InputSpec

FD_STEP = 1e-4
RICHARDSON_RTOL = 1e-4
PROBABILITY_FLOOR = 1e-30


class ConvergenceError(ArithmeticError):
    """Finite-difference Fisher information did not settle between h and h/2."""


@dataclass(frozen=True)
class FisherReport:
    value: float  # Richardson-extrapolated estimate
    value_h: float
    value_half_h: float
    floor_excluded_mass: float  # probability mass of outcomes under the floor
    converged: bool


def _fisher_from(probs_at, theta: float, h: float, floor: float, rtol: float) -> FisherReport:
    p0 = probs_at(theta)
    d_h = (probs_at(theta + h) - probs_at(theta - h)) / (2 * h)
    d_h2 = (probs_at(theta + h / 2) - probs_at(theta - h / 2)) / h
    d_rich = (4 * d_h2 - d_h) / 3
    keep = p0 >= floor
    p = p0[keep]
    f_h = float(np.sum(d_h[keep] ** 2 / p))
    f_h2 = float(np.sum(d_h2[keep] ** 2 / p))
    f = float(np.sum(d_rich[keep] ** 2 / p))
    scale = max(abs(f), 1e-300)
    converged = abs(f_h - f_h2) <= rtol * scale or f == 0
    return FisherReport(f, f_h, f_h2, float(p0[~keep].sum()), converged)


def fisher_report(
    spec: InputSpec,
    theta: float,
    h: float = FD_STEP,
    floor: float = PROBABILITY_FLOOR,
    rtol: float = RICHARDSON_RTOL,
) -> FisherReport:
    """Numeric Fisher information of the two-port photon-counting statistics.

    ``dP/dtheta`` is a central difference at steps ``h`` and ``h/2``; the
    reported value uses their Richardson combination.  Outcomes with
    ``P < floor`` are left out of the sum.
    """
    _check_open(theta)
    return _fisher_from(lambda t: probabilities_at(spec, t), theta, h, floor, rtol)


def fisher_information(spec: InputSpec, theta: float, **kwargs) -> float:
    rep = fisher_report(spec, theta, **kwargs)
    if not rep.converged:
        raise ConvergenceError(
            f"Fisher information at theta={theta}: F(h)={rep.value_h:.8g} and "
            f"F(h/2)={rep.value_half_h:.8g} disagree"
        )
    return rep.value


def fisher_one_port(
    spec: InputSpec,
    theta: float,
    port: str,
    h: float = FD_STEP,
    floor: float = PROBABILITY_FLOOR,
    rtol: float = RICHARDSON_RTOL,
) -> float:
    """Fisher information when only output ``port`` is counted."""
    _check_open(theta)
    plan = sector_plan(spec)
    n_c, n_d = _outcome_labels(plan)
    size = int((n_c if port == "c" else n_d).max(initial=0)) + 1

    def marginal_at(t):
        m = _marginal(n_c, n_d, probabilities_at(spec, t), port)
        return np.pad(m, (0, size - m.size))

    rep = _fisher_from(marginal_at, theta, h, floor, rtol)
    if not rep.converged:
        raise ConvergenceError(f"one-port Fisher information at theta={theta} did not converge")
    return rep.value


def _check_open(theta: float) -> None:
    if not 0.0 < theta < math.pi:
        raise ValueError(f"theta must lie in (0, pi), got {theta}")


def _check_p(p: int) -> None:
    if p < 1:
        raise ValueError(f"number of measurements must be >= 1, got {p}")


def fisher_analytic(spec: InputSpec) -> float:
    """``|alpha|^2 e^{2r} + sinh^2 r``."""
    return spec.alpha2 * math.exp(2 * spec.r) + math.sinh(spec.r) ** 2


def crlb(spec: InputSpec, p: int) -> float:
    """Cramer-Rao bound ``1 / sqrt(p F)`` with the analytic Fisher information."""
    _check_p(p)
    f = fisher_analytic(spec)
    return math.inf if f == 0 else 1.0 / math.sqrt(p * f)


def shot_noise(n_bar: float, p: int = 1) -> float:
    return math.inf if n_bar == 0 else 1.0 / math.sqrt(p * n_bar)


def error_propagation_sensitivity(spec: InputSpec, theta: float, p: int) -> float:
    """Sensitivity of the estimator built on the mean of ``N_c - N_d`` alone.

    Returns ``math.inf`` when ``|alpha|^2 = sinh^2 r`` (the mean carries no
    phase information) and at the fringe extrema ``theta = 0, pi``.
    """
    _check_p(p)
    a2 = spec.alpha2
    s2 = math.sinh(spec.r) ** 2
    c2 = math.cosh(spec.r) ** 2
    gap2 = (a2 - s2) ** 2
    if gap2 <= (1e-12 * max(a2, s2, 1.0)) ** 2:
        return math.inf
    tan2 = math.tan(theta) ** 2
    if tan2 == 0:
        return math.inf
    first = (a2 * math.exp(-2 * spec.r) + s2) / gap2
    second = (a2 + 2 * s2 * c2) / (gap2 * tan2)
    return math.sqrt(first + second) / math.sqrt(p)


def caves_limit(spec: InputSpec, p: int) -> float:
    """``e^{-r} / sqrt(p |alpha|^2)`` (dark fringe, coherent light dominant)."""
    _check_p(p)
    if spec.alpha2 == 0:
        return math.inf
    return math.exp(-spec.r) / math.sqrt(p * spec.alpha2)


def squeezed_quadrature_std(r: float) -> float:
    """Spread of the squeezed quadrature in units of the vacuum spread."""
    return math.exp(-r)


def quadrature_limit(spec: InputSpec, p: int) -> float:
    """Quadrature-noise reading of the Caves limit; equal to :func:`caves_limit`."""
    _check_p(p)
    if spec.alpha2 == 0:
        return math.inf
    return squeezed_quadrature_std(spec.r) / math.sqrt(p * spec.alpha2)
