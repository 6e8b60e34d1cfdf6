import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mzsim.outcome import moments, outcome_table
from mzsim.sensitivity import (
    ConvergenceError,
    caves_limit,
    crlb,
    error_propagation_sensitivity,
    fisher_analytic,
    fisher_information,
    fisher_one_port,
    fisher_report,
    quadrature_limit,
    shot_noise,
)
from mzsim.states import InputSpec


def spec(a2, r, **kw):
    return InputSpec.from_alpha2(a2, r, **kw)


def test_fisher_numeric_reference_point():
    s = spec(10, 1)
    expected = 10 * math.e**2 + math.sinh(1) ** 2  # 75.2717
    assert fisher_analytic(s) == pytest.approx(expected, rel=1e-15)
    assert fisher_information(s, math.pi / 2) == pytest.approx(expected, rel=1e-3)


def test_fisher_coherent_only_is_shot_noise():
    assert fisher_information(spec(7, 0), 1.0) == pytest.approx(7.0, rel=1e-3)


def test_fisher_theta_independent():
    s = spec(5, 0.8)
    vals = [fisher_information(s, th) for th in (0.2, 0.8, 1.6, 2.9)]
    assert max(vals) / min(vals) <= 1.005


def test_fisher_report_diagnostics():
    rep = fisher_report(spec(3, 0.5), 1.0)
    assert rep.converged and rep.floor_excluded_mass < 1e-25


def test_fisher_nonconvergence_raises():
    with pytest.raises(ConvergenceError):
        fisher_information(spec(3, 0.5), 1.0, h=0.5, rtol=1e-12)


def test_fisher_rejects_endpoints():
    for th in (0.0, math.pi):
        with pytest.raises(ValueError):
            fisher_information(spec(1, 0.1), th)


def test_fisher_analytic_examples():
    assert fisher_analytic(spec(0, 0)) == 0
    assert fisher_analytic(spec(10, 0)) == pytest.approx(10, rel=1e-15)
    for n_bar in (50.0, 500.0, 5000.0):
        f = fisher_analytic(InputSpec.optimal_split(n_bar))
        assert abs(f / n_bar**2 - 1) < 2 / math.sqrt(n_bar)


def test_crlb_examples():
    s = spec(10, 1)
    assert crlb(s, 100) == pytest.approx(1 / math.sqrt(100 * (10 * math.e**2 + math.sinh(1) ** 2)), rel=1e-15)
    assert crlb(s, 100) == pytest.approx(0.0115261, rel=1e-5)
    assert crlb(spec(6, 0), 9) == pytest.approx(1 / math.sqrt(54))
    big = InputSpec.optimal_split(2000.0)
    assert crlb(big, 4) * math.sqrt(4) * 2000 == pytest.approx(1.0, rel=0.05)
    with pytest.raises(ValueError):
        crlb(s, 0)


def test_crlb_literal_reference_value():
    # the reference figure 0.011542 equals 1/sqrt(100 (10 e^2 + sinh 1)),
    # i.e. sinh r in place of sinh^2 r; kept to document the discrepancy
    assert round(crlb(spec(10, 1), 100), 6) == 0.011542


@given(st.floats(0, 50), st.floats(0, 3), st.integers(1, 10**6))
def test_crlb_budget_law(a2, r, p):
    s = spec(a2, r)
    if fisher_analytic(s) == 0:
        return
    assert crlb(s, 4 * p) == pytest.approx(crlb(s, p) / 2, rel=1e-14)


def test_error_propagation_examples():
    assert error_propagation_sensitivity(spec(9, 0), math.pi / 2, 4) == pytest.approx(1 / (2 * 3), rel=1e-12)
    s = spec(1e4, 0.5)
    assert error_propagation_sensitivity(s, math.pi / 2, 1) == pytest.approx(
        math.exp(-0.5) / math.sqrt(s.n_bar), rel=1e-3)
    s = spec(0.01, 3.0)
    assert error_propagation_sensitivity(s, math.pi / 2, 1) == pytest.approx(1 / math.sqrt(s.n_bar), rel=0.05)


def test_error_propagation_divergence_is_a_value():
    r = math.asinh(math.sqrt(10))
    assert error_propagation_sensitivity(spec(10, r), math.pi / 2, 10) == math.inf
    assert math.isfinite(crlb(spec(10, r), 10))
    near = [error_propagation_sensitivity(spec(10, r + d), math.pi / 2, 1) for d in (1e-1, 1e-2, 1e-3)]
    assert near[0] < near[1] < near[2]


@pytest.mark.parametrize("a2,r,theta", [(6, 0.4, 1.0), (3, 0.9, 2.0), (2, 1.2, 0.7), (8, 0.2, 1.4)])
def test_error_propagation_matches_moments(a2, r, theta):
    s = spec(a2, r)
    m0 = moments(outcome_table(s, theta))
    h = 1e-5
    slope = (moments(outcome_table(s, theta + h)).mean_M - moments(outcome_table(s, theta - h)).mean_M) / (2 * h)
    numeric = math.sqrt(m0.var_M) / abs(slope)
    assert error_propagation_sensitivity(s, theta, 1) == pytest.approx(numeric, rel=1e-2)


def test_caves_and_quadrature():
    assert caves_limit(spec(9, 0), 1) == pytest.approx(shot_noise(9))
    assert caves_limit(spec(100, 1), 1) == pytest.approx(math.exp(-1) / 10, rel=1e-12)
    s = spec(40, 1.3)
    assert quadrature_limit(s, 7) == caves_limit(s, 7)
    assert quadrature_limit(s, 28) == pytest.approx(quadrature_limit(s, 7) / 2, rel=1e-15)
    s = spec(1e4, math.asinh(math.sqrt(5)))  # sinh^2 r / |alpha|^2 = 5e-4
    assert caves_limit(s, 1) == pytest.approx(error_propagation_sensitivity(s, math.pi / 2, 1), rel=1e-2)


def test_large_r_asymptote():
    # crlb sqrt(n_bar p) -> 1/sqrt(4 |alpha|^2 + 1) as r grows
    for r, tol in ((4.0, 0.01), (6.0, 1e-3), (10.0, 1e-6)):
        s = spec(10, r)
        scaled = crlb(s, 5) * math.sqrt(5 * s.n_bar)
        assert scaled == pytest.approx(1 / math.sqrt(41), rel=tol)


@pytest.mark.parametrize("theta", [0.2, 0.8, math.pi / 2, 2.9])
def test_one_port_data_processing(theta):
    s = InputSpec.optimal_split(4.0)
    full = fisher_information(s, theta)
    for port in ("c", "d"):
        assert fisher_one_port(s, theta, port) <= full * (1 + 1e-9)


def test_one_port_working_point():
    s = InputSpec.optimal_split(4.0)
    assert fisher_one_port(s, 0.2, "d") > fisher_one_port(s, math.pi / 2, "d")
    assert fisher_one_port(s, math.pi - 0.2, "c") > fisher_one_port(s, math.pi / 2, "c")


@pytest.mark.parametrize("theta", [0.4, 1.3, 2.6])
def test_one_port_poisson_closed_form(theta):
    n = 6.0
    s = spec(n, 0)
    # Poisson(n cos^2) on c and Poisson(n sin^2) on d
    assert fisher_one_port(s, theta, "c") == pytest.approx(n * math.sin(theta / 2) ** 2, rel=1e-4)
    assert fisher_one_port(s, theta, "d") == pytest.approx(n * math.cos(theta / 2) ** 2, rel=1e-4)
