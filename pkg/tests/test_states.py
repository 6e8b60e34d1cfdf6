import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import poisson

from mzsim.states import (
    CoherentParams,
    InputSpec,
    SqueezeParams,
    TruncationError,
    TruncationPolicy,
    choose_cutoff,
    coherent_amplitudes,
    input_amplitudes,
    sector_amplitudes,
    squeezed_vacuum_amplitudes,
)
from oracles import coherent_column, squeezed_column


def test_parameter_validation():
    with pytest.raises(ValueError):
        CoherentParams(-1.0)
    with pytest.raises(ValueError):
        SqueezeParams(math.nan)
    with pytest.raises(ValueError):
        TruncationPolicy(tail_tolerance=0.0)
    with pytest.raises(ValueError):
        TruncationPolicy(hard_cap=0)
    assert CoherentParams(1.0, 2 * math.pi + 0.5).phase == pytest.approx(0.5)


def test_vacuum_amplitudes():
    for vec in (coherent_amplitudes(CoherentParams(0.0)), squeezed_vacuum_amplitudes(SqueezeParams(0.0))):
        assert vec.to_complex().tolist() == [1.0]
        assert vec.tail_mass == 0.0


def test_coherent_vacuum_entry():
    vec = coherent_amplitudes(CoherentParams(1.0))
    assert vec.to_complex()[0].real == pytest.approx(0.606531, abs=1e-6)
    assert vec.to_complex()[0] == pytest.approx(math.exp(-0.5), abs=1e-15)


def test_coherent_poisson_masses():
    vec = coherent_amplitudes(CoherentParams(math.sqrt(10.0)))
    m = np.arange(vec.n_max + 1)
    assert np.abs(vec.probabilities() - poisson.pmf(m, 10.0)).max() <= 1e-12


def test_squeezed_second_entry():
    vec = squeezed_vacuum_amplitudes(SqueezeParams(1.0))
    # (2k)! tanh^{2k} r / (2^{2k} (k!)^2 cosh r) at k = 1
    expected = 2 * math.tanh(1.0) ** 2 / (4 * math.cosh(1.0))
    assert vec.probabilities()[2] == pytest.approx(expected, rel=1e-13)
    # the quoted reference 0.18797 is rounded; the closed form gives 0.187944
    assert vec.probabilities()[2] == pytest.approx(0.18797, rel=2e-4)


@given(st.floats(0.0, 2.5), st.floats(0, 2 * math.pi))
def test_squeezed_odd_entries_exactly_zero(r, phase):
    amps = squeezed_vacuum_amplitudes(SqueezeParams(r, phase)).to_complex()
    assert np.all(amps[1::2] == 0)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 30.0), st.floats(0.0, 2.0), st.sampled_from([1e-4, 1e-8, 1e-10]))
def test_normalisation_with_tail(alpha2, r, tol):
    pol = TruncationPolicy(tol)
    for vec in (coherent_amplitudes(CoherentParams(math.sqrt(alpha2)), pol),
                squeezed_vacuum_amplitudes(SqueezeParams(r), pol)):
        assert abs(vec.probabilities().sum() + vec.tail_mass - 1) <= 1e-12
        assert vec.tail_mass <= tol


def test_amplitudes_match_independent_formulas():
    spec = InputSpec.from_alpha2(3.0, 0.8, theta_c=0.4, theta_s=2.0)
    ca, cb = input_amplitudes(spec)
    assert np.abs(ca - coherent_column(3.0, 0.4, len(ca) - 1)).max() <= 1e-14
    assert np.abs(cb - squeezed_column(0.8, 2.0, len(cb) - 1)).max() <= 1e-14


@given(st.floats(0.1, 3.0), st.floats(-3.0, 3.0))
def test_phase_covariance(mag, delta):
    base = coherent_amplitudes(CoherentParams(mag, 0.3))
    moved = coherent_amplitudes(CoherentParams(mag, 0.3 + delta))
    m = np.arange(base.n_max + 1)
    assert np.allclose(np.abs(moved.to_complex()), np.abs(base.to_complex()), atol=1e-15)
    ratio = moved.to_complex() / base.to_complex()
    assert np.allclose(ratio, np.exp(1j * m * delta), atol=1e-9)


def test_cutoff_examples():
    assert (choose_cutoff(InputSpec.from_alpha2(0, 0)).n_max_a, choose_cutoff(InputSpec.from_alpha2(0, 0)).n_max_b) == (0, 0)
    cut = choose_cutoff(InputSpec.from_alpha2(10, 0))
    assert poisson.sf(cut.n_max_a, 10) < 1e-10
    assert poisson.sf(cut.n_max_a - 1, 10) >= 1e-10 * 0.999
    cut = choose_cutoff(InputSpec.from_alpha2(0, 1.0))
    assert cut.n_max_b % 2 == 0 and not cut.capped
    p = np.array([abs(x) ** 2 for x in squeezed_column(1.0, 0.0, 4 * cut.n_max_b)])
    assert p[cut.n_max_b + 1:].sum() <= 1e-10


def test_hard_cap_is_reported():
    spec = InputSpec.from_alpha2(50.0, 0.0, hard_cap=40)
    assert choose_cutoff(spec).capped
    with pytest.raises(TruncationError, match="hard_cap=40"):
        input_amplitudes(spec)


def test_sector_vacuum_and_product_oracle():
    spec = InputSpec.from_alpha2(1.0, 0.5)
    assert sector_amplitudes(spec, 0).amplitudes.tolist() == [1.0]
    ca, cb = coherent_column(1.0, 0, 4), squeezed_column(0.5, 0, 4)
    for n in (2, 4):
        raw = np.array([ca[n - i] * cb[i] for i in range(n + 1)])
        w = np.sum(np.abs(raw) ** 2)
        sec = sector_amplitudes(spec, n)
        assert np.abs(sec.amplitudes - raw / math.sqrt(w)).max() <= 1e-14
        assert sec.weight == pytest.approx(w, rel=1e-13)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 60), st.floats(0.0, 20.0), st.floats(0.0, 2.0))
def test_sector_parity_and_norm(n, alpha2, r):
    spec = InputSpec.from_alpha2(alpha2, r)
    try:
        sec = sector_amplitudes(spec, n)
    except ValueError:
        assert alpha2 == 0 and (n % 2 == 1 or r == 0)
        return
    assert abs(np.sum(np.abs(sec.amplitudes) ** 2) - 1) <= 1e-12
    assert np.all(sec.amplitudes[1::2] == 0)  # odd occupation of the squeezed mode


def test_sector_rejects_zero_weight():
    with pytest.raises(ValueError):
        sector_amplitudes(InputSpec.from_alpha2(0.0, 0.7), 3)


def test_sector_weights_sum_to_kept_mass():
    spec = InputSpec.from_alpha2(2.0, 0.6)
    ca, cb = input_amplitudes(spec)
    total = sum(sector_amplitudes(spec, n).weight for n in range(len(ca) + len(cb) - 1))
    kept = np.sum(np.abs(ca) ** 2) * np.sum(np.abs(cb) ** 2)
    # weights of sectors above the truncation use untruncated amplitudes, so
    # compare against the full mass and the per-mode tails
    cut = choose_cutoff(spec)
    assert kept == pytest.approx((1 - cut.tail_a) * (1 - cut.tail_b), abs=1e-15)
    assert total <= 1 + 1e-12 and total >= kept - 1e-12


def test_optimal_split():
    spec = InputSpec.optimal_split(20.0)
    assert spec.alpha2 == pytest.approx(10.0)
    assert math.sinh(spec.r) ** 2 == pytest.approx(10.0)
    assert spec.n_bar == pytest.approx(20.0)
