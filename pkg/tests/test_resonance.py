import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from gamowkit import (
    CoverageError,
    EnergyGrid,
    FitFailureError,
    InvalidInputError,
    NotAnObservableError,
    PoleEvaluationError,
    RankDeficiencyError,
    ResonancePole,
    SampledWaveFunction,
    SemigroupDomainError,
    bw_amplitude,
    fit_breit_wigner,
    gamow_evolution_factor,
    gamow_pairing,
    gamow_wavefunction,
    hardy_residual,
    lifetime,
    lifetime_quadrature,
    lineshape,
    survival_probability,
)
from gamowkit.hardy import l2_norm
from gamowkit.resonance import PAIRING_CONVENTION

poles = st.builds(
    ResonancePole,
    e_r=st.floats(-50, 50),
    gamma=st.floats(0.01, 20),
    residue=st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False, allow_infinity=False),
)


def test_pole_validation():
    with pytest.raises(InvalidInputError):
        ResonancePole(1.0, 0.0)
    with pytest.raises(InvalidInputError):
        ResonancePole(1.0, -1.0)
    assert ResonancePole(2, 1).z == 2 - 0.5j


def test_pole_dict_round_trip():
    p = ResonancePole(1.5, 0.25, 2 - 1j)
    assert ResonancePole.from_dict(p.to_dict()) == p
    with pytest.raises(InvalidInputError):
        ResonancePole.from_dict({"e_r": 1})


def test_amplitude_examples():
    p = ResonancePole(2, 1, 1)
    assert bw_amplitude(p, 2) == pytest.approx(-2j)
    assert bw_amplitude(ResonancePole(2, 1, 0), 7.3) == 0
    assert abs(bw_amplitude(p, 2.5)) ** 2 == pytest.approx(2.0)  # |r|^2 / (Gamma^2 / 2)
    with pytest.raises(PoleEvaluationError):
        bw_amplitude(p, p.z)


@settings(max_examples=50, deadline=None)
@given(pole=poles, e=st.floats(-100, 100))
def test_lineshape_is_amplitude_squared(pole, e):
    assert lineshape(pole, e) == pytest.approx(abs(bw_amplitude(pole, e)) ** 2, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(pole=poles)
def test_fwhm_identity(pole):
    peak = lineshape(pole, pole.e_r)
    assert peak == pytest.approx(abs(pole.residue) ** 2 / (pole.gamma / 2) ** 2, rel=1e-12)
    assert lineshape(pole, pole.e_r + pole.gamma / 2) == pytest.approx(peak / 2, rel=1e-12)
    assert lineshape(pole, pole.e_r - pole.gamma / 2) == pytest.approx(peak / 2, rel=1e-12)


def test_lineshape_monotone_tails():
    p = ResonancePole(1, 2, 1.5)
    right = lineshape(p, np.linspace(2, 100, 500))
    assert np.all(np.diff(right) < 0)
    left = lineshape(p, np.linspace(-100, 0, 500))
    assert np.all(np.diff(left) > 0)


# --------------------------------------------------------------------------
# Gamow states


def test_gamow_normalization_closed_form():
    grid = EnergyGrid(-200, 200, 2**14)
    state = gamow_wavefunction(ResonancePole(0, 2, 1), grid)
    assert abs(state.normalization) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-15)
    # the sampled window holds all but the 1/E^2 tails: 1 - (2/pi) * (Gamma/2) / E_max
    assert l2_norm(state.wavefunction) ** 2 == pytest.approx(1 - 2 / (math.pi * 200), rel=1e-4)
    values = state.normalization * 1 / (grid.points - state.pole.z)
    np.testing.assert_allclose(state.wavefunction.values, values, rtol=1e-12)


def test_gamow_state_is_upper_hardy():
    grid = EnergyGrid(-200, 200, 2**14)
    state = gamow_wavefunction(ResonancePole(2, 1, 1), grid)
    assert hardy_residual(state.wavefunction, "upper", 1e-6).passes
    assert not hardy_residual(state.wavefunction, "lower", 1e-6).passes


def test_gamow_residue_scale_invariance():
    grid = EnergyGrid(-200, 200, 2**12)
    a = gamow_wavefunction(ResonancePole(1, 1, 1 + 1j), grid).wavefunction.values
    b = gamow_wavefunction(ResonancePole(1, 1, 2 + 2j), grid).wavefunction.values
    np.testing.assert_allclose(a, b, rtol=1e-13)


def test_gamow_coverage_error():
    with pytest.raises(CoverageError, match="required width"):
        gamow_wavefunction(ResonancePole(0, 20), EnergyGrid(-200, 200, 1024))


def test_evolution_examples():
    p = ResonancePole(2, 1)
    assert gamow_evolution_factor(p, 0) == 1
    assert abs(gamow_evolution_factor(p, 2)) ** 2 == pytest.approx(math.exp(-2), rel=1e-14)
    with pytest.raises(SemigroupDomainError):
        gamow_evolution_factor(p, -1)
    with pytest.raises(SemigroupDomainError):
        survival_probability(p, -1e-3)


def test_survival_examples():
    p = ResonancePole(0, 1)
    assert survival_probability(p, 0) == 1
    assert survival_probability(p, math.log(2)) == pytest.approx(0.5, rel=1e-15)


@settings(max_examples=50, deadline=None)
@given(pole=poles, t1=st.floats(0, 20), t2=st.floats(0, 20))
def test_evolution_semigroup_law(pole, t1, t2):
    f = gamow_evolution_factor
    assert f(pole, t1) * f(pole, t2) == pytest.approx(f(pole, t1 + t2), rel=1e-12, abs=1e-300)
    s = survival_probability
    assert s(pole, t1) * s(pole, t2) == pytest.approx(s(pole, t1 + t2), rel=1e-12, abs=1e-300)
    assert abs(f(pole, t1)) ** 2 == pytest.approx(s(pole, t1), rel=1e-12, abs=1e-300)


def test_modulus_strictly_decreasing():
    p = ResonancePole(3, 0.5)
    mod = [abs(gamow_evolution_factor(p, t)) for t in np.linspace(0, 20, 50)]
    assert np.all(np.diff(mod) < 0)


def test_lifetime():
    assert lifetime(ResonancePole(0, 1)) == 1
    assert lifetime(ResonancePole(0, 2)) == 0.5
    for g in (0.03, 1.0, 7.0):
        assert lifetime_quadrature(ResonancePole(0, g)) == pytest.approx(1 / g, rel=1e-9)


# --------------------------------------------------------------------------
# pairing


def _observable(grid, func):
    # psi with conj(psi) = func
    return SampledWaveFunction.from_function(lambda e: np.conj(func(e)), grid)


def test_pairing_closed_form(grid):
    psi = _observable(grid, lambda e: 1 / (e - 1j))
    value = gamow_pairing(psi, ResonancePole(2, 1))
    assert value == pytest.approx(0.32 + 0.24j, rel=1e-6)
    assert gamow_pairing(psi.scaled(3.0), ResonancePole(2, 1)) == pytest.approx(3 * value, rel=1e-9)
    assert "unit" in PAIRING_CONVENTION


def test_pairing_rejects_non_observable(gaussian):
    with pytest.raises(NotAnObservableError):
        gamow_pairing(gaussian, ResonancePole(2, 1))


# --------------------------------------------------------------------------
# fitting


def _synthetic(n=201, lo=1.0, hi=9.0):
    e = np.linspace(lo, hi, n)
    return e, lineshape(ResonancePole(5, 0.8, 1), e)


def test_fit_noiseless_recovery():
    e, y = _synthetic()
    fit = fit_breit_wigner(e, y)
    assert fit.pole.e_r == pytest.approx(5, abs=1e-6)
    assert fit.pole.gamma == pytest.approx(0.8, abs=1e-6)
    assert fit.params["r2"] == pytest.approx(1, abs=1e-6)
    assert fit.iterations <= 200
    assert fit.covariance.shape == (3, 3)


def test_fit_fwhm_matches_root_finding():
    e, y = _synthetic()
    fit = fit_breit_wigner(e, y)
    half = lineshape(fit.pole, fit.pole.e_r) / 2
    f = lambda x: lineshape(fit.pole, x) - half  # noqa: E731
    left = optimize.brentq(f, 1, fit.pole.e_r, xtol=1e-15)
    right = optimize.brentq(f, fit.pole.e_r, 9, xtol=1e-15)
    assert right - left == pytest.approx(0.8, abs=1e-9)


def test_fit_with_background_and_sigma():
    rng = np.random.default_rng(11)
    e = np.linspace(0, 10, 801)
    y0 = lineshape(ResonancePole(4, 1.5, 2), e) + 0.3
    sigma = 0.01 * np.ones_like(e)
    y = y0 + sigma * rng.normal(size=e.size)
    fit = fit_breit_wigner(e, y, sigma, background=True)
    err = fit.stderr
    assert abs(fit.pole.e_r - 4) < 4 * err["e_r"]
    assert abs(fit.pole.gamma - 1.5) < 4 * err["gamma"]
    assert abs(fit.background - 0.3) < 4 * err["background"]
    assert fit.absolute_sigma


def test_fit_unsorted_input_same_result():
    e, y = _synthetic()
    perm = np.random.default_rng(0).permutation(e.size)
    a = fit_breit_wigner(e, y)
    b = fit_breit_wigner(e[perm], y[perm])
    assert a.pole.e_r == pytest.approx(b.pole.e_r, abs=1e-12)


def test_fit_errors():
    e = np.linspace(0, 1, 20)
    with pytest.raises(RankDeficiencyError):
        fit_breit_wigner(e, np.ones_like(e))
    with pytest.raises(InvalidInputError):
        fit_breit_wigner(e[:4], np.ones(4))
    with pytest.raises(InvalidInputError):
        fit_breit_wigner(np.zeros(10), np.arange(10.0))
    with pytest.raises(InvalidInputError):
        fit_breit_wigner(e, -np.ones_like(e))
    ee, y = _synthetic()
    with pytest.raises(FitFailureError) as info:
        fit_breit_wigner(ee, y + 0.01 * np.sin(40 * ee) ** 2, max_iter=1)
    assert info.value.trace
