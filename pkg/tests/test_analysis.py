import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptconserve import analysis, dynamics, linalg
from ptconserve.dynamics import ObservableSeries
from ptconserve.errors import (
    AmbiguousNearEP,
    NonPositiveData,
    NotPeriodic,
    NotSettled,
    TooFewOscillations,
)
from ptconserve.model import build_hpt, canonical_state


def series(t, y, label="y"):
    return ObservableSeries(np.asarray(t, float), np.asarray(y, float), label)


# -- classification ----------------------------------------------------------

def test_classify_examples():
    d = analysis.classify_phase(build_hpt(4, 1.0, 0.2))
    assert d.phase == "pt_symmetric" and d.ep_order == 1
    assert d.gap == pytest.approx(math.sqrt(0.96))

    d = analysis.classify_phase(build_hpt(4, 1.0, 1.0))
    assert d.phase == "exceptional_point" and d.ep_order == 4

    d = analysis.classify_phase(build_hpt(4, 1.0, 1.2))
    assert d.phase == "pt_broken" and d.ep_order == 1
    assert d.max_imag == pytest.approx(1.5 * math.sqrt(0.44), abs=1e-12)
    assert d.max_imag == pytest.approx(0.9950, abs=5e-5)

    assert analysis.classify_phase(build_hpt(4, 1.0, 0.0)).phase == "hermitian"


@pytest.mark.parametrize("tol", [1e-3, 1e-2])
def test_classify_threshold_at_stated_margin(tol):
    # pt_symmetric below J(1 - 10 tol), pt_broken above J(1 + 10 tol)
    for gamma in np.linspace(0.0, 1 - 10 * tol, 40, endpoint=False):
        assert analysis.classify_phase(build_hpt(4, 1.0, gamma), tol).phase in ("pt_symmetric", "hermitian")
    for gamma in np.linspace(1 + 10 * tol, 3.0, 40)[1:]:
        assert analysis.classify_phase(build_hpt(4, 1.0, gamma), tol).phase == "pt_broken"


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 3.0).filter(lambda g: abs(g - 1.0) >= 1e-3), st.floats(0.5, 4.0))
def test_classify_default_tolerance_away_from_threshold(ratio, J):
    diag = analysis.classify_phase(build_hpt(4, J, ratio * J))
    if ratio < 1:
        assert diag.phase in ("pt_symmetric", "hermitian")
    else:
        assert diag.phase == "pt_broken"
        assert diag.max_imag > 0
    assert diag.ep_order == 1


def test_classify_refuses_ambiguous_spacing():
    with pytest.raises(AmbiguousNearEP):
        analysis.classify_phase(build_hpt(4, 1.0, 0.99999), 1e-3)
    with pytest.raises(ValueError):
        analysis.classify_phase(build_hpt(4), -1.0)


@pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
def test_ep_order_equals_chain_length(d):
    m = build_hpt(d, 1.0, 1.0)
    diag = analysis.classify_phase(m)
    assert diag.phase == "exceptional_point"
    assert diag.ep_order == d
    n = linalg.opnorm(m.H)
    assert linalg.opnorm(np.linalg.matrix_power(m.H, d)) <= 1e-10 * n**d
    assert linalg.opnorm(np.linalg.matrix_power(m.H, d - 1)) > 1e-3 * n ** (d - 1)


def test_jordan_order_rejects_non_eigenvalue():
    H = build_hpt(4, 1.0, 1.0).H
    assert analysis.jordan_order(H, 0.0, 4) == 4
    assert analysis.jordan_order(H, 0.7, 1) is None


# -- period ----------------------------------------------------------------------

def test_period_closed_form():
    assert analysis.period_closed_form(1.0, 0.0) == pytest.approx(2 * math.pi)
    assert analysis.period_closed_form(1.0, 0.2) == pytest.approx(6.4127, abs=5e-5)
    with pytest.raises(NotPeriodic):
        analysis.period_closed_form(1.0, 1.0)


def test_fit_period_cosine():
    t = np.linspace(0, 20, 400)
    fit = analysis.fit_period(series(t, np.cos(2 * t)))
    assert fit.kind == "period"
    assert fit.value == pytest.approx(math.pi, rel=1e-4)
    assert fit.residual < 1e-3


@pytest.mark.parametrize("state", ["psi1", "psi2", "psi3", "psi4"])
def test_fit_period_of_norm(state):
    m = build_hpt(4, 1.0, 0.2)
    traj = dynamics.evolve(m, canonical_state(state, m), dynamics.time_grid(40.0))
    fit = analysis.fit_period(dynamics.norm_series(traj))
    assert fit.value == pytest.approx(analysis.period_closed_form(1.0, 0.2), rel=5e-3)


def test_fit_period_needs_oscillations():
    t = np.linspace(0, 1, 50)
    with pytest.raises(TooFewOscillations):
        analysis.fit_period(series(t, np.ones_like(t)))
    with pytest.raises(TooFewOscillations):
        analysis.fit_period(series(t, np.cos(2 * t)))


def test_fit_window_must_lie_in_data():
    t = np.linspace(0, 10, 100)
    with pytest.raises(ValueError):
        analysis.fit_period(series(t, np.cos(t)), window=(5, 20))


# -- growth -----------------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(st.floats(-3.0, 8.0), st.floats(0.1, 100.0))
def test_power_law_recovery(p, c):
    t = np.linspace(1, 200, 300)
    fit = analysis.fit_growth(series(t, c * t**p), "power_law", (20, 200))
    assert fit.value == pytest.approx(p, abs=1e-3)
    assert fit.residual < 1e-8


@settings(max_examples=50, deadline=None)
@given(st.floats(-2.0, 3.0), st.floats(0.1, 100.0))
def test_exponential_recovery(r, c):
    t = np.linspace(0, 8, 300)
    fit = analysis.fit_growth(series(t, c * np.exp(r * t)), "exponential")
    assert fit.window == pytest.approx((5.0, 8.0), abs=0.03)
    assert fit.value == pytest.approx(r, abs=1e-3)


def test_constant_series_has_zero_growth():
    t = np.linspace(1, 200, 300)
    s = series(t, np.full_like(t, 3.0))
    assert analysis.fit_growth(s, "power_law").value == pytest.approx(0, abs=1e-12)
    assert analysis.fit_growth(s, "exponential", (5, 8)).value == pytest.approx(0, abs=1e-12)


def test_growth_needs_positive_data():
    t = np.linspace(0, 10, 50)
    with pytest.raises(NonPositiveData):
        analysis.fit_growth(series(t, np.cos(t)), "exponential", (0, 10))
    with pytest.raises(NonPositiveData):
        analysis.fit_growth(series(t, np.ones_like(t)), "power_law", (0, 10))
    with pytest.raises(ValueError):
        analysis.fit_growth(series(t, np.ones_like(t)), "linear", (1, 10))


def test_ep_growth_fit_matches_exact_norm():
    # N(t) = (t^2 + 2t + 2)^3 / 8 for psi1 at gamma = J; the least-squares
    # slope over [20, 200] is a property of that function, not of the solver
    t = dynamics.time_grid(200.0)
    exact = analysis.fit_growth(series(t, (t**2 + 2 * t + 2) ** 3 / 8), "power_law")
    m = build_hpt(4, 1.0, 1.0)
    traj = dynamics.evolve(m, canonical_state("psi1", m), t, max_norm=None)
    fit = analysis.fit_growth(dynamics.norm_series(traj), "power_law")
    assert fit.value == pytest.approx(exact.value, abs=1e-9)
    # asymptotically 6, but the finite window sees 5.909
    assert exact.value == pytest.approx(5.909, abs=1e-3)


def test_broken_rate_is_twice_max_imag():
    m = build_hpt(4, 1.0, 1.2)
    traj = dynamics.evolve(m, canonical_state("psi1", m), dynamics.time_grid(40.0), max_norm=None)
    fit = analysis.fit_growth(dynamics.norm_series(traj), "exponential", (30, 40))
    # far past the transient the subdominant modes are gone
    assert fit.value == pytest.approx(2 * analysis.classify_phase(m).max_imag, rel=1e-4)


# -- steady state -------------------------------------------------------------------

def test_steady_state_of_constant():
    t = np.linspace(2, 10, 50)
    assert analysis.steady_state(series(t, np.full_like(t, 0.4)), 1e-6) == (2.0, pytest.approx(0.4))


def test_steady_state_of_relaxation():
    t = np.linspace(0, 20, 2001)
    t_star, value = analysis.steady_state(series(t, 1 + np.exp(-t)), 1e-3)
    # |exp(-t) - exp(-20)| <= 1e-3 from t = ln(1000)
    assert t_star == pytest.approx(math.log(1000), abs=0.02)
    assert value == pytest.approx(1.0, abs=1e-6)


def test_steady_state_ignores_masked_samples():
    t = np.linspace(0, 10, 101)
    y = np.where(t < 1, np.nan, 2.0)
    s = ObservableSeries(t, y, "y", np.isnan(y))
    assert analysis.steady_state(s, 1e-9)[0] == pytest.approx(1.0)


def test_oscillation_never_settles():
    t = np.linspace(0, 20, 400)
    with pytest.raises(NotSettled):
        analysis.steady_state(series(t, np.cos(t)), 0.1)
    with pytest.raises(ValueError):
        analysis.steady_state(series(t, np.cos(t)), 0.0)


def test_broken_growth_fit_matches_exact_norm():
    # the generator is collective, so N = n^3 with n the norm of a single
    # spin-1/2 started up: n = (cosh(kt/2) + g/k sinh(kt/2))^2 + sinh(kt/2)^2 / k^2
    g = 1.2
    k = math.sqrt(g**2 - 1)
    t = dynamics.time_grid(8.0)
    n = (np.cosh(k * t / 2) + g / k * np.sinh(k * t / 2)) ** 2 + np.sinh(k * t / 2) ** 2 / k**2
    m = build_hpt(4, 1.0, g)
    N = dynamics.norm_series(dynamics.evolve(m, canonical_state("psi1", m), t))
    assert np.allclose(N.values, n**3, rtol=1e-12, atol=0)
    exact = analysis.fit_growth(series(t, n**3), "exponential")
    assert analysis.fit_growth(N, "exponential").value == pytest.approx(exact.value, abs=1e-9)
    # the decaying modes still bias the [5, 8] window by about 1.3%
    assert exact.value / (3 * k) - 1 == pytest.approx(0.0132, abs=2e-4)


def test_phase_locking_converges_at_gap_rate():
    g = 1.2
    k = math.sqrt(g**2 - 1)
    m = build_hpt(4, 1.0, g)

    def worst(lo, hi):
        t = np.linspace(lo, hi, 50)
        dev = 0.0
        for s in ("psi1", "psi2", "psi3", "psi4"):
            th = dynamics.phase_diff_series(dynamics.evolve(m, canonical_state(s, m), t, max_norm=None))
            dev = max(dev, float(np.abs(th.values - np.pi / 2).max()))
        return dev

    devs = [worst(lo, lo + 2) for lo in (8, 12, 16)]
    assert devs[2] < 1e-4
    for a, b in zip(devs, devs[1:]):
        assert b / a == pytest.approx(math.exp(-4 * k), rel=0.3)


@pytest.mark.parametrize("state", ["psi2", "psi3", "psi4", "v1", "v3"])
def test_fit_period_of_angles(state):
    # psi4 has two equal maxima per period in Phi_1 with alternating spacings
    from ptconserve import conserved

    m = build_hpt(4, 1.0, 0.2)
    basis = conserved.eta_eigenbasis(conserved.recursive_intertwiners(m), m)
    traj = dynamics.evolve(m, canonical_state(state, m), dynamics.time_grid(40.0))
    T = analysis.period_closed_form(1.0, 0.2)
    for phi in dynamics.angle_series(traj, basis):
        assert analysis.fit_period(phi).value == pytest.approx(T, rel=1e-3)
