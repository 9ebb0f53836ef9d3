import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sci_integrate

from poissoncdo import analytic
from poissoncdo.analytic import (SeriesControl, SeriesConvergenceError, def_pv,
                                 discounted_overshoot, expected_tranche_loss, grid_legs, phi, phi0,
                                 prem_pv_1bp)
from poissoncdo.model import INDEX, STANDARD_TRANCHES, SUPER_SENIOR, Contract, DomainError, ModelParams, Tranche
from poissoncdo.validate import pde_residual


def closed_form_index(p, M):
    k = p.rho * M / (p.lam + 1)
    return -math.expm1(-k), (p.lam + 1) / p.rho * -math.expm1(-k)


def test_index_legs_closed_form(calm, five_years):
    dp, pp = closed_form_index(calm, 5.0)
    assert def_pv(INDEX, five_years, calm) == pytest.approx(dp, rel=1e-9)
    assert prem_pv_1bp(INDEX, five_years, calm) == pytest.approx(pp, rel=1e-9)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.01, 2.0), st.floats(1.0, 30.0), st.floats(0.5, 10.0))
def test_index_closed_form_across_parameters(rho, lam, M):
    p = ModelParams(rho, lam)
    dp, pp = closed_form_index(p, M)
    assert def_pv(INDEX, Contract(M, 0.0), p) == pytest.approx(dp, rel=1e-7)
    assert prem_pv_1bp(INDEX, Contract(M, 0.0), p) == pytest.approx(pp, rel=1e-7)


def test_phi_boundaries(calm):
    r = 0.03
    s = calm.rho + r
    assert phi(1e-14, 3.0, r, calm) == pytest.approx(calm.rho / s * -math.expm1(-s * 3.0), rel=1e-9)
    assert phi(0.5, 0.0, r, calm) == 0.0
    assert phi(math.inf, 3.0, r, calm) == 0.0


def test_phi_reduces_to_phi0(calm):
    hs = np.linspace(0.05, 2.0, 9)
    assert np.allclose(phi(hs, 4.0, 0.0, calm), phi0(hs, 4.0, calm), atol=1e-12)


def test_phi_decreases_in_level_and_rate(calm):
    hs = np.linspace(0.01, 3.0, 30)
    v = phi(hs, 5.0, 0.02, calm)
    assert np.all(np.diff(v) <= 1e-15)
    assert np.all(phi(hs, 5.0, 0.05, calm) <= v + 1e-15)


def test_phi0_is_a_probability_vs_gamma_mixture(calm):
    # P(D_M >= h) by direct Poisson mixture of gamma tails
    from scipy import stats
    M, h = 5.0, 0.3
    n = np.arange(1, 60)
    direct = np.sum(stats.poisson.pmf(n, calm.rho * M) * stats.gamma.sf(h, n, scale=calm.mu))
    assert phi0(h, M, calm) == pytest.approx(direct, rel=1e-10)


def test_overshoot_equals_time_integral(calm):
    r, M, h = 0.04, 5.0, 0.2
    ref, _ = sci_integrate.quad(lambda s: math.exp(-r * s) * phi0(h, s, calm), 0, M, epsabs=1e-14)
    assert discounted_overshoot(h, M, r, calm) == pytest.approx(ref, rel=1e-9)


def test_premium_continuous_in_rate(calm):
    base = prem_pv_1bp(SUPER_SENIOR, Contract(5.0, 0.0), calm)
    for r in (1e-10, 1e-8, 1e-5, 2e-4, 3e-4):
        got = prem_pv_1bp(SUPER_SENIOR, Contract(5.0, r), calm)
        assert abs(got - base) <= 5.0 * r * base + 1e-12


@pytest.mark.parametrize("r", [2e-4, 1e-2, 0.05])
def test_premium_formulas_agree(calm, monkeypatch, r):
    # force each branch in turn at the same rate
    c = Contract(5.0, r)
    monkeypatch.setattr(analytic, "SMALL_RATE_TIME", math.inf)
    via_overshoot = prem_pv_1bp(INDEX, c, calm)
    monkeypatch.setattr(analytic, "SMALL_RATE_TIME", 0.0)
    via_difference = prem_pv_1bp(INDEX, c, calm)
    assert via_overshoot == pytest.approx(via_difference, rel=1e-8)


def test_default_leg_additive(calm):
    c = Contract(5.0, 0.03)
    parts = sum(def_pv(t, c, calm) for t in STANDARD_TRANCHES[:6])
    assert parts == pytest.approx(def_pv(INDEX, c, calm), rel=1e-9)
    prem = sum(prem_pv_1bp(t, c, calm) for t in STANDARD_TRANCHES[:6])
    assert prem == pytest.approx(prem_pv_1bp(INDEX, c, calm), rel=1e-9)


def test_zero_width_and_zero_maturity(calm):
    assert def_pv(Tranche(0.2, 0.2), Contract(5.0, 0.0), calm) == 0.0
    assert prem_pv_1bp(Tranche(0.2, 0.2), Contract(5.0, 0.0), calm) == 0.0
    assert expected_tranche_loss(INDEX, 0.0, calm) == 0.0


def test_grid_legs_close_to_continuous(calm, five_years):
    d, p = grid_legs(SUPER_SENIOR, five_years, calm)
    assert d == pytest.approx(def_pv(SUPER_SENIOR, five_years, calm), rel=1e-9)
    assert p == pytest.approx(prem_pv_1bp(SUPER_SENIOR, five_years, calm), rel=0.02)


def test_pde_residual_second_order():
    coarse, fine = pde_residual(0.02), pde_residual(0.01)
    assert fine < 1e-3
    assert math.log2(coarse / fine) == pytest.approx(2.0, abs=0.1)


def test_series_budget_exhaustion(calm):
    with pytest.raises(SeriesConvergenceError):
        phi0(0.5, 5.0, ModelParams(50.0, 10.0), SeriesControl(max_terms=3))


def test_negative_inputs_rejected(calm):
    with pytest.raises(DomainError):
        phi(0.1, -1.0, 0.0, calm)
    with pytest.raises(DomainError):
        discounted_overshoot(0.1, 1.0, -0.1, calm)
