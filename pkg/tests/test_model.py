import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from poissoncdo.model import (BP, INDEX, STANDARD_TRANCHES, Contract, DomainError, LossSpec,
                              ModelParams, Tranche, fair_spread, log_level, loss_from_default,
                              outstanding_notional, tranche_loss)

unit = st.floats(0.0, 1.0)


@pytest.mark.parametrize("rho, lam", [(0, 1), (-1, 1), (1, 0), (math.inf, 1), (math.nan, 1)])
def test_params_reject_bad_values(rho, lam):
    with pytest.raises(DomainError):
        ModelParams(rho, lam)


def test_from_mu_inverts_lambda():
    p = ModelParams.from_mu(0.05, 0.28)
    assert p.lam == pytest.approx(1 / 0.28)
    assert p.mu == pytest.approx(0.28)


def test_tranche_domain():
    with pytest.raises(DomainError):
        Tranche(0.5, 0.4)
    with pytest.raises(DomainError):
        Tranche(1.0, 1.0)
    t = Tranche(0.2, 0.2)  # zero width is allowed and worthless
    assert t.width == 0


def test_log_level_endpoints():
    assert log_level(0.0) == 0.0
    assert math.isinf(log_level(1.0))
    assert log_level(0.3) == pytest.approx(-math.log(0.7))


def test_contract_grid():
    c = Contract(5.0, 0.03, 4)
    assert c.n_periods == 20
    assert c.grid()[-1] == 5.0
    assert c.discount_factors()[0] == 1.0
    with pytest.raises(DomainError):
        Contract(5.0, -0.01)


@given(st.floats(0.0, 50.0))
def test_exponential_loss_in_unit_interval(D):
    L = loss_from_default(D)
    assert 0.0 <= L < 1.0 or (D > 36 and L == 1.0)


@given(st.floats(0.0, 5.0))
def test_linear_loss_caps_at_one(D):
    assert loss_from_default(D, LossSpec.LINEAR) == min(D, 1.0)


@given(unit, unit, unit)
def test_tranche_loss_bounded_by_width(a, b, L):
    a, d = sorted((a, b))
    if a == 1.0:
        return
    tr = Tranche(a, d)
    ell = tranche_loss(L, tr)
    assert -1e-15 <= ell <= tr.width + 1e-15
    assert ell + outstanding_notional(L, tr) == pytest.approx(tr.width)


@given(st.lists(unit, min_size=1, max_size=6), unit)
def test_tranche_losses_add_up(cuts, L):
    edges = sorted(set([0.0, 1.0] + cuts))
    pieces = sum(tranche_loss(L, Tranche(a, d)) for a, d in zip(edges[:-1], edges[1:]) if a < 1)
    assert pieces == pytest.approx(tranche_loss(L, INDEX), abs=1e-14)


@given(st.lists(unit, min_size=2, max_size=20))
def test_tranche_loss_monotone_in_portfolio_loss(Ls):
    tr = Tranche(0.03, 0.07)
    vals = tranche_loss(np.sort(Ls), tr)
    assert np.all(np.diff(vals) >= 0)


def test_fair_spread_in_bp():
    assert fair_spread(0.01, 2.0) == pytest.approx(0.005 * BP)
    with pytest.raises(ZeroDivisionError):
        fair_spread(0.01, 0.0)
    with pytest.raises(DomainError):
        fair_spread(0.01, -1.0)


def test_standard_preset_is_seven_tranches():
    assert [(t.a, t.d) for t in STANDARD_TRANCHES] == [
        (0, .03), (.03, .07), (.07, .10), (.10, .15), (.15, .30), (.30, 1), (0, 1)]
