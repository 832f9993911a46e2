import itertools

import numpy as np
import pytest

from peerflow.families import ConvexGain, Exponential, InversePowerCapacity, Uniform
from peerflow.market import MarketModel, Strategy
from peerflow.objectives import evaluate
from peerflow.optimize import (
    PROFIT_FLOOR, Regime, SearchBox, capacity_gain_index, check_conditions, maximize_profit, maximize_welfare,
    maximize_welfare_constrained, pattern_search,
)


@pytest.fixture(scope="module")
def profit_opt(baseline):
    return maximize_profit(baseline)


def test_pattern_search_finds_interior_maximum():
    x, fx = pattern_search(lambda v: -((v[0] - 0.3) ** 2) - 2 * (v[1] + 1.0) ** 2, (0.9, 0.0), (0, -2), (1, 2),
                           min_step=1e-9)
    assert x == pytest.approx([0.3, -1.0], abs=1e-6)
    assert fx == pytest.approx(0.0, abs=1e-10)


def test_pattern_search_stops_on_the_box():
    x, _ = pattern_search(lambda v: v[0] + v[1], (0.2, 0.2), (0, 0), (1, 0.5))
    assert x == pytest.approx([1.0, 0.5])


def test_regime_classification():
    assert Regime.of(0.0) is Regime.PURE_FREE
    assert Regime.of(1.0) is Regime.PURE_PAID
    assert Regime.of(0.3) is Regime.HYBRID
    with pytest.raises(ValueError):
        SearchBox(p=(0.0, 1.0), q=(0.1, 1.0))


def test_profit_optimum_is_hybrid_and_stationary(baseline, profit_opt):
    assert profit_opt.regime is Regime.HYBRID
    assert profit_opt.foc.max_abs_equality() < 1e-4
    p, q, r = profit_opt.strategy.as_tuple()
    for dp, dq, dr in itertools.product((-1, 0, 1), repeat=3):
        trial = Strategy(p * (1 + 1e-3 * dp), q * (1 + 1e-3 * dq), r + 1e-3 * dr)
        assert evaluate(baseline, trial).profit <= profit_opt.profit + 1e-12


def test_welfare_optimum_is_pure_free(baseline):
    rep = maximize_welfare(baseline)
    assert rep.regime is Regime.PURE_FREE
    assert rep.strategy.r == 0.0
    # q plays no role without a paid tier; the tie-break picks the smallest
    assert rep.strategy.q == SearchBox.default(baseline).q[0]
    assert rep.foc.inequalities_hold()
    assert abs(rep.foc.welfare_p) < 1e-3


def test_constrained_welfare_moves_prices_apart(baseline, profit_opt):
    s = profit_opt.strategy
    p_c, q_c, rep = maximize_welfare_constrained(baseline, s.r, start=(s.p, s.q))
    assert p_c < s.p and q_c > s.q
    assert rep.profit >= PROFIT_FLOOR
    assert rep.welfare > evaluate(baseline, s).welfare
    assert rep.binding


def test_condition_scans():
    base = check_conditions(MarketModel.baseline())
    assert base.corollary6_decreasing and not base.corollary4_increasing
    assert not base.corollary5_hazard
    assert len(base.scan_points) == 1000
    hyb = check_conditions(MarketModel.baseline().replace(f_u=Exponential(0.5), f_v=Uniform(0.0, 1.0)))
    assert hyb.corollary5_hazard
    assert hyb.hazard_sup_u == pytest.approx(0.5) and hyb.hazard_inf_v >= 1.0
    with pytest.raises(ValueError):
        check_conditions(MarketModel.baseline(), grid_size=50)


@pytest.mark.parametrize("beta", [0.25, 0.5, 1.0, 2.0, 4.0])
def test_capacity_gain_index_decreasing_for_power_gains(beta):
    # H = 1/phi, G = 1 - phi**(1/beta): (1/phi) (beta (1 - phi**(1/beta)) / phi**(1/beta) + 1)
    model = MarketModel.baseline(beta=beta)
    phi = np.linspace(1e-3, 1 - 1e-3, 1000)
    direct = (1 / phi) * (beta * (1 - phi ** (1 / beta)) / phi ** (1 / beta) + 1)
    assert np.allclose(capacity_gain_index(model, phi), direct, rtol=1e-10)
    assert np.all(np.diff(direct) < 0)


def test_scans_never_report_both_directions():
    models = [
        MarketModel.baseline(beta=b).replace(gain=g, capacity=InversePowerCapacity(gm))
        for b in (0.5, 2.0) for g in (ConvexGain(0.5), ConvexGain(3.0)) for gm in (0.5, 2.0)
    ]
    for m in models:
        rep = check_conditions(m, grid_size=200)
        assert not (rep.corollary4_increasing and rep.corollary6_decreasing)
