import numpy as np
import pytest

from peerflow.errors import DomainError, PreconditionError
from peerflow.families import Exponential
from peerflow.market import Strategy
from peerflow.objectives import average_surplus, evaluate, profit, profit_foc, user_surplus, welfare, welfare_foc
from peerflow.optimize import maximize_profit


def test_reference_objective_values(baseline):
    # loads from the independent fsolve root: d_h = 0.00976277, d_l = 0.04775688
    assert profit(baseline, Strategy(0.5, 0.3, 0.5)) == pytest.approx(0.6 * 0.00976277092 + 0.3 * 0.04775687685, abs=1e-10)
    assert profit(baseline, Strategy(0.5, 0.3, 0.5)) == pytest.approx(0.0201847, abs=1e-7)
    assert welfare(baseline, Strategy(0.5, 0.3, 0.5)) == pytest.approx(0.0132767, abs=1e-7)
    assert profit(baseline, Strategy(0.5, 0.3, 0.0)) == pytest.approx(0.0202954, abs=1e-7)
    assert welfare(baseline, Strategy(0.5, 0.3, 0.0)) == pytest.approx(0.0156152, abs=1e-7)


def test_surplus_reference(baseline):
    total, avg = user_surplus(baseline, 0.5)
    assert total == pytest.approx(0.0471942, abs=1e-7)
    assert avg == pytest.approx(0.2308195, abs=1e-7)
    with pytest.raises(DomainError):
        average_surplus(baseline, 1.0)


def test_average_surplus_of_baseline_users_rises_then_falls(baseline):
    # closed form for F_u = u**a on [0, 1]: S = (1 - p) - (1 - p**(a+1)) / (a+1), M = 1 - p**a
    a = 0.33
    for p in (0.01, 0.1, 0.5):
        ref = ((1 - p) - (1 - p ** (a + 1)) / (a + 1)) / (1 - p ** a)
        assert average_surplus(baseline, p) == pytest.approx(ref, rel=1e-9)
    assert average_surplus(baseline, 0.01) < average_surplus(baseline, 0.1)
    tail = [average_surplus(baseline, p) for p in np.linspace(0.15, 0.99, 50)]
    assert np.all(np.diff(tail) < 0.0)


def test_exponential_users_have_constant_average_surplus(baseline):
    model = baseline.replace(f_u=Exponential(0.5))
    for p in (0.1, 1.0, 4.0):
        assert average_surplus(model, p) == pytest.approx(2.0, rel=1e-9)


def test_evaluate_is_consistent(baseline):
    v = evaluate(baseline, Strategy(0.4, 0.2, 0.3))
    assert v.welfare == pytest.approx(v.surplus_avg * v.d_t, rel=1e-12)
    assert v.surplus_total == pytest.approx(v.surplus_avg * (1 - 0.4**0.33), rel=1e-12)
    assert evaluate(baseline, Strategy(1.0, 0.2, 0.3)).welfare == 0.0


def test_profit_conditions_vanish_at_optimum(baseline):
    rep = maximize_profit(baseline)
    foc = profit_foc(baseline, rep.strategy)
    assert foc.max_abs_equality() < 1e-4
    assert foc.profit_slack is None


def test_profit_conditions_detect_non_optimum(baseline):
    foc = profit_foc(baseline, Strategy(0.5, 0.3, 0.5))
    assert foc.max_abs_equality() > 1e-2


def test_condition_preconditions(baseline):
    with pytest.raises(PreconditionError):
        profit_foc(baseline, Strategy(0.5, 0.3, 0.0))
    with pytest.raises(PreconditionError):
        welfare_foc(baseline, Strategy(0.5, 0.3, 1.0))


def test_boundary_condition_forms(baseline):
    foc1 = profit_foc(baseline, Strategy(0.6, 0.1, 1.0))
    assert foc1.profit_eq6_r is None and foc1.profit_slack is not None
    foc0 = welfare_foc(baseline, Strategy(0.05, 0.1, 0.0))
    assert not foc0.welfare_r_is_equality
    # moving capacity to the paid tier lowers total usage at a free-only point
    assert foc0.welfare_r > 0
    assert foc0.inequalities_hold()
