"""Profit, user welfare and the first-order conditions of their maximisation."""

from __future__ import annotations

from dataclasses import dataclass

from peerflow.equilibrium import DEFAULT_SETTINGS, Equilibrium, SolverSettings, solve_equilibrium
from peerflow.errors import DomainError, PreconditionError
from peerflow.market import MarketModel, Strategy, user_population
from peerflow.sensitivity import FD_REL_STEP, theta_elasticities


@dataclass(frozen=True)
class ObjectiveValue:
    profit: float
    welfare: float
    surplus_total: float
    surplus_avg: float
    d_t: float


def profit_from_loads(p: float, q: float, k: float, d_h: float, d_l: float) -> float:
    return (p + q - k) * d_h + (p - k) * d_l


def user_surplus(model: MarketModel, p: float) -> tuple[float, float]:
    """Total surplus S(p) of active users and its per-user average s(p) = S/M."""
    if p < 0:
        raise ValueError("price must be non-negative")
    total = float(model.f_u.surplus(p))
    m = float(user_population(model, p))
    if m <= 0.0:
        raise DomainError(f"no active users at p={p}: average surplus undefined")
    return total, total / m


def average_surplus(model: MarketModel, p: float) -> float:
    return user_surplus(model, p)[1]


def evaluate(model: MarketModel, strategy: Strategy, settings: SolverSettings = DEFAULT_SETTINGS,
             eq: Equilibrium | None = None) -> ObjectiveValue:
    eq = eq if eq is not None else solve_equilibrium(model, strategy, settings)
    p, q, _ = strategy.as_tuple()
    u = profit_from_loads(p, q, model.k, eq.d_h, eq.d_l)
    if user_population(model, p) <= 0.0:
        return ObjectiveValue(u, 0.0, 0.0, 0.0, eq.d_t)
    s_total, s_avg = user_surplus(model, p)
    return ObjectiveValue(u, s_avg * eq.d_t, s_total, s_avg, eq.d_t)


def profit(model: MarketModel, strategy: Strategy, settings: SolverSettings = DEFAULT_SETTINGS) -> float:
    """U = (p + q - k) d_h + (p - k) d_l."""
    return evaluate(model, strategy, settings).profit


def welfare(model: MarketModel, strategy: Strategy, settings: SolverSettings = DEFAULT_SETTINGS) -> float:
    """W = s(p) (d_h + d_l); zero when no user is active."""
    return evaluate(model, strategy, settings).welfare


@dataclass(frozen=True)
class FocResiduals:
    """Normalised residuals of the necessary optimality conditions.

    Fields that do not apply to the evaluated objective or branch are None.
    ``profit_slack`` is set only at r = 1 where the allocation condition is an
    inequality: dU/dr / d_t must be >= 0, i.e. moving capacity back to the free
    tier does not raise profit.
    """

    profit_eq5: float | None = None
    profit_eq6: float | None = None
    profit_eq6_r: float | None = None
    profit_slack: float | None = None
    welfare_p: float | None = None
    welfare_q: float | None = None
    welfare_r: float | None = None
    welfare_r_is_equality: bool = True

    def max_abs_equality(self) -> float:
        """Largest residual among the conditions that must hold with equality."""
        vals = [self.profit_eq5, self.profit_eq6, self.profit_eq6_r, self.welfare_p, self.welfare_q]
        if self.welfare_r_is_equality:
            vals.append(self.welfare_r)
        return max((abs(v) for v in vals if v is not None), default=0.0)

    def inequalities_hold(self, tol: float = 1e-3) -> bool:
        ok = self.profit_slack is None or self.profit_slack >= -tol
        if not self.welfare_r_is_equality and self.welfare_r is not None:
            ok &= self.welfare_r >= -tol
        return ok


def _profit_r_slope(model, p, q, r, settings, rel_step):
    """One-sided derivative of U in r, pointing into [0, 1]."""
    h = rel_step * max(r, 1e-3)
    sign = -1.0 if r + h > 1.0 else 1.0
    u0 = profit(model, Strategy(p, q, r), settings)
    u1 = profit(model, Strategy(p, q, r + sign * h), settings)
    return (u1 - u0) / (sign * h)


def profit_foc(model: MarketModel, strategy: Strategy, settings: SolverSettings = DEFAULT_SETTINGS,
               rel_step: float = FD_REL_STEP) -> FocResiduals:
    """Residuals of the two profit conditions at the strategy.

    The user-side condition ``p d_t = (p+q-k) d_h e^{d_h}_p + (p-k) d_l e^{d_l}_p``
    is normalised by p d_t. The profit-ratio condition is reported as
    (L - B)/L, where L = (p+q-k) d_h / ((p-k) d_l) and B is the price-elasticity
    combination, and separately as (L - C)/L with C = -e^{d_l}_r / e^{d_h}_r.
    At r = 1 the ratio is undefined (d_l = 0); the q-condition is reported in
    ``profit_eq6`` as U_q / d_h and the allocation inequality in ``profit_slack``.
    """
    p, q, r = strategy.as_tuple()
    if r == 0.0:
        raise PreconditionError("profit conditions require a non-zero paid share")
    eq = solve_equilibrium(model, strategy, settings)
    k = model.k
    el = theta_elasticities(model, strategy, settings, rel_step)
    d_h, d_l, d_t = eq.d_h, eq.d_l, eq.d_t
    rhs5 = (p + q - k) * d_h * el.d_h_p + (p - k) * d_l * el.d_l_p
    eq5 = (p * d_t - rhs5) / (p * d_t)
    if r == 1.0:
        # U_q = d_h - (p+q-k) d_h e^{d_h}_q / q
        u_q = d_h - (p + q - k) * d_h * el.d_h_q / q
        slope = _profit_r_slope(model, p, q, r, settings, rel_step)
        return FocResiduals(profit_eq5=eq5, profit_eq6=u_q / d_h, profit_slack=slope / d_t)
    lhs = (p + q - k) * d_h / ((p - k) * d_l)
    b_num = -p * d_t * el.d_l_q + q * d_h * el.d_l_p
    b_den = p * d_t * el.d_h_q - q * d_h * el.d_h_p
    eq6 = (lhs - b_num / b_den) / lhs
    eq6_r = (lhs + el.d_l_r / el.d_h_r) / lhs
    return FocResiduals(profit_eq5=eq5, profit_eq6=eq6, profit_eq6_r=eq6_r)


def surplus_elasticity(model: MarketModel, p: float, rel_step: float = FD_REL_STEP) -> float:
    """-(p/s) ds/dp by central differences of the closed-form average surplus."""
    h = rel_step * p
    ds = (average_surplus(model, p + h) - average_surplus(model, p - h)) / (2.0 * h)
    return -(p / average_surplus(model, p)) * ds


def welfare_foc(model: MarketModel, strategy: Strategy, settings: SolverSettings = DEFAULT_SETTINGS,
                rel_step: float = FD_REL_STEP) -> FocResiduals:
    """Residuals of the welfare conditions e^{d_t}_p + e^s_p = 0, e^{d_t}_q = 0 and the r-condition.

    For r in (0, 1) ``welfare_r`` is e^{d_t}_r, which must vanish. At r = 0 the
    elasticity is identically zero, so the one-sided semi-elasticity
    -(1/d_t) dd_t/dr is reported instead; it must be >= 0.
    """
    p, q, r = strategy.as_tuple()
    if r == 1.0:
        raise PreconditionError("welfare conditions require a paid share below one")
    el = theta_elasticities(model, strategy, settings, rel_step)
    w_p = el.d_t_p + surplus_elasticity(model, p, rel_step)
    if r == 0.0:
        h = rel_step
        d0 = solve_equilibrium(model, strategy, settings).d_t
        d1 = solve_equilibrium(model, Strategy(p, q, h), settings).d_t
        w_r = -(d1 - d0) / (h * d0)
        return FocResiduals(welfare_p=w_p, welfare_q=el.d_t_q, welfare_r=w_r, welfare_r_is_equality=False)
    return FocResiduals(welfare_p=w_p, welfare_q=el.d_t_q, welfare_r=el.d_t_r)
