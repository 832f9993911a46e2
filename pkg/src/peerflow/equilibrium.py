"""Congestion equilibrium of the two-tier platform.

The solver is nested: for a fixed gain ratio t = G(phi_l)/G(phi_h) the
capacity identity pins phi_h (``inner_congestion``); the paid tier's share of
capacity R(t) is strictly decreasing, so the requested share r is reached by a
second monotone root search (``share_inverse``). r = 0 and r = 1 have their own
single-tier equations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from peerflow.errors import BracketError, PaidTierInfeasibleError, UnreachableShareError
from peerflow.market import MarketModel, Strategy, boundary_from_ratio, loads_at, user_population
from peerflow.roots import bisect_vec, find_root


@dataclass(frozen=True)
class SolverSettings:
    inner_tol: float = 1e-12  # tolerance on log(phi_h), i.e. relative in phi_h
    outer_tol: float = 1e-10  # tolerance on log(1 - t)
    t_clamp: float = 1e-9
    max_iter: int = 200
    method: str = "brent"  # or "bisect"
    phi_floor: float = 1e-12  # left end of the inner bracket

    def __post_init__(self):
        if not (self.inner_tol > 0 and self.outer_tol > 0 and self.t_clamp > 0):
            raise ValueError("solver tolerances must be positive")
        if self.max_iter < 100:
            raise ValueError("max_iter must be at least 100")


DEFAULT_SETTINGS = SolverSettings()
SHARE_GAP_TOL = 1e-6


@dataclass(frozen=True)
class Equilibrium:
    phi_h: float
    phi_l: float
    d_h: float
    d_l: float
    v_threshold: float
    t: float
    residual_h: float = 0.0
    residual_l: float = 0.0
    strategy: Strategy | None = field(default=None, compare=False)

    @property
    def d_t(self) -> float:
        return self.d_h + self.d_l


def _tier_masses(model: MarketModel, p: float, q: float, t: float) -> tuple[float, float]:
    """M(p) N split into the paid and free CP populations at gain ratio t."""
    mass = user_population(model, p) * model.n_mean
    f_v = model.f_v.cdf(boundary_from_ratio(q, t))
    return mass * (1.0 - f_v), mass * f_v


def _single_tier_root(model: MarketModel, mass: float, target: float, settings: SolverSettings) -> float:
    """Solve mass * G(phi) H(phi) = target for phi in (0, 1]."""
    gain, cap = model.gain, model.capacity

    def z(x):
        return mass * gain.g(x) * cap.h(x) - target

    lo = _expand_lower(z, settings.phi_floor)
    return _log_root(z, lo, settings)


def _log_root(z, lo: float, settings: SolverSettings) -> float:
    # congestion can be ~1e-13 when a tier is nearly empty: search in log phi
    u = find_root(lambda s: z(math.exp(s)), math.log(lo), 0.0, method=settings.method,
                  xtol=settings.inner_tol, max_iter=settings.max_iter)
    return math.exp(u)


def _expand_lower(z, lo: float) -> float:
    while z(lo) <= 0.0:
        if lo < 1e-290:
            raise BracketError("capacity identity has no sign change near zero congestion")
        lo *= 1e-3
    return lo


def inner_congestion(
    model: MarketModel, p: float, q: float, t: float, settings: SolverSettings = DEFAULT_SETTINGS
) -> tuple[float, float]:
    """Congestion pair with G(phi_l) = t G(phi_h) that exactly uses the total capacity."""
    if not (0.0 <= t <= 1.0):
        raise ValueError(f"gain ratio must lie in [0, 1], got {t}")
    gain, cap = model.gain, model.capacity
    a, b = _tier_masses(model, p, q, t)
    c = model.c

    def partner(x):
        return gain.g_inverse(t * gain.g(x))

    def z(x):
        y = partner(x)
        return a * gain.g(x) * cap.h(x) + b * gain.g(y) * cap.h(y) - c

    lo = _expand_lower(z, settings.phi_floor)
    x0 = _log_root(z, lo, settings)
    return x0, partner(x0)


def paid_share(model: MarketModel, p: float, q: float, t: float, settings: SolverSettings = DEFAULT_SETTINGS) -> float:
    """Fraction R(t) of capacity consumed by the paid tier at the inner solution."""
    a, _ = _tier_masses(model, p, q, t)
    if a <= 0.0 or t >= 1.0:
        return 0.0
    phi_h, _ = inner_congestion(model, p, q, t, settings)
    return a * model.gain.g(phi_h) * model.capacity.h(phi_h) / model.c


def share_inverse(model: MarketModel, p: float, q: float, r: float, settings: SolverSettings = DEFAULT_SETTINGS) -> float:
    """Gain ratio t at which the paid tier uses exactly the share r."""
    if not (0.0 <= r <= 1.0):
        raise ValueError(f"capacity share must lie in [0, 1], got {r}")
    if r == 0.0:
        return 1.0
    if r == 1.0:
        return 0.0
    v_max = model.f_v.support_upper
    if q >= v_max:
        raise UnreachableShareError(f"no CP values paid peering at q={q} (value support ends at {v_max})")
    t_lo = settings.t_clamp
    t_hi = min(1.0 - settings.t_clamp, 1.0 - q / v_max)

    def f(t):
        return paid_share(model, p, q, t, settings) - r

    if f(t_lo) <= 0.0:
        if paid_share(model, p, q, 0.0, settings) < r:
            raise UnreachableShareError(f"paid tier cannot absorb share r={r}")
        return t_lo
    if f(t_hi) >= 0.0:
        # R at the top of the usable range still exceeds r: either a gap or rounding at ~1e-16
        raise UnreachableShareError(f"share r={r} is below the smallest share the paid tier takes at q={q}")
    # R is steepest as t -> 1, so search in log(1 - t): the tolerance becomes relative in 1 - t
    s = find_root(lambda s: f(-math.expm1(s)), math.log1p(-t_hi), math.log1p(-t_lo), method=settings.method,
                  xtol=settings.outer_tol, max_iter=settings.max_iter)
    t = -math.expm1(s)
    # With a bounded value support R jumps to 0 where q/(1-t) leaves the support;
    # shares inside that jump belong to no gain ratio.
    if abs(f(t)) > SHARE_GAP_TOL or _tier_masses(model, p, q, t)[0] <= 0.0:
        raise UnreachableShareError(
            f"share r={r} falls in the gap of R(t) at q={q}: the paid tier empties before it fills"
        )
    return t


def _finish(model, strategy, phi_h, phi_l, t, v_threshold) -> Equilibrium:
    p, q, r = strategy.as_tuple()
    cap, c = model.capacity, model.c
    d_h = r * c / cap.h(phi_h) if r > 0 else 0.0
    d_l = (1.0 - r) * c / cap.h(phi_l) if r < 1 else 0.0
    if phi_h == phi_l:
        load_h, load_l = 0.0, user_population(model, p) * model.n_mean * model.gain.g(phi_l)
    elif 0.0 < t < 1.0:
        # G(phi_h) - G(phi_l) cancels badly when the tiers are close; the ratio t carries the split exactly
        a, b = _tier_masses(model, p, q, t)
        load_h, load_l = a * model.gain.g(phi_h), b * model.gain.g(phi_l)
    else:
        load_h, load_l = loads_at(model, p, q, phi_h, phi_l)
    res_h = load_h * cap.h(phi_h) - r * c
    res_l = load_l * cap.h(phi_l) - (1.0 - r) * c
    return Equilibrium(
        phi_h=float(phi_h),
        phi_l=float(phi_l),
        d_h=float(d_h),
        d_l=float(d_l),
        v_threshold=float(v_threshold),
        t=float(t),
        residual_h=float(res_h),
        residual_l=float(res_l),
        strategy=strategy,
    )


def solve_equilibrium(model: MarketModel, strategy: Strategy, settings: SolverSettings = DEFAULT_SETTINGS) -> Equilibrium:
    """Unique congestion equilibrium for the strategy (p, q, r)."""
    p, q, r = strategy.as_tuple()
    mass = user_population(model, p) * model.n_mean
    if mass <= 0.0:
        # no active users: zero load, congestion-free tiers
        return Equilibrium(0.0, 0.0, 0.0, 0.0, math.inf, 1.0, 0.0, 0.0, strategy)
    if r == 0.0:
        phi = _single_tier_root(model, mass, model.c, settings)
        return _finish(model, strategy, phi, phi, 1.0, math.inf)
    if r == 1.0:
        paying = 1.0 - model.f_v.cdf(q)
        if paying <= 0.0:
            raise PaidTierInfeasibleError(f"pure paid peering at q={q}: no CP values it")
        phi_h = _single_tier_root(model, mass * paying, model.c, settings)
        return _finish(model, strategy, phi_h, 1.0, 0.0, q)
    t = share_inverse(model, p, q, r, settings)
    phi_h, phi_l = inner_congestion(model, p, q, t, settings)
    return _finish(model, strategy, phi_h, phi_l, t, boundary_from_ratio(q, t))


def solve(model: MarketModel, p: float, q: float, r: float, settings: SolverSettings = DEFAULT_SETTINGS) -> Equilibrium:
    return solve_equilibrium(model, Strategy(p, q, r), settings)


@dataclass(frozen=True)
class RatioState:
    """Equilibrium reached through the gain ratio t instead of the share r."""

    p: float
    q: float
    t: float
    phi_h: float
    phi_l: float
    d_h: float
    d_l: float
    r: float

    @property
    def d_t(self) -> float:
        return self.d_h + self.d_l


def state_at_ratio(model: MarketModel, p: float, q: float, t: float, settings: SolverSettings = DEFAULT_SETTINGS) -> RatioState:
    """Evaluate the equilibrium with paid share R(p, q, t), without the outer root search.

    t = 0 is pure paid peering (phi_l = 1) and t = 1 pure free peering.
    Raises BracketError where no congestion pair has gain ratio t, which
    happens only beyond the value support of F_v.
    """
    gain = model.gain
    if t >= 1.0:
        mass = user_population(model, p) * model.n_mean
        phi = _single_tier_root(model, mass, model.c, settings)
        return RatioState(p, q, 1.0, phi, phi, 0.0, float(mass * gain.g(phi)), 0.0)
    a, b = _tier_masses(model, p, q, t)
    phi_h, phi_l = inner_congestion(model, p, q, t, settings)
    d_h = a * gain.g(phi_h)
    d_l = b * gain.g(phi_l) if t > 0.0 else 0.0
    r = min(max(d_h * model.capacity.h(phi_h) / model.c, 0.0), 1.0)
    return RatioState(p, q, t, float(phi_h), float(phi_l), float(d_h), float(d_l), float(r))


# ---------------------------------------------------------------------------
# Vectorised variant for grid evaluation
# ---------------------------------------------------------------------------


def _batch_inner(model: MarketModel, a, b, t, lo: float, n_iter: int):
    gain, cap, c = model.gain, model.capacity, model.c

    def partner(x):
        return gain.g_inverse(t * gain.g(x))

    def z(x):
        y = partner(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            second = np.where(b > 0, b * gain.g(y) * cap.h(y), 0.0)
        return a * gain.g(x) * cap.h(x) + second - c

    s = bisect_vec(lambda u: z(np.exp(u)), np.full(np.shape(t), math.log(lo)), np.zeros(np.shape(t)),
                   decreasing=True, n_iter=n_iter)
    x = np.exp(s)
    return x, partner(x)


def solve_batch(model: MarketModel, p, q, r, inner_iter: int = 64, outer_iter: int = 50, phi_floor: float = 1e-200) -> dict:
    """Equilibria for broadcastable arrays p, q, r by nested vectorised bisection.

    Returns arrays ``phi_h, phi_l, d_h, d_l, t`` and a boolean ``ok``; entries
    where the strategy is infeasible (e.g. q above every CP value with r > 0)
    are NaN with ok False.
    """
    p, q, r = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (p, q, r)))
    shape = p.shape
    mass = user_population(model, p) * model.n_mean
    gain, cap, c = model.gain, model.capacity, model.c

    def masses(t):
        with np.errstate(divide="ignore"):
            f_v = model.f_v.cdf(boundary_from_ratio(q, t))
        return mass * (1.0 - f_v), mass * f_v

    def share(t):
        a, b = masses(t)
        phi_h, _ = _batch_inner(model, a, b, t, phi_floor, inner_iter)
        with np.errstate(invalid="ignore"):
            return np.where(a > 0, a * gain.g(phi_h) * cap.h(phi_h) / c, 0.0)

    interior = (r > 0) & (r < 1)
    v_max = model.f_v.support_upper
    t_lo = np.zeros(shape)
    t_hi = np.minimum(1.0, 1.0 - q / v_max) if math.isfinite(v_max) else np.ones(shape)
    lo, hi = t_lo.copy(), t_hi.copy()
    for _ in range(outer_iter):
        mid = 0.5 * (lo + hi)
        above = share(mid) > r
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    t = np.where(interior, 0.5 * (lo + hi), np.where(r >= 1, 0.0, 1.0))
    a, b = masses(t)
    phi_h, phi_l = _batch_inner(model, a, b, t, phi_floor, inner_iter)
    free = r <= 0
    phi_h = np.where(free, phi_l, phi_h)
    ok = np.isfinite(phi_h) & (mass > 0)
    ok &= ~(interior & (q >= v_max))
    with np.errstate(invalid="ignore"):
        reached = np.abs(np.where(a > 0, a * gain.g(phi_h) * cap.h(phi_h) / c, 0.0) - r) <= SHARE_GAP_TOL
    ok &= ~interior | reached
    ok &= ~((r >= 1) & (a <= 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        d_h = np.where(r > 0, r * c / cap.h(phi_h), 0.0)
        d_l = np.where(r < 1, (1.0 - r) * c / cap.h(phi_l), 0.0)
    nan = np.nan
    return {
        "phi_h": np.where(ok, phi_h, nan),
        "phi_l": np.where(ok, phi_l, nan),
        "d_h": np.where(ok, d_h, nan),
        "d_l": np.where(ok, d_l, nan),
        "t": np.where(ok, t, nan),
        "ok": ok,
    }
