"""Profit- and welfare-optimal strategies and the sufficient-condition scans.

The unconstrained searches run in (p, q, t) coordinates: for fixed prices the
gain ratio t and the paid share r are in one-to-one correspondence, and an
evaluation at given t needs only the inner congestion solve. The optimum is
mapped back to r and re-solved in strategy coordinates before reporting.
"""

from __future__ import annotations

import dataclasses
import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from peerflow.equilibrium import (
    DEFAULT_SETTINGS,
    Equilibrium,
    SolverSettings,
    share_inverse,
    solve_batch,
    solve_equilibrium,
    state_at_ratio,
)
from peerflow.errors import InfeasibleError, PeerflowError
from peerflow.market import MarketModel, Strategy, user_population
from peerflow.objectives import (
    FocResiduals,
    average_surplus,
    evaluate,
    profit_foc,
    profit_from_loads,
    welfare_foc,
)
from peerflow.roots import find_root

REGIME_TOL = 1e-6
TIE_TOL = 1e-10
PROFIT_FLOOR = 1e-9


class Regime(enum.Enum):
    PURE_PAID = "PurePaid"
    PURE_FREE = "PureFree"
    HYBRID = "Hybrid"

    @classmethod
    def of(cls, r: float) -> "Regime":
        if r >= 1.0 - REGIME_TOL:
            return cls.PURE_PAID
        if r <= REGIME_TOL:
            return cls.PURE_FREE
        return cls.HYBRID


class Objective(enum.Enum):
    PROFIT = "profit"
    WELFARE = "welfare"


@dataclass(frozen=True)
class SearchBox:
    """Price ranges of the search; the paid share always ranges over [0, 1]."""

    p: tuple[float, float]
    q: tuple[float, float]

    def __post_init__(self):
        for lo, hi in (self.p, self.q):
            if not (0.0 < lo < hi and math.isfinite(hi)):
                raise ValueError(f"invalid price range ({lo}, {hi})")

    @classmethod
    def default(cls, model: MarketModel, low: float = 1e-3, tail: float = 1e-3) -> "SearchBox":
        """Prices from ``low`` up to the (1 - tail)-quantile of the respective value distribution."""
        return cls(p=(low, float(model.f_u.quantile(1.0 - tail))), q=(low, float(model.f_v.quantile(1.0 - tail))))


@dataclass(frozen=True)
class OptimumReport:
    strategy: Strategy
    objective: float
    equilibrium: Equilibrium
    foc: FocResiduals | None
    regime: Regime
    n_evals: int
    multistart_spread: float
    profit: float = 0.0
    welfare: float = 0.0
    binding: bool | None = None
    notes: tuple[str, ...] = field(default=())


# ---------------------------------------------------------------------------
# Pattern search
# ---------------------------------------------------------------------------


@dataclass
class _Counter:
    n: int = 0


def pattern_search(f, x0, lower, upper, step: float = 0.1, min_step: float = 1e-6, max_evals: int = 20000,
                   counter: _Counter | None = None):
    """Hooke-Jeeves maximisation of f on a box, in coordinates scaled to [0, 1].

    Exploratory compass moves along each axis, followed by a pattern move
    through the improved point; the step halves whenever no axis improves.
    Returns (x_best, f_best).
    """
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    width = upper - lower
    counter = counter or _Counter()

    def value(u):
        counter.n += 1
        return f(lower + np.clip(u, 0.0, 1.0) * width)

    def explore(u, fu, h):
        u = u.copy()
        for i in range(len(u)):
            for sgn in (1.0, -1.0):
                trial = u.copy()
                trial[i] = min(max(trial[i] + sgn * h, 0.0), 1.0)
                if trial[i] == u[i]:
                    continue
                ft = value(trial)
                if ft > fu:
                    u, fu = trial, ft
                    break
        return u, fu

    base = np.clip((np.asarray(x0, float) - lower) / width, 0.0, 1.0)
    f_base = value(base)
    h = step
    while h >= min_step and counter.n < max_evals:
        new, f_new = explore(base, f_base, h)
        if f_new > f_base:
            # pattern moves while they keep paying off
            while counter.n < max_evals:
                jump = np.clip(new + (new - base), 0.0, 1.0)
                base, f_base = new, f_new
                cand, f_cand = explore(jump, value(jump), h)
                if f_cand > f_base:
                    new, f_new = cand, f_cand
                else:
                    break
        else:
            h *= 0.5
    return lower + base * width, f_base


# ---------------------------------------------------------------------------
# Objective evaluation in ratio coordinates
# ---------------------------------------------------------------------------


def _ratio_objective(model: MarketModel, objective: Objective, settings: SolverSettings):
    k = model.k

    def f(p, q, t):
        try:
            st = state_at_ratio(model, p, q, t, settings)
        except PeerflowError:
            return -math.inf, None
        if objective is Objective.PROFIT:
            return profit_from_loads(p, q, k, st.d_h, st.d_l), st
        if user_population(model, p) <= 0.0:
            return 0.0, st
        return average_surplus(model, p) * st.d_t, st

    return f


def _better(a, b) -> bool:
    """Is candidate a = (value, r, q, p) preferred over b under the tie-break order?"""
    if b is None:
        return True
    if a[0] > b[0] + TIE_TOL:
        return True
    if a[0] < b[0] - TIE_TOL:
        return False
    return (a[1], a[2], a[3]) < (b[1], b[2], b[3])


def _pick(candidates):
    best = None
    for c in candidates:
        if math.isfinite(c[0]) and _better(c, best):
            best = c
    return best


_COARSE = (16, 16, 9)


def _coarse_grid_seeds(model: MarketModel, objective: Objective, box: SearchBox, n: int):
    """Best ``n`` points of a small batch-solved strategy grid, as (p, q, t) seeds."""
    ps = np.linspace(*box.p, _COARSE[0])
    qs = np.linspace(*box.q, _COARSE[1])
    rs = np.linspace(0.0, 1.0, _COARSE[2])
    P, Q, R = np.meshgrid(ps, qs, rs, indexing="ij")
    out = solve_batch(model, P, Q, R)
    if objective is Objective.PROFIT:
        val = (P - model.k) * (out["d_h"] + out["d_l"]) + Q * out["d_h"]
    else:
        m = user_population(model, ps)
        s = np.where(m > 0, np.asarray(model.f_u.surplus(ps)) / np.where(m > 0, m, 1.0), 0.0)
        val = s[:, None, None] * (out["d_h"] + out["d_l"])
    val = np.where(out["ok"], val, -np.inf).ravel()
    order = np.argsort(-val, kind="stable")[:n]
    return [(float(P.flat[i]), float(Q.flat[i]), float(out["t"].flat[i])) for i in order if np.isfinite(val[i])]


def _seed_lattice(model: MarketModel, box: SearchBox, settings: SolverSettings):
    """3 x 3 x 3 seeds: quantile-spaced prices and shares 0.05, 0.5, 0.95 mapped to gain ratios."""
    def spaced(dist, lo, hi):
        pts = [float(np.clip(dist.quantile(u), lo, hi)) for u in (0.25, 0.5, 0.75)]
        return [lo + (hi - lo) * w if not (lo < x < hi) else x for x, w in zip(pts, (0.25, 0.5, 0.75))]

    seeds = []
    for p, q, r in itertools.product(spaced(model.f_u, *box.p), spaced(model.f_v, *box.q), (0.05, 0.5, 0.95)):
        try:
            t = share_inverse(model, p, q, r, settings)
        except PeerflowError:
            t = 1.0 - r  # share unreachable at these prices; the ratio is still a valid seed
        seeds.append((p, q, t))
    return seeds


def _finish_report(model, p, q, r, objective, settings, n_evals, spread, notes=()) -> OptimumReport:
    if r <= 0.0:
        r = 0.0
    elif r >= 1.0:
        r = 1.0
    strategy = Strategy(float(p), float(q), float(r))
    eq = solve_equilibrium(model, strategy, settings)
    val = evaluate(model, strategy, settings, eq)
    foc = None
    try:
        if objective is Objective.PROFIT and r > 0.0:
            foc = profit_foc(model, strategy, settings)
        elif objective is Objective.WELFARE and r < 1.0:
            foc = welfare_foc(model, strategy, settings)
    except PeerflowError as exc:
        notes = tuple(notes) + (f"foc unavailable: {type(exc).__name__}",)
    obj = val.profit if objective is Objective.PROFIT else val.welfare
    return OptimumReport(
        strategy=strategy, objective=obj, equilibrium=eq, foc=foc, regime=Regime.of(r),
        n_evals=n_evals, multistart_spread=spread, profit=val.profit, welfare=val.welfare, notes=tuple(notes),
    )


def _maximize(model: MarketModel, objective: Objective, box: SearchBox | None, settings: SolverSettings,
              n_refine: int = 4, min_step: float = 1e-7) -> OptimumReport:
    box = box or SearchBox.default(model)
    f = _ratio_objective(model, objective, settings)
    counter = _Counter()
    (p_lo, p_hi), (q_lo, q_hi) = box.p, box.q
    candidates = []

    def record(p, q, t):
        val, st = f(p, q, t)
        counter.n += 1
        if st is not None and math.isfinite(val):
            r = 0.0 if t >= 1.0 else (1.0 if t <= 0.0 else st.r)
            candidates.append((val, r, q if r > 0.0 else q_lo, p))
        return val

    # interior search from the best lattice seeds and the best points of a coarse grid
    seeds = _seed_lattice(model, box, settings)
    scored = sorted(((f(*s)[0], i, s) for i, s in enumerate(seeds)), key=lambda x: (-x[0], x[1]))
    counter.n += len(seeds)
    starts = [s for v, _, s in scored[:n_refine] if math.isfinite(v)]
    grid_seeds = _coarse_grid_seeds(model, objective, box, n_refine)
    counter.n += _COARSE[0] * _COARSE[1] * _COARSE[2]
    starts += grid_seeds
    converged = []

    def refine(start):
        x, fx = pattern_search(lambda v: f(*v)[0], start, (p_lo, q_lo, 0.0), (p_hi, q_hi, 1.0),
                               min_step=min_step, counter=counter)
        record(*x)
        if math.isfinite(fx):
            converged.append(fx)
        return x

    for s0 in starts:
        refine(s0)

    # pure paid slice (t = 0) and pure free slice (t = 1, q irrelevant)
    q_mid = float(np.clip(model.f_v.quantile(0.5), q_lo, q_hi))
    p_mid = float(np.clip(model.f_u.quantile(0.5), p_lo, p_hi))
    x, fx = pattern_search(lambda v: f(v[0], v[1], 0.0)[0], (p_mid, q_mid), (p_lo, q_lo), (p_hi, q_hi),
                           min_step=min_step, counter=counter)
    record(x[0], x[1], 0.0)
    converged.append(fx)
    for p0 in (0.25, 0.5, 0.75):
        p_seed = p_lo + p0 * (p_hi - p_lo)
        x, fx = pattern_search(lambda v: f(v[0], q_lo, 1.0)[0], (p_seed,), (p_lo,), (p_hi,),
                               min_step=min_step, counter=counter)
        record(x[0], q_lo, 1.0)
        converged.append(fx)

    best = _pick(candidates)
    if objective is Objective.PROFIT and best is not None and best[1] <= REGIME_TOL:
        # a free-only profit optimum is never optimal; search the hybrid interior at that price
        p_b = best[3]
        for q0 in np.geomspace(q_lo, q_hi, 8):
            for r0 in (0.05, 0.2, 0.5):
                try:
                    t0 = share_inverse(model, p_b, float(q0), r0, settings)
                except PeerflowError:
                    continue
                refine((p_b, float(q0), t0))
        best = _pick(candidates)
    if best is None:
        raise InfeasibleError("no feasible strategy found in the search box")
    conv = [v for v in converged if math.isfinite(v)]
    spread = max(conv) - min(conv) if conv else 0.0
    _, r, q, p = best
    notes = []
    if p <= p_lo or p >= p_hi:
        notes.append("p on the search-box boundary")
    if r > 0.0 and (q <= q_lo or q >= q_hi):
        notes.append("q on the search-box boundary")
    return _finish_report(model, p, q, r, objective, settings, counter.n, spread, notes)


def maximize_profit(model: MarketModel, box: SearchBox | None = None,
                    settings: SolverSettings = DEFAULT_SETTINGS) -> OptimumReport:
    """Profit-maximising strategy by multi-start pattern search plus both boundary slices."""
    return _maximize(model, Objective.PROFIT, box, settings)


def maximize_welfare(model: MarketModel, box: SearchBox | None = None,
                     settings: SolverSettings = DEFAULT_SETTINGS) -> OptimumReport:
    """User-welfare-maximising strategy; same search machinery as for profit."""
    return _maximize(model, Objective.WELFARE, box, settings)


# ---------------------------------------------------------------------------
# Welfare at a fixed allocation subject to positive profit
# ---------------------------------------------------------------------------


def maximize_welfare_constrained(
    model: MarketModel, r_fixed: float, box: SearchBox | None = None,
    settings: SolverSettings = DEFAULT_SETTINGS, start: tuple[float, float] | None = None,
    min_step: float = 1e-7,
) -> tuple[float, float, OptimumReport]:
    """Welfare-optimal prices (p, q) at paid share r_fixed subject to U >= 1e-9.

    Trial points violating the profit floor are projected onto it by raising
    p to the smallest feasible user price at the same q. ``start`` should be
    a feasible price pair, typically the profit optimum.
    """
    box = box or SearchBox.default(model)
    (p_lo, p_hi), (q_lo, q_hi) = box.p, box.q
    counter = _Counter()

    def outcome(p, q):
        counter.n += 1
        try:
            val = evaluate(model, Strategy(p, q, r_fixed), settings)
        except PeerflowError:
            return None
        return val

    def lift(p, q):
        """Smallest p' >= p with U(p', q) >= floor: geometric ladder, then a bracketed root."""
        prev = p
        for cand in np.geomspace(p, p_hi, 24)[1:]:
            v = outcome(cand, q)
            if v is not None and v.profit >= PROFIT_FLOOR:
                def gap(x):
                    vx = outcome(x, q)
                    return -1.0 if vx is None else vx.profit - PROFIT_FLOOR
                if gap(prev) >= 0.0:
                    return prev
                root = find_root(gap, prev, cand, xtol=1e-14)
                # land on the feasible side of the root
                while gap(root) < 0.0:
                    root = math.nextafter(root, math.inf) if root * 1e-13 < 1e-300 else root * (1 + 1e-13)
                return root
            prev = cand
        return None

    def project(p, q):
        v = outcome(p, q)
        if v is not None and v.profit >= PROFIT_FLOOR:
            return p, v
        p2 = lift(p, q)
        if p2 is None:
            return None, None
        return p2, outcome(p2, q)

    def f(x):
        p, v = project(float(x[0]), float(x[1]))
        if v is None:
            return -math.inf
        return v.welfare

    if start is None:
        start = (0.5 * (p_lo + p_hi), 0.5 * (q_lo + q_hi))
    p0, v0 = project(*start)
    if v0 is None:
        # look for any feasible pair on a coarse lattice
        found = None
        for p, q in itertools.product(np.linspace(p_lo, p_hi, 12), np.linspace(q_lo, q_hi, 12)):
            v = outcome(p, q)
            if v is not None and v.profit >= PROFIT_FLOOR and (found is None or v.welfare > found[2]):
                found = (p, q, v.welfare)
        if found is None:
            raise InfeasibleError(f"no prices in the box give positive profit at r={r_fixed}")
        start = found[:2]
    x, fx = pattern_search(f, start, (p_lo, q_lo), (p_hi, q_hi), min_step=min_step, counter=counter)
    p, _ = project(float(x[0]), float(x[1]))
    q = float(x[1])
    report = _finish_report(model, p, q, r_fixed, Objective.WELFARE, settings, counter.n, 0.0)
    binding = report.profit < 1e-6
    # the unconstrained welfare conditions say nothing about a point on the profit floor
    report = dataclasses.replace(report, binding=binding, foc=None if binding else report.foc)
    return p, q, report


# ---------------------------------------------------------------------------
# Sufficient-condition scans
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionReport:
    corollary4_increasing: bool
    corollary6_decreasing: bool
    corollary5_hazard: bool
    scan_points: tuple[float, ...]
    hazard_sup_u: float = math.nan
    hazard_inf_v: float = math.nan


def capacity_gain_index(model: MarketModel, phi):
    """H(phi) * (e^H(phi) / e^G(phi) + 1), the function whose monotonicity drives the regime results."""
    cap, gain = model.capacity, model.gain
    return cap.h(phi) * (cap.elasticity(phi) / gain.elasticity(phi) + 1.0)


def _support_grid(dist, n: int, eps: float) -> np.ndarray:
    lo = float(dist.quantile(eps))
    hi = float(dist.quantile(1.0 - eps))
    return np.linspace(max(lo, eps), hi, n)


def check_conditions(model: MarketModel, grid_size: int = 1000, eps: float = 1e-3, tol: float = 1e-9) -> ConditionReport:
    """Numeric scans of the monotonicity and hazard-rate premises."""
    if grid_size < 100:
        raise ValueError("grid_size must be at least 100")
    phi = np.linspace(eps, 1.0 - eps, grid_size)
    with np.errstate(all="ignore"):
        vals = np.asarray(capacity_gain_index(model, phi), float)
    diffs = np.diff(vals)
    finite = bool(np.all(np.isfinite(diffs)))
    increasing = finite and bool(np.all(diffs > tol))
    decreasing = finite and bool(np.all(diffs < -tol))

    pu = _support_grid(model.f_u, grid_size, eps)
    qv = _support_grid(model.f_v, grid_size, eps)
    with np.errstate(all="ignore"):
        hu = np.asarray(model.f_u.hazard(pu), float)
        hv = np.asarray(model.f_v.hazard(qv), float)
    sup_u = float(np.max(hu)) if np.all(np.isfinite(hu)) else math.inf
    inf_v = float(np.min(hv)) if np.all(np.isfinite(hv)) else math.nan
    hazard = math.isfinite(sup_u) and math.isfinite(inf_v) and sup_u < inf_v - tol
    return ConditionReport(increasing, decreasing, hazard, tuple(float(x) for x in phi), sup_u, inf_v)
