"""Independent cross-checks: sampled loads, a damped fixed-point solver and exhaustive grids."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from peerflow.equilibrium import Equilibrium, solve_batch
from peerflow.errors import NonConvergenceError
from peerflow.market import MarketModel, Strategy, loads_at, user_population
from peerflow.optimize import TIE_TOL, Objective, SearchBox

CHUNK = 1 << 18


@dataclass(frozen=True)
class McEstimate:
    d_h_hat: float
    d_l_hat: float
    std_err_h: float
    std_err_l: float
    n_users: int
    n_cps: int
    seed: int


def _stream(seed: int, index: int) -> np.random.Generator:
    """Philox counter-based stream; ``index`` selects a disjoint jumped substream."""
    return np.random.Generator(np.random.Philox(seed).jumped(index))


def _uniform_chunks(gen: np.random.Generator, n: int):
    done = 0
    while done < n:
        size = min(CHUNK, n - done)
        yield gen.random(size)
        done += size


def mc_loads(model: MarketModel, p: float, q: float, phi_h: float, phi_l: float,
             n_users: int = 10**6, n_cps: int = 10**6, seed: int = 0) -> McEstimate:
    """Sampled estimate of the tier loads at a given congestion pair.

    Users, CP values and CP demands come from three independent Philox
    substreams via inverse-cdf transforms and are consumed in fixed-size
    chunks, so results depend only on (seed, n_users, n_cps). Each CP picks
    the paid tier iff its value reaches the boundary value (ties go to paid).
    The standard error of each load (a product of two independent sample
    means) follows from the delta method.
    """
    if n_users < 10**4 or n_cps < 10**4:
        raise ValueError("need at least 1e4 users and 1e4 CPs")
    gain = model.gain
    g_h, g_l = float(gain.g(phi_h)), float(gain.g(phi_l))
    v_bar = q * g_h / (g_h - g_l) if g_h > g_l else math.inf

    active = 0
    for chunk in _uniform_chunks(_stream(seed, 0), n_users):
        active += int(np.count_nonzero(model.f_u.quantile(chunk) > p))
    m_hat = active / n_users
    var_m = m_hat * (1.0 - m_hat) / n_users

    s_h = s_l = ss_h = ss_l = 0.0
    for cv, cw in zip(_uniform_chunks(_stream(seed, 1), n_cps), _uniform_chunks(_stream(seed, 2), n_cps)):
        v = model.f_v.quantile(cv)
        w = model.f_w.quantile(cw)
        paid = v >= v_bar
        x_h = np.where(paid, w * g_h, 0.0)
        x_l = np.where(paid, 0.0, w * g_l)
        s_h += float(x_h.sum())
        s_l += float(x_l.sum())
        ss_h += float(np.dot(x_h, x_h))
        ss_l += float(np.dot(x_l, x_l))
    mean_h, mean_l = s_h / n_cps, s_l / n_cps
    var_h = max(ss_h / n_cps - mean_h**2, 0.0) / (n_cps - 1)
    var_l = max(ss_l / n_cps - mean_l**2, 0.0) / (n_cps - 1)

    def se(mean_x, var_x):
        return math.sqrt(mean_x**2 * var_m + m_hat**2 * var_x)

    return McEstimate(
        d_h_hat=m_hat * mean_h, d_l_hat=m_hat * mean_l,
        std_err_h=se(mean_h, var_h), std_err_l=se(mean_l, var_l),
        n_users=n_users, n_cps=n_cps, seed=seed,
    )


def fixed_point_equilibrium(model: MarketModel, strategy: Strategy, damping: float = 0.3,
                            max_iter: int = 200_000, tol: float = 1e-12, adaptive: bool = True) -> Equilibrium:
    """Damped iteration phi <- (1 - lam) phi + lam Phi(phi) on the equilibrium conditions.

    Phi inverts the capacity function on each tier: H(phi_h') = r c / D_h(phi)
    and H(phi_l') = (1 - r) c / D_l(phi). Iteration stops once the update norm
    falls below ``tol``.

    With ``adaptive`` the step lam is halved whenever the fixed-point residual
    |Phi(phi) - phi| grows and regrows by half (never beyond ``damping``) after
    three improving steps. When phi_h and phi_l nearly coincide the boundary
    value reacts violently to phi and a constant step settles into a 2-cycle.
    """
    p, q, r = strategy.as_tuple()
    if not (0.0 < r < 1.0):
        raise ValueError("the fixed-point oracle covers interior shares only")
    if not (0.0 < damping <= 1.0):
        raise ValueError("damping must lie in (0, 1]")
    cap, c = model.capacity, model.c

    def invert(target, load):
        if load <= 0.0:
            return 0.0
        return min(float(cap.h_inverse(target / load)), 1.0)

    def residual(phi):
        d_h, d_l = loads_at(model, p, q, phi[0], phi[1])
        return np.array([invert(r * c, d_h), invert((1.0 - r) * c, d_l)]) - phi

    phi = np.array([0.3, 0.6])
    lam, prev, improving = damping, math.inf, 0
    for _ in range(max_iter):
        g = residual(phi)
        rho = float(np.max(np.abs(g)))
        if not math.isfinite(rho):
            break
        if adaptive:
            if rho > prev:
                lam, improving = lam * 0.5, 0
            else:
                improving += 1
                if improving >= 3:
                    lam, improving = min(damping, lam * 1.5), 0
        prev = rho
        step = lam * g
        phi = phi + step
        if float(np.max(np.abs(step))) < tol:
            d_h, d_l = loads_at(model, p, q, phi[0], phi[1])
            g_h, g_l = model.gain.g(phi[0]), model.gain.g(phi[1])
            return Equilibrium(
                phi_h=float(phi[0]), phi_l=float(phi[1]),
                d_h=float(r * c / cap.h(phi[0])), d_l=float((1.0 - r) * c / cap.h(phi[1])),
                v_threshold=float(q * g_h / (g_h - g_l)), t=float(g_l / g_h),
                residual_h=float(d_h * cap.h(phi[0]) - r * c),
                residual_l=float(d_l * cap.h(phi[1]) - (1.0 - r) * c),
                strategy=strategy,
            )
    raise NonConvergenceError(f"fixed-point iteration with damping {damping} did not settle in {max_iter} steps")


@dataclass(frozen=True)
class GridOptimum:
    strategy: Strategy
    value: float
    n_feasible: int
    n_points: int


def brute_force_optimum(model: MarketModel, objective: Objective | str = Objective.PROFIT,
                        grid: tuple[int, int, int] = (50, 50, 21), box: SearchBox | None = None) -> GridOptimum:
    """Exhaustive maximisation over a p x q x r lattice spanning the search box.

    Infeasible lattice points are skipped; among values within the tie
    tolerance of the maximum the smallest r, then q, then p wins.
    """
    objective = Objective(objective)
    n_p, n_q, n_r = grid
    if n_p < 20 or n_q < 20 or n_r < 11:
        raise ValueError("grid must be at least 20 x 20 x 11")
    box = box or SearchBox.default(model)
    ps = np.linspace(*box.p, n_p)
    qs = np.linspace(*box.q, n_q)
    rs = np.linspace(0.0, 1.0, n_r)
    P, Q, R = np.meshgrid(ps, qs, rs, indexing="ij")
    out = solve_batch(model, P, Q, R)
    ok = out["ok"]
    if objective is Objective.PROFIT:
        val = (P - model.k) * (out["d_h"] + out["d_l"]) + Q * out["d_h"]
    else:
        m = user_population(model, ps)
        s = np.where(m > 0, np.asarray(model.f_u.surplus(ps)) / np.where(m > 0, m, 1.0), 0.0)
        val = s[:, None, None] * (out["d_h"] + out["d_l"])
    val = np.where(ok, val, -np.inf)
    best = np.max(val)
    near = np.argwhere(val >= best - TIE_TOL)
    # order candidates by r, then q, then p
    order = np.lexsort((near[:, 0], near[:, 1], near[:, 2]))
    i, j, l = near[order[0]]
    strategy = Strategy(float(ps[i]), float(qs[j]), float(rs[l]))
    return GridOptimum(strategy, float(val[i, j, l]), int(ok.sum()), int(ok.size))
