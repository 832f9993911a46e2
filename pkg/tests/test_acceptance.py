"""Acceptance criteria 1-9 at their stated tolerances and time budgets.

Each test records a one-line verdict that the terminal summary prints (see
conftest.py); ``python3 tests/test_acceptance.py`` runs just this file.
"""

from __future__ import annotations

import itertools
import math
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from peerflow.config import RunConfig
from peerflow.equilibrium import SolverSettings, solve
from peerflow.errors import PeerflowError, UnreachableShareError
from peerflow.families import ConvexGain, Exponential, InversePowerCapacity, PowerGain, PowerLaw, Uniform
from peerflow.market import MarketModel, Strategy, loads_at
from peerflow.optimize import Objective, Regime, check_conditions, maximize_profit, maximize_welfare
from peerflow.oracle import brute_force_optimum, fixed_point_equilibrium, mc_loads
from peerflow.sensitivity import (
    SensitivityReport, analytic_sensitivities, identity_drift, kappa_from_differences, ratio_finite_differences,
)
from peerflow.sweep import run_sweep, sweep_values

VERDICTS: dict[int, str] = {}


class Verdict:
    """Times a criterion body and records PASS/FAIL with a short summary."""

    def __init__(self, number: int, budget: float):
        self.number, self.budget, self.detail = number, budget, ""

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        ok = exc_type is None and elapsed < self.budget
        why = self.detail if exc_type is None else f"{exc_type.__name__}: {str(exc).splitlines()[0][:160]}"
        VERDICTS[self.number] = (f"criterion {self.number}: {'PASS' if ok else 'FAIL'}  "
                                 f"({elapsed:.1f} s of {self.budget:g} s) {why}")
        if exc_type is None:
            assert elapsed < self.budget, f"took {elapsed:.1f} s, budget {self.budget} s"
        return False


def _rel(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0.0 else abs(a - b) / scale


COR5_MODEL = MarketModel.baseline().replace(f_u=Exponential(0.5), f_v=Uniform(0.0, 1.0))


def _random_model(rng: np.random.Generator) -> MarketModel:
    def dist():
        kind = rng.integers(3)
        if kind == 0:
            return PowerLaw(float(rng.uniform(0.2, 3.0)))
        if kind == 1:
            return Exponential(float(rng.uniform(0.3, 3.0)))
        return Uniform(0.0, float(rng.uniform(0.5, 2.0)))

    gain = PowerGain(float(rng.uniform(0.25, 4.0))) if rng.random() < 0.7 else ConvexGain(float(rng.uniform(0.5, 3.0)))
    return MarketModel(
        f_u=dist(), f_v=dist(), f_w=PowerLaw(float(rng.uniform(0.25, 4.0))) if rng.random() < 0.7 else dist(),
        gain=gain, capacity=InversePowerCapacity(float(rng.uniform(0.5, 2.0))),
        c=float(rng.uniform(0.05, 0.8)), k=0.2,
    )


def _random_strategy(model: MarketModel, rng: np.random.Generator, r: float | None = None) -> Strategy:
    p = float(model.f_u.quantile(rng.uniform(0.05, 0.9)))
    q = float(model.f_v.quantile(rng.uniform(0.05, 0.6)))
    if r is None:
        r = float(rng.uniform(0.02, 0.98))
    return Strategy(p, q, r)


# --------------------------------------------------------------------------- 1


def test_criterion_1_equilibrium_correctness():
    variants = [SolverSettings(), SolverSettings(method="bisect"), SolverSettings(phi_floor=1e-3, outer_tol=1e-12)]
    rng = np.random.Generator(np.random.Philox(1))
    with Verdict(1, 5.0) as v:
        worst_res = worst_gap = 0.0
        solved = unreachable = 0
        while solved < 200:
            model = _random_model(rng)
            r = float(rng.choice([0.0, 1.0, rng.uniform(0.02, 0.98), rng.uniform(0.02, 0.98)]))
            s = _random_strategy(model, rng, r)
            try:
                sols = [solve(model, *s.as_tuple(), settings=st) for st in variants]
            except UnreachableShareError:
                unreachable += 1
                continue
            solved += 1
            for eq in sols:
                worst_res = max(worst_res, abs(eq.residual_h) / model.c, abs(eq.residual_l) / model.c)
            for eq in sols[1:]:
                worst_gap = max(worst_gap, abs(eq.phi_h - sols[0].phi_h), abs(eq.phi_l - sols[0].phi_l))
        v.detail = (f"max residual/c {worst_res:.2e}, max variant gap {worst_gap:.2e} "
                    f"over {solved} configs ({unreachable} unreachable shares redrawn)")
        assert worst_res <= 1e-8
        assert worst_gap <= 1e-8


# --------------------------------------------------------------------------- 2


def test_criterion_2_cross_solver():
    models = [MarketModel.baseline(), MarketModel.baseline(2.0, 0.5, 0.1), MarketModel.baseline(0.5, 2.0, 0.4), COR5_MODEL]
    rng = np.random.Generator(np.random.Philox(2))
    bisect = SolverSettings(method="bisect")
    with Verdict(2, 10.0) as v:
        worst, done = 0.0, 0
        while done < 100:
            model = models[done % len(models)]
            s = _random_strategy(model, rng)
            try:
                eq = solve(model, *s.as_tuple(), settings=bisect)
            except UnreachableShareError:
                continue
            fp = fixed_point_equilibrium(model, s)
            worst = max(worst, abs(fp.phi_h - eq.phi_h), abs(fp.phi_l - eq.phi_l))
            done += 1
        v.detail = f"max |phi difference| {worst:.2e} over {done} interior strategies"
        assert worst <= 1e-6


# --------------------------------------------------------------------------- 3


def _monotone(values, direction: int) -> bool:
    d = np.diff(np.asarray(values)) * direction
    return bool(np.all(d >= 0.0))


def test_criterion_3_comparative_statics():
    models = [MarketModel.baseline(), MarketModel.baseline(2.0, 0.5, 0.1), MarketModel.baseline(0.5, 2.0, 0.4)]
    with Verdict(3, 10.0) as v:
        failures = []
        endpoint_gap = 0.0
        for i, model in enumerate(models):
            # user price: everything falls
            eqs = [solve(model, p, 0.1, 0.5) for p in np.linspace(0.05, 0.9, 20)]
            for name in ("phi_h", "phi_l", "d_h", "d_l"):
                if not _monotone([getattr(e, name) for e in eqs], -1):
                    failures.append(f"model {i}: {name} vs p")
            # paid price: the paid tier decongests, the free tier congests
            eqs = [solve(model, 0.5, q, 0.5) for q in np.linspace(0.01, 0.3, 20)]
            for name, direction in (("phi_h", -1), ("d_h", -1), ("phi_l", 1), ("d_l", 1)):
                if not _monotone([getattr(e, name) for e in eqs], direction):
                    failures.append(f"model {i}: {name} vs q")
            # capacity share
            rs = np.linspace(0.0, 1.0, 20)
            eqs = [solve(model, 0.5, 0.1, float(r)) for r in rs]
            for name, direction in (("phi_l", 1), ("d_h", 1), ("d_l", -1)):
                if not _monotone([getattr(e, name) for e in eqs], direction):
                    failures.append(f"model {i}: {name} vs r")
            for r, e in zip(rs, eqs):
                equal, full = abs(e.phi_h - e.phi_l) <= 1e-8, abs(e.phi_l - 1.0) <= 1e-8
                if equal != (r == 0.0) or full != (r == 1.0):
                    failures.append(f"model {i}: endpoint law at r={r:.3f}")
            endpoint_gap = max(endpoint_gap, abs(eqs[0].phi_h - eqs[0].phi_l), abs(eqs[-1].phi_l - 1.0))
        v.detail = f"{len(failures)} violations on 3 models x 3 grids; endpoint deviation {endpoint_gap:.1e}"
        assert not failures, failures


# --------------------------------------------------------------------------- 4


def test_criterion_4_appendix_derivatives():
    rng = np.random.Generator(np.random.Philox(4))
    grid = list(itertools.product((0.5, 1.0, 2.0), (0.5, 1.0, 2.0), (0.1, 0.2, 0.4)))
    with Verdict(4, 30.0) as v:
        worst, worst_name, drift = 0.0, "", 0.0
        for i in range(100):
            alpha, beta, c = grid[int(rng.integers(len(grid)))]
            model = MarketModel.baseline(alpha, beta, c)
            # a random point of (p, q, t) with the boundary value inside the CP value support
            t = float(rng.uniform(0.05, 0.95))
            p = float(model.f_u.quantile(rng.uniform(0.05, 0.9)))
            q = float(model.f_v.quantile(rng.uniform(0.05, 0.95))) * (1.0 - t)
            rep = analytic_sensitivities(model, p, q, t)
            fd = ratio_finite_differences(model, p, q, t, rel_step=1e-5)
            fd["kappa"] = kappa_from_differences(model, p, q, t, rel_step=1e-5)
            for name in SensitivityReport.DERIVATIVES + ("kappa",):
                e = _rel(getattr(rep, name), fd[name])
                if e > worst:
                    worst, worst_name = e, name
            drift = max(drift, max(abs(x) for x in identity_drift(model, rep).values()) / model.c)
        v.detail = f"max relative error {worst:.2e} ({worst_name}), identity drift/c {drift:.1e}, 100 points"
        assert worst <= 1e-4
        assert drift <= 1e-8


# --------------------------------------------------------------------------- 5


def test_criterion_5_regimes():
    with Verdict(5, 120.0) as v:
        bad, worst_foc = [], 0.0
        for alpha, beta, c in itertools.product((0.5, 1.0, 2.0), (0.5, 1.0, 2.0), (0.1, 0.2, 0.4)):
            model = MarketModel.baseline(alpha, beta, c)
            prof, welf = maximize_profit(model), maximize_welfare(model)
            if prof.regime is Regime.PURE_FREE:
                bad.append(f"profit pure free at {(alpha, beta, c)}")
            if welf.regime is Regime.PURE_PAID:
                bad.append(f"welfare pure paid at {(alpha, beta, c)}")
            for rep in (prof, welf):
                if rep.foc is None:
                    bad.append(f"no optimality conditions at {(alpha, beta, c)}")
                    continue
                worst_foc = max(worst_foc, rep.foc.max_abs_equality())
                if not rep.foc.inequalities_hold(1e-3):
                    bad.append(f"inequality condition violated at {(alpha, beta, c)}")
        v.detail = f"27 models, max condition residual {worst_foc:.1e}, {len(bad)} violations"
        assert not bad, bad
        assert worst_foc <= 1e-3


# --------------------------------------------------------------------------- 6


def test_criterion_6_conditional_corollaries():
    with Verdict(6, 30.0) as v:
        cond = check_conditions(COR5_MODEL)
        r_star = maximize_profit(COR5_MODEL).strategy.r
        base_cond = check_conditions(MarketModel.baseline())
        r_circ = maximize_welfare(MarketModel.baseline()).strategy.r
        v.detail = (f"hazard premise {cond.corollary5_hazard}, r* = {r_star:.4f}; baseline decreasing "
                    f"{base_cond.corollary6_decreasing}, r_circ = {r_circ:.4f}")
        assert cond.corollary5_hazard
        assert 0.01 < r_star < 0.99
        assert base_cond.corollary6_decreasing
        assert r_circ <= 0.01


# --------------------------------------------------------------------------- 7


def test_criterion_7_optimizer_vs_grid():
    models = {"baseline": MarketModel.baseline(), "a2-b0.5-c0.1": MarketModel.baseline(2.0, 0.5, 0.1),
              "exp-users": COR5_MODEL}
    with Verdict(7, 60.0) as v:
        margins = []
        for name, model in models.items():
            for objective, run in ((Objective.PROFIT, maximize_profit), (Objective.WELFARE, maximize_welfare)):
                opt = run(model)
                grid = brute_force_optimum(model, objective, grid=(50, 50, 21))
                margins.append((opt.objective - grid.value, f"{name}/{objective.value}"))
        worst = min(margins)
        v.detail = f"min (optimizer - grid) {worst[0]:.2e} at {worst[1]} over 6 runs"
        assert worst[0] >= -1e-6, margins


# --------------------------------------------------------------------------- 8


SWEEPS = {"alpha": (0.5, 2.0, 1), "beta": (0.5, 2.0, 1), "c": (0.1, 0.4, -1)}


def _rho(xs, ys) -> float:
    return float(spearmanr(xs, ys).statistic)


def test_criterion_8_trend_reproduction():
    cfg = RunConfig()
    with Verdict(8, 180.0) as v:
        problems, summary = [], []
        for axis, (lo, hi, sign) in SWEEPS.items():
            xs = sweep_values(lo, hi, 8)
            recs = run_sweep(cfg, axis, xs)
            if any(not r.status.startswith("ok") for r in recs):
                problems.append(f"{axis}: failed points {[r.status for r in recs]}")
                continue
            for field in ("r_star", "p_star", "q_star"):
                vals = [getattr(r, field) for r in recs]
                strict = all(sign * (b - a) > 0 for a, b in zip(vals, vals[1:]))
                if _rho(xs, vals) != sign or not strict:
                    problems.append(f"{axis}: {field} not strictly {'in' if sign > 0 else 'de'}creasing")
            if not all(r.p_circ < r.p_star and r.q_circ > r.q_star for r in recs):
                problems.append(f"{axis}: p_circ < p_star and q_circ > q_star fails somewhere")
            rho_pc = _rho(xs, [r.p_circ for r in recs])
            rho_ps = _rho(xs, [r.p_star for r in recs])
            if not rho_pc == -rho_ps == -sign:
                problems.append(f"{axis}: p_circ trend {rho_pc:+.2f} not opposite to p_star {rho_ps:+.2f}")
            summary.append(f"{axis} rho(p_circ)={rho_pc:+.0f}")
        v.detail = f"3 sweeps x 8 points; {', '.join(summary)}; {len(problems)} problems"
        assert not problems, problems


# --------------------------------------------------------------------------- 9


def test_criterion_9_monte_carlo():
    models = [MarketModel.baseline(), MarketModel.baseline(2.0, 2.0, 0.1), MarketModel.baseline(0.5, 0.5, 0.4), COR5_MODEL]
    rng = np.random.Generator(np.random.Philox(9))
    with Verdict(9, 60.0) as v:
        worst, done = 0.0, 0
        while done < 20:
            model = models[done % len(models)]
            s = _random_strategy(model, rng)
            try:
                eq = solve(model, *s.as_tuple())
            except PeerflowError:
                continue
            d_h, d_l = loads_at(model, s.p, s.q, eq.phi_h, eq.phi_l)
            est = mc_loads(model, s.p, s.q, eq.phi_h, eq.phi_l, n_users=10**6, n_cps=10**6, seed=done)
            for hat, ref, se in ((est.d_h_hat, d_h, est.std_err_h), (est.d_l_hat, d_l, est.std_err_l)):
                z = abs(hat - ref) / se if se > 0 else (0.0 if hat == ref else math.inf)
                worst = max(worst, z)
            done += 1
        v.detail = f"max |error|/std_err {worst:.2f} over 20 configurations x 2 tiers, n = 1e6"
        assert worst <= 3.0


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
