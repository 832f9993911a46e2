"""Cross-checks of the solver stack against the independent oracles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from peerflow.config import RunConfig
from peerflow.equilibrium import SolverSettings, share_inverse, solve_equilibrium
from peerflow.errors import PeerflowError
from peerflow.market import MarketModel, Strategy
from peerflow.optimize import Regime, check_conditions, maximize_profit, maximize_welfare
from peerflow.oracle import fixed_point_equilibrium, mc_loads
from peerflow.sensitivity import (
    SensitivityReport, analytic_sensitivities, identity_drift, kappa_from_differences, ratio_finite_differences,
)

DERIVATIVE_RTOL = 1e-4
FIXED_POINT_ATOL = 1e-6
RESIDUAL_RTOL = 1e-8


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def random_strategies(model: MarketModel, rng: np.random.Generator, n: int, interior: bool = True) -> list[Strategy]:
    """Prices drawn inside the central quantile band of the value distributions, shares in (0.05, 0.95)."""
    out = []
    for _ in range(n):
        p = float(model.f_u.quantile(rng.uniform(0.05, 0.9)))
        q = float(model.f_v.quantile(rng.uniform(0.05, 0.6)))
        if interior:
            r = float(rng.uniform(0.05, 0.95))
        else:
            r = float(rng.choice([0.0, 1.0, rng.uniform(0.05, 0.95)]))
        out.append(Strategy(p, q, r))
    return out


def _interior(model, strategies, settings):
    """Pairs (strategy, equilibrium), skipping shares the paid tier cannot reach."""
    for s in strategies:
        try:
            yield s, solve_equilibrium(model, s, settings)
        except PeerflowError:
            continue


def check_residuals(model, settings, rng, n=20) -> CheckResult:
    worst, count = 0.0, 0
    for s, eq in _interior(model, random_strategies(model, rng, n, interior=False), settings):
        worst = max(worst, abs(eq.residual_h), abs(eq.residual_l))
        count += 1
    tol = RESIDUAL_RTOL * model.c
    return CheckResult("equilibrium residuals", count > 0 and worst <= tol,
                       f"max |residual| {worst:.3g} <= {tol:.3g} over {count} strategies")


def check_fixed_point(model, settings, rng, n=10) -> CheckResult:
    worst, count, failures = 0.0, 0, 0
    for s, eq in _interior(model, random_strategies(model, rng, n), settings):
        try:
            fp = fixed_point_equilibrium(model, s)
        except PeerflowError:
            failures += 1
            continue
        worst = max(worst, abs(fp.phi_h - eq.phi_h), abs(fp.phi_l - eq.phi_l))
        count += 1
    ok = count > 0 and failures == 0 and worst <= FIXED_POINT_ATOL
    return CheckResult("fixed-point agreement", ok,
                       f"max |dphi| {worst:.3g} <= {FIXED_POINT_ATOL:g} over {count} strategies, {failures} non-converged")


def _rel(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0.0 else abs(a - b) / scale


def derivative_errors(model: MarketModel, p: float, q: float, t: float, settings: SolverSettings) -> tuple[float, float, SensitivityReport]:
    """Worst relative analytic-vs-difference error (12 derivatives and K) and the identity drift."""
    rep = analytic_sensitivities(model, p, q, t, settings)
    fd = ratio_finite_differences(model, p, q, t, settings=settings)
    worst = max(_rel(getattr(rep, name), fd[name]) for name in SensitivityReport.DERIVATIVES)
    worst = max(worst, _rel(rep.kappa, kappa_from_differences(model, p, q, t, settings=settings)))
    drift = max(abs(v) for v in identity_drift(model, rep).values())
    return worst, drift, rep


def check_derivatives(model, settings, rng, n=10) -> CheckResult:
    worst, drift, count = 0.0, 0.0, 0
    for s in random_strategies(model, rng, n):
        try:
            t = share_inverse(model, s.p, s.q, s.r, settings)
            w, d, _ = derivative_errors(model, s.p, s.q, t, settings)
        except PeerflowError:
            continue
        worst, drift = max(worst, w), max(drift, d)
        count += 1
    ok = count > 0 and worst <= DERIVATIVE_RTOL and drift <= RESIDUAL_RTOL * model.c
    return CheckResult("analytic derivatives", ok,
                       f"max rel err {worst:.3g} <= {DERIVATIVE_RTOL:g}, identity drift {drift:.3g}, {count} points")


def check_monte_carlo(model, settings, rng, seed, n=3, samples=10**6) -> CheckResult:
    worst, count = 0.0, 0
    for i, (s, eq) in enumerate(_interior(model, random_strategies(model, rng, n), settings)):
        est = mc_loads(model, s.p, s.q, eq.phi_h, eq.phi_l, samples, samples, seed=seed + i)
        z_h = abs(est.d_h_hat - eq.d_h) / est.std_err_h
        z_l = abs(est.d_l_hat - eq.d_l) / est.std_err_l
        worst = max(worst, z_h, z_l)
        count += 1
    return CheckResult("monte carlo loads", count > 0 and worst <= 3.0,
                       f"max |z| {worst:.3f} <= 3 over {count} strategies")


def check_regimes(model, settings) -> CheckResult:
    cond = check_conditions(model)
    prof = maximize_profit(model, settings=settings)
    welf = maximize_welfare(model, settings=settings)
    problems = []
    if prof.regime is Regime.PURE_FREE:
        problems.append("profit optimum is pure free")
    if welf.regime is Regime.PURE_PAID:
        problems.append("welfare optimum is pure paid")
    if cond.corollary4_increasing and prof.regime is not Regime.PURE_PAID:
        problems.append("increasing capacity-gain index but profit optimum not pure paid")
    if cond.corollary6_decreasing and welf.regime is not Regime.PURE_FREE:
        problems.append("decreasing capacity-gain index but welfare optimum not pure free")
    if cond.corollary5_hazard and prof.regime is not Regime.HYBRID:
        problems.append("hazard separation but profit optimum not hybrid")
    detail = (f"profit {prof.regime.value} r={prof.strategy.r:.4g}, welfare {welf.regime.value} "
              f"r={welf.strategy.r:.4g}; increasing={cond.corollary4_increasing} "
              f"decreasing={cond.corollary6_decreasing} hazard={cond.corollary5_hazard}")
    if problems:
        detail += "; " + "; ".join(problems)
    return CheckResult("regime consistency", not problems, detail)


def run_validation(config: RunConfig, seed: int | None = None) -> list[CheckResult]:
    """All checks for the configured model; deterministic in (config, seed)."""
    seed = config.seed if seed is None else seed
    model, settings = config.model(), config.settings()
    rng = np.random.Generator(np.random.Philox(seed))
    results = [
        check_residuals(model, settings, rng),
        check_fixed_point(model, settings, rng),
        check_derivatives(model, settings, rng),
        check_monte_carlo(model, settings, rng, seed),
    ]
    try:
        results.append(check_regimes(model, settings))
    except PeerflowError as exc:
        results.append(CheckResult("regime consistency", False, f"{type(exc).__name__}: {exc}"))
    return results


def format_report(results: list[CheckResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  status  detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.detail}")
    n_fail = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_fail}/{len(results)} checks passed")
    return "\n".join(lines) + "\n"
