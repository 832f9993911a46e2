import dataclasses

from peerflow.config import RunConfig
from peerflow.validate import format_report, run_validation


def test_reference_model_passes_every_check():
    results = run_validation(RunConfig(), seed=42)
    assert [r.name for r in results] == [
        "equilibrium residuals", "fixed-point agreement", "analytic derivatives",
        "monte carlo loads", "regime consistency",
    ]
    assert all(r.passed for r in results), format_report(results)


def test_loose_solver_fails_the_derivative_check():
    results = {r.name: r for r in run_validation(dataclasses.replace(RunConfig(), inner_tol=1e-2), seed=42)}
    assert not results["analytic derivatives"].passed


def test_report_is_reproducible():
    a = format_report(run_validation(RunConfig(), seed=42))
    b = format_report(run_validation(RunConfig(), seed=42))
    assert a == b
    assert a.splitlines()[-1] == "5/5 checks passed"
