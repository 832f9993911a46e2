"""One-parameter sweeps of the optimal strategies and their CSV form."""

from __future__ import annotations

import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from peerflow.config import RunConfig
from peerflow.errors import PeerflowError
from peerflow.objectives import evaluate
from peerflow.optimize import maximize_profit, maximize_welfare_constrained

CSV_COLUMNS = (
    "axis", "axis_value", "p_star", "q_star", "r_star", "p_circ", "q_circ",
    "U_star", "W_circ", "phi_h", "phi_l", "d_h", "d_l", "status",
)
NAN = float("nan")


@dataclass(frozen=True)
class SweepRecord:
    axis: str
    axis_value: float
    p_star: float = NAN
    q_star: float = NAN
    r_star: float = NAN
    p_circ: float = NAN
    q_circ: float = NAN
    U_star: float = NAN
    W_at_star: float = NAN
    W_circ: float = NAN
    phi_h: float = NAN
    phi_l: float = NAN
    d_h: float = NAN
    d_l: float = NAN
    status: str = "ok"

    def csv_fields(self) -> list[str]:
        out = []
        for name in CSV_COLUMNS:
            v = getattr(self, name)
            out.append(_fmt(v) if isinstance(v, float) else str(v))
        return out


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def sweep_values(start: float, stop: float, points: int) -> list[float]:
    if points < 2:
        raise ValueError("a sweep needs at least two points")
    return [float(v) for v in np.linspace(start, stop, points)]


def sweep_point(config: RunConfig, axis: str, value: float) -> SweepRecord:
    """Profit optimum, then the profit-feasible welfare optimum at the same paid share."""
    cfg = config.with_axis(axis, value)
    model, settings = cfg.model(), cfg.settings()
    try:
        prof = maximize_profit(model, settings=settings)
    except PeerflowError as exc:
        return SweepRecord(axis, value, status=f"profit-error:{type(exc).__name__}")
    p, q, r = prof.strategy.as_tuple()
    eq = prof.equilibrium
    w_star = evaluate(model, prof.strategy, settings, eq).welfare
    base = dict(
        axis=axis, axis_value=value, p_star=p, q_star=q, r_star=r, U_star=prof.profit, W_at_star=w_star,
        phi_h=eq.phi_h, phi_l=eq.phi_l, d_h=eq.d_h, d_l=eq.d_l,
    )
    try:
        p_c, q_c, rep = maximize_welfare_constrained(model, r, settings=settings, start=(p, q))
    except PeerflowError as exc:
        return SweepRecord(**base, status=f"constrained-error:{type(exc).__name__}")
    status = "ok;binding" if rep.binding else "ok"
    return SweepRecord(**base, p_circ=p_c, q_circ=q_c, W_circ=rep.welfare, status=status)


def _point_job(args):
    return sweep_point(*args)


def run_sweep(config: RunConfig, axis: str | None = None, values: list[float] | None = None,
              workers: int = 1) -> list[SweepRecord]:
    """Evaluate every sweep point; records come back in axis order whatever the worker count."""
    axis = axis or config.sweep_axis
    if values is None:
        lo, hi = config.sweep_range()
        values = sweep_values(lo, hi, config.sweep_points)
    jobs = [(config, axis, v) for v in values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_point_job, jobs))
    return [_point_job(j) for j in jobs]


def to_csv(records: list[SweepRecord]) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for rec in records:
        buf.write(",".join(rec.csv_fields()) + "\n")
    return buf.getvalue()


def write_csv(records: list[SweepRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(to_csv(records))


def read_csv(text: str) -> list[dict[str, str]]:
    lines = text.rstrip("\n").split("\n")
    header = lines[0].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[1:]]
