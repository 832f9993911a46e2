"""Write the alpha, beta and c sweeps of the optimal strategies as CSV files.

    python3 scripts/reproduce_sweeps.py --out-dir sweeps --workers 4
    python3 scripts/reproduce_sweeps.py --narrow   # alpha, beta in [0.5, 2], c in [0.1, 0.4]
"""

from __future__ import annotations

import argparse
import os
import time

from peerflow.config import AXES, DEFAULT_RANGES, RunConfig
from peerflow.sweep import run_sweep, sweep_values, write_csv

NARROW_RANGES = {"alpha": (0.5, 2.0), "beta": (0.5, 2.0), "c": (0.1, 0.4)}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="base run configuration (defaults to the reference model)")
    ap.add_argument("--out-dir", default="sweeps")
    ap.add_argument("--points", type=int, default=8)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--narrow", action="store_true", help="use the narrower ranges of the acceptance suite")
    args = ap.parse_args()

    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    ranges = NARROW_RANGES if args.narrow else DEFAULT_RANGES
    os.makedirs(args.out_dir, exist_ok=True)
    for axis in AXES:
        start = time.perf_counter()
        records = run_sweep(cfg, axis, sweep_values(*ranges[axis], args.points), workers=args.workers)
        path = os.path.join(args.out_dir, f"sweep_{axis}.csv")
        write_csv(records, path)
        bad = [r.status for r in records if not r.status.startswith("ok")]
        print(f"{path}: {len(records)} points in {time.perf_counter() - start:.1f} s"
              + (f", failures {bad}" if bad else ""))


if __name__ == "__main__":
    main()
