"""Plot the CSVs written by reproduce_sweeps.py: one column of panels per axis.

Rows show the paid share r*, the user prices (p*, p_circ) and the paid-peering
prices (q*, q_circ). Needs matplotlib (``pip install -e .[plot]``).

    python3 scripts/plot_sweeps.py --in-dir sweeps --out sweeps.png
"""

from __future__ import annotations

import argparse
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from peerflow.config import AXES  # noqa: E402
from peerflow.sweep import read_csv  # noqa: E402

LABELS = {"alpha": r"$\alpha$", "beta": r"$\beta$", "c": r"$c$"}


def load(path: str) -> dict[str, list[float]]:
    with open(path, encoding="utf-8") as fh:
        rows = read_csv(fh.read())
    return {key: [float(r[key]) for r in rows] for key in rows[0] if key not in ("axis", "status")}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--in-dir", default="sweeps")
    ap.add_argument("--out", default="sweeps.png")
    args = ap.parse_args()

    fig, axes = plt.subplots(3, len(AXES), figsize=(4 * len(AXES), 9), sharex="col")
    for j, axis in enumerate(AXES):
        data = load(os.path.join(args.in_dir, f"sweep_{axis}.csv"))
        x = data["axis_value"]
        axes[0, j].plot(x, data["r_star"], "o-", label="r*")
        axes[1, j].plot(x, data["p_star"], "o-", label="p*")
        axes[1, j].plot(x, data["p_circ"], "s--", label="p°")
        axes[2, j].plot(x, data["q_star"], "o-", label="q*")
        axes[2, j].plot(x, data["q_circ"], "s--", label="q°")
        axes[2, j].set_xlabel(LABELS[axis])
    for i, name in enumerate(("paid share", "user price", "paid-peering price")):
        axes[i, 0].set_ylabel(name)
        for ax in axes[i]:
            ax.grid(alpha=0.3)
            ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
