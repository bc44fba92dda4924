#!/usr/bin/env python3
"""
Plot an emitted table to PNG.

Accepts either a curve CSV (arg,value,kind) from `modexp exponents` /
`modexp multidim`, or a bounds table (rho,lower,upper,rate,branch) from
`modexp bounds`. Bounds are drawn against log rho, upper solid and lower
dashed.

Usage:
    python scripts/plot_curves.py bounds.csv -o bounds.png
"""
from __future__ import annotations
import argparse
import csv
import sys
from pathlib import Path

import matplotlib as mpl
mpl.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))
from modexp.curves import parse_curves  # noqa: E402
from modexp.utils import parse_extended  # noqa: E402

RC = {
    "font.family": "serif",
    "axes.labelsize": 10,
    "font.size": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (5.5, 3.4),
}


def plot_bounds(text: str, ax) -> None:
    rows = list(csv.DictReader(text.splitlines()))
    rho = [parse_extended(r["rho"]) for r in rows]
    ax.plot(rho, [parse_extended(r["upper"]) for r in rows], "k-", label="upper")
    ax.plot(rho, [parse_extended(r["lower"]) for r in rows], "k--", label="lower")
    ax.set_xscale("log")
    ax.set_xlabel(r"$\rho$")
    ax.set_ylabel("exponent")


def plot_curves(text: str, ax) -> None:
    for kind, curve in parse_curves(text).items():
        ax.plot(curve.args, curve.values, label=kind)
    ax.set_xlabel("argument")
    ax.set_ylabel("exponent")


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    p.add_argument("table")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--ymax", type=float, default=None, help="clip the y axis (curves may contain +inf)")
    args = p.parse_args()

    text = Path(args.table).read_text(encoding="utf-8")
    header = text.splitlines()[0].split(",") if text else []
    mpl.rcParams.update(RC)
    fig, ax = plt.subplots()
    if header[:3] == ["rho", "lower", "upper"]:
        plot_bounds(text, ax)
    else:
        plot_curves(text, ax)
    if args.ymax is not None:
        ax.set_ylim(top=args.ymax)
    ax.legend(frameon=False)
    fig.tight_layout()
    out = args.output or str(Path(args.table).with_suffix(".png"))
    fig.savefig(out, dpi=150)
    print(out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
