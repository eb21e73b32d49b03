"""Render experiment figures from the eval stage's CSV tables.

    python figures/plot.py --kind {error_vs_r|hist|on_off|loss} --in <csv> --out <png>

Each kind consumes one table written by `nlrb eval` (or the adapt stage for
loss curves) and displays the numbers verbatim; no statistics are computed
here. Expected columns per kind:

    error_vs_r  method,r,mean_rel_error[,median_rel_error,worst10_mean_rel_error]
    hist        method,r,bin_lo,bin_hi,count
    on_off      scope,method,r,mean_rel_error
    loss        series,epoch,loss

Lines starting with '#' (config-hash headers) are skipped. An empty or
schema-mismatched input is an error and no output file is written.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

REQUIRED_COLUMNS = {
    "error_vs_r": ["method", "r", "mean_rel_error"],
    "hist": ["method", "r", "bin_lo", "bin_hi", "count"],
    "on_off": ["scope", "method", "r", "mean_rel_error"],
    "loss": ["series", "epoch", "loss"],
}


class FigureError(RuntimeError):
    pass


def read_table(path: Path, kind: str) -> list[dict]:
    if not path.exists():
        raise FigureError(f"input CSV not found: {path}")
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    if not rows:
        raise FigureError(f"input CSV {path} has no data rows")
    required = REQUIRED_COLUMNS[kind]
    have = list(rows[0].keys())
    missing = [c for c in required if c not in have]
    if missing:
        raise FigureError(
            f"input CSV {path} is missing columns {missing}; "
            f"kind {kind!r} expects {required} (got {have})"
        )
    return rows


def _new_axes():
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
    return fig, ax


def plot_error_vs_r(rows, out: Path) -> None:
    fig, ax = _new_axes()
    methods = sorted({row["method"] for row in rows})
    for method in methods:
        pts = sorted(
            ((int(r["r"]), float(r["mean_rel_error"])) for r in rows if r["method"] == method)
        )
        ax.semilogy([p[0] for p in pts], [p[1] for p in pts], marker="o", label=method)
    ax.set_xlabel("number of basis functions r")
    ax.set_ylabel("mean relative error")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)


def plot_hist(rows, out: Path) -> None:
    groups: dict[tuple[str, int], list] = {}
    for row in rows:
        groups.setdefault((row["method"], int(row["r"])), []).append(row)
    fig, axes = plt.subplots(
        1, len(groups), figsize=(4.5 * len(groups), 3.6), dpi=120, squeeze=False
    )
    for ax, ((method, r), grp) in zip(axes[0], sorted(groups.items())):
        los = [float(g["bin_lo"]) for g in grp]
        his = [float(g["bin_hi"]) for g in grp]
        counts = [int(g["count"]) for g in grp]
        widths = [hi - lo for lo, hi in zip(los, his)]
        ax.bar(los, counts, width=widths, align="edge", edgecolor="black", linewidth=0.4)
        ax.set_xscale("log")
        ax.set_xlabel("relative error")
        ax.set_ylabel("samples")
        ax.set_title(f"{method} (r={r}, N={sum(counts)})")
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)


def plot_on_off(rows, out: Path) -> None:
    fig, ax = _new_axes()
    scopes = sorted({row["scope"] for row in rows})
    methods = sorted({row["method"] for row in rows})
    width = 0.8 / len(methods)
    for j, method in enumerate(methods):
        xs, ys = [], []
        for i, scope in enumerate(scopes):
            match = [r for r in rows if r["scope"] == scope and r["method"] == method]
            if match:
                xs.append(i + j * width)
                ys.append(float(match[0]["mean_rel_error"]))
        ax.bar(xs, ys, width=width, label=method)
    ax.set_yscale("log")
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(scopes))])
    ax.set_xticklabels(scopes)
    ax.set_ylabel("mean relative error")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)


def plot_loss(rows, out: Path) -> None:
    fig, ax = _new_axes()
    series = sorted({row["series"] for row in rows})
    for name in series:
        pts = sorted(
            ((int(r["epoch"]), float(r["loss"])) for r in rows if r["series"] == name)
        )
        ax.semilogy([p[0] for p in pts], [p[1] for p in pts], label=name)
    ax.set_xlabel("epoch")
    ax.set_ylabel("online loss")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)


PLOTTERS = {
    "error_vs_r": plot_error_vs_r,
    "hist": plot_hist,
    "on_off": plot_on_off,
    "loss": plot_loss,
}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kind", required=True, choices=sorted(PLOTTERS))
    ap.add_argument("--in", dest="inp", required=True, help="input CSV path")
    ap.add_argument("--out", required=True, help="output image path")
    args = ap.parse_args(argv)
    try:
        rows = read_table(Path(args.inp), args.kind)
        PLOTTERS[args.kind](rows, Path(args.out))
    except FigureError as exc:
        print(f"figure error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
