"""Deterministic SVG plots of study and sweep CSV files."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
from matplotlib.figure import Figure  # noqa: E402

# fixed id salt and no date stamp: identical input gives identical bytes
matplotlib.rcParams["svg.hashsalt"] = "dgxfem"
SVG_META = {"Date": None, "Creator": None}

NORMS = (("err_L2", "L2 error"), ("err_H1", "broken H1 error"), ("err_jump", "jump seminorm"))


def _read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=SVG_META)


def plot_study_csv(csv_path, out_dir=None):
    """One log10-log10 plot per norm, error against ``1/h``, with dashed slopes ``-p`` and ``-(p+1)``.

    Returns the written paths.
    """
    csv_path = Path(csv_path)
    out_dir = csv_path.parent if out_dir is None else Path(out_dir)
    rows = [r for r in _read_rows(csv_path) if r["status"] == "ok"]
    scheme = rows[0]["scheme"] if rows else "study"
    written = []
    for key, label in NORMS:
        fig = Figure(figsize=(5.0, 4.0))
        ax = fig.add_subplot()
        for p in sorted({int(r["p"]) for r in rows}):
            sel = [r for r in rows if int(r["p"]) == p and float(r[key]) > 0]
            if not sel:
                continue
            x = [math.log10(1.0 / float(r["h"])) for r in sel]
            y = [math.log10(float(r[key])) for r in sel]
            ax.plot(x, y, "o-", label=f"p={p}")
            for slope, style in ((-p, (0, (4, 3))), (-(p + 1), (0, (1, 2)))):
                ax.plot([x[0], x[-1]], [y[-1] + slope * (x[0] - x[-1]), y[-1]],
                        linestyle=style, color="gray", linewidth=0.8)
        ax.set_xlabel("log10(1/h)")
        ax.set_ylabel(f"log10({label})")
        ax.set_title(f"{scheme}: {label} (dashed: slope -p, dotted: -(p+1))", fontsize=9)
        ax.grid(True, linewidth=0.3)
        ax.legend(fontsize=8)
        path = out_dir / f"{csv_path.stem}_{key}.svg"
        _save(fig, path)
        written.append(path)
    return written


def plot_sweep_csvs(csv_paths, out_path, title="", logx=False, logy=True):
    """Overlay ``parameter,ratio`` sweep files in one plot."""
    fig = Figure(figsize=(5.0, 4.0))
    ax = fig.add_subplot()
    for path in csv_paths:
        rows = _read_rows(path)
        x = [float(r["parameter"]) for r in rows]
        y = [float(r["ratio"]) for r in rows]
        if logy:
            pts = [(a, b) for a, b in zip(x, y) if b > 0]
            x, y = [a for a, _ in pts], [b for _, b in pts]
        ax.plot(x, y, ".-", markersize=3, linewidth=0.8, label=Path(path).stem)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel("parameter")
    ax.set_ylabel("ratio")
    ax.set_title(title, fontsize=9)
    ax.grid(True, linewidth=0.3)
    ax.legend(fontsize=7)
    _save(fig, out_path)
    return Path(out_path)
