"""Command line: convergence studies and inequality sweeps.

    dgxfem study [--config FILE] [--scheme sipg|nipg|lifting] [--p 1 2 3] [--n 4 8 16 32] ...
    dgxfem lab   [--config FILE] [--seed 42] [--p 1 2] [--out DIR]

Config files hold ``key = value`` lines (``#`` starts a comment, lists are
comma or space separated); flags given on the command line win.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import importlib
import logging
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import lab
from .analysis import (ErrorReport, attach_rates, broken_h1_error, jump_seminorm, l2_error,
                       lift_seminorm)
from .errors import DgxfemError
from .forms import SchemeParams, assemble
from .geometry import CartesianMesh, partition_mesh
from .linalg import solve_general, solve_spd, write_matrix_market
from .plotting import plot_study_csv, plot_sweep_csvs
from .problems import circle_case, linear_jump_case, poisson_case
from .space import build_space, kappa_weights

logger = logging.getLogger("dgxfem")

STUDY_COLUMNS = ["scheme", "p", "n", "h", "ndof", "err_L2", "err_H1", "err_jump",
                 "rate_L2", "rate_H1", "err_lift", "status"]
SCHEMES = ("sipg", "nipg", "lifting")
CASES = ("circle", "linear", "poisson", "custom")


@dataclass
class RunConfig:
    """Everything a study or lab run needs; defaults reproduce the circle experiment."""

    scheme: str = "sipg"
    p: tuple = (1, 2, 3)
    n: tuple = (4, 8, 16, 32)
    alpha1: float = 10.0
    alpha2: float = 1.0
    eta_beta: Optional[float] = None
    eta_scale: float = 20.0
    eta1: float = 1.0
    eta: float = 2.0
    beta: Optional[float] = None
    c0: Optional[float] = None
    lifting_space: str = "Q"
    case: str = "circle"
    custom: Optional[str] = None
    tol: float = 1e-12
    seed: int = 42
    samples: int = 100
    convex_samples: int = 250
    out: str = "results"
    dump_vtk: bool = False
    dump_matrix: bool = False

    def validate(self, need_rates=True):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.case not in CASES:
            raise ValueError(f"case must be one of {CASES}")
        if self.case == "custom" and not self.custom:
            raise ValueError("case=custom needs custom=module:function")
        if not self.p or min(self.p) < 1:
            raise ValueError("polynomial degrees must be >= 1")
        ns = list(self.n)
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("mesh sizes must be strictly increasing")
        if need_rates and len(ns) > 1 and any(k & (k - 1) for k in ns):
            raise ValueError("mesh sizes must be powers of 2 when rates are requested")
        return self

    def scheme_params(self):
        if self.scheme == "lifting":
            return SchemeParams.lifting(self.eta1, self.eta, lifting_space=self.lifting_space)
        beta = self.beta if self.beta is not None else (1.0 if self.scheme == "sipg" else -1.0)
        return SchemeParams("ip", beta, self.eta_beta, eta_scale=self.eta_scale)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _convert(name, raw):
    default = _FIELDS[name].default
    if isinstance(raw, str):
        raw = raw.strip()
    if isinstance(default, tuple):
        items = raw.replace(",", " ").split() if isinstance(raw, str) else raw
        return tuple(int(x) for x in items)
    if isinstance(default, bool):
        if isinstance(raw, bool):
            return raw
        return raw.lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float) or name in ("eta_beta", "beta", "c0"):
        if isinstance(raw, str) and raw.lower() in ("", "none", "default"):
            return None
        return float(raw)
    return raw


def parse_config_text(text):
    """``key = value`` pairs; keys may use dashes or underscores."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, val)
    return values


def load_config(path=None, overrides=None):
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text()))
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = _convert(k, v)
    return RunConfig(**values)


def problem_for(config: RunConfig):
    if config.case == "circle":
        return circle_case(config.alpha1, config.alpha2)
    if config.case == "linear":
        return linear_jump_case(config.alpha1, config.alpha2)
    if config.case == "poisson":
        return poisson_case(config.alpha2)
    module, _, attr = config.custom.partition(":")
    factory = getattr(importlib.import_module(module), attr)
    return factory(config.alpha1, config.alpha2)


def solve_case(config: RunConfig, p, n, ls=None, problem=None):
    """Assemble and solve one mesh; returns ``(coeffs, report, context)``."""
    if ls is None:
        ls, problem = problem_for(config)
    params = config.scheme_params()
    mesh = CartesianMesh(n)
    part = partition_mesh(mesh, ls, 2 * p + 4)
    space = build_space(mesh, part, p)
    kap = kappa_weights(part, config.c0)
    system = assemble(space, part, kap, problem, params)
    if config.scheme == "nipg":
        x, rep = solve_general(system, tol=config.tol)
    else:
        x, rep = solve_spd(system, tol=config.tol)
    ctx = dict(mesh=mesh, part=part, space=space, kappa=kap, system=system, params=params,
               problem=problem, ls=ls)
    return x, rep, ctx


def _study_row(config, p, n, ls, problem, out):
    h = 1.0 / n
    row = ErrorReport(config.scheme, p, n, h, 0)
    try:
        x, rep, ctx = solve_case(config, p, n, ls, problem)
    except DgxfemError as exc:
        logger.warning("p=%d n=%d failed: %s", p, n, exc)
        row.status = f"failed:{type(exc).__name__}"
        return row
    space, part, kap, params = ctx["space"], ctx["part"], ctx["kappa"], ctx["params"]
    alpha = (problem.alpha1, problem.alpha2)
    row.ndof = space.ndof
    row.err_L2 = l2_error(x, problem.exact, space, part)
    row.err_H1 = broken_h1_error(x, problem.exact, space, part, alpha)
    row.err_jump = jump_seminorm(x, space, part, params.penalty(p, problem), problem.g_d)
    if config.scheme == "lifting":
        row.err_lift = lift_seminorm(x, space, part, kap, alpha, params.eta, problem.g_d,
                                     params.lifting_space)
    row.extra = {"iterations": rep.iterations, "residual": rep.residual}
    logger.info("%s p=%d n=%d ndof=%d L2=%.3e H1=%.3e (%d its)", config.scheme, p, n,
                space.ndof, row.err_L2, row.err_H1, rep.iterations)
    stem = f"{config.scheme}_p{p}_n{n}"
    if config.dump_matrix:
        write_matrix_market(ctx["system"], out / f"{stem}.mtx")
    if config.dump_vtk:
        write_vtk(out / f"{stem}.vtk", x, space, part)
    return row


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def write_study_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STUDY_COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in STUDY_COLUMNS])


def run_study(config: RunConfig):
    """Convergence study over ``config.p`` x ``config.n``; writes CSV and SVG plots.

    Returns the list of :class:`ErrorReport` rows (failed rows carry a
    ``failed:...`` status).
    """
    config.validate(need_rates=True)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    ls, problem = problem_for(config)
    rows = []
    for p in config.p:
        for n in config.n:
            rows.append(_study_row(config, p, n, ls, problem, out))
    attach_rates(rows)
    csv_path = out / f"study_{config.scheme}.csv"
    write_study_csv(rows, csv_path)
    plot_study_csv(csv_path)
    return rows


def write_vtk(path, coeffs, space, part):
    """Legacy ASCII VTK point cloud of ``u_h`` at the quadrature points of every sub-cell."""
    pts, vals, sides = [], [], []
    mesh = space.mesh
    for c in range(mesh.ncells):
        for side in (1, 2):
            if c in part.cuts:
                rule = part.cuts[c].quad(side)
                if rule is None:
                    continue
                xs = rule.points
            elif int(part.classes[c]) == side:
                x0, y0, x1, y1 = mesh.cell_bounds(c)
                g = np.array([0.25, 0.75])
                X, Y = np.meshgrid(x0 + g * (x1 - x0), y0 + g * (y1 - y0), indexing="ij")
                xs = np.column_stack([X.ravel(), Y.ravel()])
            else:
                continue
            v, _ = space.local_values(coeffs, c, side, xs)
            pts.append(xs)
            vals.append(v)
            sides.append(np.full(len(xs), side))
    P = np.concatenate(pts)
    V = np.concatenate(vals)
    S = np.concatenate(sides)
    lines = ["# vtk DataFile Version 3.0", "u_h sampled per sub-element", "ASCII",
             "DATASET POLYDATA", f"POINTS {len(P)} double"]
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in P]
    lines.append(f"VERTICES {len(P)} {2 * len(P)}")
    lines += [f"1 {k}" for k in range(len(P))]
    lines += [f"POINT_DATA {len(P)}", "SCALARS u_h double 1", "LOOKUP_TABLE default"]
    lines += [f"{v:.17g}" for v in V]
    lines += ["SCALARS side int 1", "LOOKUP_TABLE default"]
    lines += [str(int(s)) for s in S]
    Path(path).write_text("\n".join(lines) + "\n")


def run_lab(config: RunConfig):
    """All five inequality sweeps for every degree in ``config.p``; returns the written CSV paths."""
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    offsets = lab.degeneracy_offsets(config.samples)
    written = []
    summary = []

    def emit(report, stem):
        path = out / f"{stem}.csv"
        report.to_csv(path)
        written.append(path)
        summary.append((stem, report.max, report.argmax))
        return path

    for p in config.p:
        lams = np.linspace(0.05, 1.0, 20)
        emit(lab.SweepReport("norm_equiv_1d", lams, [lab.norm_equiv_1d(p, x) for x in lams]),
             f"norm_equiv_1d_p{p}")
        emit(lab.SweepReport("homothety", lams, [lab.homothety_constant(p, x) for x in lams]),
             f"homothety_p{p}")
        for shape in ("line", "convex", "concave"):
            files = [emit(lab.kappa_trace_sweep(p, offsets, shape, weighted=w, c0=_lab_c0(config)),
                          f"kappa_trace_{shape}_{'weighted' if w else 'unweighted'}_p{p}")
                     for w in (True, False)]
            plot_sweep_csvs(files, out / f"kappa_trace_{shape}_p{p}.svg",
                            f"kappa-weighted vs unweighted trace ratio ({shape} cut, p={p})",
                            logx=True)
            f = emit(lab.lifting_bound_check(p, offsets, shape, c0=_lab_c0(config),
                                             kind=config.lifting_space),
                     f"lifting_bound_{shape}_p{p}")
            plot_sweep_csvs([f], out / f"lifting_bound_{shape}_p{p}.svg",
                            f"lifting constant ({shape} cut, p={p})", logx=True, logy=False)
        rng = np.random.default_rng([config.seed, p, 1])
        inv, tr = lab.convex_inverse_sweep(p, config.convex_samples, rng)
        emit(inv, f"convex_inverse_p{p}")
        emit(tr, f"convex_trace_p{p}")
        rng = np.random.default_rng([config.seed, p, 2])
        emit(lab.trace_ineq_check(p, config.samples, rng), f"trace_inequality_p{p}")

    spath = out / "lab_summary.csv"
    with open(spath, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sweep", "max_ratio", "argmax_parameter"])
        for name, mx, arg in summary:
            w.writerow([name, repr(mx), repr(arg)])
    written.append(spath)
    return written


def _lab_c0(config):
    return lab.SWEEP_C0 if config.c0 is None else config.c0


def build_parser():
    ap = argparse.ArgumentParser(prog="dgxfem", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="key = value configuration file")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--p", nargs="+", type=int, help="polynomial degrees")
        sp.add_argument("--c0", type=float, help="kappa threshold constant")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--lifting-space", dest="lifting_space", choices=("P", "Q"),
                        help="lifting polynomials: Q (default) or total degree P")

    st = sub.add_parser("study", help="convergence study on a sequence of meshes")
    common(st)
    st.add_argument("--scheme", choices=SCHEMES)
    st.add_argument("--n", nargs="+", type=int, help="cells per side, e.g. 4 8 16 32")
    st.add_argument("--alpha1", type=float)
    st.add_argument("--alpha2", type=float)
    st.add_argument("--eta-beta", dest="eta_beta", type=float, help="interior penalty")
    st.add_argument("--eta-scale", dest="eta_scale", type=float,
                    help="default penalty is eta_scale * p^2 * max(alpha)")
    st.add_argument("--eta1", type=float, help="jump penalty of the lifting scheme")
    st.add_argument("--eta", type=float, help="lifting penalty")
    st.add_argument("--beta", type=float, help="symmetry parameter of the IP scheme")
    st.add_argument("--case", choices=CASES)
    st.add_argument("--custom", help="module:function returning (level_set, problem)")
    st.add_argument("--tol", type=float, help="solver tolerance")
    st.add_argument("--dump-vtk", dest="dump_vtk", action="store_true", default=None)
    st.add_argument("--dump-matrix", dest="dump_matrix", action="store_true", default=None)

    lb = sub.add_parser("lab", help="inequality sweeps")
    common(lb)
    lb.add_argument("--samples", type=int, help="points per degeneracy sweep")
    lb.add_argument("--convex-samples", dest="convex_samples", type=int)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    opts = {k: v for k, v in vars(args).items()
            if k in _FIELDS and v is not None}
    try:
        config = load_config(args.config, opts)
        if args.command == "study":
            t0 = time.perf_counter()
            rows = run_study(config)
            failed = [r for r in rows if r.status != "ok"]
            for r in rows:
                print(f"{r.scheme} p={r.p} n={r.n} ndof={r.ndof} L2={r.err_L2:.4e} "
                      f"H1={r.err_H1:.4e} rate_L2={r.rate_L2:.2f} rate_H1={r.rate_H1:.2f} {r.status}")
            print(f"wrote {Path(config.out) / f'study_{config.scheme}.csv'} "
                  f"({time.perf_counter() - t0:.1f} s)")
            return 2 if failed else 0
        paths = run_lab(config)
        print(f"wrote {len(paths)} CSV files to {config.out}")
        return 0
    except (ValueError, OSError) as exc:
        print(f"dgxfem: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
