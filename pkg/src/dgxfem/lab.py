"""Numerical checks of the polynomial inequalities behind the stability analysis.

Every extremal ratio is a generalized eigenvalue of two Gram matrices, so
each reported value is the exact supremum over the finite-dimensional
polynomial space (up to quadrature and rounding).
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from .errors import DegeneratePolygon, DegenerateSubcell
from .forms import local_lifting
from .geometry import CartesianMesh, CellClass, LevelSetInterface, build_cutcell
from .quadrature import cell_rule, gauss_segment, polygon_area, polygon_boundary_rule, polygon_rule
from .space import MonomialBasis, kappa_from_ratio

logger = logging.getLogger(__name__)

# Cell size used for single-cell sweeps, and the default kappa constant
# (the value that the centred circle of radius sqrt(1/8) produces).
SWEEP_H = 1.0 / 32.0
SWEEP_C0 = math.sqrt(2.0)


@dataclass
class SweepReport:
    """Extremal ratios over a parameter grid."""

    name: str
    parameters: np.ndarray
    ratios: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.parameters = np.asarray(self.parameters, dtype=float)
        self.ratios = np.asarray(self.ratios, dtype=float)

    @property
    def max(self):
        return float(np.max(self.ratios))

    @property
    def argmax(self):
        """Parameter at which the maximum ratio occurs."""
        return float(self.parameters[int(np.argmax(self.ratios))])

    def to_csv(self, path=None):
        """CSV with columns ``parameter,ratio``; returned as text, written when ``path`` is set."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["parameter", "ratio"])
        for t, r in zip(self.parameters, self.ratios):
            w.writerow([repr(float(t)), repr(float(r))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _max_geneig(A, B):
    """Largest ``mu`` with ``A x = mu B x`` (``B`` symmetric positive definite)."""
    return float(sla.eigh(A, B, eigvals_only=True)[-1])


def _max_quotient(num, den):
    """Largest ``|N x|^2 / |D x|^2`` from the row blocks ``N`` and ``D``.

    Works on a QR factor of ``D`` rather than on ``D^T D``, so the
    conditioning of the mass matrix enters only once.
    """
    _, R = np.linalg.qr(den)
    Y = sla.solve_triangular(R, num.T, trans="T").T
    return float(np.linalg.norm(Y, 2) ** 2)


def _gram(vals, weights):
    return vals.T @ (weights[:, None] * vals)


def _grad_gram(grads, weights):
    return np.einsum("q,qad,qbd->ab", weights, grads, grads)


def _legendre_vander(x, p, a, b):
    """Legendre polynomials of degree <= ``p`` shifted to ``[a, b]``."""
    return np.polynomial.legendre.legvander(2.0 * (x - a) / (b - a) - 1.0, p)


def _segment_rule(p, a, b):
    seg = gauss_segment(p + 2)
    return a + 0.5 * (b - a) * (seg.points + 1.0), 0.5 * (b - a) * seg.weights


def norm_equiv_1d(p, lam, weighted=False):
    """Sharp ``C(lam, p)`` with ``||v||_(0,1) <= C ||v||_(0,lam)`` on degree-``p`` polynomials.

    ``weighted=True`` uses the weight ``x`` (the norms of ``x^(1/2) v``).
    The basis is Legendre on ``[0, lam]``, so the right-hand Gram matrix
    is (nearly) diagonal and the eigenvalue is computed accurately.
    """
    if not 0.0 < lam <= 1.0:
        raise ValueError("lam must lie in (0, 1]")
    if not 0 <= p <= 10:
        raise ValueError("p must lie in 0..10")
    grams = []
    for b in (1.0, lam):
        x, w = _segment_rule(p, 0.0, b)
        if weighted:
            w = w * x
        grams.append(_gram(_legendre_vander(x, p, 0.0, lam), w))
    return math.sqrt(_max_geneig(grams[0], grams[1]))


def _square_basis(pts, p, kind, lam):
    """Products of Legendre polynomials on ``[0, lam]^2``; total degree <= p for ``"P"``."""
    Vx = _legendre_vander(pts[:, 0], p, 0.0, lam)
    Vy = _legendre_vander(pts[:, 1], p, 0.0, lam)
    cols = [Vx[:, a] * Vy[:, b] for a in range(p + 1) for b in range(p + 1)
            if kind == "Q" or a + b <= p]
    return np.column_stack(cols)


def homothety_constant(p, lam, kind="Q"):
    """Sharp ``C`` with ``||v||_T <= C ||v||_T'`` for ``T = [0,1]^2`` and ``T' = lam T``.

    ``T'`` is the image of ``T`` under scaling about the corner at the
    origin. For tensor spaces (``kind="Q"``) this is ``norm_equiv_1d(p, lam)**2``.
    """
    if kind not in ("P", "Q"):
        raise ValueError("kind must be 'P' or 'Q'")
    grams = []
    for b in (1.0, lam):
        x, w = _segment_rule(p, 0.0, b)
        X, Y = np.meshgrid(x, x, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        grams.append(_gram(_square_basis(pts, p, kind, lam), np.outer(w, w).ravel()))
    return math.sqrt(_max_geneig(grams[0], grams[1]))


def _single_cell(ls, h=SWEEP_H, q=None, p=1):
    """Cut-cell record of ``[0, h]^2`` for the level set ``ls``."""
    mesh = CartesianMesh(int(round(1.0 / h)))
    return mesh, build_cutcell(mesh, ls, 0, 2 * p + 4 if q is None else q)


def cut_level_set(shape, t, h=SWEEP_H, radius=None):
    """Level set cutting ``[0, h]^2`` so that side 1 reaches ``x = t h`` from the left edge.

    ``"line"`` is the straight cut ``x = t h``; ``"convex"`` a disk whose
    rightmost point is ``(t h, h/2)`` (side 1 is a lens); ``"concave"`` the
    outside of a disk whose leftmost point is ``(t h, h/2)``.
    """
    R = 2.0 * h if radius is None else radius
    if shape == "line":
        return LevelSetInterface.line((t * h, 0.0), (1.0, 0.0))
    if shape == "convex":
        return LevelSetInterface.circle((t * h - R, 0.5 * h), R)
    if shape == "concave":
        return LevelSetInterface.disk_complement((t * h + R, 0.5 * h), R)
    raise ValueError(f"unknown cut shape {shape!r}")


def degeneracy_offsets(count):
    """Offsets in (0, 1) clustering at both ends, from 1e-6 to 1 - 1e-6."""
    half = count // 2
    lo = np.geomspace(1e-6, 0.5, half)
    # 0.5 closes the lower half; drop it from the upper one
    hi = 1.0 - np.geomspace(1e-6, 0.5, count - half + 1)[::-1][1:]
    return np.concatenate([lo, hi])


def _side_trace_constant(cc, side, p):
    """``max ||v||^2_e / ||v||^2_{K_side}`` over ``Q_p`` on one sub-cell."""
    rule = cc.quad(side)
    basis = MonomialBasis(rule.points, p, "Q")
    E = _gram(basis.eval(cc.quad_e.points), cc.quad_e.weights)
    M = _gram(basis.eval(rule.points), rule.weights)
    return _max_geneig(E, M)


def kappa_trace_sweep(p, offsets, shape="line", weighted=True, c0=SWEEP_C0, h=SWEEP_H):
    """Side-1 ratio ``kappa_1 h_K max ||v||^2_e / ||v||^2_{K_1}`` for each offset.

    Side 1 is the left part of the cell, a sliver for small offsets. With
    ``weighted=False`` the weight is forced to 1.
    """
    ratios = []
    hK = math.sqrt(2.0) * h
    tau = min(c0 * hK, 0.5)
    for t in offsets:
        _, cc = _single_cell(cut_level_set(shape, t, h), h, p=p)
        if cc.cls != CellClass.CUT or cc.quad1 is None:
            ratios.append(0.0)
            continue
        m1, m2 = cc.sub_measures
        k1 = kappa_from_ratio(m1 / (m1 + m2), tau)[0] if weighted else 1.0
        ratios.append(0.0 if k1 == 0.0 else k1 * hK * _side_trace_constant(cc, 1, p))
    name = f"kappa_trace_{shape}_{'weighted' if weighted else 'unweighted'}"
    return SweepReport(name, offsets, ratios, {"p": p, "c0": c0, "h": h, "threshold": tau})


def random_convex_polygon(rng, npoints=None, min_area=1e-10):
    """Convex hull of uniform points in the unit box (counter-clockwise).

    Raises :class:`DegeneratePolygon` when the hull area is below ``min_area``.
    """
    k = int(rng.integers(3, 13)) if npoints is None else int(npoints)
    pts = rng.random((k, 2))
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:
        raise DegeneratePolygon(str(exc)) from exc
    verts = pts[hull.vertices]
    if polygon_area(verts) < min_area:
        raise DegeneratePolygon(f"hull area {polygon_area(verts):.3e}")
    return verts


def inscribed_radius(verts):
    """Radius and centre of the largest disk inside a convex polygon (Chebyshev centre)."""
    v = np.asarray(verts, dtype=float)
    d = np.roll(v, -1, axis=0) - v
    nrm = np.column_stack([d[:, 1], -d[:, 0]])
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    # n . x + r <= n . v_k for every edge; maximize r
    A = np.column_stack([nrm, np.ones(len(v))])
    b = np.sum(nrm * v, axis=1)
    res = linprog([0.0, 0.0, -1.0], A_ub=A, b_ub=b, bounds=[(None, None)] * 2 + [(0, None)],
                  method="highs")
    if not res.success:
        raise DegeneratePolygon(res.message)
    return float(res.x[2]), res.x[:2]


def convex_ratios(verts, p, grad_power=2):
    """Inverse and trace ratios over ``P_p`` on a convex polygon.

    Returns ``(r^grad_power max |grad v|^2 / |v|^2, r max |v|^2_bdry / |v|^2)``
    with ``r`` the inscribed radius. ``grad_power=2`` is the scale- and
    shape-invariant form of the inverse inequality ``|grad v| <~ |v| / r``;
    ``grad_power=1`` gives the plain ``r``-weighted quotient.
    """
    r, _ = inscribed_radius(verts)
    # both quotients are rotation invariant; principal axes keep thin
    # polygons from collapsing the box-scaled monomials
    v = np.asarray(verts, dtype=float)
    v = v - v.mean(axis=0)
    _, U = np.linalg.eigh(v.T @ v)
    if np.linalg.det(U) < 0:
        U[:, 0] *= -1
    v = v @ U
    q = 2 * p + 4
    vol = polygon_rule(v, q)
    bdy = polygon_boundary_rule(v, q)
    basis = MonomialBasis(v, p, "P")
    D = np.sqrt(vol.weights)[:, None] * basis.eval(vol.points)
    G = np.sqrt(vol.weights)[:, None, None] * basis.grad(vol.points)
    G = np.concatenate([G[..., 0], G[..., 1]])
    B = np.sqrt(bdy.weights)[:, None] * basis.eval(bdy.points)
    return r ** grad_power * _max_quotient(G, D), r * _max_quotient(B, D)


def convex_inverse_sweep(p, samples, rng, max_tries=100, grad_power=2):
    """Inverse and trace ratios over random convex polygons.

    Returns two reports (gradient ratio, boundary ratio) indexed by sample.
    """
    inv, tr = [], []
    for _ in range(samples):
        for _ in range(max_tries):
            try:
                verts = random_convex_polygon(rng)
                break
            except DegeneratePolygon:
                continue
        else:
            raise DegeneratePolygon("could not draw a non-degenerate polygon")
        a, b = convex_ratios(verts, p, grad_power)
        inv.append(a)
        tr.append(b)
    idx = np.arange(samples)
    return (SweepReport("convex_inverse", idx, inv, {"p": p, "grad_power": grad_power}),
            SweepReport("convex_trace", idx, tr, {"p": p}))


def trace_ratio(cc, p, h):
    """``max ||v||^2_e / (h^-1 ||v||^2_K + h ||grad v||^2_K)`` over ``Q_p`` on the whole cell."""
    x0, y0, x1, y1 = cc.bounds
    vol = cell_rule(cc.bounds, 2 * p + 2)
    basis = MonomialBasis(np.array([[x0, y0], [x1, y1]]), p, "Q")
    M = _gram(basis.eval(vol.points), vol.weights)
    S = _grad_gram(basis.grad(vol.points), vol.weights)
    E = _gram(basis.eval(cc.quad_e.points), cc.quad_e.weights)
    return _max_geneig(E, M / h + h * S)


def random_circle_cut(rng, h=SWEEP_H, max_tries=100, p=1):
    """A cut cell ``[0, h]^2`` crossed by a random circle of radius in ``[h, 10h]``."""
    centre = np.array([0.5 * h, 0.5 * h])
    for _ in range(max_tries):
        R = h * 10.0 ** rng.uniform(0.0, 1.0)
        theta = rng.uniform(0.0, 2.0 * np.pi)
        s = rng.uniform(-0.65, 0.65) * h
        c = centre + (R + s) * np.array([np.cos(theta), np.sin(theta)])
        ls = LevelSetInterface.circle(c, R)
        try:
            _, cc = _single_cell(ls, h, p=p)
        except Exception as exc:  # ambiguous or degenerate draws are redrawn
            logger.debug("circle draw rejected: %s", exc)
            continue
        if cc.cls == CellClass.CUT and cc.quad_e is not None:
            return cc, s / h
    raise DegenerateSubcell("no admissible random circle cut found")


def trace_ineq_check(p, samples, rng, h=SWEEP_H):
    """Trace ratio over random circle cuts; the parameter is the signed offset from the centre."""
    params, ratios = [], []
    for _ in range(samples):
        cc, s = random_circle_cut(rng, h, p=p)
        params.append(s)
        ratios.append(trace_ratio(cc, p, h))
    order = np.argsort(params)
    return SweepReport("trace_inequality", np.asarray(params)[order], np.asarray(ratios)[order],
                       {"p": p, "h": h})


def lifting_constant(cc, kappa, p, kind="Q"):
    """``sup_q ||r_e(q)||_K h_K^(1/2) / ||q||_e`` over vector data on the interface.

    With ``B_i = W^(1/2) Psi_i`` the weighted traces of the side-``i``
    lifting basis and ``M_i`` its mass matrix, ``||r_e(q)||^2`` is
    ``sum_i kappa_i^2 q^T B_i M_i^-1 B_i^T q`` per vector component, so the
    supremum is a symmetric eigenvalue problem on the interface points.
    """
    qe = cc.quad_e
    sw = np.sqrt(qe.weights)
    T = np.zeros((len(qe), len(qe)))
    for side in (1, 2):
        k = kappa[side - 1]
        rule = cc.quad(side)
        if k == 0.0 or rule is None:
            continue
        basis = MonomialBasis(rule.points, p, kind)
        M = _gram(basis.eval(rule.points), rule.weights)
        B = sw[:, None] * basis.eval(qe.points)
        T += k * k * B @ np.linalg.solve(M, B.T)
    hK = math.sqrt(2.0) * (cc.bounds[2] - cc.bounds[0])
    return math.sqrt(max(np.linalg.eigvalsh(0.5 * (T + T.T))[-1], 0.0) * hK)


def lifting_ratio(cc, kappa, q, p, kind="Q"):
    """``||r_e(q)||_K h_K^(1/2) / ||q||_e`` for given data ``q`` (dense local solve)."""
    lift = local_lifting(cc, kappa, (1.0, 1.0), q, p, kind)
    num = 0.0
    for side in (1, 2):
        rule = cc.quad(side)
        if rule is None:
            continue
        r = lift.eval(side, rule.points)
        num += np.sum(rule.weights * np.sum(r * r, axis=1))
    den = np.sum(cc.quad_e.weights * np.sum(q * q, axis=1))
    hK = math.sqrt(2.0) * (cc.bounds[2] - cc.bounds[0])
    return math.sqrt(num * hK / den) if den > 0 else 0.0


def lifting_ratio_lstsq(cc, kappa, q, p, kind="Q"):
    """Same ratio as :func:`lifting_ratio`, through a QR factorization.

    With ``W^(1/2) Psi = Q R`` the lifting coefficients are
    ``R^-1 R^-T m`` for the moment vector ``m``, so ``||r|| = ||R^-T m||``
    and no mass matrix is ever formed.
    """
    qe = cc.quad_e
    num = 0.0
    for side in (1, 2):
        k = kappa[side - 1]
        rule = cc.quad(side)
        if k == 0.0 or rule is None:
            continue
        basis = MonomialBasis(rule.points, p, kind)
        _, R = np.linalg.qr(np.sqrt(rule.weights)[:, None] * basis.eval(rule.points))
        m = k * basis.eval(qe.points).T @ (qe.weights[:, None] * q)
        y = sla.solve_triangular(R, m, trans="T")
        num += np.sum(y * y)
    den = np.sum(qe.weights * np.sum(q * q, axis=1))
    hK = math.sqrt(2.0) * (cc.bounds[2] - cc.bounds[0])
    return math.sqrt(num * hK / den) if den > 0 else 0.0


def lifting_bound_check(p, offsets, shape="line", c0=SWEEP_C0, h=SWEEP_H, kind="Q"):
    """Lifting constant over a cut sweep, with kappa from the three-branch rule."""
    hK = math.sqrt(2.0) * h
    tau = min(c0 * hK, 0.5)
    ratios = []
    for t in offsets:
        _, cc = _single_cell(cut_level_set(shape, t, h), h, p=p)
        m1, m2 = cc.sub_measures
        kap = kappa_from_ratio(m1 / (m1 + m2), tau)
        ratios.append(lifting_constant(cc, kap, p, kind))
    return SweepReport(f"lifting_bound_{shape}", offsets, ratios,
                       {"p": p, "c0": c0, "h": h, "threshold": tau})


def mid_cut(shape="line", p=1, h=SWEEP_H):
    """Cut cell for the offset 1/2."""
    return _single_cell(cut_level_set(shape, 0.5, h), h, p=p)[1]
