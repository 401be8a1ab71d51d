"""Gauss rules on reference elements and physical rules on cut cells.

Cut sub-cells are fanned from an interior anchor into straight triangles
plus one curved triangle whose outer edge is the interface arc. Each
triangle is integrated in collapsed coordinates ``x = A + s (edge(t) - A)``,
which is a polynomial of degree ``q + 1`` in ``s`` for a degree-``q``
integrand, so the ``s`` direction is always exact. Along a straight edge the
``t`` direction is exact too; along the arc it converges spectrally.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import DegenerateSubcell, UnsupportedOrder

MAX_POINTS = 20
# Extra Gauss points along curved edges, and a floor on their number.
ARC_EXTRA = 4
ARC_MIN = 10


@dataclass(frozen=True)
class QuadRule:
    """Points, positive weights and (on interfaces) unit normals."""

    points: np.ndarray
    weights: np.ndarray
    degree: int
    normals: Optional[np.ndarray] = None

    def integrate(self, values):
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))

    def __len__(self):
        return len(self.weights)


def points_for_degree(q):
    """Number of Gauss-Legendre points exact for degree ``q``."""
    return max(1, q // 2 + 1)


@lru_cache(maxsize=None)
def _leggauss(m):
    x, w = np.polynomial.legendre.leggauss(m)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gauss_segment(m) -> QuadRule:
    """Gauss-Legendre rule with ``m`` points on [-1, 1] (exact to degree 2m-1)."""
    if not 1 <= m <= MAX_POINTS:
        raise UnsupportedOrder(f"{m} Gauss points requested; supported range is 1..{MAX_POINTS}")
    x, w = _leggauss(m)
    return QuadRule(x.copy(), w.copy(), 2 * m - 1)


def gauss_square(m) -> QuadRule:
    """Tensor Gauss rule on [-1, 1]^2."""
    seg = gauss_segment(m)
    X, Y = np.meshgrid(seg.points, seg.points, indexing="ij")
    W = np.outer(seg.weights, seg.weights)
    return QuadRule(np.stack([X.ravel(), Y.ravel()], axis=-1), W.ravel(), 2 * m - 1)


def _unit_interval(m):
    seg = gauss_segment(m)
    return 0.5 * (seg.points + 1.0), 0.5 * seg.weights


def cell_rule(bounds, q) -> QuadRule:
    """Physical tensor rule on an axis-aligned square cell."""
    x0, y0, x1, y1 = bounds
    ref = gauss_square(points_for_degree(q))
    hx, hy = 0.5 * (x1 - x0), 0.5 * (y1 - y0)
    pts = np.column_stack([x0 + hx * (ref.points[:, 0] + 1), y0 + hy * (ref.points[:, 1] + 1)])
    return QuadRule(pts, ref.weights * hx * hy, q)


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def triangle_rule(a, b, c, q):
    """Collapsed-coordinate rule on the triangle ``abc`` (counter-clockwise)."""
    a, b, c = (np.asarray(v, dtype=float) for v in (a, b, c))
    s, ws = _unit_interval(points_for_degree(q + 1))
    t, wt = _unit_interval(points_for_degree(q))
    area2 = _cross(b - a, c - a)
    edge = (1 - t)[:, None] * b + t[:, None] * c
    pts = a + s[:, None, None] * (edge[None, :, :] - a)
    wts = (ws * s)[:, None] * wt[None, :] * area2
    return pts.reshape(-1, 2), wts.ravel()


def polygon_area(verts):
    v = np.asarray(verts, dtype=float)
    return 0.5 * np.sum(_cross(v, np.roll(v, -1, axis=0)))


def polygon_centroid(verts):
    v = np.asarray(verts, dtype=float)
    w = np.roll(v, -1, axis=0)
    cr = _cross(v, w)
    a = 0.5 * cr.sum()
    if abs(a) <= 1e-300:
        return v.mean(axis=0)
    return ((v + w) * cr[:, None]).sum(axis=0) / (6 * a)


def polygon_rule(verts, q) -> QuadRule:
    """Rule on a convex polygon given counter-clockwise, fanned from its centroid."""
    verts = np.asarray(verts, dtype=float)
    anchor = polygon_centroid(verts)
    pts, wts = [], []
    for k in range(len(verts)):
        p, w = triangle_rule(anchor, verts[k], verts[(k + 1) % len(verts)], q)
        pts.append(p)
        wts.append(w)
    return QuadRule(np.concatenate(pts), np.concatenate(wts), q)


def polygon_boundary_rule(verts, q) -> QuadRule:
    """Gauss rule on the edges of a polygon, with outward unit normals."""
    verts = np.asarray(verts, dtype=float)
    t, w = _unit_interval(points_for_degree(q))
    pts, wts, nrm = [], [], []
    for k in range(len(verts)):
        p0, p1 = verts[k], verts[(k + 1) % len(verts)]
        d = p1 - p0
        length = np.hypot(*d)
        pts.append(p0 + t[:, None] * d)
        wts.append(w * length)
        nrm.append(np.tile([d[1] / length, -d[0] / length], (len(t), 1)))
    return QuadRule(np.concatenate(pts), np.concatenate(wts), q, np.concatenate(nrm))


def _arc_nodes(geom, reverse, t):
    """Arc points and tangents for parameter ``t`` in the side's orientation."""
    tau = 1.0 - t if reverse else t
    x, dx = geom.arc(tau)
    return x, (-dx if reverse else dx)


def curved_subcell_rule(geom, side, target_degree) -> QuadRule:
    """Physical rule over the part of a cut cell lying in sub-domain ``side``.

    Raises :class:`DegenerateSubcell` when that part has (numerically) zero
    area. Every returned weight is positive.
    """
    q = int(target_degree)
    verts, reverse = geom.polygon(side)
    h = geom.h
    s, ws = _unit_interval(points_for_degree(q + 1))
    mt = min(MAX_POINTS, max(points_for_degree(q) + ARC_EXTRA, ARC_MIN))
    t, wt = _unit_interval(mt)
    gam, dgam = _arc_nodes(geom, reverse, t)
    # denser probe of the arc for the star-shape check; interior points only,
    # since the arc may meet its chord at a right angle (infinite slope)
    tp = (np.arange(33) + 0.5) / 33
    gam_p, dgam_p = _arc_nodes(geom, reverse, tp)

    candidates = []
    if len(verts) >= 3 and abs(polygon_area(verts)) > 1e-14 * h * h:
        candidates.append(polygon_centroid(verts))
    else:
        candidates.append(verts.mean(axis=0))
    candidates.extend(sorted((v for v in verts[1:-1]), key=lambda v: (v[0], v[1])))

    for anchor in candidates:
        rule = _fan_rule(anchor, verts, gam, dgam, gam_p, dgam_p, s, ws, t, wt, q, h)
        if rule is not None:
            break
    else:
        # not star-shaped from any candidate (e.g. two horns joined by a neck)
        rule = strip_rule(geom, side, q)

    if rule.weights.sum() < 1e-14 * h * h:
        raise DegenerateSubcell(f"side {side} has area {rule.weights.sum():.3e}")
    return rule


def _fan_rule(anchor, verts, gam, dgam, gam_p, dgam_p, s, ws, t, wt, q, h):
    tiny = 1e-14 * h * h
    pts, wts = [], []
    for k in range(len(verts) - 1):
        a2 = _cross(verts[k] - anchor, verts[k + 1] - anchor)
        if abs(a2) <= tiny:
            continue
        if a2 < 0:
            return None
        p, w = triangle_rule(anchor, verts[k], verts[k + 1], q)
        pts.append(p)
        wts.append(w)
    jac = _cross(gam - anchor, dgam)
    jac_p = _cross(gam_p - anchor, dgam_p)
    scale = np.max(np.abs(jac_p))
    if scale > tiny:
        if np.any(jac <= 0) or np.any(jac_p[1:-1] <= -1e-12 * scale):
            return None
        p = anchor + s[:, None, None] * (gam[None, :, :] - anchor)
        w = (ws * s)[:, None] * (wt * jac)[None, :]
        pts.append(p.reshape(-1, 2))
        wts.append(w.ravel())
    if not wts:
        return QuadRule(np.zeros((0, 2)), np.zeros(0), q)
    return QuadRule(np.concatenate(pts), np.concatenate(wts), q)


def _clip_halfplane(verts, normal, offset):
    """Part of a convex polygon with ``x . normal <= offset``."""
    out = []
    n = len(verts)
    for k in range(n):
        a, b = verts[k], verts[(k + 1) % n]
        fa, fb = a @ normal - offset, b @ normal - offset
        if fa <= 0:
            out.append(a)
        if fa * fb < 0:
            out.append(a + fa / (fa - fb) * (b - a))
    return np.array(out)


def _slab_exit(bounds, base, nu):
    """Parameters ``(lo, hi)`` where the lines ``base + sigma nu`` leave the box."""
    x0, y0, x1, y1 = bounds
    lo = np.full(len(base), -np.inf)
    hi = np.full(len(base), np.inf)
    for d, (a, b) in enumerate(((x0, x1), (y0, y1))):
        if abs(nu[d]) < 1e-300:
            continue
        ta = (a - base[:, d]) / nu[d]
        tb = (b - base[:, d]) / nu[d]
        lo = np.maximum(lo, np.minimum(ta, tb))
        hi = np.minimum(hi, np.maximum(ta, tb))
    return lo, hi


def strip_rule(geom, side, target_degree) -> QuadRule:
    """Rule for a sub-cell that is not star-shaped, built from strips normal to the chord.

    Over the chord, each line ``pa + t c + sigma nu`` crosses the arc once,
    so the side is the set of ``sigma`` between the arc offset ``s(t)`` and
    the cell boundary. The strips are split where those lines pass a cell
    corner. The parts of the cell beyond either end of the chord are convex
    polygons free of the interface and are fanned directly. All weights are
    positive.
    """
    q = int(target_degree)
    h = geom.h
    x0, y0, x1, y1 = geom.bounds
    square = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)
    c = geom.chord
    clen2 = c @ c
    nu = geom.chord_normal
    tau, wtau = _unit_interval(points_for_degree(q))
    mt = min(MAX_POINTS, max(points_for_degree(q) + ARC_EXTRA, ARC_MIN))
    u, wu = _unit_interval(mt)

    # which direction along nu leads into this side
    xm, _ = geom.arc(np.array([0.5]))
    g = geom.ls.grad_phi(xm)[0] @ nu
    upward = (g > 0) == (side == 2)

    tc = sorted({float((v - geom.pa) @ c / clen2) for v in square} | {0.0, 1.0})
    breaks = [x for x in tc if 0.0 <= x <= 1.0]
    pts, wts = [], []
    for ta, tb in zip(breaks[:-1], breaks[1:]):
        if tb - ta <= 1e-14:
            continue
        t = ta + (tb - ta) * u
        base = geom.pa + t[:, None] * c
        soff = geom.arc_offset(t)
        lo, hi = _slab_exit(geom.bounds, base, nu)
        a, b = (soff, hi) if upward else (lo, soff)
        span = np.maximum(b - a, 0.0)
        sig = a[:, None] + span[:, None] * tau[None, :]
        x = base[:, None, :] + sig[:, :, None] * nu
        w = ((tb - ta) * wu * span * np.sqrt(clen2))[:, None] * wtau[None, :]
        pts.append(x.reshape(-1, 2))
        wts.append(w.ravel())
    cn = c / np.sqrt(clen2)
    for normal, offset in ((cn, geom.pa @ cn), (-cn, -(geom.pb @ cn))):
        piece = _clip_halfplane(square, normal, offset)
        if len(piece) < 3 or polygon_area(piece) <= 1e-14 * h * h:
            continue
        if geom.ls.side(polygon_centroid(piece)[None, :])[0] != side:
            continue
        r = polygon_rule(piece, q)
        pts.append(r.points)
        wts.append(r.weights)
    if not wts:
        return QuadRule(np.zeros((0, 2)), np.zeros(0), q)
    w = np.concatenate(wts)
    keep = w > 0
    return QuadRule(np.concatenate(pts)[keep], w[keep], q)


def interface_rule(geom, target_degree) -> QuadRule:
    """Arclength-weighted rule on the interface piece, with normals ``n1``."""
    q = int(target_degree)
    m = min(MAX_POINTS, max(points_for_degree(q) + ARC_EXTRA, ARC_MIN))
    t, w = _unit_interval(m)
    x, dx = geom.arc(t)
    normals = geom.ls.normal(x)
    return QuadRule(x, w * np.hypot(dx[:, 0], dx[:, 1]), q, normals)
