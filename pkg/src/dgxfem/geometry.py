"""Background mesh, level-set interface and cut-cell geometry.

The computational domain is the unit square tiled by ``n x n`` equal squares.
The interface is the zero level set of a scalar function ``phi``; the region
``phi < 0`` is sub-domain 1 and ``phi > 0`` is sub-domain 2, so the unit
normal ``grad(phi)/|grad(phi)|`` points from 1 into 2.

A cell crossed by the interface is described by a :class:`CutGeometry`: the
two boundary crossings, the polygon each side keeps of the cell boundary, and
a parametrization of the arc as a graph over the chord joining the crossings.
:func:`build_cutcell` turns this into quadrature rules through
:mod:`dgxfem.quadrature`.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import AmbiguousCut, DegenerateSubcell, NoConvergence

logger = logging.getLogger(__name__)

ROOT_TOL = 1e-13
# |phi| below this at a sample point is treated as phi > 0 (side 2).
TIE_TOL = 1e-13
MEASURE_TOL = 1e-14


@dataclass(frozen=True)
class LevelSetInterface:
    """Vectorized level set: ``phi`` maps ``(..., 2)`` points to ``(...)``."""

    phi: Callable[[np.ndarray], np.ndarray]
    grad_phi: Callable[[np.ndarray], np.ndarray]
    curvature_bound: float = 0.0

    def side(self, x):
        """1 where ``phi < 0`` (beyond the tie tolerance), else 2."""
        return np.where(self.phi(np.asarray(x, dtype=float)) < -TIE_TOL, 1, 2)

    def normal(self, x):
        g = self.grad_phi(np.asarray(x, dtype=float))
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    @classmethod
    def circle(cls, center, radius):
        c = np.asarray(center, dtype=float)
        r2 = float(radius) ** 2

        def phi(x):
            d = np.asarray(x, dtype=float) - c
            return d[..., 0] ** 2 + d[..., 1] ** 2 - r2

        def grad(x):
            return 2.0 * (np.asarray(x, dtype=float) - c)

        return cls(phi, grad, 1.0 / float(radius))

    @classmethod
    def disk_complement(cls, center, radius):
        """Sub-domain 1 is the outside of the circle, sub-domain 2 the disk."""
        c = np.asarray(center, dtype=float)
        r2 = float(radius) ** 2

        def phi(x):
            d = np.asarray(x, dtype=float) - c
            return r2 - d[..., 0] ** 2 - d[..., 1] ** 2

        def grad(x):
            return -2.0 * (np.asarray(x, dtype=float) - c)

        return cls(phi, grad, 1.0 / float(radius))

    @classmethod
    def line(cls, point, normal):
        """Half-plane interface ``(x - point) . normal = 0``."""
        p = np.asarray(point, dtype=float)
        nv = np.asarray(normal, dtype=float)
        nv = nv / np.linalg.norm(nv)

        def phi(x):
            return (np.asarray(x, dtype=float) - p) @ nv

        def grad(x):
            x = np.asarray(x, dtype=float)
            return np.broadcast_to(nv, x.shape).copy()

        return cls(phi, grad, 0.0)

    @classmethod
    def constant(cls, value):
        """No interface at all: the whole square belongs to one side."""
        v = float(value)

        def phi(x):
            return np.full(np.shape(x)[:-1], v)

        def grad(x):
            return np.zeros(np.shape(x))

        return cls(phi, grad, 0.0)


@dataclass(frozen=True)
class CartesianMesh:
    """Uniform square mesh of the unit square with ``n`` cells per side.

    Cells are numbered ``c = j * n + i`` with ``i`` the column (x) index.
    """

    n: int

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError(f"need at least one cell per side, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def h_K(self) -> float:
        """Cell diameter."""
        return np.sqrt(2.0) * self.h

    @property
    def gamma0(self) -> float:
        # h_K^2 = 2 h^2 = 2 |K|
        return 2.0

    @property
    def ncells(self) -> int:
        return self.n * self.n

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    def cell_ij(self, c):
        return c % self.n, c // self.n

    def cell_origin(self, c):
        i, j = self.cell_ij(np.asarray(c))
        return np.stack([i * self.h, j * self.h], axis=-1)

    def cell_bounds(self, c):
        i, j = self.cell_ij(int(c))
        h = self.h
        return (i * h, j * h, (i + 1) * h, (j + 1) * h)

    def corners(self, c):
        """Corner coordinates in counter-clockwise order from the lower left."""
        x0, y0, x1, y1 = self.cell_bounds(c)
        return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])


class CellClass(enum.IntEnum):
    PURE1 = 1
    PURE2 = 2
    CUT = 3


def edge_intersection(ls: LevelSetInterface, p0, p1, tol=ROOT_TOL, maxiter=200):
    """Locate the interface crossing on the segment ``p0 -> p1``.

    Safeguarded Newton along the segment inside a shrinking bisection bracket.
    Returns ``None`` when ``phi`` does not change sign between the endpoints.
    An endpoint already within ``tol`` of the interface is returned as is.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    f0 = float(ls.phi(p0))
    f1 = float(ls.phi(p1))
    if abs(f0) < tol:
        return p0.copy()
    if abs(f1) < tol:
        return p1.copy()
    if f0 * f1 > 0:
        return None

    d = p1 - p0
    a, b = 0.0, 1.0
    fa = f0
    t = f0 / (f0 - f1)
    for _ in range(maxiter):
        x = p0 + t * d
        ft = float(ls.phi(x))
        if abs(ft) < tol:
            return x
        if (ft < 0) == (fa < 0):
            a, fa = t, ft
        else:
            b = t
        if b - a <= 4 * np.finfo(float).eps:
            return x
        slope = float(ls.grad_phi(x) @ d)
        tn = t - ft / slope if slope != 0.0 else np.nan
        t = tn if a < tn < b else 0.5 * (a + b)
    raise NoConvergence(f"edge root not found between {p0} and {p1}")


def _perimeter_coord(bounds, x):
    """Counter-clockwise arclength position of a boundary point from the lower-left corner."""
    x0, y0, x1, y1 = bounds
    h = x1 - x0
    tol = 1e-12 * h
    px, py = x
    if abs(py - y0) <= tol and px < x1 - tol:
        return px - x0
    if abs(px - x1) <= tol and py < y1 - tol:
        return h + (py - y0)
    if abs(py - y1) <= tol and px > x0 + tol:
        return 2 * h + (x1 - px)
    return 3 * h + (y1 - py)


def _perimeter_point(bounds, s):
    x0, y0, x1, y1 = bounds
    h = x1 - x0
    s = s % (4 * h)
    if s < h:
        return np.array([x0 + s, y0])
    if s < 2 * h:
        return np.array([x1, y0 + (s - h)])
    if s < 3 * h:
        return np.array([x1 - (s - 2 * h), y1])
    return np.array([x0, y1 - (s - 3 * h)])


@dataclass(frozen=True)
class CutGeometry:
    """Geometry of one cell crossed once by the interface.

    ``pa`` and ``pb`` are the two boundary crossings. The arc between them is
    parametrized over the chord, ``gamma(t) = pa + t (pb - pa) + s(t) nu``,
    with ``nu`` the unit chord normal and ``s(t)`` solved from ``phi = 0``.
    """

    bounds: tuple
    ls: LevelSetInterface
    pa: np.ndarray
    pb: np.ndarray
    # per side: (polygon vertices CCW from P_y to P_x, arc reversed?)
    _polys: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def h(self):
        return self.bounds[2] - self.bounds[0]

    @property
    def chord(self):
        return self.pb - self.pa

    @property
    def chord_normal(self):
        c = self.chord
        return np.array([-c[1], c[0]]) / np.linalg.norm(c)

    def arc_offset(self, t, tol=ROOT_TOL, maxiter=60):
        """Signed distance ``s(t)`` of the arc from the chord."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        base = self.pa[None, :] + t[:, None] * self.chord[None, :]
        nu = self.chord_normal
        s = np.zeros_like(t)
        for _ in range(maxiter):
            x = base + s[:, None] * nu
            f = self.ls.phi(x)
            if np.all(np.abs(f) < tol):
                return s
            g = self.ls.grad_phi(x) @ nu
            # converged points stay put; zero slopes are left to the bisection below
            m = (np.abs(f) >= tol) & (g != 0.0)
            s[m] -= f[m] / g[m]
        x = base + s[:, None] * nu
        bad = np.abs(self.ls.phi(x)) >= tol
        for k in np.flatnonzero(bad):
            s[k] = self._offset_bisect(base[k], nu, tol)
        return s

    def _offset_bisect(self, base, nu, tol):
        # search each side of the chord separately and keep the nearest crossing
        # inside the cell
        span = self.h
        x0, y0, x1, y1 = self.bounds
        eps = 1e-12 * span
        roots = []
        for end in (span, -span):
            x = edge_intersection(self.ls, base, base + end * nu, tol=tol)
            if x is not None and x0 - eps <= x[0] <= x1 + eps and y0 - eps <= x[1] <= y1 + eps:
                roots.append(float((x - base) @ nu))
        if not roots:
            raise AmbiguousCut("arc is not a graph over its chord")
        return min(roots, key=abs)

    def arc(self, t):
        """Arc points and tangents ``(gamma(t), gamma'(t))`` for ``t`` in [0, 1]."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        s = self.arc_offset(t)
        nu = self.chord_normal
        c = self.chord
        x = self.pa[None, :] + t[:, None] * c[None, :] + s[:, None] * nu[None, :]
        g = self.ls.grad_phi(x)
        ds = -(g @ c) / (g @ nu)
        return x, c[None, :] + ds[:, None] * nu[None, :]

    def polygon(self, side):
        """Straight-sided part of the side's boundary.

        Returns ``(vertices, reversed)``: the vertices run counter-clockwise
        from ``P_y`` to ``P_x`` along the cell boundary, and the region is
        closed by the arc from ``P_x`` back to ``P_y``. ``reversed`` tells
        whether that arc runs from ``pb`` to ``pa``.
        """
        if side in self._polys:
            return self._polys[side]
        sa = _perimeter_coord(self.bounds, self.pa)
        sb = _perimeter_coord(self.bounds, self.pb)
        per = 4 * self.h
        # sample the boundary path pa -> pb (CCW) and decide whose side it is
        span = (sb - sa) % per
        probes = np.array([_perimeter_point(self.bounds, sa + f * span) for f in (0.25, 0.5, 0.75)])
        vals = self.ls.phi(probes)
        k = int(np.argmax(np.abs(vals)))
        path_side = 1 if vals[k] < 0 else 2
        if path_side == side:
            py, px, rev = self.pa, self.pb, True
            s_start, length = sa, span
        else:
            py, px, rev = self.pb, self.pa, False
            s_start, length = sb, (per - span) % per
        tol = 1e-12 * self.h
        verts = [py]
        corners = []
        x0, y0, x1, y1 = self.bounds
        for c in ((x0, y0), (x1, y0), (x1, y1), (x0, y1)):
            c = np.array(c)
            rel = (_perimeter_coord(self.bounds, c) - s_start) % per
            if tol < rel < length - tol:
                corners.append((rel, c))
        corners.sort(key=lambda item: item[0])
        verts.extend(c for _, c in corners)
        verts.append(px)
        out = (np.array(verts), rev)
        self._polys[side] = out
        return out


@dataclass(frozen=True)
class CutCell:
    """Geometric record of one cell, cut or pure.

    ``quad1``/``quad2`` are physical rules over the parts in sub-domains 1
    and 2 (``None`` when that part is empty); ``quad_e`` integrates over the
    interface piece and carries the unit normals ``n1``.
    """

    cell_id: int
    cls: CellClass
    bounds: tuple
    edge_intersections: np.ndarray
    sub_measures: tuple
    interface_length: float
    quad1: object = None
    quad2: object = None
    quad_e: object = None
    geometry: Optional[CutGeometry] = None

    def quad(self, side):
        return self.quad1 if side == 1 else self.quad2

    @property
    def measure(self):
        return self.sub_measures[0] + self.sub_measures[1]


def _scan_cell(mesh: CartesianMesh, ls: LevelSetInterface, c, samples=4):
    """Classify a cell and collect its boundary crossings."""
    corners = mesh.corners(c)
    h = mesh.h
    ts = np.linspace(0.0, 1.0, samples + 1)
    points = []
    for k in range(4):
        p0, p1 = corners[k], corners[(k + 1) % 4]
        xs = p0[None, :] + ts[:, None] * (p1 - p0)[None, :]
        sides = ls.side(xs)
        for m in range(samples):
            if sides[m] != sides[m + 1]:
                x = edge_intersection(ls, xs[m], xs[m + 1])
                if x is not None:
                    points.append(x)
    unique = []
    for x in points:
        if all(np.linalg.norm(x - u) > 1e-12 * h for u in unique):
            unique.append(x)

    g = np.linspace(0.0, 1.0, samples + 1)
    gx, gy = np.meshgrid(g, g, indexing="ij")
    x0, y0, _, _ = mesh.cell_bounds(c)
    grid = np.stack([x0 + h * gx.ravel(), y0 + h * gy.ravel()], axis=-1)
    vals = ls.phi(grid)

    if len(unique) == 2:
        return CellClass.CUT, np.array(unique)
    if len(unique) > 2:
        raise AmbiguousCut(f"cell {c}: {len(unique)} interface crossings; refine the mesh")
    strict = vals[np.abs(vals) >= TIE_TOL]
    if strict.size == 0 or (np.all(strict < 0) != np.all(strict > 0)):
        if strict.size and np.all(strict < 0):
            return CellClass.PURE1, np.zeros((0, 2))
        return CellClass.PURE2, np.zeros((0, 2))
    raise AmbiguousCut(f"cell {c}: both signs inside but {len(unique)} boundary crossings")


def classify_cell(mesh: CartesianMesh, ls: LevelSetInterface, cell_id, samples=4) -> CellClass:
    """Pure1, Pure2 or Cut; raises :class:`AmbiguousCut` for unresolved cells."""
    return _scan_cell(mesh, ls, int(cell_id), samples)[0]


def _make_geometry(bounds, ls, pts, cell_id):
    geom = CutGeometry(bounds, ls, pts[0], pts[1])
    chord = np.linalg.norm(geom.chord)
    dev = np.max(np.abs(geom.arc_offset(np.linspace(0, 1, 9))))
    if dev > 0.5 * chord:
        logger.warning("cell %d: arc deviates %.3g from a chord of %.3g; mesh may be too coarse",
                       cell_id, dev, chord)
    return geom


def cut_geometry(mesh: CartesianMesh, ls: LevelSetInterface, cell_id, samples=4):
    """The :class:`CutGeometry` of a cell, or ``None`` for a pure cell."""
    cls, pts = _scan_cell(mesh, ls, int(cell_id), samples)
    if cls != CellClass.CUT:
        return None
    return _make_geometry(mesh.cell_bounds(cell_id), ls, pts, int(cell_id))


def build_cutcell(mesh: CartesianMesh, ls: LevelSetInterface, cell_id, quad_order, samples=4):
    """Classify one cell and build its quadrature rules."""
    from . import quadrature

    cell_id = int(cell_id)
    cls, pts = _scan_cell(mesh, ls, cell_id, samples)
    bounds = mesh.cell_bounds(cell_id)
    area = mesh.cell_area
    if cls != CellClass.CUT:
        rule = quadrature.cell_rule(bounds, quad_order)
        if cls == CellClass.PURE1:
            return CutCell(cell_id, cls, bounds, pts, (area, 0.0), 0.0, quad1=rule)
        return CutCell(cell_id, cls, bounds, pts, (0.0, area), 0.0, quad2=rule)

    geom = _make_geometry(bounds, ls, pts, cell_id)
    rules = []
    for side in (1, 2):
        try:
            rules.append(quadrature.curved_subcell_rule(geom, side, quad_order))
        except DegenerateSubcell:
            rules.append(None)
    m1 = float(rules[0].weights.sum()) if rules[0] is not None else 0.0
    m2 = float(rules[1].weights.sum()) if rules[1] is not None else 0.0
    qe = quadrature.interface_rule(geom, quad_order)
    return CutCell(cell_id, cls, bounds, pts, (m1, m2), float(qe.weights.sum()),
                   quad1=rules[0], quad2=rules[1], quad_e=qe, geometry=geom)


@dataclass
class CellPartition:
    """Classification of every cell plus the cut-cell records.

    Pure cells are stored only through ``classes``; their rules are the
    reference tensor rule mapped on the fly by the assembly code.
    """

    mesh: CartesianMesh
    ls: LevelSetInterface
    classes: np.ndarray
    cuts: dict
    quad_order: int

    def cells(self, cls):
        return np.flatnonzero(self.classes == cls)

    @property
    def cut_ids(self):
        return sorted(self.cuts)

    def measure(self, side):
        """Total area of sub-domain ``side``."""
        area = self.mesh.cell_area
        pure = CellClass.PURE1 if side == 1 else CellClass.PURE2
        total = area * np.count_nonzero(self.classes == pure)
        return total + sum(cc.sub_measures[side - 1] for cc in self.cuts.values())

    def interface_length(self):
        return sum(cc.interface_length for cc in self.cuts.values())


def partition_mesh(mesh: CartesianMesh, ls: LevelSetInterface, quad_order, samples=4):
    """Classify all cells; build cut-cell rules only where needed."""
    n, h = mesh.n, mesh.h
    g = np.linspace(0.0, 1.0, samples + 1)
    ox = (np.arange(mesh.ncells) % n) * h
    oy = (np.arange(mesh.ncells) // n) * h
    gx, gy = np.meshgrid(g, g, indexing="ij")
    pts = np.stack([ox[:, None] + h * gx.ravel()[None, :],
                    oy[:, None] + h * gy.ravel()[None, :]], axis=-1)
    sides = ls.side(pts)
    classes = np.where(sides[:, 0] == 1, CellClass.PURE1, CellClass.PURE2).astype(int)
    mixed = np.flatnonzero(np.any(sides != sides[:, :1], axis=1))
    cuts = {}
    for c in mixed:
        cc = build_cutcell(mesh, ls, c, quad_order, samples)
        classes[c] = int(cc.cls)
        if cc.cls == CellClass.CUT:
            cuts[int(c)] = cc
    return CellPartition(mesh, ls, classes, cuts, quad_order)
