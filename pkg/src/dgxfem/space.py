"""Tensor Lagrange basis, the doubled (XFE) space and the kappa weights."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidThreshold
from .geometry import MEASURE_TOL, CartesianMesh, CellClass, CellPartition

logger = logging.getLogger(__name__)


class LagrangeBasis:
    """Q_p Lagrange basis on [-1, 1]^2 with equispaced nodes.

    Basis function ``k = b * (p + 1) + a`` is the product of the 1-D
    polynomials attached to x-node ``a`` and y-node ``b``.
    """

    def __init__(self, p):
        if p < 1:
            raise ValueError("polynomial degree must be at least 1")
        self.p = int(p)
        self.nodes1d = np.linspace(-1.0, 1.0, self.p + 1)
        a, b = np.meshgrid(np.arange(self.p + 1), np.arange(self.p + 1), indexing="xy")
        self._ia = a.ravel()
        self._ib = b.ravel()
        self.nodes = np.column_stack([self.nodes1d[self._ia], self.nodes1d[self._ib]])

    @property
    def size(self):
        return (self.p + 1) ** 2

    def _eval1d(self, x):
        x = np.asarray(x, dtype=float)
        xn = self.nodes1d
        m = len(xn)
        val = np.ones((x.size, m))
        der = np.zeros((x.size, m))
        for k in range(m):
            others = [j for j in range(m) if j != k]
            denom = np.prod(xn[k] - xn[others])
            fac = np.stack([x - xn[j] for j in others], axis=-1)
            val[:, k] = np.prod(fac, axis=-1) / denom
            for mm in range(len(others)):
                rest = np.delete(fac, mm, axis=-1)
                der[:, k] += np.prod(rest, axis=-1) / denom
        return val, der

    def eval(self, xi):
        xi = np.atleast_2d(xi)
        vx, _ = self._eval1d(xi[:, 0])
        vy, _ = self._eval1d(xi[:, 1])
        return vx[:, self._ia] * vy[:, self._ib]

    def grad(self, xi):
        """Reference gradients, shape ``(npoints, nbasis, 2)``."""
        xi = np.atleast_2d(xi)
        vx, dx = self._eval1d(xi[:, 0])
        vy, dy = self._eval1d(xi[:, 1])
        return np.stack([dx[:, self._ia] * vy[:, self._ib], vx[:, self._ia] * dy[:, self._ib]], axis=-1)


class MonomialBasis:
    """Monomials in coordinates shifted and scaled to the bounding box of ``points``.

    ``kind="P"`` spans total degree <= p, ``kind="Q"`` degree <= p in each
    variable. The box scaling keeps Gram matrices on thin sub-cells well
    conditioned without changing the span.
    """

    def __init__(self, points, p, kind="P"):
        if kind not in ("P", "Q"):
            raise ValueError("kind must be 'P' or 'Q'")
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        self.center = 0.5 * (lo + hi)
        self.half = np.maximum(0.5 * (hi - lo), 1e-300)
        if kind == "P":
            exps = [(a, b) for a in range(p + 1) for b in range(p + 1 - a)]
        else:
            exps = [(a, b) for a in range(p + 1) for b in range(p + 1)]
        self.exps = np.array(exps)
        self.p = int(p)
        self.kind = kind

    @property
    def size(self):
        return len(self.exps)

    def _z(self, x):
        return (np.atleast_2d(x) - self.center) / self.half

    def eval(self, x):
        z = self._z(x)
        ex = self.exps
        return z[:, None, 0] ** ex[None, :, 0] * z[:, None, 1] ** ex[None, :, 1]

    def grad(self, x):
        """Physical gradients, shape ``(npoints, nbasis, 2)``."""
        z = self._z(x)
        ex = self.exps
        zx, zy = z[:, None, 0], z[:, None, 1]
        ax, ay = ex[None, :, 0], ex[None, :, 1]
        dx = np.where(ax > 0, ax * zx ** np.maximum(ax - 1, 0), 0.0) * zy ** ay / self.half[0]
        dy = zx ** ax * np.where(ay > 0, ay * zy ** np.maximum(ay - 1, 0), 0.0) / self.half[1]
        return np.stack([dx, dy], axis=-1)


@dataclass
class XfeSpace:
    """Degrees of freedom of V_h^1 + V_h^2 on the background mesh.

    ``dof[i - 1, node]`` is the global index of the side-``i`` copy of a
    mesh node, or -1 when no cell around the node has a side-``i`` part.
    """

    mesh: CartesianMesh
    p: int
    basis: LagrangeBasis
    cell_nodes: np.ndarray
    node_coords: np.ndarray
    dof: np.ndarray
    ndof: int
    boundary_nodes: np.ndarray

    @property
    def nnodes(self):
        return len(self.node_coords)

    def cell_dofs(self, c, side):
        return self.dof[side - 1, self.cell_nodes[c]]

    def to_ref(self, c, x):
        o = self.mesh.cell_origin(c)
        return 2.0 * (np.asarray(x) - o) / self.mesh.h - 1.0

    def side_count(self, side):
        return int(np.count_nonzero(self.dof[side - 1] >= 0))

    @cached_property
    def dof_coords(self):
        out = np.zeros((self.ndof, 2))
        for side in (1, 2):
            act = self.dof[side - 1] >= 0
            out[self.dof[side - 1, act]] = self.node_coords[act]
        return out

    @cached_property
    def dof_side(self):
        out = np.zeros(self.ndof, dtype=int)
        for side in (1, 2):
            d = self.dof[side - 1]
            out[d[d >= 0]] = side
        return out

    def local_values(self, coeffs, c, side, points):
        """Values and physical gradients of the side-``side`` field on cell ``c``."""
        d = self.cell_dofs(c, side)
        u = np.where(d >= 0, np.asarray(coeffs)[np.maximum(d, 0)], 0.0)
        xi = self.to_ref(c, points)
        val = self.basis.eval(xi) @ u
        grd = np.einsum("qkd,k->qd", self.basis.grad(xi), u) * (2.0 / self.mesh.h)
        return val, grd


def _cell_side_measures(part: CellPartition):
    area = part.mesh.cell_area
    meas = np.zeros((part.mesh.ncells, 2))
    meas[part.classes == CellClass.PURE1, 0] = area
    meas[part.classes == CellClass.PURE2, 1] = area
    for c, cc in part.cuts.items():
        meas[c] = cc.sub_measures
    return meas


def build_space(mesh: CartesianMesh, part: CellPartition, p) -> XfeSpace:
    """Number the active (node, side) pairs: side 1 first, nodes in lexicographic order."""
    basis = LagrangeBasis(p)
    n = mesh.n
    nn1 = n * p + 1
    ci, cj = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    ci, cj = ci.ravel(), cj.ravel()
    gx = ci[:, None] * p + basis._ia[None, :]
    gy = cj[:, None] * p + basis._ib[None, :]
    cell_nodes = gy * nn1 + gx
    g = np.linspace(0.0, 1.0, nn1)
    X, Y = np.meshgrid(g, g, indexing="xy")
    node_coords = np.column_stack([X.ravel(), Y.ravel()])

    meas = _cell_side_measures(part)
    active = np.zeros((2, nn1 * nn1), dtype=bool)
    for side in (0, 1):
        cells = np.flatnonzero(meas[:, side] > MEASURE_TOL * mesh.cell_area)
        active[side, cell_nodes[cells].ravel()] = True
    dof = -np.ones((2, nn1 * nn1), dtype=np.int64)
    n1 = int(active[0].sum())
    dof[0, active[0]] = np.arange(n1)
    dof[1, active[1]] = n1 + np.arange(int(active[1].sum()))
    ndof = int(active.sum())
    onb = (np.isclose(node_coords, 0.0) | np.isclose(node_coords, 1.0)).any(axis=1)
    return XfeSpace(mesh, int(p), basis, cell_nodes, node_coords, dof, ndof, onb)


def cut_dof_blocks(space: XfeSpace, part: CellPartition):
    """Group DOFs by the cut cell that owns them, one group per (cell, side).

    A DOF is owned by the cell around its node with the smallest positive
    measure on the DOF's side; DOFs owned by pure cells are left out. On a
    small sub-cell the owned basis functions are nearly linearly dependent,
    which is what a dense block in the preconditioner undoes.
    """
    meas = _cell_side_measures(part)
    cut = np.asarray(part.cut_ids, dtype=np.int64)
    groups = {}
    for side in (1, 2):
        best = np.full(space.nnodes, np.inf)
        owner = -np.ones(space.nnodes, dtype=np.int64)
        for c in cut:
            m = meas[c, side - 1]
            if m <= 0.0:
                continue
            nodes = space.cell_nodes[c]
            upd = m < best[nodes]
            best[nodes[upd]] = m
            owner[nodes[upd]] = c
        d = space.dof[side - 1]
        for node in np.flatnonzero((owner >= 0) & (d >= 0)):
            groups.setdefault((int(owner[node]), side), []).append(int(d[node]))
    return [np.array(groups[k], dtype=np.int64) for k in sorted(groups)]


def kappa_from_ratio(ratio1, threshold):
    """Three-branch weights from the side-1 area fraction.

    Sub-cells below ``threshold`` of the cell area get weight 0, those above
    ``1 - threshold`` weight 1, the rest their area fraction.
    """
    if threshold > 0.5:
        raise InvalidThreshold(f"threshold {threshold:.4g} exceeds 1/2; the branches would overlap")
    if ratio1 < threshold:
        k1 = 0.0
    elif ratio1 > 1.0 - threshold:
        k1 = 1.0
    else:
        k1 = float(ratio1)
    return k1, 1.0 - k1


def compute_kappa(cutcell, c0, h_K):
    """Average weights (kappa1, kappa2) for one cut cell."""
    m1, m2 = cutcell.sub_measures
    return kappa_from_ratio(m1 / (m1 + m2), c0 * h_K)


def default_c0(ls, mesh: CartesianMesh):
    """``2 gamma0 gamma1`` with gamma1 the sagitta constant ``curvature / 8``."""
    return 2.0 * mesh.gamma0 * ls.curvature_bound / 8.0


@dataclass(frozen=True)
class KappaWeights:
    weights: dict
    c0: float
    threshold: float

    def __getitem__(self, c):
        return self.weights[c]


def kappa_weights(part: CellPartition, c0=None) -> KappaWeights:
    """Weights for every cut cell of a partition.

    On coarse meshes ``c0 * h_K`` can exceed 1/2; the threshold is then
    clamped to 1/2, which keeps only the larger sub-cell in the average.
    """
    mesh = part.mesh
    if c0 is None:
        c0 = default_c0(part.ls, mesh)
    tau = c0 * mesh.h_K
    if tau > 0.5:
        logger.info("kappa threshold %.3g clamped to 1/2 at h=%.4g", tau, mesh.h)
        tau = 0.5
    w = {}
    for c, cc in part.cuts.items():
        m1, m2 = cc.sub_measures
        w[c] = kappa_from_ratio(m1 / (m1 + m2), tau)
    return KappaWeights(w, float(c0), float(tau))


def interpolate(w1, w2, space: XfeSpace):
    """Nodal interpolant: side-i DOFs take the values of ``w_i`` at their nodes."""
    u = np.zeros(space.ndof)
    for side, w in ((1, w1), (2, w2)):
        d = space.dof[side - 1]
        act = d >= 0
        vals = w(space.node_coords[act]) if callable(w) else w
        u[d[act]] = vals
    return u
