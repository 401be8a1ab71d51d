"""Assembly of the interior-penalty and lifting-stabilized XFE schemes.

On a cut cell the two copies of the local basis are stacked, side 1 first.
With ``N`` the basis values and ``G.n`` the normal derivatives at an
interface point, the jump and the weighted flux average act on the stacked
coefficients through the rows

    J = [N, -N]                          ([v] = J v * n1)
    F = [k1 a1 G.n, k2 a2 G.n]           ({a grad v}.n1 = F v)

and the interface part of the bilinear form is
``-J^T W F - beta F^T W J + (eta/h_K) J^T W J`` with ``W`` the quadrature
weights. The lifting penalty adds, per side with non-zero weight,
``eta a_i k_i^2 sum_c R_c^T M^-1 R_c`` where ``M`` is the sub-cell mass
matrix of the lifting space and ``R_c`` the interface moments of ``J n_c``.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import IllConditionedMass
from .geometry import CellClass, CellPartition
from .linalg import SparseSystem, apply_dirichlet, csr_from_triplets
from .quadrature import gauss_square, points_for_degree
from .space import KappaWeights, MonomialBasis, XfeSpace, cut_dof_blocks

logger = logging.getLogger(__name__)

MASS_COND_LIMIT = 1e14


@dataclass(frozen=True)
class ExactSolution:
    """Per-side closed forms ``u_i``, ``grad u_i`` and (optionally) ``lap u_i``."""

    u1: Callable
    u2: Callable
    grad1: Callable
    grad2: Callable
    lap1: Optional[Callable] = None
    lap2: Optional[Callable] = None

    def value(self, side, x):
        return (self.u1 if side == 1 else self.u2)(x)

    def grad(self, side, x):
        return (self.grad1 if side == 1 else self.grad2)(x)


@dataclass(frozen=True)
class ProblemData:
    """Coefficients and data of the interface problem.

    ``g_n(x, n1)`` is the flux-jump datum ``[a grad u]`` and ``g_d(x)`` the
    scalar solution jump ``u1 - u2``; the vector jump datum is ``g_d n1``.
    ``dirichlet1``/``dirichlet2`` give boundary values for each side's copy
    (``None`` means homogeneous).
    """

    alpha1: float
    alpha2: float
    f1: Callable
    f2: Callable
    g_n: Callable
    g_d: Callable
    dirichlet1: Optional[Callable] = None
    dirichlet2: Optional[Callable] = None
    exact: Optional[ExactSolution] = None

    def __post_init__(self):
        if not (self.alpha1 > 0 and self.alpha2 > 0):
            raise ValueError("diffusion coefficients must be positive")

    def alpha(self, side):
        return self.alpha1 if side == 1 else self.alpha2

    def f(self, side):
        return self.f1 if side == 1 else self.f2

    def dirichlet(self, side):
        return self.dirichlet1 if side == 1 else self.dirichlet2

    @classmethod
    def manufactured(cls, exact: ExactSolution, alpha1, alpha2, dirichlet=True):
        """Data that make ``exact`` the solution (needs the Laplacians)."""
        a1, a2 = float(alpha1), float(alpha2)

        def g_n(x, n):
            return np.einsum("...d,...d->...", a1 * exact.grad1(x) - a2 * exact.grad2(x), n)

        def g_d(x):
            return exact.u1(x) - exact.u2(x)

        return cls(a1, a2,
                   lambda x: -a1 * exact.lap1(x),
                   lambda x: -a2 * exact.lap2(x),
                   g_n, g_d,
                   exact.u1 if dirichlet else None,
                   exact.u2 if dirichlet else None,
                   exact)


@dataclass(frozen=True)
class SchemeParams:
    """``scheme`` is ``"ip"`` (penalty ``eta_beta``, sign ``beta``) or ``"lifting"``.

    ``lifting_space`` selects the per-side lifting polynomials: ``"Q"``
    (degree <= p in each variable) contains the gradients of the tensor
    basis, which the coercivity of the lifting scheme relies on; ``"P"``
    (total degree <= p) does not, and for p >= 3 the lifting matrix can then
    be indefinite.
    """

    scheme: str = "ip"
    beta: float = 1.0
    eta_beta: Optional[float] = None
    eta1: float = 1.0
    eta: float = 2.0
    eta_scale: float = 20.0
    lifting_space: str = "Q"
    quad_degree: Optional[int] = None

    def __post_init__(self):
        if self.scheme not in ("ip", "lifting"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.lifting_space not in ("P", "Q"):
            raise ValueError("lifting_space must be 'P' or 'Q'")
        if self.scheme == "lifting" and (self.eta1 < 1 or self.eta < 2):
            warnings.warn(f"lifting scheme with eta1={self.eta1}, eta={self.eta}: "
                          "stability is only guaranteed for eta1 >= 1 and eta >= 2",
                          stacklevel=2)

    @classmethod
    def sipg(cls, eta_beta=None, **kw):
        return cls("ip", 1.0, eta_beta, **kw)

    @classmethod
    def nipg(cls, eta_beta=None, **kw):
        return cls("ip", -1.0, eta_beta, **kw)

    @classmethod
    def lifting(cls, eta1=1.0, eta=2.0, **kw):
        return cls("lifting", 1.0, None, eta1, eta, **kw)

    def penalty(self, p, problem: ProblemData):
        """Jump penalty: ``eta1`` for lifting, else ``eta_beta`` or its default."""
        if self.scheme == "lifting":
            return self.eta1
        if self.eta_beta is not None:
            return self.eta_beta
        return default_eta_beta(p, problem, self.eta_scale)

    def degree(self, p):
        return self.quad_degree if self.quad_degree is not None else 2 * p + 2


def default_eta_beta(p, problem: ProblemData, scale=20.0):
    return scale * p * p * max(problem.alpha1, problem.alpha2)


def _side_mass(basis, rule):
    Psi = basis.eval(rule.points)
    M = Psi.T @ (rule.weights[:, None] * Psi)
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > MASS_COND_LIMIT:
        raise IllConditionedMass(f"lifting mass matrix condition {cond:.3e}")
    return M


@dataclass
class LocalLifting:
    """Lifting of interface data on one cut cell.

    ``coeffs[i]`` has shape ``(nbasis, 2)`` (one column per vector
    component) in ``bases[i]``, or is ``None`` for a side with zero weight.
    """

    bases: tuple
    coeffs: tuple

    def eval(self, side, x):
        c = self.coeffs[side - 1]
        if c is None:
            return np.zeros((len(np.atleast_2d(x)), 2))
        return self.bases[side - 1].eval(x) @ c


def local_lifting(cutcell, kappa, alpha, q, p, kind="Q"):
    """Solve ``int_K r . a w = -int_e q . {a w}`` for all ``w`` in the lifting space.

    ``q`` holds vector data at the interface quadrature points, shape
    ``(ne, 2)``. Returns a :class:`LocalLifting`.
    """
    qe = cutcell.quad_e
    q = np.asarray(q, dtype=float)
    bases, coeffs = [], []
    for side in (1, 2):
        rule = cutcell.quad(side)
        k = kappa[side - 1]
        a = alpha[side - 1]
        if rule is None or len(rule) == 0:
            bases.append(None)
            coeffs.append(None)
            continue
        basis = MonomialBasis(rule.points, p, kind)
        bases.append(basis)
        if k == 0.0:
            coeffs.append(None)
            continue
        M = a * _side_mass(basis, rule)
        rhs = -k * a * (basis.eval(qe.points).T @ (qe.weights[:, None] * q))
        coeffs.append(np.linalg.solve(M, rhs))
    return LocalLifting(tuple(bases), tuple(coeffs))


@dataclass
class CutBlock:
    """Local matrix and load of one cut cell over the stacked side DOFs."""

    dofs: np.ndarray
    A: np.ndarray
    b: np.ndarray


def _cut_block(space: XfeSpace, cc, kap, problem: ProblemData, params: SchemeParams, pen):
    c = cc.cell_id
    nb = space.basis.size
    h = space.mesh.h
    A = np.zeros((2 * nb, 2 * nb))
    b = np.zeros(2 * nb)
    # sub-cell volume terms
    for side in (1, 2):
        rule = cc.quad(side)
        if rule is None:
            continue
        xi = space.to_ref(c, rule.points)
        N = space.basis.eval(xi)
        G = space.basis.grad(xi) * (2.0 / h)
        sl = slice((side - 1) * nb, side * nb)
        A[sl, sl] += problem.alpha(side) * np.einsum("q,qad,qbd->ab", rule.weights, G, G)
        b[sl] += N.T @ (rule.weights * problem.f(side)(rule.points))

    qe = cc.quad_e
    w = qe.weights
    n1 = qe.normals
    xi = space.to_ref(c, qe.points)
    N = space.basis.eval(xi)
    Gn = np.einsum("qad,qd->qa", space.basis.grad(xi) * (2.0 / h), n1)
    k1, k2 = kap
    J = np.hstack([N, -N])
    F = np.hstack([k1 * problem.alpha1 * Gn, k2 * problem.alpha2 * Gn])
    beta = params.beta if params.scheme == "ip" else 1.0
    hK = space.mesh.h_K
    A += -J.T @ (w[:, None] * F) - beta * F.T @ (w[:, None] * J) + (pen / hK) * J.T @ (w[:, None] * J)

    jd = problem.g_d(qe.points)
    gn = problem.g_n(qe.points, n1)
    b += np.concatenate([N.T @ (w * gn * k2), N.T @ (w * gn * k1)])
    b += -beta * F.T @ (w * jd) + (pen / hK) * J.T @ (w * jd)

    if params.scheme == "lifting":
        p = space.p
        for side in (1, 2):
            k = kap[side - 1]
            rule = cc.quad(side)
            if k == 0.0 or rule is None:
                continue
            basis = MonomialBasis(rule.points, p, params.lifting_space)
            M = _side_mass(basis, rule)
            Pe = basis.eval(qe.points)
            coef = params.eta * problem.alpha(side) * k * k
            for comp in (0, 1):
                R = Pe.T @ ((w * n1[:, comp])[:, None] * J)
                g = Pe.T @ (w * n1[:, comp] * jd)
                MinvR = np.linalg.solve(M, np.column_stack([R, g]))
                A += coef * R.T @ MinvR[:, :-1]
                b += coef * R.T @ MinvR[:, -1]

    dofs = np.concatenate([space.cell_dofs(c, 1), space.cell_dofs(c, 2)])
    return CutBlock(dofs, A, b)


def cut_blocks(space, part, kappa, problem, params):
    """Local blocks of every cut cell, in cell order."""
    pen = params.penalty(space.p, problem)
    return [_cut_block(space, part.cuts[c], kappa[c], problem, params, pen) for c in part.cut_ids]


def _assemble(space: XfeSpace, part: CellPartition, kappa: KappaWeights, problem: ProblemData,
              params: SchemeParams):
    mesh = space.mesh
    h = mesh.h
    basis = space.basis
    nb = basis.size
    ref = gauss_square(points_for_degree(params.degree(space.p)))
    N = basis.eval(ref.points)
    dN = basis.grad(ref.points)
    Kref = np.einsum("q,qad,qbd->ab", ref.weights, dN, dN)

    rows, cols, vals = [], [], []
    b = np.zeros(space.ndof)
    for side, cls in ((1, CellClass.PURE1), (2, CellClass.PURE2)):
        cells = part.cells(cls)
        if cells.size == 0:
            continue
        dofs = space.dof[side - 1][space.cell_nodes[cells]]
        rows.append(np.repeat(dofs, nb, axis=1).ravel())
        cols.append(np.tile(dofs, (1, nb)).ravel())
        vals.append(np.tile(problem.alpha(side) * Kref.ravel(), len(cells)))
        X = mesh.cell_origin(cells)[:, None, :] + 0.5 * h * (ref.points[None, :, :] + 1.0)
        Fv = problem.f(side)(X)
        bl = (0.25 * h * h) * (Fv * ref.weights[None, :]) @ N
        np.add.at(b, dofs.ravel(), bl.ravel())

    for blk in cut_blocks(space, part, kappa, problem, params):
        ok = blk.dofs >= 0
        d = blk.dofs[ok]
        Al = blk.A[np.ix_(ok, ok)]
        rows.append(np.repeat(d, len(d)))
        cols.append(np.tile(d, len(d)))
        vals.append(Al.ravel())
        np.add.at(b, d, blk.b[ok])

    A = csr_from_triplets(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
                          space.ndof)
    return A, b


def dirichlet_dofs(space: XfeSpace, problem: ProblemData):
    """Active DOFs on the outer boundary and their prescribed values."""
    fixed, values = [], []
    for side in (1, 2):
        d = space.dof[side - 1]
        sel = space.boundary_nodes & (d >= 0)
        fixed.append(d[sel])
        g = problem.dirichlet(side)
        values.append(g(space.node_coords[sel]) if g is not None else np.zeros(int(sel.sum())))
    return np.concatenate(fixed), np.concatenate(values)


def assemble(space, part, kappa, problem, params) -> SparseSystem:
    A, b = _assemble(space, part, kappa, problem, params)
    fixed, values = dirichlet_dofs(space, problem)
    return apply_dirichlet(A, b, fixed, values, cut_dof_blocks(space, part))


def assemble_ip(space, part, kappa, problem, params: SchemeParams) -> SparseSystem:
    """Interior-penalty scheme (``beta = 1`` symmetric, ``beta = -1`` non-symmetric)."""
    if params.scheme != "ip":
        raise ValueError("assemble_ip needs scheme='ip'")
    return assemble(space, part, kappa, problem, params)


def assemble_lifting(space, part, kappa, problem, params: SchemeParams) -> SparseSystem:
    """Lifting-stabilized scheme with penalties ``eta1`` (jump) and ``eta`` (lifting)."""
    if params.scheme != "lifting":
        raise ValueError("assemble_lifting needs scheme='lifting'")
    return assemble(space, part, kappa, problem, params)


def residual_consistency(system: SparseSystem, u_interp):
    """Euclidean norm of ``B(Pi u, phi_k) - F(phi_k)`` over the free test functions.

    This is the maximum of ``|B(Pi u, v) - F(v)| / |v|`` over coefficient
    vectors ``v`` vanishing on the Dirichlet DOFs.
    """
    r = system.A_raw @ u_interp - system.b_raw
    return float(np.linalg.norm(r[system.free]))


PROBE_MODES = ("global", "local", "offset", "smooth")
SMOOTH_SWEEPS = 300


def probe_vector(space: XfeSpace, part: CellPartition, free, rng, mode, A=None):
    """One random probe vector (see :func:`rayleigh_probes`)."""
    n = space.ndof
    v = np.zeros(n)
    if mode == "local" and part.cut_ids:
        c = part.cut_ids[rng.integers(len(part.cut_ids))]
        d = np.concatenate([space.cell_dofs(c, 1), space.cell_dofs(c, 2)])
        d = d[d >= 0]
        v[d] = rng.standard_normal(len(d))
    elif mode == "offset":
        side = space.dof_side
        v = rng.standard_normal(2)[side - 1] + 10.0 ** rng.uniform(-3, 0) * rng.standard_normal(n)
    else:
        v = rng.standard_normal(n)
    v[~free] = 0.0
    if mode == "smooth":
        if A is None:
            raise ValueError("smooth probes need the matrix")
        # 1/|A|_inf bounds the spectral radius (Gershgorin), so every
        # positive mode is damped and every negative one amplified
        omega = 1.0 / np.max(np.abs(A).sum(axis=1).A1)
        for _ in range(int(rng.integers(1, SMOOTH_SWEEPS + 1))):
            v = v - omega * (A @ v)
            v[~free] = 0.0
            v /= np.linalg.norm(v)
    return v


def rayleigh_probes(system: SparseSystem, space: XfeSpace, part: CellPartition, count, rng,
                    mode="mixed"):
    """Rayleigh quotients ``v^T A v / v^T v`` for random probe vectors.

    Probe families: ``"global"`` draws Gaussian values on every DOF;
    ``"local"`` only on the DOFs of one random cut cell; ``"offset"`` adds
    Gaussian noise of random scale to a random constant per side, which
    nearly cancels the bulk energy so the interface terms dominate;
    ``"smooth"`` applies a random number (1 to 300) of Richardson sweeps
    ``v <- v - A v / |A|_inf`` to a Gaussian vector, which damps the
    high-energy components and amplifies any negative directions. ``"mixed"`` cycles through all four.
    Dirichlet DOFs are always zero. For a positive definite matrix every
    quotient is positive whatever the family.
    """
    A = system.A
    free = system.free
    out = np.empty(count)
    for k in range(count):
        m = PROBE_MODES[k % len(PROBE_MODES)] if mode == "mixed" else mode
        v = probe_vector(space, part, free, rng, m, A)
        nv = v @ v
        out[k] = (v @ (A @ v)) / nv if nv > 0 else np.inf
    return out
