"""Sparse system container and (block-)Jacobi-preconditioned Krylov solvers.

Storage and mat-vecs come from ``scipy.sparse``; the iterations themselves
are written out here so their stopping rules are explicit.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import NoConvergence

logger = logging.getLogger(__name__)


@dataclass
class SparseSystem:
    """``A x = b`` with Dirichlet rows already eliminated.

    ``A_raw``/``b_raw`` keep the matrix and load before elimination, and
    ``fixed``/``fixed_values`` the eliminated DOFs with their values.
    ``blocks`` optionally lists disjoint DOF groups that the preconditioner
    inverts as dense blocks (all other DOFs are scaled by the diagonal).
    """

    A: sp.csr_matrix
    b: np.ndarray
    fixed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    fixed_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    A_raw: Optional[sp.csr_matrix] = None
    b_raw: Optional[np.ndarray] = None
    blocks: Optional[list] = None

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def free(self):
        mask = np.ones(self.n, dtype=bool)
        mask[self.fixed] = False
        return mask


@dataclass(frozen=True)
class SolveReport:
    """``residual`` is the recomputed ``|b - A x| / |b|``; ``precond_residual``
    the same ratio measured in the preconditioner's norm."""

    iterations: int
    residual: float
    method: str
    precond_residual: float = float("nan")
    restarts: int = 0


def csr_from_triplets(rows, cols, vals, n) -> sp.csr_matrix:
    """Sum duplicate entries; column indices come out sorted within each row."""
    A = sp.coo_matrix((np.asarray(vals, dtype=float), (np.asarray(rows), np.asarray(cols))),
                      shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    A.eliminate_zeros()
    return A


def apply_dirichlet(A: sp.csr_matrix, b, fixed, values, blocks=None) -> SparseSystem:
    """Symmetric elimination: zero the rows and columns, 1 on the diagonal."""
    n = A.shape[0]
    fixed = np.asarray(fixed, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    g = np.zeros(n)
    g[fixed] = values
    rhs = np.asarray(b, dtype=float) - A @ g
    keep = np.ones(n)
    keep[fixed] = 0.0
    D = sp.diags(keep)
    Ar = (D @ A @ D + sp.diags(1.0 - keep)).tocsr()
    Ar.sort_indices()
    Ar.eliminate_zeros()
    rhs[fixed] = values
    return SparseSystem(Ar, rhs, fixed, values, A.tocsr(), np.asarray(b, dtype=float), blocks)


class BlockJacobi:
    """Inverse of the block diagonal of ``A``: dense blocks on ``blocks``, scalars elsewhere.

    With no blocks this is plain Jacobi scaling. Rows with a zero diagonal
    are left unscaled.
    """

    def __init__(self, A, blocks=None):
        d = A.diagonal().copy()
        zero = d == 0
        if np.any(zero):
            logger.debug("%d zero diagonal entries left unscaled", int(zero.sum()))
            d[zero] = 1.0
        self.dinv = 1.0 / d
        self.groups = []
        by_size = {}
        for idx in blocks or ():
            idx = np.asarray(idx, dtype=np.int64)
            if idx.size > 1:
                by_size.setdefault(idx.size, []).append(idx)
        for size in sorted(by_size):
            idx = np.array(by_size[size])
            sub = np.stack([A[i][:, i].toarray() for i in idx])
            self.groups.append((idx, np.linalg.inv(sub)))

    def __call__(self, r):
        z = self.dinv * r
        for idx, inv in self.groups:
            z[idx] = np.einsum("kij,kj->ki", inv, r[idx])
        return z


def solve_spd(system: SparseSystem, tol=1e-12, maxit=None, check_symmetry=False, max_restarts=50):
    """Preconditioned conjugate gradients (block Jacobi, see :class:`BlockJacobi`).

    The iteration is restarted from the recomputed residual ``r = b - A x``
    until ``|r| / |b| <= tol`` and the preconditioned residual
    ``sqrt(r.Pr) / sqrt(b.Pb)`` either meets ``tol`` or stops improving.
    Small cut cells make ``A`` very ill-conditioned; the second test keeps
    iterating on the near-singular directions that the first one barely sees.
    """
    A, b = system.A, system.b
    n = A.shape[0]
    maxit = 20 * n if maxit is None else int(maxit)
    if check_symmetry:
        asym = abs(A - A.T).max() if A.nnz else 0.0
        if asym > 1e-12 * max(abs(A).max(), 1e-300):
            raise ValueError(f"matrix is not symmetric (max |A - A^T| = {asym:.3e})")
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, "pcg-jacobi", 0.0)
    prec = BlockJacobi(A, system.blocks)
    bz = np.sqrt(abs(b @ prec(b)))
    x = np.zeros(n)
    it = 0
    best, best_res = x.copy(), np.inf
    prev_eres = np.inf
    for restart in range(max_restarts):
        r = b - A @ x
        z = prec(r)
        rz = r @ z
        res = np.linalg.norm(r) / bnorm
        eres = np.sqrt(abs(rz)) / bz
        if res < best_res:
            best, best_res = x.copy(), res
        if res <= tol and (eres <= tol or eres > 0.5 * prev_eres):
            return x, SolveReport(it, res, "pcg-jacobi", eres, restart)
        prev_eres = eres
        if it >= maxit:
            break
        d = z.copy()
        while it < maxit:
            Ad = A @ d
            dAd = d @ Ad
            if dAd <= 0:
                raise NoConvergence("matrix is not positive definite along a search direction",
                                    best, best_res, it)
            a = rz / dAd
            x += a * d
            r -= a * Ad
            it += 1
            z = prec(r)
            rz_new = r @ z
            if np.linalg.norm(r) <= 0.1 * tol * bnorm and np.sqrt(abs(rz_new)) <= 0.1 * tol * bz:
                break
            d = z + (rz_new / rz) * d
            rz = rz_new
    r = b - A @ x
    res = np.linalg.norm(r) / bnorm
    if res < best_res:
        best, best_res = x.copy(), res
    if best_res <= tol:
        eres = np.sqrt(abs(r @ prec(r))) / bz
        return best, SolveReport(it, best_res, "pcg-jacobi", eres, max_restarts)
    raise NoConvergence(f"CG stopped after {it} iterations at residual {best_res:.3e}",
                        best, best_res, it)


def solve_general(system: SparseSystem, tol=1e-12, maxit=None, restart=200, max_cycles=None):
    """Restarted GMRES with right block-Jacobi preconditioning.

    Right preconditioning keeps the Arnoldi residual equal to the true
    residual of the original system (up to rounding), which is recomputed
    at each restart. Acceptance follows the same two-residual rule as
    :func:`solve_spd`.
    """
    A, b = system.A, system.b
    n = A.shape[0]
    maxit = 20 * n if maxit is None else int(maxit)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, "gmres-jacobi", 0.0)
    prec = BlockJacobi(A, system.blocks)
    pb = np.linalg.norm(prec(b))
    x = np.zeros(n)
    it = 0
    cycles = 0
    m = min(restart, n)
    prev_pres = np.inf
    while True:
        r = b - A @ x
        beta = np.linalg.norm(r)
        res = beta / bnorm
        pres = np.linalg.norm(prec(r)) / pb
        if res <= tol and (pres <= tol or pres > 0.5 * prev_pres):
            return x, SolveReport(it, res, "gmres-jacobi", pres, cycles)
        prev_pres = pres
        if it >= maxit or (max_cycles is not None and cycles >= max_cycles):
            raise NoConvergence(f"GMRES stopped after {it} iterations at residual {res:.3e}",
                                x, res, it)
        target = min(0.5 * tol * bnorm, 1e-3 * beta)
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k_used = 0
        for k in range(m):
            w = A @ prec(V[k])
            for j in range(k + 1):
                H[j, k] = w @ V[j]
                w -= H[j, k] * V[j]
            H[k + 1, k] = np.linalg.norm(w)
            if H[k + 1, k] > 0:
                V[k + 1] = w / H[k + 1, k]
            for j in range(k):
                t = cs[j] * H[j, k] + sn[j] * H[j + 1, k]
                H[j + 1, k] = -sn[j] * H[j, k] + cs[j] * H[j + 1, k]
                H[j, k] = t
            den = np.hypot(H[k, k], H[k + 1, k])
            if den == 0.0:
                break
            cs[k], sn[k] = H[k, k] / den, H[k + 1, k] / den
            H[k, k] = den
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            it += 1
            k_used = k + 1
            if abs(g[k + 1]) <= target or it >= maxit:
                break
        cycles += 1
        if k_used == 0:
            raise NoConvergence("GMRES breakdown", x, res, it)
        y = np.linalg.solve(np.triu(H[:k_used, :k_used]), g[:k_used])
        x = x + prec(V[:k_used].T @ y)


def write_matrix_market(system: SparseSystem, path):
    from scipy.io import mmwrite

    mmwrite(str(path), system.A)
