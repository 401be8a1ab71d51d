"""Error norms, interface seminorms and observed convergence rates."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveError
from .forms import local_lifting
from .geometry import CellClass, CellPartition
from .quadrature import gauss_square, points_for_degree
from .space import XfeSpace

logger = logging.getLogger(__name__)


def _pure_terms(coeffs, space: XfeSpace, part: CellPartition, side, q, integrand):
    """Sum of ``integrand(x, uh, grad uh)`` over the pure cells of one side."""
    cells = part.cells(CellClass.PURE1 if side == 1 else CellClass.PURE2)
    if cells.size == 0:
        return 0.0
    h = space.mesh.h
    ref = gauss_square(points_for_degree(q))
    N = space.basis.eval(ref.points)
    dN = space.basis.grad(ref.points) * (2.0 / h)
    U = np.asarray(coeffs)[space.dof[side - 1][space.cell_nodes[cells]]]
    X = space.mesh.cell_origin(cells)[:, None, :] + 0.5 * h * (ref.points[None] + 1.0)
    val = U @ N.T
    grd = np.einsum("qkd,ck->cqd", dN, U)
    return float(np.sum(integrand(X, val, grd) * ref.weights[None, :]) * 0.25 * h * h)


def _cut_terms(coeffs, space, part, side, integrand):
    total = 0.0
    for c in part.cut_ids:
        rule = part.cuts[c].quad(side)
        if rule is None:
            continue
        val, grd = space.local_values(coeffs, c, side, rule.points)
        total += float(np.sum(rule.weights * integrand(rule.points, val, grd)))
    return total


def _broken_integral(coeffs, space, part, q, integrands):
    total = 0.0
    for side in (1, 2):
        total += _pure_terms(coeffs, space, part, side, q, integrands[side - 1])
        total += _cut_terms(coeffs, space, part, side, integrands[side - 1])
    return total


def _quad_degree(space, q):
    return 2 * space.p + 4 if q is None else q


def l2_error(coeffs, exact, space: XfeSpace, part: CellPartition, q=None):
    """``||u - u_h||_{L2(Omega)}``, with ``u`` taken per side from ``exact``."""
    ints = [lambda x, v, g, s=s: (exact.value(s, x) - v) ** 2 for s in (1, 2)]
    return math.sqrt(max(_broken_integral(coeffs, space, part, _quad_degree(space, q), ints), 0.0))


def broken_h1_error(coeffs, exact, space: XfeSpace, part: CellPartition, alpha=(1.0, 1.0), q=None):
    """``(sum_i int_{Omega_i} alpha_i |grad(u - u_h)|^2)^{1/2}``."""
    ints = [lambda x, v, g, s=s: alpha[s - 1] * np.sum((exact.grad(s, x) - g) ** 2, axis=-1)
            for s in (1, 2)]
    return math.sqrt(max(_broken_integral(coeffs, space, part, _quad_degree(space, q), ints), 0.0))


def _interface_values(coeffs, space, part, c):
    cc = part.cuts[c]
    qe = cc.quad_e
    v1, g1 = space.local_values(coeffs, c, 1, qe.points)
    v2, g2 = space.local_values(coeffs, c, 2, qe.points)
    return qe, v1, v2, g1, g2


def jump_seminorm(coeffs, space: XfeSpace, part: CellPartition, eta_beta, jump=None):
    """``(sum_K eta_beta / h_K ||[v]||^2_{e_K})^{1/2}``.

    ``jump`` (a callable, the exact scalar jump) is subtracted when given, so
    passing the discrete solution yields the jump part of the error.
    """
    hK = space.mesh.h_K
    total = 0.0
    for c in part.cut_ids:
        qe, v1, v2, _, _ = _interface_values(coeffs, space, part, c)
        d = v1 - v2
        if jump is not None:
            d = d - jump(qe.points)
        total += np.sum(qe.weights * d * d)
    return math.sqrt(eta_beta / hK * total)


def lift_seminorm(coeffs, space: XfeSpace, part: CellPartition, kappa, alpha, eta=1.0,
                  jump=None, kind="Q"):
    """``(sum_K eta ||alpha^{1/2} r_e([v])||^2_K)^{1/2}`` with the local lifting."""
    total = 0.0
    for c in part.cut_ids:
        qe, v1, v2, _, _ = _interface_values(coeffs, space, part, c)
        d = v1 - v2
        if jump is not None:
            d = d - jump(qe.points)
        lift = local_lifting(part.cuts[c], kappa[c], alpha, d[:, None] * qe.normals, space.p, kind)
        for side in (1, 2):
            rule = part.cuts[c].quad(side)
            if rule is None or lift.coeffs[side - 1] is None:
                continue
            r = lift.eval(side, rule.points)
            total += alpha[side - 1] * np.sum(rule.weights * np.sum(r * r, axis=1))
    return math.sqrt(eta * total)


def flux_average_term(coeffs, exact, space: XfeSpace, part: CellPartition, kappa, alpha, eta_beta):
    """Diagnostic ``(sum_K h_K / eta_beta ||{alpha grad(u - u_h)}.n1||^2_{e_K})^{1/2}``."""
    hK = space.mesh.h_K
    total = 0.0
    for c in part.cut_ids:
        qe, _, _, g1, g2 = _interface_values(coeffs, space, part, c)
        k1, k2 = kappa[c]
        e1 = exact.grad(1, qe.points) - g1
        e2 = exact.grad(2, qe.points) - g2
        avg = np.sum((k1 * alpha[0] * e1 + k2 * alpha[1] * e2) * qe.normals, axis=1)
        total += np.sum(qe.weights * avg * avg)
    return math.sqrt(hK / eta_beta * total)


def rates(hs, errs, strict=False):
    """``log2(e_{k-1} / e_k)`` for consecutive halvings of ``h``.

    A non-positive error makes its neighbouring rates NaN, or raises
    :class:`NonPositiveError` when ``strict``.
    """
    hs = np.asarray(hs, dtype=float)
    errs = np.asarray(errs, dtype=float)
    out = []
    for k in range(1, len(errs)):
        if not np.isclose(hs[k - 1] / hs[k], 2.0):
            raise ValueError(f"mesh sizes {hs[k - 1]} and {hs[k]} are not a halving")
        a, b = errs[k - 1], errs[k]
        if not (a > 0 and b > 0):
            if strict:
                raise NonPositiveError(f"error {min(a, b)} is not positive; rate undefined")
            out.append(math.nan)
            continue
        out.append(math.log2(a / b))
    return out


@dataclass
class ErrorReport:
    """One row of a convergence study."""

    scheme: str
    p: int
    n: int
    h: float
    ndof: int
    err_L2: float = math.nan
    err_H1: float = math.nan
    err_jump: float = math.nan
    err_lift: float = math.nan
    rate_L2: float = math.nan
    rate_H1: float = math.nan
    status: str = "ok"
    extra: dict = field(default_factory=dict)


def attach_rates(reports):
    """Fill ``rate_L2``/``rate_H1`` in place for consecutive successful rows of equal ``p``."""
    for k in range(1, len(reports)):
        a, b = reports[k - 1], reports[k]
        if a.p != b.p or a.status != "ok" or b.status != "ok":
            continue
        if not np.isclose(a.h / b.h, 2.0):
            continue
        b.rate_L2 = rates([a.h, b.h], [a.err_L2, b.err_L2])[0]
        b.rate_H1 = rates([a.h, b.h], [a.err_H1, b.err_H1])[0]
    return reports


__all__ = ["ErrorReport", "l2_error", "broken_h1_error", "jump_seminorm", "lift_seminorm",
           "flux_average_term", "rates", "attach_rates"]
