import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import discretization
from dgxfem.analysis import jump_seminorm, l2_error, rates
from dgxfem.errors import InvalidThreshold
from dgxfem.geometry import CartesianMesh, CellClass, LevelSetInterface, partition_mesh
from dgxfem.space import (LagrangeBasis, MonomialBasis, build_space, cut_dof_blocks,
                          default_c0, interpolate, kappa_from_ratio, kappa_weights)


@pytest.mark.parametrize("ratio, threshold, expected", [
    (0.5, 0.125, (0.5, 0.5)),
    (0.01, 0.125, (0.0, 1.0)),
    (0.95, 0.02, (0.95, 0.05)),
    (0.99, 0.02, (1.0, 0.0)),
])
def test_kappa_branches(ratio, threshold, expected):
    assert kappa_from_ratio(ratio, threshold) == pytest.approx(expected, abs=1e-15)


def test_kappa_threshold_above_half_is_rejected():
    with pytest.raises(InvalidThreshold):
        kappa_from_ratio(0.5, 0.6)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 0.5))
def test_kappa_is_a_convex_pair(ratio, threshold):
    k1, k2 = kappa_from_ratio(ratio, threshold)
    assert k1 >= 0 and k2 >= 0 and k1 + k2 == pytest.approx(1.0)
    assert k1 in (0.0, 1.0) or k1 == ratio


def test_default_c0_for_the_circle():
    d = discretization(16, 1)
    assert default_c0(d["ls"], d["mesh"]) == pytest.approx(math.sqrt(2.0))
    assert d["kappa"].c0 == pytest.approx(math.sqrt(2.0))


def test_kappa_threshold_clamped_on_coarse_meshes():
    d = discretization(4, 1)
    assert d["kappa"].threshold == 0.5
    for c in d["part"].cut_ids:
        assert sorted(d["kappa"][c]) == [0.0, 1.0]


def test_no_interface_is_standard_fem():
    mesh = CartesianMesh(4)
    part = partition_mesh(mesh, LevelSetInterface.constant(1.0), 4)
    space = build_space(mesh, part, 1)
    assert space.ndof == 25
    assert space.side_count(1) == 0 and space.side_count(2) == 25


@pytest.mark.parametrize("p", [1, 2])
def test_dof_count_per_side(p):
    d = discretization(16, p)
    space, part = d["space"], d["part"]
    for side in (1, 2):
        cls = CellClass.PURE1 if side == 1 else CellClass.PURE2
        cells = list(part.cells(cls)) + [c for c in part.cut_ids
                                         if part.cuts[c].sub_measures[side - 1] > 0]
        nodes = np.unique(space.cell_nodes[cells])
        assert space.side_count(side) == len(nodes)
    assert space.ndof == space.side_count(1) + space.side_count(2)
    if p == 1:
        # every node touches the outer region except those strictly inside the disk
        assert space.side_count(2) < 289


def test_every_dof_is_scattered():
    d = discretization(8, 2)
    space = d["space"]
    seen = np.zeros(space.ndof, dtype=bool)
    for c in range(d["mesh"].ncells):
        for side in (1, 2):
            dofs = space.cell_dofs(c, side)
            seen[dofs[dofs >= 0]] = True
    assert seen.all()


def test_constant_interpolant_has_no_jump():
    d = discretization(16, 2)
    u = interpolate(lambda x: np.ones(len(x)), lambda x: np.ones(len(x)), d["space"])
    assert np.all(u == 1.0)
    assert jump_seminorm(u, d["space"], d["part"], 1.0) < 1e-12


@pytest.mark.parametrize("p", [1, 2, 3])
def test_interpolant_reproduces_piecewise_polynomials(p, rng):
    d = discretization(8, p)
    space, part = d["space"], d["part"]
    c1 = rng.standard_normal((p + 1, p + 1))
    c2 = rng.standard_normal((p + 1, p + 1))
    w1 = lambda x: np.polynomial.polynomial.polyval2d(x[..., 0], x[..., 1], c1)
    w2 = lambda x: np.polynomial.polynomial.polyval2d(x[..., 0], x[..., 1], c2)
    u = interpolate(w1, w2, space)
    for c in part.cut_ids:
        for side, w in ((1, w1), (2, w2)):
            x = part.cuts[c].quad(side).points
            val, _ = space.local_values(u, c, side, x)
            assert np.allclose(val, w(x), atol=1e-12)


@pytest.mark.parametrize("p", [1, 2])
def test_interpolation_error_rate(p):
    errs, hs = [], []
    for n in (8, 16, 32):
        d = discretization(n, p)
        ex = d["problem"].exact
        u = interpolate(ex.u1, ex.u2, d["space"])
        errs.append(l2_error(u, ex, d["space"], d["part"]))
        hs.append(1 / n)
    assert rates(hs, errs)[-1] >= p + 1 - 0.2


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.floats(-1, 1), st.floats(-1, 1))
def test_lagrange_partition_of_unity(p, x, y):
    b = LagrangeBasis(p)
    xi = np.array([[x, y]])
    assert b.eval(xi).sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(b.grad(xi).sum(axis=1), 0.0, atol=1e-11)


def test_lagrange_nodal_property():
    b = LagrangeBasis(3)
    assert np.allclose(b.eval(b.nodes), np.eye(b.size), atol=1e-13)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 3), st.sampled_from(["P", "Q"]), st.floats(0.1, 0.9), st.floats(0.1, 0.9))
def test_monomial_gradient_matches_finite_differences(p, kind, x, y):
    pts = np.array([[0.0, 0.2], [1.0, 0.7]])
    b = MonomialBasis(pts, p, kind)
    assert b.size == ((p + 1) * (p + 2) // 2 if kind == "P" else (p + 1) ** 2)
    e = 1e-6
    x0 = np.array([[x, y]])
    fd = np.stack([(b.eval(x0 + [[e, 0]]) - b.eval(x0 - [[e, 0]])) / (2 * e),
                   (b.eval(x0 + [[0, e]]) - b.eval(x0 - [[0, e]])) / (2 * e)], axis=-1)
    assert np.allclose(b.grad(x0), fd, atol=1e-6)


def test_cut_dof_blocks_are_disjoint_and_single_sided():
    d = discretization(16, 2)
    blocks = cut_dof_blocks(d["space"], d["part"])
    allidx = np.concatenate(blocks)
    assert len(allidx) == len(np.unique(allidx))
    side = d["space"].dof_side
    for b in blocks:
        assert len(set(side[b])) == 1


def test_kappa_weights_cover_every_cut_cell():
    d = discretization(32, 1)
    kap = kappa_weights(d["part"])
    assert set(kap.weights) == set(d["part"].cut_ids)
    assert kap.threshold == pytest.approx(math.sqrt(2) * math.sqrt(2) / 32)
