import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dgxfem.errors import AmbiguousCut
from dgxfem.geometry import (CartesianMesh, CellClass, LevelSetInterface, build_cutcell,
                             classify_cell, edge_intersection, partition_mesh)
from dgxfem.problems import CIRCLE_CENTER, CIRCLE_RADIUS

CIRCLE = LevelSetInterface.circle(CIRCLE_CENTER, CIRCLE_RADIUS)


def cell_at(mesh, x, y):
    return int(round(y / mesh.h)) * mesh.n + int(round(x / mesh.h))


@pytest.mark.parametrize("corner, expected", [
    ((0.5, 0.5), CellClass.PURE1),
    ((0.0, 0.0), CellClass.PURE2),
    ((0.125, 0.4375), CellClass.CUT),
])
def test_classify_cells_of_circle(corner, expected):
    mesh = CartesianMesh(16)
    assert classify_cell(mesh, CIRCLE, cell_at(mesh, *corner)) == expected


@pytest.mark.parametrize("p0, p1, root", [
    ((0.125, 0.5), (0.1875, 0.5), (0.5 - math.sqrt(1 / 8), 0.5)),
    ((0.5, 0.8), (0.5, 0.9), (0.5, 0.5 + math.sqrt(1 / 8))),
])
def test_edge_root_closed_form(p0, p1, root):
    x = edge_intersection(CIRCLE, p0, p1)
    assert np.allclose(x, root, atol=1e-13)


def test_edge_without_sign_change_returns_none():
    assert edge_intersection(CIRCLE, (0.0, 0.0), (0.1, 0.0)) is None


@settings(max_examples=60, deadline=None)
@given(st.floats(0.2, 0.8), st.floats(0.0, 1.0))
def test_edge_root_lies_on_interface(y, frac):
    # horizontal segment through the left part of the circle
    x0 = 0.5 - CIRCLE_RADIUS * 1.5
    x1 = 0.5
    if abs(y - 0.5) >= CIRCLE_RADIUS * 0.99:
        return
    x = edge_intersection(CIRCLE, (x0, y), (x1, y))
    assert x is not None
    assert abs(CIRCLE.phi(x)) < 1e-12


@pytest.mark.parametrize("n", [8, 16, 32])
def test_disk_area_and_circumference(n):
    part = partition_mesh(CartesianMesh(n), CIRCLE, 8)
    assert part.measure(1) == pytest.approx(math.pi / 8, abs=1e-10)
    assert part.interface_length() == pytest.approx(math.pi / math.sqrt(2), abs=1e-10)
    assert part.measure(1) + part.measure(2) == pytest.approx(1.0, abs=1e-12)


def test_pure_cell_record():
    mesh = CartesianMesh(16)
    cc = build_cutcell(mesh, CIRCLE, cell_at(mesh, 0.5, 0.5), 4)
    assert cc.cls == CellClass.PURE1
    assert cc.sub_measures[0] == pytest.approx(mesh.h ** 2)
    assert cc.sub_measures[1] == 0.0
    assert cc.quad_e is None


def test_cut_cell_sub_measures_sum_to_cell():
    mesh = CartesianMesh(16)
    part = partition_mesh(mesh, CIRCLE, 6)
    for cc in part.cuts.values():
        assert cc.measure == pytest.approx(mesh.h ** 2, rel=1e-12)
        assert min(cc.sub_measures) > 0


def test_many_crossings_are_ambiguous():
    wavy = LevelSetInterface(lambda x: np.sin(6 * np.pi * x[..., 0]) + 0.0 * x[..., 1] + 0.1,
                             lambda x: np.stack([6 * np.pi * np.cos(6 * np.pi * x[..., 0]),
                                                 0.0 * x[..., 1]], axis=-1))
    with pytest.raises(AmbiguousCut):
        partition_mesh(CartesianMesh(2), wavy, 4)


def test_normals_point_out_of_side1():
    part = partition_mesh(CartesianMesh(8), CIRCLE, 6)
    for cc in part.cuts.values():
        qe = cc.quad_e
        radial = qe.points - np.array(CIRCLE_CENTER)
        assert np.all(np.sum(qe.normals * radial, axis=1) > 0)
        assert np.allclose(np.linalg.norm(qe.normals, axis=1), 1.0)


def test_coarse_mesh_warning(caplog):
    # half of an elongated ellipse bulging far beyond its chord
    cx, cy, a, b = 0.25, 0.375, 0.2, 0.05
    ls = LevelSetInterface(
        lambda x: ((x[..., 0] - cx) / a) ** 2 + ((x[..., 1] - cy) / b) ** 2 - 1.0,
        lambda x: np.stack([2 * (x[..., 0] - cx) / a ** 2, 2 * (x[..., 1] - cy) / b ** 2], axis=-1))
    with caplog.at_level("WARNING", logger="dgxfem.geometry"):
        cc = build_cutcell(CartesianMesh(4), ls, 5, 6)
    assert "mesh may be too coarse" in caplog.text
    # the arc meets its chord at right angles, so the rule is only roughly right
    assert cc.sub_measures[0] == pytest.approx(np.pi * a * b / 2, rel=0.1)
    assert cc.sub_measures[1] == pytest.approx(1 / 16 - np.pi * a * b / 2, rel=1e-3)


def test_fine_circle_cuts_do_not_warn(caplog):
    with caplog.at_level("WARNING", logger="dgxfem.geometry"):
        partition_mesh(CartesianMesh(16), CIRCLE, 6)
    assert caplog.text == ""
