import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dgxfem import lab
from dgxfem.errors import DegeneratePolygon

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


@pytest.mark.parametrize("p, lam, expected", [(0, 0.25, 2.0), (0, 1.0, 1.0)])
def test_norm_equivalence_closed_forms(p, lam, expected):
    assert lab.norm_equiv_1d(p, lam) == pytest.approx(expected, abs=1e-10)


def test_norm_equivalence_monotone_in_lambda():
    lams = np.linspace(0.1, 1.0, 10)
    for p in range(4):
        c = [lab.norm_equiv_1d(p, x) for x in lams]
        assert np.all(np.diff(c) <= 1e-9)
    assert math.sqrt(2) <= lab.norm_equiv_1d(3, 0.5) < np.inf


@pytest.mark.parametrize("p", [0, 1, 2, 3])
@pytest.mark.parametrize("lam", [0.3, 0.5, 0.8])
def test_homothety_matches_tensor_prediction(p, lam):
    assert lab.homothety_constant(p, lam, "Q") == pytest.approx(lab.norm_equiv_1d(p, lam) ** 2, rel=1e-8)


@pytest.mark.parametrize("p", [0, 1, 2])
def test_total_degree_homothety_bounded_by_weighted_tensor(p):
    for lam in (0.3, 0.6):
        assert lab.homothety_constant(p, lam, "P") <= lab.norm_equiv_1d(p + 1, lam, True) * (1 + 1e-10)


def test_kappa_trace_midcut_is_moderate():
    assert lab.kappa_trace_sweep(1, [0.5]).max < 50


def test_kappa_trace_vanishes_on_slivers():
    sweep = lab.kappa_trace_sweep(1, lab.degeneracy_offsets(20))
    assert np.any(sweep.ratios == 0.0)
    tiny = sweep.parameters < 1e-3
    assert np.all(sweep.ratios[tiny] == 0.0)


@pytest.mark.parametrize("shape", ["line", "convex"])
def test_disabled_kappa_blows_up(shape):
    mid = lab.kappa_trace_sweep(1, [0.5], shape).max
    off = lab.kappa_trace_sweep(1, [1e-6], shape, weighted=False).max
    assert off > 100 * mid


def test_degeneracy_offsets_cover_both_ends():
    t = lab.degeneracy_offsets(100)
    assert len(t) == 100 and t.min() == pytest.approx(1e-6) and t.max() == pytest.approx(1 - 1e-6)
    assert np.all(np.diff(t) > 0)


def test_unit_square_constants():
    inv0, _ = lab.convex_ratios(SQUARE, 0)
    assert inv0 == 0.0
    # v = x - 1/2: |grad v|^2 = 1, |v|^2 = 1/12, r = 1/2
    inv1_plain, _ = lab.convex_ratios(SQUARE, 1, grad_power=1)
    inv1, tr1 = lab.convex_ratios(SQUARE, 1)
    assert inv1_plain == pytest.approx(6.0, rel=1e-12)
    assert inv1 == pytest.approx(3.0, rel=1e-12)
    assert lab.inscribed_radius(SQUARE)[0] == pytest.approx(0.5)
    assert tr1 == pytest.approx(4.0, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.01, 100.0), st.floats(0, 2 * math.pi),
       st.floats(-5, 5), st.integers(0, 3))
def test_convex_ratios_are_similarity_invariant(seed, scale, angle, shift, p):
    verts = lab.random_convex_polygon(np.random.default_rng(seed), npoints=8)
    R = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    moved = scale * verts @ R.T + shift
    a = lab.convex_ratios(verts, p)
    b = lab.convex_ratios(moved, p)
    assert b[0] == pytest.approx(a[0], rel=1e-6, abs=1e-9)
    assert b[1] == pytest.approx(a[1], rel=1e-6)


def test_convex_sweep_saturates():
    for p in (1, 2, 3):
        a250, t250 = lab.convex_inverse_sweep(p, 250, np.random.default_rng([7, p]))
        a500, t500 = lab.convex_inverse_sweep(p, 500, np.random.default_rng([8, p]))
        assert 0.5 <= a500.max / a250.max <= 2.0
        assert 0.5 <= t500.max / t250.max <= 2.0


def test_degenerate_polygon_rejected():
    rng = np.random.default_rng(0)
    with pytest.raises(DegeneratePolygon):
        lab.random_convex_polygon(rng, npoints=3, min_area=1.0)


def test_trace_ratio_of_constant_at_mid_cut():
    cc = lab.mid_cut("line", 0)
    assert lab.trace_ratio(cc, 0, lab.SWEEP_H) == pytest.approx(1.0, rel=1e-12)


def test_trace_inequality_over_random_circles():
    sweep = lab.trace_ineq_check(2, 100, np.random.default_rng(3))
    assert np.all(np.isfinite(sweep.ratios)) and sweep.max < 10
    assert np.all(np.abs(sweep.parameters) <= 0.65)


def test_lifting_of_zero_data():
    cc = lab.mid_cut("line", 1)
    assert lab.lifting_ratio(cc, (0.5, 0.5), np.zeros((len(cc.quad_e), 2)), 1) == 0.0


def test_lifting_ratio_two_routes_agree():
    cc = lab.mid_cut("line", 1)
    q = cc.quad_e.normals
    a = lab.lifting_ratio(cc, (0.5, 0.5), q, 1)
    b = lab.lifting_ratio_lstsq(cc, (0.5, 0.5), q, 1)
    assert a == pytest.approx(b, rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 3))
def test_lifting_constant_bounds_every_ratio(seed, p):
    rng = np.random.default_rng(seed)
    cc, _ = lab.random_circle_cut(rng, p=p)
    k1 = rng.uniform()
    const = lab.lifting_constant(cc, (k1, 1 - k1), p)
    q = rng.standard_normal((len(cc.quad_e), 2))
    assert lab.lifting_ratio(cc, (k1, 1 - k1), q, p) <= const * (1 + 1e-8)


@pytest.mark.parametrize("shape", ["line", "convex", "concave"])
def test_lifting_bound_uniform_over_slivers(shape):
    sweep = lab.lifting_bound_check(1, lab.degeneracy_offsets(40), shape)
    mid = lab.lifting_bound_check(1, [0.5], shape).max
    assert sweep.max <= 5 * mid


def test_sweep_csv_format(tmp_path):
    rep = lab.SweepReport("x", [0.1, 0.2], [1.0, 2.5])
    text = rep.to_csv(tmp_path / "x.csv")
    assert text.splitlines() == ["parameter,ratio", "0.1,1.0", "0.2,2.5"]
    assert (tmp_path / "x.csv").read_text() == text
    assert rep.max == 2.5 and rep.argmax == 0.2
