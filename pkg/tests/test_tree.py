from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from afree import measures as ms
from afree import tree as tr
from afree.operator import divergence
from afree.surd import Surd


@pytest.mark.parametrize("h", [0, 1, 2, 3])
def test_level_masses_are_exact(h):
    tree = tr.build_gamma(h, 6)
    for level, mass in enumerate(tree.levelMasses, start=1):
        assert mass == Surd.sqrt(h + 1) * Fraction(1, 2 ** level)


@pytest.mark.parametrize("h,L", [(1, 5), (2, 4), (3, 3)])
def test_level_masses_from_float_segments(h, L):
    tree = tr.build_gamma(h, L)
    for level in range(1, L + 1):
        P, Q, wt = tree.level_segments(level)
        assert len(P) == 2 ** (level * h)
        mass = wt * float(np.sum(np.linalg.norm(Q - P, axis=1)))
        assert mass == pytest.approx(np.sqrt(h + 1) / 2 ** level, rel=1e-13)


@pytest.mark.parametrize("h,L", [(1, 5), (2, 4)])
def test_kirchhoff_at_interior_nodes(h, L):
    tree = tr.build_gamma(h, L)
    for level in range(1, L):
        _, Q, w_in = tree.level_segments(level)
        P_next, _, w_out = tree.level_segments(level + 1)
        ends, inflow = np.unique(np.round(Q, 12), axis=0, return_counts=True)
        starts, outflow = np.unique(np.round(P_next, 12), axis=0, return_counts=True)
        assert np.array_equal(ends, starts)
        assert np.allclose(inflow * w_in, outflow * w_out)


@pytest.mark.parametrize("h,L", [(0, 4), (1, 6), (2, 4)])
def test_total_variation_closed_form(h, L):
    mu = tr.build_mu(h, L)
    assert ms.total_variation(mu) == pytest.approx(tr.total_variation_closed_form(h, L), rel=1e-13)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 2), st.integers(2, 5), st.lists(st.floats(-1.2, 1.2), min_size=3, max_size=3), st.floats(0.3, 1.0))
def test_leaf_telescoping_matches_segment_quadrature(h, L, center, radius):
    phi = ms.Bump(np.array(center[: h + 1]), radius)
    direct = ms.weak_apply(divergence(h + 1), tr.build_mu(h, L), phi, order=12)[0]
    assert tr.mu_divergence_pairing(h, L, phi) == pytest.approx(direct, abs=1e-12)


@pytest.mark.parametrize("h", [1, 2])
def test_face_residual_halves_per_level_and_obeys_bound(h):
    phi = ms.Bump(np.array([0.7] + [0.3] * h), 0.8)
    res = [tr.face_residual(h, L, phi) for L in range(4, 8)]
    for L, r in zip(range(4, 8), res):
        assert r <= tr.rigorous_face_bound(h, L, phi.lipschitz())
    ratios = np.array(res[1:]) / np.array(res[:-1])
    assert np.all(np.abs(ratios - 0.5) < 0.03)


def test_symmetric_bump_sees_no_residual():
    phi = ms.Bump(np.zeros(3), 0.9)
    assert tr.face_residual(2, 5, phi) == pytest.approx(0.0, abs=1e-14)


def test_resource_guard():
    with pytest.raises(tr.ResourceLimitError):
        tr.build_gamma(7, 3)
    with pytest.raises(tr.ResourceLimitError):
        tr.check_emittable(5, 20)
    with pytest.raises(ValueError):
        tr.build_gamma(1, 0)
    tr.check_emittable(2, 8)
    assert tr.segment_count(2, 3) == 4 + 16 + 64


def test_leaves_sit_below_the_top_face():
    tree = tr.build_gamma(2, 4)
    X, w = tree.leaves()
    assert np.all(X[:, 0] == 1 - 2.0 ** -4)
    assert np.all(np.abs(X[:, 1:]) < 1)
    assert len(X) * w == pytest.approx(1.0)
