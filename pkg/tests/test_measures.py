import json

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import integrate

from afree import measures as ms
from afree.operator import divergence

coord = st.floats(-0.8, 0.8)
points2 = st.tuples(coord, coord).map(np.array)


def _bump():
    return ms.Bump(np.array([0.1, -0.2]), 0.9, 4)


@settings(max_examples=60, deadline=None)
@given(points2, points2, st.floats(0.2, 3))
def test_segment_pairing_is_endpoint_difference(p, q, weight):
    assume(np.linalg.norm(q - p) > 1e-3)
    phi = _bump()
    tangent = (q - p) / np.linalg.norm(q - p)
    mu = ms.DiscreteMeasure([ms.segment(p, q, weight * tangent)], 2)
    got = ms.weak_apply(divergence(2), mu, phi, order=16)[0]
    expected = weight * (phi.value(p[None])[0] - phi.value(q[None])[0])
    assert got == pytest.approx(expected, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(points2, points2, st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(0.5, 2))
def test_pushforward_of_a_segment_moves_the_endpoints(p, q, a, b, c, e, scale):
    assume(np.linalg.norm(q - p) > 1e-3)
    U = np.array([[a, b], [c, e]])
    assume(abs(np.linalg.det(U)) > 0.1)
    shift = np.array([0.05, -0.1])
    phi = _bump()
    tangent = (q - p) / np.linalg.norm(q - p)
    mu = ms.DiscreteMeasure([ms.segment(p, q, tangent)], 2)
    image = ms.push_forward_affine(mu, U, shift, U, scale)
    got = ms.weak_apply(divergence(2), image, phi, order=16)[0]
    P, Q = U @ p + shift, U @ q + shift
    assert got == pytest.approx(scale * (phi.value(P[None])[0] - phi.value(Q[None])[0]), abs=1e-11)
    assert ms.total_variation(image) == pytest.approx(scale * np.linalg.norm(U @ tangent) * np.linalg.norm(q - p))


def _cube_oracle(phi, center, halfwidths, w):
    # -int_Q w . grad(phi) by adaptive cubature
    def integrand(y, x):
        return float(np.dot(w, phi.grad(np.array([[x, y]]))[0]))

    (cx, cy), (hx, hy) = center, halfwidths
    return -integrate.dblquad(integrand, cx - hx, cx + hx, cy - hy, cy + hy, epsabs=1e-11)[0]


@pytest.mark.parametrize("center,halfwidths,w", [
    ([0.0, 0.0], [1.0, 1.0], [1.0, 0.0]),
    ([0.3, -0.1], [0.4, 0.7], [0.5, -2.0]),
    ([-0.6, 0.5], [0.3, 0.3], [0.0, 1.0]),
])
def test_cube_pairing_matches_cubature(center, halfwidths, w):
    phi = _bump()
    mu = ms.DiscreteMeasure([ms.cube(center, halfwidths, w)], 2)
    got = ms.weak_apply(divergence(2), mu, phi, order=16)[0]
    assert got == pytest.approx(_cube_oracle(phi, center, halfwidths, np.array(w)), abs=1e-9)


def test_ball_pairing_matches_polar_cubature():
    phi = ms.Bump(np.array([0.5, 0.2]), 0.7, 4)
    center, radius, w = np.array([0.1, 0.0]), 0.8, np.array([0.3, 1.0])
    mu = ms.DiscreteMeasure([ms.ball(center, radius, w)], 2)
    got = ms.weak_apply(divergence(2), mu, phi, order=16)[0]

    def integrand(theta, rad):
        x = center + rad * np.array([np.cos(theta), np.sin(theta)])
        return rad * float(np.dot(w, phi.grad(x[None])[0]))

    oracle = -integrate.dblquad(integrand, 0, radius, 0, 2 * np.pi, epsabs=1e-11)[0]
    assert got == pytest.approx(oracle, abs=1e-9)


def test_divergence_theorem_for_constant_ball():
    # <div(w 1_B), phi> = -int_{dB} phi w . nu
    phi = ms.Bump(np.array([0.6, -0.3, 0.2]), 0.9, 4)
    w = np.array([1.0, -0.5, 0.25])
    mu = ms.DiscreteMeasure([ms.ball(np.zeros(3), 1.0, w)], 3)
    got = ms.weak_apply(divergence(3), mu, phi, order=16)[0]
    from afree.quadrature import sphere_rule

    Y, wy = sphere_rule(3, 96)
    flux = -float(np.sum(wy * phi.value(Y) * (Y @ w)))
    assert got == pytest.approx(flux, abs=1e-8)


def test_circle_tangent_field_is_divergence_free():
    suite = ms.bump_suite(2, 10, seed=3, radius_range=(0.3, 0.9))
    mu = ms.circle_measure(np.array([0.1, 0.2]), 0.7)
    assert ms.weak_residual(divergence(2), mu, suite) <= 1e-10
    assert ms.total_variation(mu) == pytest.approx(2 * np.pi * 0.7, rel=1e-12)
    with pytest.raises(ValueError):
        ms.circle_measure(np.zeros(3), 1.0, d=3)


def test_total_variation_of_flat_pieces():
    assert ms.total_variation(ms.DiscreteMeasure([ms.cube([0, 0, 0], [1, 0.5, 2], [3, 4, 0])], 3)) == pytest.approx(5 * 8 * 1.0 * 0.5 * 2)
    face = ms.face([0, 0, 1.0], [0, 1], [1.0, 1.0], [0, 0, 2.0])
    assert ms.total_variation(ms.DiscreteMeasure([face], 3)) == pytest.approx(8.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.floats(0.2, 1.0), st.integers(3, 6))
def test_bump_gradient_and_lipschitz(center, radius, s):
    phi = ms.Bump(np.array(center), radius, s)
    rng = np.random.default_rng(0)
    X = phi.center + rng.uniform(-radius, radius, size=(400, 3))
    h = 1e-6
    fd = np.stack([(phi.value(X + h * e) - phi.value(X - h * e)) / (2 * h) for e in np.eye(3)], axis=1)
    assert np.allclose(phi.grad(X), fd, atol=1e-6 * s / radius ** 2)
    assert np.max(np.linalg.norm(phi.grad(X), axis=1)) <= phi.lipschitz() * (1 + 1e-12)


def test_bump_validation():
    with pytest.raises(ValueError):
        ms.Bump(np.zeros(2), 0.5, 2)
    with pytest.raises(ValueError):
        ms.Bump(np.zeros(2), -1.0)


def test_measure_json_round_trip():
    mu = ms.DiscreteMeasure([
        ms.segment([0, 0], [1, 0.5], [1.0, 2.0]),
        ms.cube([0.1, 0.2], [0.3, 0.4], [1.0, -1.0]),
        ms.ball([0, 0], 0.5, [0.0, 2.0]),
    ], 2)
    mu = mu + ms.circle_measure(np.array([0.0, 0.0]), 0.4)
    back = ms.DiscreteMeasure.from_json(json.dumps(mu.to_json()))
    suite = ms.bump_suite(2, 5, seed=1)
    for phi in suite:
        assert np.allclose(ms.weak_apply(divergence(2), back, phi), ms.weak_apply(divergence(2), mu, phi), atol=1e-14)
    with pytest.raises(ValueError):
        ms.DiscreteMeasure.from_json({"m": 2, "pieces": [{"type": "blob"}]})


def test_degenerate_segment_and_singular_map_rejected():
    with pytest.raises(ValueError):
        ms.segment([0, 0], [0, 0], [1, 0])
    mu = ms.DiscreteMeasure([ms.segment([0, 0], [1, 0], [1, 0])], 2)
    with pytest.raises(ValueError):
        ms.push_forward_affine(mu, np.array([[1, 1], [1, 1]]), None)
