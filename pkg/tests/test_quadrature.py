from math import gamma, pi

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from afree.quadrature import (
    ball_volume,
    box_ball_rule,
    gauss_legendre,
    interval_ball_clip,
    sphere_area,
    sphere_rule,
)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.floats(-3, 3), st.floats(0.1, 4))
def test_gauss_legendre_exact_on_monomials(n, a, width):
    b = a + width
    x, w = gauss_legendre(n, a, b)
    for deg in range(2 * n):
        exact = (b ** (deg + 1) - a ** (deg + 1)) / (deg + 1)
        assert np.dot(w, x ** deg) == pytest.approx(exact, rel=1e-10, abs=1e-10)


def _sphere_moment(d, powers):
    # closed form for the integral of prod y_i^{a_i} over S^{d-1}, all a_i even
    b = [(a + 1) / 2 for a in powers]
    return 2 * np.prod([gamma(x) for x in b]) / gamma(sum(b))


@pytest.mark.parametrize("d", [2, 3, 4])
def test_sphere_rule_moments(d):
    Y, w = sphere_rule(d, 24)
    assert w.sum() == pytest.approx(2 * pi ** (d / 2) / gamma(d / 2), rel=1e-12)
    assert sphere_area(d) == pytest.approx(w.sum(), rel=1e-12)
    for powers in ([2] + [0] * (d - 1), [2, 2] + [0] * (d - 2), [4] + [0] * (d - 1), [0] * (d - 1) + [6]):
        got = np.dot(w, np.prod(Y ** np.array(powers), axis=1))
        assert got == pytest.approx(_sphere_moment(d, powers), rel=1e-10)
    odd = np.dot(w, Y[:, 0] ** 3 * Y[:, -1])
    assert abs(odd) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.95, 0.95), st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 0.1))
def test_spherical_cap_area(cap, pole):
    Y, w = sphere_rule(3, 20, pole=pole, cap=cap)
    assert w.sum() == pytest.approx(2 * pi * (1 - cap), rel=1e-10)
    p = np.asarray(pole) / np.linalg.norm(pole)
    assert np.all(Y @ p >= cap - 1e-12)


def test_four_dimensional_cap_area():
    # |{y in S^3 : y_4 >= c}| = 4 pi int_c^1 sqrt(1 - u^2) du
    cap = 0.3
    _, w = sphere_rule(4, 16, cap=cap)
    oracle = 4 * pi * integrate.quad(lambda u: np.sqrt(1 - u * u), cap, 1)[0]
    assert w.sum() == pytest.approx(oracle, rel=1e-8)


def test_ball_volume():
    assert ball_volume(2) == pytest.approx(pi)
    assert ball_volume(3) == pytest.approx(4 * pi / 3)


def test_sphere_rule_rejects_dimension():
    with pytest.raises(ValueError):
        sphere_rule(5, 4)


def _box_disk_area(lo, hi, R):
    def chord(x):
        if abs(x) >= R:
            return 0.0
        h = np.sqrt(R * R - x * x)
        return max(0.0, min(hi[1], h) - max(lo[1], -h))

    # chord kinks: the circle's x-extent and where it crosses the two horizontal box edges
    kinks = [R, -R] + [s * np.sqrt(R * R - y * y) for y in (lo[1], hi[1]) if abs(y) < R for s in (-1, 1)]
    pts = [p for p in kinks if lo[0] < p < hi[0]]
    return integrate.quad(chord, lo[0], hi[0], points=pts or None, limit=200, epsabs=1e-13)[0]


@settings(max_examples=40, deadline=None)
@given(st.floats(-1.5, 0.5), st.floats(-1.5, 0.5), st.floats(0.2, 2), st.floats(0.2, 2), st.floats(0.3, 1.5))
def test_box_ball_area_matches_chord_integral(x0, y0, wx, wy, R):
    lo = np.array([[x0, y0]])
    hi = lo + np.array([[wx, wy]])
    X, W = box_ball_rule(lo, hi, np.array([R]), 16)
    oracle = _box_disk_area(lo[0], hi[0], R)
    assert W.sum() == pytest.approx(oracle, rel=1e-9, abs=1e-11)
    live = W[0] > 0
    assert np.all(np.linalg.norm(X[0][live], axis=1) <= R + 1e-12)


def test_box_ball_integrates_smooth_function():
    lo = np.array([[-0.4, -1.0, 0.1]])
    hi = np.array([[1.0, 0.3, 0.9]])
    R = 1.0
    X, W = box_ball_rule(lo, hi, np.array([R]), 10)
    got = float(np.sum(W[0] * np.cos(X[0, :, 0]) * X[0, :, 2]))

    def slab(y, x):
        # z-integral of z over [0.1, 0.9] clipped to the ball, in closed form
        top = R * R - x * x - y * y
        if top <= 0:
            return 0.0
        h = np.sqrt(top)
        z0, z1 = 0.1, min(0.9, h)
        return np.cos(x) * max(0.0, z1 * z1 - z0 * z0) / 2

    oracle = integrate.dblquad(slab, -0.4, 1.0, -1.0, 0.3, epsabs=1e-11)[0]
    assert got == pytest.approx(oracle, abs=5e-6)


def test_interval_ball_clip():
    p = np.array([-2.0, 0.0])
    q = np.array([2.0, 0.0])
    t0, t1 = interval_ball_clip(p, q, np.zeros(2), 1.0)
    assert (t0, t1) == pytest.approx((0.25, 0.75))
    t0, t1 = interval_ball_clip(p, q, np.array([0.0, 2.0]), 1.0)
    assert t1 <= t0
