"""Quadrature rules on intervals, clipped boxes, spheres and balls."""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

MAX_SPHERE_DIM = 4


@lru_cache(maxsize=None)
def _leggauss(n):
    return np.polynomial.legendre.leggauss(n)


def gauss_legendre(n, a=-1.0, b=1.0):
    """Nodes and weights on [a, b]; exact for degree <= 2n - 1."""
    x, w = _leggauss(n)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = (b - a) / 2
    mid = (b + a) / 2
    return mid[..., None] + half[..., None] * x, half[..., None] * w


@lru_cache(maxsize=None)
def _jacobi(n, alpha, beta):
    return roots_jacobi(n, alpha, beta)


def interval_ball_clip(p, q, c, rho):
    """Parameter range [t0, t1] of the segment p + t (q - p), t in [0, 1],
    inside the closed ball B_rho(c).  Vectorized over leading axes; empty
    ranges come back with t1 <= t0."""
    v = q - p
    r0 = p - c
    A = np.einsum("...i,...i->...", v, v)
    B = 2 * np.einsum("...i,...i->...", v, r0)
    C = np.einsum("...i,...i->...", r0, r0) - rho ** 2
    disc = B * B - 4 * A * C
    ok = disc > 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t0 = np.where(ok, (-B - sq) / (2 * A), 1.0)
    t1 = np.where(ok, (-B + sq) / (2 * A), 0.0)
    return np.clip(t0, 0.0, 1.0), np.clip(t1, 0.0, 1.0)


def box_ball_rule(lo, hi, R, order):
    """Iterated Gauss rule for the region {s in box [lo, hi]} cap {|s| <= R}.

    Batched over the first axis: ``lo`` and ``hi`` are (N x k), ``R`` is (N,).
    Every integration variable is split at the points where the slice of
    the region changes shape, and integrated in the angle theta with
    s = r sin(theta), r the radius left for it, so each sub-interval
    carries a smooth integrand.  Returns nodes (N x Q x k) and weights (N x Q).
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    N, k = lo.shape
    R2 = np.asarray(R, dtype=float) ** 2
    # state: nodes so far (N x Q x i), weights (N x Q), remaining radius^2 (N x Q)
    nodes = np.zeros((N, 1, 0))
    weights = np.ones((N, 1))
    rad2 = np.broadcast_to(R2[:, None], (N, 1)).copy()
    gx, gw = _leggauss(order)
    for i in range(k):
        r = np.sqrt(np.maximum(rad2, 0.0))
        a = np.maximum(lo[:, None, i], -r)
        b = np.minimum(hi[:, None, i], r)
        cuts = [a, b]
        rest = list(range(i + 1, k))
        for size in range(1, len(rest) + 1):
            for dims in itertools.combinations(rest, size):
                for choice in itertools.product((0, 1), repeat=size):
                    off2 = sum(
                        (lo[:, None, j] if ch == 0 else hi[:, None, j]) ** 2 for j, ch in zip(dims, choice)
                    )
                    val = np.sqrt(np.maximum(rad2 - off2, 0.0))
                    cuts.append(val)
                    cuts.append(-val)
        cuts = np.stack(cuts, axis=-1)
        cuts = np.clip(cuts, a[..., None], np.maximum(a, b)[..., None])
        cuts.sort(axis=-1)
        left = cuts[..., :-1]
        right = cuts[..., 1:]
        s, w = _angular_nodes(left, right, r, gx, gw)
        Q = nodes.shape[1]
        S = left.shape[-1]
        s = s.reshape(N, Q, S * order)
        w = w.reshape(N, Q, S * order)
        nodes = np.concatenate(
            [np.repeat(nodes[:, :, None, :], S * order, axis=2), s[..., None]], axis=3
        ).reshape(N, Q * S * order, i + 1)
        weights = (weights[:, :, None] * w).reshape(N, Q * S * order)
        rad2 = (rad2[:, :, None] - s ** 2).reshape(N, Q * S * order)
        keep = np.any(weights != 0, axis=0)
        nodes, weights, rad2 = nodes[:, keep], weights[:, keep], rad2[:, keep]
    return nodes, weights


def _angular_nodes(left, right, r, gx, gw):
    """Gauss nodes in theta for s = r sin(theta) on [left, right] within [-r, r].

    The slice lengths sqrt(r^2 - s^2) are smooth in theta, including ends on
    or close to the sphere."""
    rr = np.maximum(r, 1e-300)[..., None]
    t0 = np.arcsin(np.clip(left / rr, -1.0, 1.0))
    t1 = np.arcsin(np.clip(right / rr, -1.0, 1.0))
    half = ((t1 - t0) / 2)[..., None]
    theta = ((t1 + t0) / 2)[..., None] + half * gx
    s = rr[..., None] * np.sin(theta)
    w = rr[..., None] * np.cos(theta) * half * gw
    return s, w


def orthonormal_frame(pole):
    """Orthonormal basis whose last vector is ``pole`` (unit)."""
    pole = np.asarray(pole, dtype=float)
    d = pole.size
    M = np.eye(d)
    idx = int(np.argmax(np.abs(pole)))
    others = [M[i] for i in range(d) if i != idx]
    basis = []
    for v in others:
        v = v - (v @ pole) * pole
        for b in basis:
            v = v - (v @ b) * b
        basis.append(v / np.linalg.norm(v))
    return np.array(basis + [pole])


def sphere_rule(d, order, pole=None, cap=-1.0):
    """Points y on S^{d-1} and weights w integrating over {y . pole >= cap}.

    d = 2 uses the composite trapezoid rule on the full circle with
    ``order`` points and Gauss-Legendre in angle on a proper arc; d = 3 uses Gauss-Legendre in the
    polar cosine times the trapezoid rule in azimuth; d = 4 uses a
    Gauss-Jacobi rule in the polar cosine times the d = 3 rule.
    """
    if d < 2 or d > MAX_SPHERE_DIM:
        raise ValueError(f"sphere quadrature is available for 2 <= d <= {MAX_SPHERE_DIM}, got d={d}")
    if pole is None:
        pole = np.eye(d)[d - 1]
    pole = np.asarray(pole, dtype=float)
    pole = pole / np.linalg.norm(pole)
    cap = float(np.clip(cap, -1.0, 1.0))
    if cap >= 1.0:
        return np.zeros((0, d)), np.zeros(0)
    if d == 2:
        if cap <= -1.0:
            t = 2 * np.pi * np.arange(order) / order
            w = np.full(order, 2 * np.pi / order)
        else:
            half = np.arccos(cap)
            t, w = gauss_legendre(order, -half, half)
        local = np.stack([np.sin(t), np.cos(t)], axis=1)
        return local @ orthonormal_frame(pole), w
    frame = orthonormal_frame(pole)
    if d == 3:
        u, wu = gauss_legendre(order, cap, 1.0)
        na = 2 * order
        phi = 2 * np.pi * np.arange(na) / na
        s = np.sqrt(np.maximum(1 - u ** 2, 0.0))
        local = np.stack(
            [
                (s[:, None] * np.cos(phi)[None, :]).ravel(),
                (s[:, None] * np.sin(phi)[None, :]).ravel(),
                np.repeat(u, na),
            ],
            axis=1,
        )
        w = np.repeat(wu, na) * (2 * np.pi / na)
        return local @ frame, w
    # d == 4: measure (1 - u^2)^{1/2} du dS^2
    if cap <= -1.0:
        x, wx = _jacobi(order, 0.5, 0.5)
        u, wu = x, wx
    else:
        # weight (1-u)^{1/2} on [cap, 1]; the (1+u)^{1/2} factor is smooth there
        x, wx = _jacobi(order, 0.5, 0.0)
        half = (1 - cap) / 2
        u = cap + half * (x + 1)
        wu = wx * half ** 1.5 * np.sqrt(1 + u)
    y3, w3 = sphere_rule(3, order)
    s = np.sqrt(np.maximum(1 - u ** 2, 0.0))
    local = np.concatenate(
        [
            (s[:, None, None] * y3[None, :, :]).reshape(-1, 3),
            np.repeat(u, y3.shape[0])[:, None],
        ],
        axis=1,
    )
    w = (wu[:, None] * w3[None, :]).ravel()
    return local @ frame, w


def sphere_area(d):
    from math import gamma, pi

    return 2 * pi ** (d / 2) / gamma(d / 2)


def ball_volume(d):
    from math import gamma, pi

    return pi ** (d / 2) / gamma(d / 2 + 1)
