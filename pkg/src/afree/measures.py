"""Discrete vector measures and their weak pairing with test functions.

A measure is a list of piece batches.  Each batch carries a geometric
carrier (segments, flat patches, spheres, balls) and an R^m density per
unit of the carrier's Hausdorff measure.  The pairing of the operator
with a test function is

    <A mu, phi>_k = - int (A^k dmu) . grad(phi),

evaluated by Gauss rules that are clipped to the support of ``phi``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb

import numpy as np

from . import linalg, quadrature
from .poly import PolyMap

DEFAULT_ORDER = 16


# ---------------------------------------------------------------------------
# test functions


@dataclass(frozen=True)
class Bump:
    """x -> ((1 - |x - c|^2 / rho^2)_+)^s."""

    center: np.ndarray
    radius: float
    s: int = 4

    def __post_init__(self):
        if self.s < 3:
            raise ValueError("bump smoothness must be at least 3")
        if self.radius <= 0:
            raise ValueError("bump radius must be positive")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    @property
    def support_radius(self):
        return float(self.radius)

    def value(self, X):
        X = np.asarray(X, dtype=float)
        t = np.sum((X - self.center) ** 2, axis=-1) / self.radius ** 2
        return np.where(t < 1, np.clip(1 - t, 0, None) ** self.s, 0.0)

    def grad(self, X):
        X = np.asarray(X, dtype=float)
        diff = X - self.center
        t = np.sum(diff ** 2, axis=-1) / self.radius ** 2
        base = np.where(t < 1, np.clip(1 - t, 0, None) ** (self.s - 1), 0.0)
        return (-2 * self.s / self.radius ** 2) * base[..., None] * diff

    def lipschitz(self):
        s = self.s
        t = 1 / (2 * s - 1)
        return (2 * s / self.radius) * (1 - t) ** (s - 1) * np.sqrt(t)

    def to_json(self):
        return {"type": "bump", "center": self.center.tolist(), "radius": self.radius, "s": self.s}


@dataclass(frozen=True)
class PolyBump:
    """A bump multiplied by a scalar polynomial."""

    bump: Bump
    poly: PolyMap

    @property
    def center(self):
        return self.bump.center

    @property
    def support_radius(self):
        return self.bump.support_radius

    def value(self, X):
        X = np.asarray(X, dtype=float)
        shape = X.shape[:-1]
        flat = X.reshape(-1, X.shape[-1])
        return (self.bump.value(flat) * self.poly(flat)[:, 0]).reshape(shape)

    def grad(self, X):
        X = np.asarray(X, dtype=float)
        shape = X.shape
        flat = X.reshape(-1, X.shape[-1])
        p = self.poly(flat)[:, 0]
        dp = self.poly.jacobian(flat)[:, 0, :]
        out = self.bump.grad(flat) * p[:, None] + self.bump.value(flat)[:, None] * dp
        return out.reshape(shape)

    def lipschitz(self):
        """Upper bound from sup bounds of the factors on the support ball."""
        R = float(np.linalg.norm(self.bump.center)) + self.bump.radius
        sup_p = sum(float(np.max(np.abs(np.asarray(c, dtype=float)))) * R ** sum(a) for a, c in self.poly.terms)
        grad_bound = 0.0
        for i in range(self.poly.d):
            part = self.poly.partial(i)
            grad_bound += sum(float(np.max(np.abs(np.asarray(c, dtype=float)))) * R ** sum(a) for a, c in part.terms) ** 2
        return self.bump.lipschitz() * sup_p + np.sqrt(grad_bound)

    def to_json(self):
        return {"type": "polybump", "bump": self.bump.to_json(),
                "poly": self.poly.to_json(float)}


def test_function_from_json(obj):
    if obj["type"] == "bump":
        return Bump(np.asarray(obj["center"], dtype=float), float(obj["radius"]), int(obj.get("s", 4)))
    if obj["type"] == "polybump":
        b = test_function_from_json(obj["bump"])
        poly = PolyMap.from_json(len(b.center), 1, obj["poly"], float)
        return PolyBump(b, poly)
    raise ValueError(f"unknown test function type {obj['type']!r}")


def bump_suite(d, count, seed=0, box=1.0, radius_range=(0.3, 0.8), s=4):
    """Deterministic random bumps with centers in [-box, box]^d."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        c = rng.uniform(-box, box, size=d)
        r = rng.uniform(*radius_range)
        out.append(Bump(c, float(r), s))
    return out


# ---------------------------------------------------------------------------
# pieces


def _as2(a):
    return np.atleast_2d(np.asarray(a, dtype=float))


@dataclass
class Segments:
    """Batch of segments [p_i, q_i] with density w_i per unit length."""

    P: np.ndarray
    Q: np.ndarray
    W: np.ndarray
    kind = "segments"

    def __post_init__(self):
        self.P, self.Q, self.W = _as2(self.P), _as2(self.Q), _as2(self.W)
        if not (len(self.P) == len(self.Q) == len(self.W)):
            raise ValueError("segment arrays must have equal length")
        if len(self.P) and np.any(np.all(self.P == self.Q, axis=1)):
            raise ValueError("degenerate segment with p == q")

    @property
    def d(self):
        return self.P.shape[1]

    @property
    def m(self):
        return self.W.shape[1]

    def __len__(self):
        return len(self.P)

    def total_variation(self):
        return float(np.sum(np.linalg.norm(self.W, axis=1) * np.linalg.norm(self.Q - self.P, axis=1)))

    def quadrature(self, phi, order):
        if len(self) == 0:
            return np.zeros((0, self.d)), np.zeros(0), np.zeros((0, self.m))
        t0, t1 = quadrature.interval_ball_clip(self.P, self.Q, phi.center, phi.support_radius)
        live = t1 > t0
        if not np.any(live):
            return np.zeros((0, self.d)), np.zeros(0), np.zeros((0, self.m))
        P, Q, W = self.P[live], self.Q[live], self.W[live]
        t, w = quadrature.gauss_legendre(order, t0[live], t1[live])
        length = np.linalg.norm(Q - P, axis=1)
        X = P[:, None, :] + t[..., None] * (Q - P)[:, None, :]
        wts = w * length[:, None]
        dens = np.broadcast_to(W[:, None, :], X.shape[:2] + (self.m,))
        return X.reshape(-1, self.d), wts.ravel(), dens.reshape(-1, self.m)

    def mapped(self, U, b, density_map, mass_scale):
        P2 = self.P @ U.T + b
        Q2 = self.Q @ U.T + b
        ratio = np.linalg.norm(self.Q - self.P, axis=1) / np.linalg.norm(Q2 - P2, axis=1)
        W2 = mass_scale * (self.W @ density_map.T) * ratio[:, None]
        return Segments(P2, Q2, W2)

    def to_json(self):
        return {"type": "segments", "p": self.P.tolist(), "q": self.Q.tolist(), "w": self.W.tolist()}


@dataclass
class Patches:
    """Batch of flat k-dimensional patches x = o + F t, t in [-1, 1]^k.

    Densities are per unit k-dimensional area.  Axis-aligned faces and
    cubes are patches whose frame columns are scaled coordinate vectors.
    """

    O: np.ndarray
    F: np.ndarray
    W: np.ndarray
    kind = "patches"

    def __post_init__(self):
        self.O = _as2(self.O)
        self.F = np.asarray(self.F, dtype=float)
        if self.F.ndim == 2:
            self.F = self.F[None]
        self.W = _as2(self.W)
        if not (len(self.O) == len(self.F) == len(self.W)):
            raise ValueError("patch arrays must have equal length")

    @property
    def d(self):
        return self.O.shape[1]

    @property
    def k(self):
        return self.F.shape[2]

    @property
    def m(self):
        return self.W.shape[1]

    def __len__(self):
        return len(self.O)

    def jacobians(self):
        G = np.einsum("nij,nik->njk", self.F, self.F)
        return np.sqrt(np.abs(np.linalg.det(G)))

    def areas(self):
        return (2.0 ** self.k) * self.jacobians()

    def total_variation(self):
        return float(np.sum(np.linalg.norm(self.W, axis=1) * self.areas()))

    def _orthogonal(self):
        G = np.einsum("nij,nik->njk", self.F, self.F)
        off = G - np.einsum("njj->nj", G)[:, :, None] * np.eye(self.k)[None]
        scale = np.max(np.abs(G), axis=(1, 2))
        return np.all(np.abs(off) <= 1e-13 * scale[:, None, None], axis=(1, 2))

    def quadrature(self, phi, order, panels=4):
        d, k, m = self.d, self.k, self.m
        empty = (np.zeros((0, d)), np.zeros(0), np.zeros((0, m)))
        if len(self) == 0:
            return empty
        c = phi.center
        rho = phi.support_radius
        # coarse rejection by distance from the patch's bounding sphere
        half_diag = np.sqrt(np.einsum("nij,nij->n", self.F, self.F))
        near = np.linalg.norm(self.O - c, axis=1) <= rho + half_diag
        if not np.any(near):
            return empty
        orth = self._orthogonal()
        outs = []
        sel = near & orth
        if np.any(sel):
            outs.append(self._quadrature_orthogonal(np.where(sel)[0], c, rho, order))
        sel = near & ~orth
        if np.any(sel):
            outs.append(self._quadrature_general(np.where(sel)[0], c, rho, order, panels))
        X = np.concatenate([o[0] for o in outs])
        w = np.concatenate([o[1] for o in outs])
        dens = np.concatenate([o[2] for o in outs])
        return X, w, dens

    def _quadrature_orthogonal(self, idx, c, rho, order):
        O, F, W = self.O[idx], self.F[idx], self.W[idx]
        lengths = np.linalg.norm(F, axis=1)  # N x k
        units = F / lengths[:, None, :]
        r0 = O - c
        proj = np.einsum("nij,ni->nj", units, r0)  # coordinates of r0 along each axis
        perp2 = np.sum(r0 ** 2, axis=1) - np.sum(proj ** 2, axis=1)
        R = np.sqrt(np.maximum(rho ** 2 - perp2, 0.0))
        # s_j = proj_j + lengths_j t_j ranges over [proj - len, proj + len]
        lo = proj - lengths
        hi = proj + lengths
        S, w = quadrature.box_ball_rule(lo, hi, R, order)
        live = R > 0
        w = w * live[:, None]
        t = (S - proj[:, None, :]) / lengths[:, None, :]
        X = O[:, None, :] + np.einsum("nij,nqj->nqi", F, t)
        # s-measure to area: ds = len dt, area element of F t equals prod(len) dt
        dens = np.broadcast_to(W[:, None, :], X.shape[:2] + (self.m,))
        return X.reshape(-1, self.d), w.ravel(), dens.reshape(-1, self.m)

    def _quadrature_general(self, idx, c, rho, order, panels):
        O, F, W = self.O[idx], self.F[idx], self.W[idx]
        k = self.k
        x, wx = quadrature.gauss_legendre(order, 0.0, 1.0)
        edges = np.linspace(-1, 1, panels + 1)
        t1 = (edges[:-1, None] + (edges[1:] - edges[:-1])[:, None] * x[None, :]).ravel()
        w1 = ((edges[1:] - edges[:-1])[:, None] * wx[None, :]).ravel()
        grids = np.meshgrid(*([t1] * k), indexing="ij")
        T = np.stack([g.ravel() for g in grids], axis=1)
        wt = np.prod(np.meshgrid(*([w1] * k), indexing="ij"), axis=0).ravel()
        J = np.sqrt(np.abs(np.linalg.det(np.einsum("nij,nik->njk", F, F))))
        X = O[:, None, :] + np.einsum("nij,qj->nqi", F, T)
        w = J[:, None] * wt[None, :]
        dens = np.broadcast_to(W[:, None, :], X.shape[:2] + (self.m,))
        return X.reshape(-1, self.d), w.ravel(), dens.reshape(-1, self.m)

    def mapped(self, U, b, density_map, mass_scale):
        O2 = self.O @ U.T + b
        F2 = np.einsum("ij,njk->nik", U, self.F)
        new = Patches(O2, F2, self.W)
        ratio = self.jacobians() / new.jacobians()
        new.W = mass_scale * (self.W @ density_map.T) * ratio[:, None]
        return new

    def to_json(self):
        return {"type": "patches", "o": self.O.tolist(), "frame": self.F.tolist(), "w": self.W.tolist()}


def segment(p, q, w):
    return Segments([p], [q], [w])


def face(center, axes, halfwidths, w, d=None):
    """Axis-aligned face spanned by coordinate ``axes`` (0-based)."""
    center = np.asarray(center, dtype=float)
    d = d or center.size
    if len(set(axes)) != len(axes):
        raise ValueError("face axes must be distinct")
    F = np.zeros((d, len(axes)))
    for j, (a, h) in enumerate(zip(axes, halfwidths)):
        if h <= 0:
            raise ValueError("halfwidths must be positive")
        F[a, j] = h
    return Patches([center], [F], [w])


def cube(center, halfwidths, w):
    center = np.asarray(center, dtype=float)
    return face(center, list(range(center.size)), halfwidths, w)


@dataclass
class SphereDensity:
    """Density g((x - c) / r) per unit area on the sphere |x - c| = r."""

    center: np.ndarray
    radius: float
    g: PolyMap
    order: int = 0
    kind = "sphere"

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        if self.g.degree > 3:
            raise ValueError("sphere densities are limited to degree 3")

    @property
    def d(self):
        return self.center.size

    @property
    def m(self):
        return self.g.m

    def _rule(self, order, pole=None, cap=-1.0):
        return quadrature.sphere_rule(self.d, order, pole, cap)

    def default_order(self):
        return self.order or (256 if self.d == 2 else 32)

    def total_variation(self, order=None):
        y, w = self._rule(order or self.default_order())
        return float(np.sum(w * np.linalg.norm(self.g(y), axis=1)) * self.radius ** (self.d - 1))

    def quadrature(self, phi, order):
        order = self.order or order
        diff = phi.center - self.center
        D = float(np.linalg.norm(diff))
        r = self.radius
        rho = phi.support_radius
        if D >= r + rho or D + r <= rho - 1e300:
            return np.zeros((0, self.d)), np.zeros(0), np.zeros((0, self.m))
        if D > 0:
            cap = (r * r + D * D - rho * rho) / (2 * r * D)
            pole = diff / D
        else:
            cap, pole = (-1.0 if rho > r else 2.0), None
        if cap > 1:
            return np.zeros((0, self.d)), np.zeros(0), np.zeros((0, self.m))
        y, w = self._rule(order, pole, max(cap, -1.0))
        X = self.center + r * y
        return X, w * r ** (self.d - 1), self.g(y)

    def mapped(self, U, b, density_map, mass_scale):
        U = np.asarray(U, dtype=float)
        lam = abs(np.linalg.det(U)) ** (1 / self.d)
        R = U / lam
        if not np.allclose(R.T @ R, np.eye(self.d), atol=1e-12):
            raise ValueError("spheres map only under similarities")
        # g2(y) = scale * M g(R^T y)
        g2 = self.g.pullback_linear(R.T).apply_matrix(np.asarray(density_map, dtype=float))
        g2 = g2.scale(mass_scale / lam ** (self.d - 1))
        return SphereDensity(U @ self.center + b, self.radius * lam, g2, self.order)

    def to_json(self):
        return {"type": "sphere", "center": self.center.tolist(), "radius": self.radius,
                "g": self.g.to_json(float)}


@dataclass
class BallField:
    """Density ``field(y)`` per unit volume at x = c + r y over the ball |y| < 1.

    ``field`` maps (N x d) unit-ball coordinates to (N x m); ``breaks`` lists
    radii in (0, 1) where the field is not smooth.
    """

    center: np.ndarray
    radius: float
    field: object
    m: int
    breaks: tuple = ()
    constant: np.ndarray = None
    kind = "ball"

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)

    @property
    def d(self):
        return self.center.size

    def _eval(self, Y):
        if self.constant is not None:
            return np.broadcast_to(self.constant, (Y.shape[0], self.m))
        return self.field(Y)

    def total_variation(self, order=24):
        if self.constant is not None:
            return float(np.linalg.norm(self.constant) * quadrature.ball_volume(self.d) * self.radius ** self.d)
        Y, w = self._rule(None, order)
        return float(np.sum(w * np.linalg.norm(self._eval(Y), axis=1)) * self.radius ** self.d)

    def _rule(self, phi, order):
        d = self.d
        lo, hi = 0.0, 1.0
        pole, D, rho = None, 0.0, None
        if phi is not None:
            diff = phi.center - self.center
            D = float(np.linalg.norm(diff)) / self.radius
            rho = phi.support_radius / self.radius
            lo, hi = max(0.0, D - rho), min(1.0, D + rho)
            if hi <= lo:
                return np.zeros((0, d)), np.zeros(0)
            pole = diff / np.linalg.norm(diff) if D > 0 else None
        cuts = sorted({lo, hi, *[b for b in self.breaks if lo < b < hi]})
        if phi is not None:
            if 0 < rho - D < 1:
                cuts = sorted(set(cuts) | {rho - D})
        pts, wts = [], []
        sphere_order = max(order, 16) if d > 2 else max(8 * order, 128)
        for a, b in zip(cuts[:-1], cuts[1:]):
            t, wt = quadrature.gauss_legendre(order, a, b)
            for ti, wi in zip(t, wt):
                if phi is not None and D > 0:
                    cap = (ti * ti + D * D - rho * rho) / (2 * ti * D)
                elif phi is not None:
                    cap = -1.0 if ti < rho else 2.0
                else:
                    cap = -1.0
                if cap > 1:
                    continue
                y, wy = quadrature.sphere_rule(d, sphere_order, pole, max(cap, -1.0))
                pts.append(ti * y)
                wts.append(wi * ti ** (d - 1) * wy)
        if not pts:
            return np.zeros((0, d)), np.zeros(0)
        return np.concatenate(pts), np.concatenate(wts)

    def quadrature(self, phi, order):
        Y, w = self._rule(phi, order)
        X = self.center + self.radius * Y
        return X, w * self.radius ** self.d, np.asarray(self._eval(Y))

    def mapped(self, U, b, density_map, mass_scale):
        U = np.asarray(U, dtype=float)
        lam = abs(np.linalg.det(U)) ** (1 / self.d)
        R = U / lam
        if not np.allclose(R.T @ R, np.eye(self.d), atol=1e-12):
            raise ValueError("balls map only under similarities")
        M = np.asarray(density_map, dtype=float)
        scale = mass_scale / lam ** self.d
        if self.constant is not None:
            return BallField(U @ self.center + b, self.radius * lam, None, M.shape[0], self.breaks,
                             scale * (M @ self.constant))
        inner = self.field
        return BallField(U @ self.center + b, self.radius * lam,
                         lambda Y: scale * (inner(Y @ R) @ M.T), M.shape[0], self.breaks)

    def to_json(self):
        if self.constant is None:
            raise ValueError("only constant-density balls serialize")
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius,
                "w": np.asarray(self.constant, dtype=float).tolist()}


def ball(center, radius, w):
    w = np.asarray(w, dtype=float)
    return BallField(np.asarray(center, dtype=float), float(radius), None, w.size, (), w)


# ---------------------------------------------------------------------------
# measures


@dataclass
class DiscreteMeasure:
    pieces: list = field(default_factory=list)
    m: int = 0

    def __post_init__(self):
        for p in self.pieces:
            if self.m == 0:
                self.m = p.m
            if p.m != self.m:
                raise ValueError("all pieces must share the density dimension")

    def __add__(self, other):
        """Disjoint union (concatenation of the piece lists)."""
        m = self.m or other.m
        return DiscreteMeasure(list(self.pieces) + list(other.pieces), m)

    def __len__(self):
        return sum(len(p) if hasattr(p, "__len__") else 1 for p in self.pieces)

    def count(self):
        return len(self)

    def to_json(self):
        return {"m": self.m, "pieces": [p.to_json() for p in self.pieces]}

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        pieces = []
        for p in obj["pieces"]:
            t = p["type"]
            if t == "segments":
                pieces.append(Segments(p["p"], p["q"], p["w"]))
            elif t == "patches":
                pieces.append(Patches(p["o"], p["frame"], p["w"]))
            elif t == "sphere":
                c = np.asarray(p["center"], dtype=float)
                m = obj["m"]
                pieces.append(SphereDensity(c, float(p["radius"]), PolyMap.from_json(c.size, m, p["g"], float)))
            elif t == "ball":
                pieces.append(ball(p["center"], p["radius"], p["w"]))
            else:
                raise ValueError(f"unknown piece type {t!r}")
        return cls(pieces, int(obj["m"]))


def zero_measure(m):
    return DiscreteMeasure([], m)


def total_variation(mu):
    return float(sum(p.total_variation() for p in mu.pieces))


def _op_mats(op):
    return linalg.to_float(op.mats)


def weak_apply(op, mu, phi, order=DEFAULT_ORDER):
    """Vector (<A mu, phi>_k)_k = (-int (A^k dmu) . grad phi)_k."""
    if order < 1:
        raise ValueError("quadrature order must be positive")
    mats = _op_mats(op)
    out = np.zeros(op.n)
    for piece in mu.pieces:
        if piece.d != op.d or piece.m != op.m:
            raise ValueError("measure and operator dimensions disagree")
        X, w, dens = piece.quadrature(phi, order)
        if X.shape[0] == 0:
            continue
        G = phi.grad(X)  # N x d
        # A^k dens: (n x d x m) . (N x m) -> N x n x d
        AD = np.einsum("kij,qj->qki", mats, dens)
        out -= np.einsum("q,qki,qi->k", w, AD, G)
    return out


def weak_residual(op, mu, suite, order=DEFAULT_ORDER):
    if not suite:
        raise ValueError("test suite must be nonempty")
    return float(max(np.max(np.abs(weak_apply(op, mu, phi, order))) for phi in suite))


def push_forward_affine(mu, U, b, density_map=None, mass_scale=1.0):
    """Image of ``mu`` under x -> U x + b, densities mapped by ``density_map``
    and multiplied by ``mass_scale``."""
    U = np.asarray(linalg.to_float(U), dtype=float)
    if abs(np.linalg.det(U)) < 1e-300 or linalg.rank(U) < U.shape[0]:
        raise ValueError("the affine map must be invertible")
    b = np.zeros(U.shape[0]) if b is None else np.asarray(b, dtype=float)
    M = np.eye(mu.m) if density_map is None else np.asarray(linalg.to_float(density_map), dtype=float)
    pieces = [p.mapped(U, b, M, mass_scale) for p in mu.pieces]
    return DiscreteMeasure(pieces, M.shape[0])


def circle_measure(center, radius, plane=(0, 1), d=2, order=256):
    """Unit tangent field on a circle in the coordinate plane ``plane``.

    Stored as a sphere density when d = 2; embedded circles in higher
    dimensions are not representable by the piece types and are rejected.
    """
    if d != 2:
        raise ValueError("embedded circles are only available for d = 2")
    # tangent at y = (cos t, sin t) is (-y2, y1)
    g = PolyMap(2, 2, [((0, 1), np.array([-1, 0], dtype=object)), ((1, 0), np.array([0, 1], dtype=object))])
    return DiscreteMeasure([SphereDensity(np.asarray(center, dtype=float), float(radius), g, order)], 2)


def face_integral(phi, d, axis, side, order=DEFAULT_ORDER, halfwidth=1.0):
    """Integral of phi over the face {x_axis = side * halfwidth} of the cube
    (-halfwidth, halfwidth)^d."""
    center = np.zeros(d)
    center[axis] = side * halfwidth
    axes = [i for i in range(d) if i != axis]
    if not axes:
        return float(phi.value(center[None])[0])
    P = face(center, axes, [halfwidth] * len(axes), [1.0])
    X, w, _ = P.quadrature(phi, order)
    if X.shape[0] == 0:
        return 0.0
    return float(np.sum(w * phi.value(X)))


def binom(n, k):
    return comb(n, k)
