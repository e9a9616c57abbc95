"""Dyadic branched trees carrying a Dirac mass to a uniform face measure.

Level ``l`` of the tree joins the center of every dyadic cell P of side
2^{2-l} on the face (-1, 1)^h, placed at height 1 - 2^{1-l}, to the centers
of its 2^h children at height 1 - 2^{-l}.  Each level-l segment carries
weight 2^{-lh}, so mass is conserved at every interior node.

Coordinates are exact dyadic rationals; float arrays are produced only
when pieces are materialised for quadrature or export.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import measures as ms
from .surd import Surd

MAX_FACE_DIM = 6
MAX_LEVEL = 20
MAX_SEGMENTS = 1 << 22


class ResourceLimitError(ValueError):
    """Raised when a requested tree would not fit the resource guard."""


def segment_count(h, L):
    return sum(1 << (level * h) for level in range(1, L + 1))


def memory_estimate(h, L):
    """Bytes needed to materialise the float segment arrays of gamma_L."""
    return segment_count(h, L) * 3 * (h + 1) * 8


def _check_params(h, L):
    if h < 0 or L < 1:
        raise ValueError("need h >= 0 and L >= 1")
    if h > MAX_FACE_DIM or L > MAX_LEVEL:
        raise ResourceLimitError(
            f"h={h}, L={L} exceeds the guard h <= {MAX_FACE_DIM}, L <= {MAX_LEVEL}; "
            f"{segment_count(h, L)} segments would need about {memory_estimate(h, L) / 2**30:.3g} GiB"
        )


def _guard_materialise(h, L):
    count = segment_count(h, L)
    if count > MAX_SEGMENTS:
        raise ResourceLimitError(
            f"gamma with h={h}, L={L} has {count} segments (limit {MAX_SEGMENTS}); "
            f"about {memory_estimate(h, L) / 2**30:.3g} GiB required"
        )


def check_emittable(h, L):
    """Raise ResourceLimitError unless gamma_L can be listed segment by segment."""
    _check_params(h, L)
    _guard_materialise(h, L)


def cell_centers(h, level):
    """Float centers q(T) of the dyadic cells of side 2^{1-level} in (-1, 1)^h,
    flattened in row-major index order."""
    n = 1 << level
    ticks = -1 + (2 * np.arange(n) + 1) / n
    if h == 0:
        return np.zeros((1, 0))
    grids = np.meshgrid(*([ticks] * h), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def exact_cell_center(index, level):
    return tuple(Fraction(-1) + Fraction(2 * i + 1, 1 << level) for i in index)


def closed_form_level_mass(h, level):
    return Surd.sqrt(h + 1) * Fraction(1, 1 << level)


@dataclass
class BranchTree:
    h: int
    L: int
    levelMasses: list = field(default_factory=list)
    _tree: ms.DiscreteMeasure = None

    @property
    def d(self):
        return self.h + 1

    def level_segments(self, level):
        """Float arrays (P, Q, weight) of the segments at ``level``."""
        h = self.h
        parents = cell_centers(h, level - 1)
        children = cell_centers(h, level)
        n = 1 << level
        if h:
            idx = np.stack(np.unravel_index(np.arange(n ** h), (n,) * h), axis=1)
            parent_idx = np.ravel_multi_index(tuple((idx // 2).T), (n // 2,) * h)
        else:
            parent_idx = np.zeros(1, dtype=int)
        P = np.concatenate([np.full((len(children), 1), 1 - 2.0 ** (1 - level)), parents[parent_idx]], axis=1)
        Q = np.concatenate([np.full((len(children), 1), 1 - 2.0 ** (-level)), children], axis=1)
        return P, Q, 2.0 ** (-level * h)

    @property
    def tree(self):
        if self._tree is None:
            _guard_materialise(self.h, self.L)
            pieces = []
            for level in range(1, self.L + 1):
                P, Q, wt = self.level_segments(level)
                v = Q - P
                W = wt * v / np.linalg.norm(v, axis=1)[:, None]
                pieces.append(ms.Segments(P, Q, W))
            self._tree = ms.DiscreteMeasure(pieces, self.d)
        return self._tree

    def leaves(self):
        """Leaf points (1 - 2^{-L}, q(T)) and their common weight 2^{-Lh}."""
        T = cell_centers(self.h, self.L)
        X = np.concatenate([np.full((len(T), 1), 1 - 2.0 ** (-self.L)), T], axis=1)
        return X, 2.0 ** (-self.L * self.h)

    def to_csv_rows(self):
        for level in range(1, self.L + 1):
            P, Q, wt = self.level_segments(level)
            for p, q in zip(P, Q):
                yield [level, *p.tolist(), *q.tolist(), wt]


def _exact_level_mass(h, level):
    """Sum of |segment| x weight over one level, exact.

    All parents share the same child pattern, so the level sum is the
    parent count times the sum over the 2^h child offsets."""
    step = Fraction(1, 1 << level)
    weight = Fraction(1, 1 << (level * h))
    total = Surd(0)
    for signs in itertools.product((-1, 1), repeat=h):
        sq = step * step + sum((s * step) ** 2 for s in signs)
        total = total + weight * Surd.sqrt(sq)
    parents = 1 << ((level - 1) * h)
    return total * parents


def build_gamma(h, L):
    _check_params(h, L)
    masses = [_exact_level_mass(h, level) for level in range(1, L + 1)]
    for level, mass in enumerate(masses, start=1):
        if mass != closed_form_level_mass(h, level):
            raise AssertionError(f"level {level} mass {mass} disagrees with the closed form")
    return BranchTree(h, L, masses)


def reflect(tree_measure):
    """The reflected tree x -> -x with densities negated, so every segment
    still points away from the origin."""
    d = tree_measure.pieces[0].d if tree_measure.pieces else 1
    return ms.push_forward_affine(tree_measure, -np.eye(d), None, -np.eye(tree_measure.m), 1.0)


def build_mu(h, L, tree=None):
    """2^h (gamma - gamma'), a flow from the face x_1 = -1 to the face x_1 = 1."""
    tree = tree or build_gamma(h, L)
    gamma = tree.tree
    d = h + 1
    scale = float(2 ** h)
    up = ms.push_forward_affine(gamma, np.eye(d), None, None, scale)
    down = ms.push_forward_affine(reflect(gamma), np.eye(d), None, None, -scale)
    return up + down


def total_variation_closed_form(h, L):
    return 2 ** (h + 1) * np.sqrt(h + 1) * (1 - 2.0 ** (-L))


def _leaves_near(h, L, phi):
    """Leaves of gamma_L whose transverse coordinates can meet the support of phi."""
    n = 1 << L
    c = phi.center
    rho = phi.support_radius
    # transverse index i has coordinate -1 + (2 i + 1) / n
    ranges = []
    for i in range(h):
        lo = max(0, int(np.floor(((c[i + 1] - rho) + 1) * n / 2 - 0.5)))
        hi = min(n - 1, int(np.ceil(((c[i + 1] + rho) + 1) * n / 2 - 0.5)))
        if hi < lo:
            return np.zeros((0, h + 1))
        ranges.append(-1 + (2 * np.arange(lo, hi + 1) + 1) / n)
    if h == 0:
        T = np.zeros((1, 0))
    else:
        grids = np.meshgrid(*ranges, indexing="ij")
        T = np.stack([g.ravel() for g in grids], axis=1)
    return np.concatenate([np.full((len(T), 1), 1 - 2.0 ** (-L)), T], axis=1)


def mu_divergence_pairing(h, L, phi):
    """<div mu_L, phi> from the telescoping identity at the leaves:
    2^h 2^{-Lh} sum_T (phi(-leaf_T) - phi(leaf_T))."""
    X = _leaves_near(h, L, phi)
    Xr = -_leaves_near(h, L, _reflected(phi))
    w = 2.0 ** (h - L * h)
    return w * (float(np.sum(phi.value(Xr))) - float(np.sum(phi.value(X))))


def _reflected(phi):
    if isinstance(phi, ms.Bump):
        return ms.Bump(-phi.center, phi.radius, phi.s)
    raise TypeError("leaf lookup needs a bump test function")


def face_pairing(h, phi, order=ms.DEFAULT_ORDER):
    """int_{x_1 = -1} phi - int_{x_1 = 1} phi over the faces of (-1, 1)^{h+1}."""
    d = h + 1
    return ms.face_integral(phi, d, 0, -1, order) - ms.face_integral(phi, d, 0, 1, order)


def face_residual(h, L, phi, order=ms.DEFAULT_ORDER):
    return abs(mu_divergence_pairing(h, L, phi) - face_pairing(h, phi, order))


def face_residual_bound(h, L, lip):
    """2^{h+1} Lip sqrt(h) 2^{-L}: midpoint displacement of the leaves."""
    return 2 ** (h + 1) * lip * np.sqrt(h) * 2.0 ** (-L)


def rigorous_face_bound(h, L, lip):
    """Bound including the normal offset 2^{-L} of the leaves."""
    return 2 ** (h + 1) * lip * np.sqrt(h + 1) * 2.0 ** (-L)
