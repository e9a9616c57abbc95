"""Exterior derivative on (d-q)-forms as an operator tuple.

Forms are written in the basis f_I = dx_{i_1} ^ ... ^ dx_{i_{d-q}} with I
strictly increasing and 1-based; both grades are ordered
lexicographically.  For J = (j_1, ..., j_{d-q+1}),

    A^J f_I = (-1)^{l+1} e_{j_l}   if I is J without its l-th entry,

and 0 when I is not contained in J.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import linalg
from .operator import OperatorSpec, fourier_symbol
from .witness import Fragment, Witness


@dataclass(frozen=True)
class MultiIndex:
    entries: tuple
    d: int

    def __post_init__(self):
        e = tuple(int(x) for x in self.entries)
        if any(b <= a for a, b in zip(e, e[1:])):
            raise ValueError(f"multi-index {e} is not strictly increasing")
        if any(not 1 <= x <= self.d for x in e):
            raise ValueError(f"multi-index {e} has entries outside 1..{self.d}")
        object.__setattr__(self, "entries", e)

    def __len__(self):
        return len(self.entries)

    def contained_in(self, J):
        return len(J) == len(self) + 1 and set(self.entries) <= set(J.entries)

    def missing_from(self, J):
        """The single entry of J not in self (requires containment)."""
        (extra,) = set(J.entries) - set(self.entries)
        return extra


@dataclass(frozen=True)
class FormFrame:
    d: int
    q: int
    sources: tuple  # (d-q)-multi-indices
    targets: tuple  # (d-q+1)-multi-indices

    @property
    def m(self):
        return len(self.sources)

    @property
    def n(self):
        return len(self.targets)

    def source_position(self, entries):
        return self.sources.index(MultiIndex(tuple(entries), self.d))

    def target_position(self, entries):
        return self.targets.index(MultiIndex(tuple(entries), self.d))


def _check_grade(d, q):
    if d < 2:
        raise ValueError("exterior operators need d >= 2")
    if q == d:
        raise ValueError("q = d is the gradient on functions, which is not k-balanceable for any k")
    if q == 0:
        raise ValueError("q = 0 acts on top-degree forms and is the zero operator")
    if not 1 <= q <= d - 1:
        raise ValueError(f"q={q} must lie in 1..{d - 1}")


def multi_indices(d, length):
    return tuple(MultiIndex(c, d) for c in itertools.combinations(range(1, d + 1), length))


def form_frame(d, q):
    return FormFrame(d, q, multi_indices(d, d - q), multi_indices(d, d - q + 1))


def _ext_matrices(frame):
    d = frame.d
    mats = []
    for J in frame.targets:
        M = linalg.zeros((d, frame.m))
        for col, I in enumerate(frame.sources):
            if not I.contained_in(J):
                continue
            j = I.missing_from(J)
            pos = J.entries.index(j) + 1
            M[j - 1, col] = Fraction((-1) ** (pos + 1))
        mats.append(M)
    return mats


def build_ext_operator(d, q):
    """Exterior derivative on (d-q)-forms: returns (OperatorSpec, FormFrame)."""
    _check_grade(d, q)
    frame = form_frame(d, q)
    return OperatorSpec.from_matrices(_ext_matrices(frame)), frame


def symbol_complex_check(d, q, xis=None, samples=100, seed=0):
    """max |entry| of symbol(grade d-q -> d-q+1) @ symbol(grade d-q-1 -> d-q)
    over the sample frequencies; exact zero for rational samples."""
    if not 1 <= q <= d - 2:
        raise ValueError(f"two consecutive grades need 1 <= q <= d - 2, got q={q}, d={d}")
    outer, _ = build_ext_operator(d, q)
    inner, _ = build_ext_operator(d, q + 1)
    if xis is None:
        rng = np.random.default_rng(seed)
        xis = [[Fraction(int(a), int(b)) for a, b in zip(rng.integers(-9, 10, d), rng.integers(1, 10, d))]
               for _ in range(samples)]
    worst = Fraction(0)
    for xi in xis:
        comp = fourier_symbol(outer, xi).dot(fourier_symbol(inner, xi))
        worst = max(worst, linalg.max_abs(comp), key=float)
    return worst


def _sort_sign(seq):
    """Sign of the permutation sorting ``seq`` (distinct entries)."""
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def _relabel(pi, entries):
    image = [pi[x] for x in entries]
    return _sort_sign(image), tuple(sorted(image))


def _reference_fragment(d, q, frame):
    """Choices for I = (q+1, ..., d) as (C rows as target indices, e, g)."""
    p = q
    I0 = tuple(range(q + 1, d + 1))
    lead = [(l,) + I0 for l in range(1, p + 1)]
    rest = [J.entries for J in frame.targets if J.entries not in lead]
    order = lead + rest
    e = [0] * d
    e[d - 1] = (-1) ** (d - p)
    g = [(l,) + tuple(range(p + 1, d)) for l in range(1, p + 1)]
    return I0, order, e, g


def _permutation_to(d, q, I):
    """Bijection of 1..d sending (q+1..d) onto I and 1..q onto the
    complement, both order-preserving."""
    comp = [x for x in range(1, d + 1) if x not in I]
    pi = {}
    for a, b in zip(range(1, q + 1), comp):
        pi[a] = b
    for a, b in zip(range(q + 1, d + 1), I):
        pi[a] = b
    return pi


def exterior_witness(d, q, I):
    """Certificate fragment for f_I, transported from the reference index by
    a coordinate relabeling; returns a Fragment over ``build_ext_operator``."""
    _check_grade(d, q)
    I = MultiIndex(tuple(I), d)
    if len(I) != d - q:
        raise ValueError(f"multi-index {I.entries} must have length {d - q}")
    frame = form_frame(d, q)
    n, m = frame.n, frame.m
    I0, order, e0, g0 = _reference_fragment(d, q, frame)
    pi = _permutation_to(d, q, I.entries)

    C = linalg.zeros((n, n))
    for row, J in enumerate(order):
        sign, target = _relabel(pi, J)
        C[row, frame.target_position(target)] = Fraction(sign)

    f = linalg.zeros(m)
    sign_f, img = _relabel(pi, I0)
    f[frame.source_position(img)] = Fraction(1)
    e = linalg.zeros(d)
    for j, v in enumerate(e0, start=1):
        if v:
            e[pi[j] - 1] = Fraction(v)
    g = linalg.zeros((n, m))
    for row, K in enumerate(g0):
        sign, img_k = _relabel(pi, K)
        # f was rescaled by sign_f to equal f_I; the relations are homogeneous in f
        g[row, frame.source_position(img_k)] = Fraction(sign)
    return Fragment(f, C, q, e, g)


def ext_condition_witness(d, q):
    _check_grade(d, q)
    frame = form_frame(d, q)
    return Witness([exterior_witness(d, q, I.entries) for I in frame.sources])


def curl_matrices():
    """Hand-written curl on R^3 as three 3x3 matrices (rows of curl u)."""
    # (curl u)_1 = d2 u3 - d3 u2, (curl u)_2 = d3 u1 - d1 u3, (curl u)_3 = d1 u2 - d2 u1
    c1 = [[0, 0, 0], [0, 0, 1], [0, -1, 0]]
    c2 = [[0, 0, -1], [0, 0, 0], [1, 0, 0]]
    c3 = [[0, 1, 0], [-1, 0, 0], [0, 0, 0]]
    return [linalg.exact(c) for c in (c1, c2, c3)]
