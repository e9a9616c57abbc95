"""Vector-valued polynomials R^d -> R^m stored as monomial coefficient lists."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from . import linalg


class PolyMap:
    """``x -> sum_t c_t * x^alpha_t`` with exponent tuples ``alpha_t``."""

    def __init__(self, d, m, terms=None):
        self.d = d
        self.m = m
        merged = {}
        for alpha, coef in (terms or []):
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != d:
                raise ValueError("exponent tuple has the wrong length")
            coef = np.asarray(coef, dtype=object)
            if coef.shape != (m,):
                raise ValueError("coefficient vector has the wrong length")
            merged[alpha] = merged[alpha] + coef if alpha in merged else coef
        self.terms = [(a, c) for a, c in sorted(merged.items()) if any(x != 0 for x in c)]

    @property
    def degree(self):
        return max((sum(a) for a, _ in self.terms), default=0)

    def is_zero(self):
        return not self.terms

    @classmethod
    def zero(cls, d, m):
        return cls(d, m)

    @classmethod
    def from_quadratic(cls, Q):
        """From a tensor Q (d x d x m): x -> sum_ab x_a x_b Q[a, b]."""
        d, _, m = Q.shape
        terms = []
        for a in range(d):
            for b in range(d):
                alpha = [0] * d
                alpha[a] += 1
                alpha[b] += 1
                terms.append((alpha, Q[a, b]))
        return cls(d, m, terms)

    def apply_matrix(self, M):
        M = np.asarray(M)
        return PolyMap(self.d, M.shape[0], [(a, M.dot(c)) for a, c in self.terms])

    def scale(self, s):
        return PolyMap(self.d, self.m, [(a, c * s) for a, c in self.terms])

    def __add__(self, other):
        return PolyMap(self.d, self.m, self.terms + other.terms)

    def __neg__(self):
        return self.scale(-1)

    def pullback_linear(self, R):
        """The polynomial x -> self(R x) for a d x d matrix R (float)."""
        R = np.asarray(R, dtype=float)
        out = []
        for alpha, c in self.terms:
            # expand prod_i (R[i] . x)^alpha_i
            partial = {tuple([0] * self.d): 1.0}
            for i, a in enumerate(alpha):
                for _ in range(a):
                    nxt = {}
                    for beta, v in partial.items():
                        for j in range(self.d):
                            if R[i, j] == 0:
                                continue
                            gamma = list(beta)
                            gamma[j] += 1
                            gamma = tuple(gamma)
                            nxt[gamma] = nxt.get(gamma, 0.0) + v * R[i, j]
                    partial = nxt
            cf = np.asarray([float(x) for x in c])
            out.extend((beta, v * cf) for beta, v in partial.items())
        merged = {}
        for beta, v in out:
            merged[beta] = merged.get(beta, 0.0) + v
        return PolyMap(self.d, self.m, [(b, v.astype(object)) for b, v in merged.items()])

    def __call__(self, X):
        """Float evaluation at points X (N x d) -> (N x m)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.zeros((X.shape[0], self.m))
        for alpha, c in self.terms:
            mon = np.prod(X ** np.asarray(alpha), axis=1)
            out += mon[:, None] * np.asarray([float(x) for x in c])[None, :]
        return out

    def eval_exact(self, x):
        out = np.array([Fraction(0)] * self.m, dtype=object)
        for alpha, c in self.terms:
            mon = Fraction(1)
            for xi, a in zip(x, alpha):
                mon = mon * xi ** a if a else mon
            out = out + c * mon
        return out

    def partial(self, i):
        out = []
        for alpha, c in self.terms:
            if alpha[i] == 0:
                continue
            beta = list(alpha)
            beta[i] -= 1
            out.append((beta, c * alpha[i]))
        return PolyMap(self.d, self.m, out)

    def jacobian_exact(self, x):
        """m x d matrix of partial derivatives at an exact point."""
        cols = [self.partial(i).eval_exact(x) for i in range(self.d)]
        return np.array(cols, dtype=object).T

    def jacobian(self, X):
        """(N x m x d) float Jacobians."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.stack([self.partial(i)(X) for i in range(self.d)], axis=2)

    def to_json(self, encode):
        return [{"exp": list(a), "coef": [encode(x) for x in c]} for a, c in self.terms]

    @classmethod
    def from_json(cls, d, m, obj, decode):
        return cls(d, m, [(t["exp"], np.array([decode(x) for x in t["coef"]], dtype=object)) for t in obj])


def linear_form(v):
    """The scalar polynomial x -> v . x as a PolyMap into R^1."""
    d = len(v)
    terms = []
    for i, vi in enumerate(v):
        alpha = [0] * d
        alpha[i] = 1
        terms.append((alpha, np.array([vi], dtype=object)))
    return PolyMap(d, 1, terms)


def constant(d, v):
    return PolyMap(d, len(v), [([0] * d, np.asarray(v, dtype=object))])


def exactify(P):
    return PolyMap(P.d, P.m, [(a, linalg.exact(c)) for a, c in P.terms])
