"""First-order constant-coefficient operators given by matrix tuples.

An operator is stored as ``n`` matrices ``A^1..A^n`` of shape ``d x m``; it
acts on ``f: R^d -> R^m`` by ``(Af)_k = div(A^k f)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import linalg


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    d: int
    m: int
    n: int
    mats: np.ndarray
    rational: bool = True

    def __post_init__(self):
        mats = np.asarray(self.mats)
        if self.d < 1 or self.m < 1 or self.n < 1:
            raise ValueError("d, m and n must be positive")
        if mats.shape != (self.n, self.d, self.m):
            raise ValueError(
                f"expected {self.n} matrices of shape {self.d}x{self.m}, got array of shape {mats.shape}"
            )
        mats = linalg.exact(mats) if self.rational else mats.astype(float)
        mats.setflags(write=False)
        object.__setattr__(self, "mats", mats)

    @classmethod
    def from_matrices(cls, mats, rational=True):
        arr = np.asarray(mats, dtype=object if rational else float)
        if arr.ndim == 2:
            arr = arr[None]
        n, d, m = arr.shape
        return cls(d=d, m=m, n=n, mats=arr, rational=rational)

    def __getitem__(self, k):
        return self.mats[k]

    def as_float(self):
        return OperatorSpec(self.d, self.m, self.n, linalg.to_float(self.mats), rational=False)

    def symbol_coefficients(self):
        """The matrices M^i (n x m) with M^i[k, j] = A^k[i, j]."""
        return np.transpose(self.mats, (1, 0, 2))

    def row_stack(self, f):
        """Rows A^1 f, ..., A^n f as an ``n x d`` array."""
        f = _vector(f, self.m, self.rational)
        return np.array([self.mats[k].dot(f) for k in range(self.n)],
                        dtype=object if self.rational else float)

    def recombine(self, C):
        """Operator with B^k = sum_i C[k, i] A^i."""
        C = linalg.exact(C) if self.rational else np.asarray(C, dtype=float)
        if C.shape != (self.n, self.n):
            raise ValueError("recombination matrix must be n x n")
        mats = np.tensordot(C, self.mats, axes=(1, 0))
        return OperatorSpec(self.d, self.m, self.n, mats, self.rational)

    def equals(self, other):
        return (self.d, self.m, self.n) == (other.d, other.m, other.n) and bool(
            np.all(self.mats == other.mats)
        )

    def to_json(self):
        def enc(x):
            if self.rational:
                x = Fraction(x)
                return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
            return float(x)

        return {
            "d": self.d,
            "m": self.m,
            "n": self.n,
            "mode": "rational" if self.rational else "float",
            "mats": [[[enc(x) for x in row] for row in mat] for mat in self.mats],
        }

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        for key in ("d", "m", "n", "mats"):
            if key not in obj:
                raise ValueError(f"operator spec is missing field {key!r}")
        mode = obj.get("mode", "rational")
        if mode not in ("rational", "float"):
            raise ValueError(f"unknown mode {mode!r}")
        rational = mode == "rational"
        mats = obj["mats"]
        arr = linalg.exact(mats) if rational else np.asarray(mats, dtype=float)
        return cls(int(obj["d"]), int(obj["m"]), int(obj["n"]), arr, rational)


@dataclass(frozen=True, eq=False)
class SvdNormalization:
    """A = U @ Id_{r,d,m} @ V.T with U, V invertible."""

    U: np.ndarray
    V: np.ndarray
    r: int

    def block_identity(self):
        d, m = self.U.shape[0], self.V.shape[0]
        out = linalg.zeros((d, m), linalg.is_exact(self.U))
        for i in range(self.r):
            out[i, i] = 1 if not linalg.is_exact(self.U) else Fraction(1)
        return out

    def reconstruct(self):
        return self.U.dot(self.block_identity()).dot(self.V.T)


def _vector(v, size, rational):
    arr = linalg.exact(v) if rational else np.asarray(v, dtype=float)
    if arr.shape != (size,):
        raise ValueError(f"expected a vector of length {size}, got shape {arr.shape}")
    return arr


def fourier_symbol(op, xi):
    xi = _vector(xi, op.d, op.rational)
    return np.tensordot(xi, op.symbol_coefficients(), axes=(0, 0))


def wave_cone_contains(op, f):
    rows = op.row_stack(f)
    return linalg.rank(rows) < op.d


def ell1_wave_cone_scalar(A):
    """Kernel basis of a scalar operator's matrix (rows of the result)."""
    A = np.asarray(A)
    if A.ndim == 3:
        if A.shape[0] != 1:
            raise ValueError("the scalar cone needs a single matrix")
        A = A[0]
    return linalg.nullspace(A)


def svd_normalize(A):
    A = np.asarray(A)
    d, m = A.shape
    if not linalg.is_exact(A):
        W, s, Zt = np.linalg.svd(A.astype(float))
        r = int(np.sum(s > linalg.RANK_RTOL * s[0])) if s.size and s[0] > 0 else 0
        U = W.copy()
        U[:, :r] = W[:, :r] * s[:r]
        return SvdNormalization(U=U, V=Zt.T, r=r)
    A = linalg.exact(A)
    # first r columns of U: reduced basis of the column space
    Rt, pivots, _ = linalg.rref(A.T)
    r = len(pivots)
    U = linalg.complete_rows(Rt[:r], d).T if r else linalg.eye(d)
    coords = linalg.inverse(U).dot(A)
    top = coords[:r]
    Vt = linalg.complete_rows(top, m) if r else linalg.eye(m)
    return SvdNormalization(U=U, V=Vt.T.copy(), r=r)


def operators_equivalent(op1, op2):
    if (op1.d, op1.m) != (op2.d, op2.m):
        raise ValueError("operators act between different spaces")
    rational = op1.rational and op2.rational
    a = op1.mats.reshape(op1.n, -1)
    b = op2.mats.reshape(op2.n, -1)
    if not rational:
        a, b = linalg.to_float(a), linalg.to_float(b)
    both = np.concatenate([a, b], axis=0)
    ra, rb, rab = linalg.rank(a), linalg.rank(b), linalg.rank(both)
    return ra == rb == rab


def divergence(d, rational=True):
    return OperatorSpec.from_matrices(linalg.eye(d, rational), rational)


def gradient(d, rational=True):
    mats = linalg.zeros((d, d, 1), rational)
    for k in range(d):
        mats[k, k, 0] = 1
    return OperatorSpec(d, 1, d, mats, rational)
