"""Small dense linear algebra over exact rationals and floats.

Exact matrices are numpy object arrays holding ``fractions.Fraction`` (or
``Surd`` where square roots are unavoidable);
float matrices are ordinary ``float64`` arrays.  Every routine dispatches
on the dtype so callers can stay agnostic of the arithmetic mode.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from .surd import Surd

RANK_RTOL = 1e-10


def to_fraction(x):
    if isinstance(x, (Fraction, Surd)):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (float, np.floating)):
        return Fraction(float(x)).limit_denominator(10**12)
    raise TypeError(f"cannot convert {x!r} to a rational")


def exact(a):
    """Return ``a`` as an object array of Fractions."""
    arr = np.asarray(a, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    for idx in np.ndindex(arr.shape):
        out[idx] = to_fraction(arr[idx])
    return out


def is_exact(a):
    return np.asarray(a).dtype == object


def to_float(a):
    return np.asarray(a, dtype=float) if not is_exact(a) else np.vectorize(float, otypes=[float])(a)


def zeros(shape, rational=True):
    if rational:
        out = np.empty(shape, dtype=object)
        out.fill(Fraction(0))
        return out
    return np.zeros(shape)


def eye(n, rational=True):
    out = zeros((n, n), rational)
    for i in range(n):
        out[i, i] = Fraction(1) if rational else 1.0
    return out


def rref(a):
    """Reduced row echelon form of an exact matrix.

    Returns ``(R, pivots, E)`` with ``E @ a == R`` and ``E`` invertible.
    """
    R = exact(a).copy()
    rows, cols = R.shape
    E = eye(rows)
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        piv = next((i for i in range(r, rows) if R[i, c] != 0), None)
        if piv is None:
            continue
        if piv != r:
            R[[r, piv]] = R[[piv, r]]
            E[[r, piv]] = E[[piv, r]]
        inv = 1 / R[r, c]
        R[r] = R[r] * inv
        E[r] = E[r] * inv
        for i in range(rows):
            if i != r and R[i, c] != 0:
                fac = R[i, c]
                R[i] = R[i] - fac * R[r]
                E[i] = E[i] - fac * E[r]
        pivots.append(c)
        r += 1
    return R, pivots, E


def rank(a, rtol=RANK_RTOL):
    a = np.asarray(a)
    if a.size == 0:
        return 0
    if is_exact(a):
        return len(rref(a)[1])
    s = np.linalg.svd(a.astype(float), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def nullspace(a, rtol=RANK_RTOL):
    """Basis of the kernel, one vector per row of the returned array."""
    a = np.asarray(a)
    cols = a.shape[1]
    if is_exact(a):
        R, pivots, _ = rref(a)
        free = [c for c in range(cols) if c not in pivots]
        basis = zeros((len(free), cols))
        for k, fc in enumerate(free):
            basis[k, fc] = Fraction(1)
            for r, pc in enumerate(pivots):
                basis[k, pc] = -R[r, fc]
        return basis
    _, s, vt = np.linalg.svd(a.astype(float))
    r = int(np.sum(s > rtol * s[0])) if s.size and s[0] > 0 else 0
    return vt[r:]


def solve(a, b, rtol=1e-9):
    """One solution of ``a x = b`` or ``None`` when inconsistent.

    Exact mode returns the pivot solution (free variables set to zero);
    float mode returns the minimal-norm least-squares solution.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if is_exact(a):
        R, pivots, E = rref(a)
        rhs = E.dot(exact(b))
        if any(rhs[i] != 0 for i in range(len(pivots), a.shape[0])):
            return None
        x = zeros(a.shape[1])
        for r, pc in enumerate(pivots):
            x[pc] = rhs[r]
        return x
    x, *_ = np.linalg.lstsq(a.astype(float), b.astype(float), rcond=None)
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if np.abs(a @ x - b).max(initial=0.0) > rtol * scale:
        return None
    return x


def inverse(a):
    a = np.asarray(a)
    if not is_exact(a):
        return np.linalg.inv(a.astype(float))
    n = a.shape[0]
    R, pivots, E = rref(a)
    if len(pivots) != n:
        raise np.linalg.LinAlgError("matrix is singular")
    return E


def det(a):
    a = np.asarray(a)
    if not is_exact(a):
        return float(np.linalg.det(a.astype(float)))
    M = exact(a).copy()
    n = M.shape[0]
    out = Fraction(1)
    for c in range(n):
        piv = next((i for i in range(c, n) if M[i, c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            M[[c, piv]] = M[[piv, c]]
            out = -out
        out *= M[c, c]
        for i in range(c + 1, n):
            if M[i, c] != 0:
                M[i] = M[i] - (M[i, c] / M[c, c]) * M[c]
    return out


def complete_rows(rows, n):
    """Append standard basis rows so that the result spans R^n.

    ``rows`` must be linearly independent; standard vectors are tried in
    index order and kept when they raise the rank.
    """
    rows = np.asarray(rows)
    rational = is_exact(rows) if rows.size else True
    out = [r for r in rows]
    current = len(out)
    for i in range(n):
        if current == n:
            break
        e = zeros(n, rational)
        e[i] = Fraction(1) if rational else 1.0
        trial = np.array(out + [e], dtype=object if rational else float)
        if rank(trial) > current:
            out.append(e)
            current += 1
    return np.array(out, dtype=object if rational else float)


def max_abs(a):
    a = np.asarray(a)
    if a.size == 0:
        return 0
    if is_exact(a):
        return max(abs(x) for x in a.flat)
    return float(np.abs(a).max())
