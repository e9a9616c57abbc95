"""Certificates for the algebraic balancing condition on operator tuples.

A certificate fixes a basis of R^m and, for every basis vector ``f``, a
recombination ``B = C A`` of the operator together with an integer ``p``,
a unit vector ``e`` and auxiliary vectors ``g_1..g_n``.  The relations
checked by :func:`verify_witness` are:

* ``(B^1 f, ..., B^n f) = (e_1, ..., e_p, 0, ..., 0)`` with ``e_1..e_p``
  orthonormal (``point1``);
* ``B^k g_k = e`` for ``k <= p`` (``shared_rank``);
* ``B^l g_k`` lies in ``span(e_1..e_p)`` for ``l != k`` (``span``);
* ``B^l g_k . B^h f = - B^l g_h . B^k f`` for all ``l, h, k``
  (``antisymmetry``);

plus three consequences used as redundancy checks.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import linalg
from .operator import OperatorSpec, wave_cone_contains
from .surd import Surd


class NotRepresentable(Exception):
    """The operator provably admits no certificate."""


class NotFound(Exception):
    """A search ended without a certificate; this proves nothing."""

    def __init__(self, message, reason="budget"):
        super().__init__(message)
        self.reason = reason


@dataclass
class Fragment:
    f: np.ndarray
    C: np.ndarray
    p: int
    e: np.ndarray
    g: np.ndarray

    def recombined(self, op):
        return op.recombine(self.C)


@dataclass
class Witness:
    fragments: list

    @property
    def basis(self):
        return np.array([fr.f for fr in self.fragments], dtype=self.fragments[0].f.dtype)

    def fragment_for(self, f):
        for fr in self.fragments:
            if np.all(fr.f == np.asarray(f, dtype=fr.f.dtype)):
                return fr
        raise KeyError("no fragment for this vector")


@dataclass
class CheckResult:
    passed: bool
    violation: float


@dataclass
class WitnessReport:
    checks: dict = field(default_factory=dict)
    per_fragment: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks.values())

    def failed(self):
        return [name for name, c in self.checks.items() if not c.passed]

    def to_json(self):
        return {
            "passed": self.passed,
            "checks": {k: {"passed": v.passed, "violation": v.violation} for k, v in self.checks.items()},
        }


def encode_entry(x):
    """JSON form of a scalar: "p/q" for rationals, tagged radicals, floats."""
    if isinstance(x, Surd):
        x = x.simplify()
    if isinstance(x, Surd):
        if not x.is_rational():
            return x.to_json()
        x = x.terms.get(1, Fraction(0))
    if isinstance(x, (int, np.integer)):
        x = Fraction(int(x))
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    return float(x)


def decode_entry(x, rational=True):
    if isinstance(x, dict):
        return Surd.from_json(x).simplify() if rational else float(Surd.from_json(x))
    if isinstance(x, bool):
        raise ValueError("booleans are not matrix entries")
    if rational:
        return linalg.to_fraction(x)
    return float(Fraction(x)) if isinstance(x, str) else float(x)


def _encode_array(a):
    a = np.asarray(a, dtype=object)
    if a.ndim == 0:
        return encode_entry(a.item())
    return [_encode_array(row) for row in a]


def _decode_array(obj, rational):
    arr = np.asarray(obj, dtype=object)
    out = np.empty(arr.shape, dtype=object if rational else float)
    for idx in np.ndindex(arr.shape):
        out[idx] = decode_entry(arr[idx], rational)
    return out


def witness_to_json(w, op=None):
    rational = bool(w.fragments) and linalg.is_exact(w.fragments[0].f)
    obj = {
        "mode": "rational" if rational else "float",
        "fragments": [
            {"f": _encode_array(fr.f), "C": _encode_array(fr.C), "p": int(fr.p),
             "e": _encode_array(fr.e), "g": _encode_array(fr.g)}
            for fr in w.fragments
        ],
    }
    if op is not None:
        obj["operator"] = op.to_json()
    return obj


def witness_from_json(obj):
    """(Witness, OperatorSpec or None) from the JSON form."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    mode = obj.get("mode", "rational")
    if mode not in ("rational", "float"):
        raise ValueError(f"unknown mode {mode!r}")
    rational = mode == "rational"
    if "fragments" not in obj:
        raise ValueError("witness is missing field 'fragments'")
    frags = []
    for i, fr in enumerate(obj["fragments"]):
        missing = [k for k in ("f", "C", "p", "e", "g") if k not in fr]
        if missing:
            raise ValueError(f"fragment {i} is missing {missing}")
        g = _decode_array(fr["g"], rational)
        f = _decode_array(fr["f"], rational)
        if g.size == 0:
            g = g.reshape(0, f.size)
        frags.append(Fragment(f, _decode_array(fr["C"], rational), int(fr["p"]),
                              _decode_array(fr["e"], rational), g))
    op = OperatorSpec.from_json(obj["operator"]) if "operator" in obj else None
    return Witness(frags), op


CHECK_NAMES = ("basis", "point1", "unit_e", "shared_rank", "span", "antisymmetry",
               "cons_orth_Bf", "cons_e_perp_Bf", "cons_orth_ek")


def _mag(x):
    return float(abs(x))


def _dot(u, v):
    return sum((a * b for a, b in zip(u, v)), Fraction(0))


class _Tracker:
    def __init__(self, tol):
        self.tol = tol
        self.worst = {name: 0.0 for name in CHECK_NAMES}
        self.ok = {name: True for name in CHECK_NAMES}

    def record(self, name, value):
        value_abs = abs(value)
        mag = _mag(value_abs)
        if mag > self.worst[name]:
            self.worst[name] = mag
        if self.tol == 0:
            if value != 0:
                self.ok[name] = False
        elif mag > self.tol:
            self.ok[name] = False

    def fail(self, name, mag=float("inf")):
        self.ok[name] = False
        self.worst[name] = max(self.worst[name], mag)

    def result(self):
        return {n: CheckResult(self.ok[n], self.worst[n]) for n in CHECK_NAMES}


def _check_fragment(op, fr, track):
    n, d, m = op.n, op.d, op.m
    rational = op.rational
    C = np.asarray(fr.C)
    if C.shape != (n, n):
        raise ValueError("recombination matrix must be n x n")
    if rational:
        if C.dtype != object:
            raise ValueError("exact operators need exact certificates")
        if linalg.rank(C) != n:
            raise ValueError("recombination matrix is not invertible")
    elif linalg.rank(np.asarray(C, dtype=float)) != n:
        raise ValueError("recombination matrix is not invertible")
    if np.asarray(fr.g).shape != (n, m) or np.asarray(fr.e).shape != (d,):
        raise ValueError("certificate vectors have inconsistent dimensions")
    p = int(fr.p)
    if not 0 <= p <= min(n, d):
        raise ValueError("p out of range")
    B = op.recombine(C) if rational else op.as_float().recombine(np.asarray(C, dtype=float))
    f = fr.f if rational else np.asarray(fr.f, dtype=float)
    g = fr.g if rational else np.asarray(fr.g, dtype=float)
    e = fr.e if rational else np.asarray(fr.e, dtype=float)
    Bf = [B[k].dot(f) for k in range(n)]
    Bg = [[B[l].dot(g[k]) for k in range(n)] for l in range(n)]  # Bg[l][k] = B^l g_k

    for k in range(p):
        for l in range(p):
            track.record("point1", _dot(Bf[k], Bf[l]) - (1 if k == l else 0))
    for k in range(p, n):
        for x in Bf[k]:
            track.record("point1", x)
    if p >= 1:
        track.record("unit_e", _dot(e, e) - 1)

    for k in range(p):
        for x in Bg[k][k] - e:
            track.record("shared_rank", x)

    frame = Bf[:p]
    for l in range(n):
        for k in range(n):
            if l == k:
                continue
            v = Bg[l][k]
            resid = v - sum((_dot(v, u) * u for u in frame), 0 * v)
            for x in resid:
                track.record("span", x)

    for l in range(n):
        for h in range(n):
            for k in range(n):
                track.record("antisymmetry", _dot(Bg[l][k], Bf[h]) + _dot(Bg[l][h], Bf[k]))

    for l in range(n):
        for k in range(n):
            track.record("cons_orth_Bf", _dot(Bg[l][k], Bf[k]))
    if p >= 1:
        for k in range(n):
            track.record("cons_e_perp_Bf", _dot(e, Bf[k]))
    for k in range(p):
        for h in range(n):
            track.record("cons_orth_ek", _dot(Bg[k][h], Bf[k]))


def verify_witness(op, w, tol=0):
    """Check every relation of the certificate; returns a WitnessReport."""
    if op.rational and tol != 0:
        raise ValueError("exact operators are verified with tol = 0")
    if not op.rational and tol < 0:
        raise ValueError("tolerance must be nonnegative")
    fragments = w.fragments if isinstance(w, Witness) else [w]
    report = WitnessReport()
    overall = _Tracker(tol)
    for fr in fragments:
        if np.asarray(fr.f).shape != (op.m,):
            raise ValueError("basis vector has the wrong length")
        local = _Tracker(tol)
        _check_fragment(op, fr, local)
        report.per_fragment.append(local.result())
        for name in CHECK_NAMES:
            if name == "basis":
                continue
            overall.worst[name] = max(overall.worst[name], local.worst[name])
            overall.ok[name] = overall.ok[name] and local.ok[name]
    if isinstance(w, Witness):
        basis = np.array([fr.f for fr in fragments], dtype=object if op.rational else float)
        if linalg.rank(basis) != op.m:
            overall.fail("basis", 1.0)
    report.checks = overall.result()
    return report


def scalar_condition_decision(A):
    r = linalg.rank(np.asarray(A))
    return r == 0 or r >= 2


def _unit_direction_exact(v):
    """v / |v| and 1 / |v| as exact surds."""
    inv_norm = 1 / Surd.sqrt(_dot(v, v))
    return np.array([x * inv_norm for x in v], dtype=object), inv_norm


def scalar_witness(A, rational=None):
    """Certificate for a single-matrix operator over the standard basis."""
    A = np.asarray(A)
    if A.ndim == 3:
        A = A[0]
    if rational is None:
        rational = linalg.is_exact(A)
    A = linalg.exact(A) if rational else A.astype(float)
    d, m = A.shape
    r = linalg.rank(A)
    if r == 1:
        raise NotRepresentable("a rank-one matrix admits no certificate")
    one = Fraction(1) if rational else 1.0
    fragments = []
    for j in range(m):
        f = linalg.zeros(m, rational)
        f[j] = one
        a = A[:, j]
        e_default = linalg.zeros(d, rational)
        e_default[0] = one
        if linalg.max_abs(a) == 0 or (not rational and linalg.max_abs(a) <= linalg.RANK_RTOL * linalg.max_abs(A)):
            fragments.append(Fragment(f, linalg.eye(1, rational), 0, e_default, linalg.zeros((1, m), rational)))
            continue
        # first column of A with a nonzero component orthogonal to a
        w = None
        for c in range(m):
            col = A[:, c]
            resid = col - (_dot(col, a) / _dot(a, a)) * a
            if linalg.max_abs(resid) > (0 if rational else 1e-9 * linalg.max_abs(A)):
                w = resid
                break
        if w is None:
            raise NotRepresentable("the range of the matrix is one-dimensional")
        if rational:
            e, _ = _unit_direction_exact(w)
            lam = 1 / Surd.sqrt(_dot(a, a))
            x = linalg.solve(A, w)
            # lam * A g = e  with  A x = w  gives  g = x / (lam |w|)
            scale = 1 / (lam * Surd.sqrt(_dot(w, w)))
            g1 = np.array([xi * scale for xi in x], dtype=object)
            C = np.array([[lam]], dtype=object)
        else:
            e = w / np.linalg.norm(w)
            lam = 1.0 / np.linalg.norm(a)
            g1 = linalg.solve(A * lam, e)
            C = np.array([[lam]])
        fragments.append(Fragment(f, C, 1, e, np.array([g1], dtype=object if rational else float)))
    return Witness(fragments)


def two_matrix_operator():
    A1 = [[1, 0, 0, 0, 0], [0, 0, 0, 0, 1], [0, 0, 1, 0, 0]]
    A2 = [[0, 0, 0, 1, 0], [1, 0, 0, 0, 0], [0, 1, 0, 0, 0]]
    return OperatorSpec.from_matrices([A1, A2])


def _std(n, i):
    v = linalg.zeros(n)
    v[i] = Fraction(1)
    return v


def _frag(f_idx, C, p, e_idx, e_sign, g_idx):
    """Fragment for f_{f_idx} with g_k = f_{g_idx[k]} (None for zero)."""
    g = linalg.zeros((2, 5))
    for k, gi in enumerate(g_idx):
        if gi is not None:
            g[k] = _std(5, gi)
    e = _std(3, e_idx) * e_sign
    return Fragment(_std(5, f_idx), linalg.exact(C), p, e, g)


def two_matrix_witness():
    """A two-matrix operator on R^5 with a certificate over the standard basis.

    Every fragment is checked by the verifier; f3, f4 and f5 were derived by
    hand.
    """
    op = two_matrix_operator()
    swap = [[0, 1], [1, 0]]
    ident = [[1, 0], [0, 1]]
    fragments = [
        # f1: A^1 f1 = e1, A^2 f1 = e2, g1 = f3, g2 = f2, e = e3
        _frag(0, ident, 2, 2, 1, (2, 1)),
        # f2: B = (A^2, A^1), B^1 f2 = e3, g1 = f4, e = e1
        _frag(1, swap, 1, 0, 1, (3, None)),
        # f3: B^1 f3 = A^1 f3 = e3, g1 = f5, e = e2
        _frag(2, ident, 1, 1, 1, (4, None)),
        # f4: B^1 f4 = A^2 f4 = e1, g1 = f2, e = e3
        _frag(3, swap, 1, 2, 1, (1, None)),
        # f5: B^1 f5 = A^1 f5 = e2, g1 = f3, e = e3
        _frag(4, ident, 1, 2, 1, (2, None)),
    ]
    return op, Witness(fragments)


def symmetric_divergence_2d():
    """Divergence of symmetric 2x2 matrix fields, coordinates (f11, f12, f22).

    Known to admit no certificate; kept as a negative fixture.
    """
    A1 = [[1, 0, 0], [0, 1, 0]]
    A2 = [[0, 1, 0], [0, 0, 1]]
    return OperatorSpec.from_matrices([A1, A2])


def div_curl(d, rational=True):
    """(div, curl) on R^d vector fields: 1 + d(d-1)/2 scalar components."""
    mats = [linalg.eye(d, rational)]
    for i, j in itertools.combinations(range(d), 2):
        # curl component d_j u_i - d_i u_j = div(M u) with (Mu)_j = u_i, (Mu)_i = -u_j
        M = linalg.zeros((d, d), rational)
        M[j, i] = 1
        M[i, j] = -1
        mats.append(M)
    return OperatorSpec.from_matrices(np.array(mats, dtype=object if rational else float), rational)


def embedded_div_curl():
    """Planar (div, curl) acting on the first two of three components in R^3."""
    A1 = [[1, 0, 0], [0, 1, 0], [0, 0, 0]]
    A2 = [[0, 1, 0], [-1, 0, 0], [0, 0, 0]]
    return OperatorSpec.from_matrices([A1, A2])


# ---------------------------------------------------------------------------
# necessary condition: the wave cone has to span R^m


def wave_cone_span(op, samples=64, seed=0, tol=1e-8):
    """Orthonormal rows spanning the sampled part of the wave cone (float).

    Kernels of the symbol at random directions and at local minimisers of
    its smallest singular value are collected; directions where the symbol
    is injective contribute nothing.
    """
    from scipy.optimize import minimize

    fop = op.as_float()
    M = fop.symbol_coefficients()
    rng = np.random.default_rng(seed)
    m = op.m
    collected = []

    def sym(xi):
        return np.tensordot(xi, M, axes=(0, 0))

    def smin(xi):
        xi = xi / np.linalg.norm(xi)
        return np.linalg.svd(sym(xi), compute_uv=False)[-1]

    starts = rng.standard_normal((samples, op.d))
    for xi in starts:
        xi = xi / np.linalg.norm(xi)
        cand = [xi]
        res = minimize(smin, xi, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 400})
        cand.append(res.x / np.linalg.norm(res.x))
        for c in cand:
            S = sym(c)
            _, s, vt = np.linalg.svd(S)
            full = np.zeros(m)
            full[: s.size] = s
            scale = max(1.0, full.max(initial=0.0))
            collected.extend(vt[i] for i in range(m) if full[i] <= tol * scale)
    if not collected:
        return np.zeros((0, m))
    Q = np.array(collected)
    _, s, vt = np.linalg.svd(Q)
    r = int(np.sum(s > 1e-6 * s[0]))
    return vt[:r]


# ---------------------------------------------------------------------------
# randomized search


def _fragment_system(B, f, p):
    """Null-space data for (g_1..g_p, c): every relation is linear once B, f fixed."""
    n, d, m = B.shape
    Bf = np.array([B[k] @ f for k in range(n)])
    frame = Bf[:p]
    # orthonormal complement of the frame, e = N c
    _, _, vt = np.linalg.svd(np.vstack([frame, np.zeros((1, d))]))
    N = vt[p:].T
    nvar = p * m + (d - p)
    rows = []

    def gslot(k):
        return slice(k * m, (k + 1) * m)

    cslot = slice(p * m, nvar)
    for k in range(p):
        blk = np.zeros((d, nvar))
        blk[:, gslot(k)] = B[k]
        blk[:, cslot] = -N
        rows.append(blk)
    Pperp = np.eye(d) - frame.T @ frame
    for l in range(n):
        for k in range(p):
            if l == k:
                continue
            blk = np.zeros((d, nvar))
            blk[:, gslot(k)] = Pperp @ B[l]
            rows.append(blk)
    for l in range(n):
        for h in range(p):
            for k in range(h, p):
                row = np.zeros(nvar)
                row[gslot(k)] += Bf[h] @ B[l]
                row[gslot(h)] += Bf[k] @ B[l]
                rows.append(row[None])
    Msys = np.vstack(rows)
    return Msys, N, cslot


def _solve_fragment(B, f, p, tol):
    n, d, m = B.shape
    if p == 0:
        return np.zeros((n, m)), np.eye(d)[0]
    Msys, N, cslot = _fragment_system(B, f, p)
    _, s, vt = np.linalg.svd(Msys)
    full = np.zeros(Msys.shape[1])
    full[: s.size] = s
    scale = max(1.0, full.max(initial=0.0))
    null = vt[full <= tol * scale]
    if null.shape[0] == 0:
        return None
    Zc = null[:, cslot]
    if Zc.size == 0:
        return None
    u, sc, wt = np.linalg.svd(Zc.T)
    if sc[0] <= 1e-9:
        return None
    x = wt[0] @ null
    c = x[cslot]
    x = x / np.linalg.norm(c)
    g = np.zeros((n, m))
    for k in range(p):
        g[k] = x[k * m:(k + 1) * m]
    e = N @ x[cslot]
    return g, e


def _structured_C(Af, G, K_mix):
    """Invertible C with C Af = (orthonormal rows; zero rows)."""
    n, d = Af.shape
    p = linalg.rank(Af)
    # left kernel of Af
    u, s, vt = np.linalg.svd(Af)
    left_kernel = u[:, p:].T
    top = G[:p]
    T = top @ Af
    gram = T @ T.T
    try:
        L = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        return None, p
    top = np.linalg.solve(L, top)
    if left_kernel.shape[0]:
        top = top + K_mix[:p, : left_kernel.shape[0]] @ left_kernel
    C = np.vstack([top, left_kernel]) if left_kernel.shape[0] else top
    if linalg.rank(C) != n:
        return None, p
    return C, p


def _candidate_Cs(Af, seed, trial, perms):
    n = Af.shape[0]
    if trial < len(perms):
        P = np.eye(n)[list(perms[trial])]
        PA = P @ Af
        p = linalg.rank(Af)
        if np.allclose(PA[:p] @ PA[:p].T, np.eye(p), atol=1e-12) and np.allclose(PA[p:], 0, atol=1e-12):
            return P, p
        return _structured_C(Af, P, np.zeros((n, n)))
    rng = np.random.default_rng([seed, trial])
    G = rng.standard_normal((n, n))
    K_mix = rng.standard_normal((n, n))
    return _structured_C(Af, G, K_mix)


def _rationalize(op, fr, max_den=1000):
    def snap(a):
        return linalg.exact(np.vectorize(lambda x: Fraction(float(x)).limit_denominator(max_den), otypes=[object])(a))

    try:
        cand = Fragment(snap(fr.f), snap(fr.C), fr.p, snap(fr.e), snap(fr.g))
        if verify_witness(op, cand, 0).passed:
            return cand
    except (ValueError, np.linalg.LinAlgError, ZeroDivisionError):
        pass
    return None


def heuristic_witness_search(op, trials=10_000, seed=0, tol=1e-8, span_samples=64):
    """Best-effort randomized certificate search.

    Raises NotFound when the wave cone visibly fails to span R^m (reason
    ``"wave_cone"``) or when the trial budget runs out (reason ``"budget"``).
    Every returned certificate has passed :func:`verify_witness`.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    span = wave_cone_span(op, samples=span_samples, seed=seed)
    if span.shape[0] < op.m:
        raise NotFound(
            f"the wave cone spans a {span.shape[0]}-dimensional subspace of R^{op.m}; "
            "no certificate can exist",
            reason="wave_cone",
        )
    fop = op.as_float()
    n, d, m = op.n, op.d, op.m
    perms = list(itertools.permutations(range(n))) if n <= 6 else [tuple(range(n))]
    rng = np.random.default_rng(seed)
    found = []
    basis_rows = np.zeros((0, m))
    trial = 0
    candidate_index = 0
    per_candidate = max(len(perms) + 8, 32)
    M = fop.symbol_coefficients()
    while trial < trials:
        if candidate_index < m:
            f = np.eye(m)[candidate_index]
        else:
            # random element of the kernel of the symbol at a random direction
            xi = rng.standard_normal(d)
            ker = linalg.nullspace(np.tensordot(xi / np.linalg.norm(xi), M, axes=(0, 0)))
            if ker.shape[0] == 0:
                trial += 1
                continue
            f = rng.standard_normal(ker.shape[0]) @ ker
            f /= np.linalg.norm(f)
        candidate_index += 1
        if basis_rows.shape[0] and linalg.rank(np.vstack([basis_rows, f])) == basis_rows.shape[0]:
            trial += 1
            continue
        Af = np.array([fop[k] @ f for k in range(n)])
        if not wave_cone_contains(fop, f):
            trial += 1
            continue
        for local in range(per_candidate):
            if trial >= trials:
                break
            C, p = _candidate_Cs(Af, seed, trial, perms if local < len(perms) else [])
            trial += 1
            if C is None:
                continue
            B = np.tensordot(C, fop.mats, axes=(1, 0))
            sol = _solve_fragment(B, f, p, 1e-10)
            if sol is None:
                continue
            g, e = sol
            fr = Fragment(f, C, p, e, g)
            try:
                ok = verify_witness(fop, fr, tol).passed
            except (ValueError, np.linalg.LinAlgError):
                ok = False
            if not ok:
                continue
            found.append(fr)
            basis_rows = np.vstack([basis_rows, f])
            break
        if basis_rows.shape[0] == m:
            break
    if basis_rows.shape[0] < m:
        raise NotFound(f"no certificate found within {trials} trials", reason="budget")
    w = Witness(found)
    if op.rational:
        exact_frags = [_rationalize(op, fr) for fr in found]
        if all(x is not None for x in exact_frags):
            w = Witness(exact_frags)
            assert verify_witness(op, w, 0).passed
            return w
    assert verify_witness(fop, w, tol).passed
    return w
