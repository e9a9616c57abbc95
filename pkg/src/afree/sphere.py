"""Boundary correctors on the unit sphere built from certificate fragments.

For a fragment (f, B, p, e, g_1..g_p) write e_h = B^h f for h <= p and
e_{p+1} = e.  The quadratic field

    g(x) = -(e_{p+1}.x) sum_{h<=p} (e_h.x) g_h + (e_{p+1}.x)^2 f

satisfies B^l g(x) . x = 0 and div_{dB} B^l g = -(B^l f) . x on |x| = 1.
With the pairing <A mu, phi> = -int (A dmu) . grad(phi) this makes

    f 1_B - g H^{d-1} restricted to dB

an A-free measure; ``balancing_density`` returns that boundary density -g.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import linalg
from . import measures as ms
from .poly import PolyMap
from .surd import Surd
from .witness import Fragment, verify_witness


class UnverifiedWitnessError(ValueError):
    pass


def _dot(u, v, zero):
    out = zero
    for a, b in zip(u, v):
        out = out + a * b
    return out


def _complete_frame(vectors, d, rational):
    """Gram-Schmidt over the standard basis, lexicographic; exact when every
    norm is rational, float otherwise."""
    zero = Fraction(0) if rational else 0.0
    frame = [np.asarray(v, dtype=object if rational else float) for v in vectors]
    exact_ok = rational
    for i in range(d):
        if len(frame) == d:
            break
        cand = linalg.zeros(d, rational)
        cand[i] = Fraction(1) if rational else 1.0
        for b in frame:
            cand = cand - _dot(cand, b, zero) * b
        sq = _dot(cand, cand, zero)
        if (float(sq) if rational else sq) <= 1e-20:
            continue
        if exact_ok:
            sq_val = Surd.lift(sq).simplify() if isinstance(sq, Surd) else sq
            if isinstance(sq_val, Surd) and not sq_val.is_rational():
                exact_ok = False
            else:
                q = sq_val.terms.get(1, Fraction(0)) if isinstance(sq_val, Surd) else sq_val
                frame.append(cand * (1 / Surd.sqrt(q)))
                continue
        vec = np.array([float(x) for x in cand])
        frame.append(vec / np.linalg.norm(vec))
    if not exact_ok and rational:
        frame = [np.array([float(x) for x in v]) for v in frame]
        # float re-orthonormalization of the completed part
        out = []
        for v in frame:
            for b in out:
                v = v - (v @ b) * b
            out.append(v / np.linalg.norm(v))
        return np.array(out), False
    return np.array(frame, dtype=object if rational else float), rational


@dataclass
class CorrectorField:
    rotation: np.ndarray  # rows are the frame vectors e_1..e_d
    f: np.ndarray
    p: int
    gvecs: np.ndarray
    g: PolyMap
    B: np.ndarray  # recombined operator matrices, n x d x m
    exact: bool

    @property
    def d(self):
        return self.g.d

    @property
    def m(self):
        return self.g.m

    def balancing_density(self):
        return self.g.scale(-1)


def zero_corrector(op, f):
    d, m = op.d, op.m
    return CorrectorField(np.eye(d), np.asarray(f), 0, np.zeros((0, m)), PolyMap(d, m), linalg.to_float(op.mats), False)


def build_corrector(op, fragment: Fragment, verify=True):
    """Quadratic corrector for one verified fragment."""
    if verify:
        tol = 0 if op.rational else 1e-8
        report = verify_witness(op, fragment, tol)
        if not report.passed:
            raise UnverifiedWitnessError(f"fragment fails checks {report.failed()}")
    d, m = op.d, op.m
    rational = op.rational
    B = op.recombine(fragment.C).mats
    p = fragment.p
    f = np.asarray(fragment.f)
    if p == 0:
        return CorrectorField(np.eye(d), f, 0, np.zeros((0, m)), PolyMap(d, m), B, rational)
    frame_vecs = [B[h].dot(f) for h in range(p)] + [np.asarray(fragment.e)]
    rotation, rot_exact = _complete_frame(frame_vecs, d, rational)
    e = frame_vecs[p]
    zero = Fraction(0) if rational else 0.0
    Q = np.empty((d, d, m), dtype=object if rational else float)
    for a in range(d):
        for b in range(d):
            acc = np.array([zero] * m, dtype=object) if rational else np.zeros(m)
            for h in range(p):
                acc = acc - e[a] * frame_vecs[h][b] * np.asarray(fragment.g[h])
            acc = acc + e[a] * e[b] * f
            Q[a, b] = acc
    g = PolyMap.from_quadratic(Q.astype(object))
    return CorrectorField(rotation, f, p, np.asarray(fragment.g[:p]), g, B, rational and rot_exact)


def correctors_for_witness(op, witness, verify=True):
    return [build_corrector(op, fr, verify) for fr in witness.fragments]


# ---------------------------------------------------------------------------
# sample points


def random_sphere_points(d, samples, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((samples, d))
    return X / np.linalg.norm(X, axis=1)[:, None]


def rational_sphere_points(d, samples, seed=0, height=12):
    """Points of the unit sphere with rational coordinates, from inverse
    stereographic projection of random rational parameters."""
    rng = np.random.default_rng(seed)
    pts = []
    for _ in range(samples):
        t = [Fraction(int(rng.integers(-height, height + 1)), int(rng.integers(1, height + 1))) for _ in range(d - 1)]
        s = sum((x * x for x in t), Fraction(0))
        x = [2 * ti / (s + 1) for ti in t] + [(s - 1) / (s + 1)]
        pts.append(x)
    return pts


# ---------------------------------------------------------------------------
# pointwise identities


def _tangency_exact(cf, x):
    gx = cf.g.eval_exact(x)
    worst = 0
    for Bl in cf.B:
        val = _dot(Bl.dot(gx), x, Fraction(0))
        worst = max(worst, abs(val), key=float)
    return worst


def _surface_div_exact(cf, x):
    J = cf.g.jacobian_exact(x)  # m x d
    worst = 0
    for Bl in cf.B:
        D = Bl.dot(J)  # d x d, Jacobian of B^l g
        div = sum((D[i, i] for i in range(cf.d)), Fraction(0))
        radial = _dot(D.dot(x), x, Fraction(0))
        rhs = _dot(Bl.dot(cf.f), x, Fraction(0))
        val = div - radial + rhs
        worst = max(worst, abs(val), key=float)
    return worst


def check_tangency(op, cf, samples=1000, seed=0, exact=None):
    """max over samples and l of |B^l g(x) . x| on the unit sphere."""
    if samples < 1:
        raise ValueError("samples must be positive")
    exact = op.rational if exact is None else exact
    if cf.g.is_zero():
        return 0 if exact else 0.0
    if exact:
        return max((_tangency_exact(cf, x) for x in rational_sphere_points(cf.d, samples, seed)), key=float)
    X = random_sphere_points(cf.d, samples, seed)
    G = cf.g(X)
    Bf = linalg.to_float(cf.B)
    vals = np.einsum("lij,qj,qi->ql", Bf, G, X)
    return float(np.max(np.abs(vals)))


def check_surface_divergence(op, cf, samples=1000, seed=0, exact=None):
    """max over samples and l of |div_{dB} B^l g(x) + B^l f . x|."""
    if samples < 1:
        raise ValueError("samples must be positive")
    exact = op.rational if exact is None else exact
    if exact:
        pts = rational_sphere_points(cf.d, samples, seed)
        return max((_surface_div_exact(cf, x) for x in pts), key=float)
    X = random_sphere_points(cf.d, samples, seed)
    J = cf.g.jacobian(X)  # N x m x d
    Bf = linalg.to_float(cf.B)
    D = np.einsum("lim,qmj->qlij", Bf, J)
    div = np.einsum("qlii->ql", D)
    radial = np.einsum("qlij,qj,qi->ql", D, X, X)
    rhs = np.einsum("lim,m,qi->ql", Bf, np.asarray(linalg.to_float(np.asarray(cf.f)), dtype=float), X)
    return float(np.max(np.abs(div - radial + rhs)))


# ---------------------------------------------------------------------------
# weak balance on the unit ball


def float_poly(P):
    return PolyMap(P.d, P.m, [(a, np.array([float(x) for x in c], dtype=object)) for a, c in P.terms])


def sphere_balance_measure(f, cf, center=None, radius=1.0, order=0, with_corrector=True):
    """f 1_B - g H^{d-1} on the sphere; coefficients in float."""
    d = cf.d
    center = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    fv = np.asarray(linalg.to_float(np.asarray(f)), dtype=float)
    pieces = [ms.ball(center, radius, fv)]
    if with_corrector and not cf.g.is_zero():
        g = float_poly(cf.g).scale(-radius)
        pieces.append(ms.SphereDensity(center, radius, g, order))
    return ms.DiscreteMeasure(pieces, cf.m)


def weak_balance_sphere(op, f, cf, suite, order=32, with_corrector=True):
    if op.d not in (2, 3, 4):
        raise ValueError(f"weak sphere checks need d in 2..4, got {op.d}")
    mu = sphere_balance_measure(f, cf, with_corrector=with_corrector)
    return ms.weak_residual(op, mu, suite, order)


def sphere_suite(d, count=12, seed=0):
    """Bumps whose supports straddle the unit sphere."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        dir_ = rng.standard_normal(d)
        dir_ /= np.linalg.norm(dir_)
        c = dir_ * rng.uniform(0.6, 1.3)
        out.append(ms.Bump(c, float(rng.uniform(0.3, 0.9)), 4))
    return out
