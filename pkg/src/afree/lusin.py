"""Approximation of continuous fields by A-free fields built from correctors.

On the unit ball the field

    u_v(x) = phi(|x|) v + (phi'(|x|) / |x|) G_v(x)

is A-free whenever G_v is the quadratic corrector of v (see
:mod:`afree.sphere`): it superposes the balanced pairs
v 1_{B_t} - t G_v(x / t) H^{d-1} on dB_t with weight -phi'(t) dt.  The
radial profile phi is 1 on [0, 1 - beta], a quintic smoothstep down to 0
on [1 - beta, 1 - beta / 16] and 0 beyond, so sup |phi'| = 2 / beta.

Copies u_{a_i}((x - x_i) / r_i) on disjoint balls inside Omega = (0, 1)^d
give the approximant h.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from . import linalg
from . import measures as ms
from . import quadrature
from .poly import PolyMap
from .sphere import build_corrector, float_poly

SMOOTHSTEP_SLOPE = 15 / 8
TAIL_FRACTION = 1 / 16


class PackingError(RuntimeError):
    def __init__(self, message, achieved):
        super().__init__(message)
        self.achieved = achieved


@dataclass(frozen=True)
class LusinParams:
    eps: float
    eta: float
    d: int

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if self.eta <= 0:
            raise ValueError("eta must be positive")

    @property
    def beta(self):
        return self.eps / (2 * self.d)

    @property
    def inner(self):
        return 1 - self.beta

    @property
    def outer(self):
        return 1 - self.beta * TAIL_FRACTION

    @property
    def breaks(self):
        return (self.inner, self.outer)

    def profile(self, t):
        """phi(t) and phi'(t)."""
        t = np.asarray(t, dtype=float)
        a, b = self.inner, self.outer
        s = np.clip((t - a) / (b - a), 0.0, 1.0)
        S = s ** 3 * (10 - 15 * s + 6 * s ** 2)
        dS = 30 * s ** 2 * (1 - s) ** 2 / (b - a)
        return 1 - S, -dS

    def max_slope(self):
        return SMOOTHSTEP_SLOPE / (self.outer - self.inner)


class VectorCorrector:
    """Corrector quadratics for every vector, by linearity over a certificate basis."""

    def __init__(self, op, witness):
        self.op = op
        self.basis = linalg.to_float(np.array([fr.f for fr in witness.fragments], dtype=object))
        self.polys = [float_poly(build_corrector(op, fr).g) for fr in witness.fragments]
        self.d, self.m = op.d, op.m
        self._basis_inv = np.linalg.inv(self.basis.T)

    def coefficients(self, v):
        return self._basis_inv @ np.asarray(v, dtype=float)

    def quadratic(self, v):
        c = self.coefficients(v)
        out = PolyMap(self.d, self.m)
        for ci, P in zip(c, self.polys):
            if ci != 0:
                out = out + P.scale(float(ci))
        return out

    def basis_values(self, Y):
        """(Q, m, m): column k is the corrector quadratic of the k-th standard
        vector evaluated at Y."""
        G = np.stack([P(Y) for P in self.polys], axis=2)  # Q x m x (basis)
        return G @ self._basis_inv


def _field_basis(params, corrector, Y):
    """u_{e_k}(Y) for every standard vector e_k: (Q, m, m) with u_v = U @ v."""
    rho = np.linalg.norm(Y, axis=1)
    phi, dphi = params.profile(rho)
    safe = np.where(rho > 0, rho, 1.0)
    coef = np.where(rho > 0, dphi / safe, 0.0)
    G = corrector.basis_values(Y)
    m = G.shape[1]
    return phi[:, None, None] * np.eye(m)[None] + coef[:, None, None] * G


def lusin_u(v, params: LusinParams, corrector):
    """Closed-form field on the unit ball, as a callable on (N x d) points."""
    v = np.asarray(v, dtype=float)
    if isinstance(corrector, VectorCorrector):
        G = corrector.quadratic(v)
    else:
        G = float_poly(corrector.g)
        if not np.allclose(linalg.to_float(np.asarray(corrector.f)), v):
            raise ValueError("the corrector was built for a different vector")

    def u(Y):
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        rho = np.linalg.norm(Y, axis=1)
        phi, dphi = params.profile(rho)
        coef = np.where(rho > 0, dphi / np.where(rho > 0, rho, 1.0), 0.0)
        out = phi[:, None] * v[None, :] + coef[:, None] * G(Y)
        return np.where((rho < 1)[:, None], out, 0.0)

    return u


def unit_ball_rule(d, breaks, radial_order=8, sphere_order=None):
    """Radial Gauss x sphere rule on the unit ball split at ``breaks``;
    the shell past the last break, where the fields vanish, is dropped."""
    sphere_order = sphere_order or (32 if d == 2 else 12)
    cuts = [0.0, *breaks]
    y, wy = quadrature.sphere_rule(d, sphere_order)
    pts, wts = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        t, wt = quadrature.gauss_legendre(radial_order, a, b)
        pts.append((t[:, None, None] * y[None]).reshape(-1, d))
        wts.append((wt[:, None] * t[:, None] ** (d - 1) * wy[None]).ravel())
    return np.concatenate(pts), np.concatenate(wts)


def field_norms(u, d, params, radial_order=12, sup_samples=400):
    """L^1, L^2 and sup norms of a field on the unit ball."""
    Y, w = unit_ball_rule(d, params.breaks, radial_order)
    vals = np.linalg.norm(u(Y), axis=1)
    t = np.concatenate([np.linspace(0, params.inner, 8), np.linspace(params.inner, params.outer, sup_samples)])
    y, _ = quadrature.sphere_rule(d, 64 if d == 2 else 16)
    S = (t[:, None, None] * y[None]).reshape(-1, d)
    sup = float(np.max(np.linalg.norm(u(S), axis=1)))
    return {1: float(np.sum(w * vals)), 2: float(np.sqrt(np.sum(w * vals ** 2))), np.inf: sup}


def measured_constants(params, corrector, directions, d):
    """C_p with ||u_v||_{L^p(B_1)} <= C_p beta^{1/p - 1} |v|, maximised over
    the given unit directions."""
    out = {1: 0.0, 2: 0.0, np.inf: 0.0}
    beta = params.beta
    for v in directions:
        v = np.asarray(v, dtype=float)
        v = v / np.linalg.norm(v)
        norms = field_norms(lusin_u(v, params, corrector), d, params)
        for p in out:
            expo = (1 / p if np.isfinite(p) else 0.0) - 1
            out[p] = max(out[p], norms[p] / beta ** expo)
    return out


# ---------------------------------------------------------------------------
# ball packing


@dataclass
class Covering:
    centers: np.ndarray
    radii: np.ndarray
    values: np.ndarray  # a_i
    levels: np.ndarray
    delta: float

    def __len__(self):
        return len(self.radii)

    def covered_volume(self):
        d = self.centers.shape[1]
        return float(np.sum(self.radii ** d) * quadrature.ball_volume(d))

    def uncovered_fraction(self, beta):
        """|Omega \\ K| / |Omega| with K the union of the inner balls B_{(1-beta) r_i}."""
        d = self.centers.shape[1]
        return 1 - (1 - beta) ** d * self.covered_volume()

    def max_overlap(self):
        """Largest r_i + r_j - |x_i - x_j| over pairs (negative when disjoint)."""
        if len(self) < 2:
            return -np.inf
        tree = cKDTree(self.centers)
        rmax = float(self.radii.max())
        worst = -np.inf
        for i, j in tree.query_pairs(2 * rmax, output_type="ndarray"):
            worst = max(worst, self.radii[i] + self.radii[j] - np.linalg.norm(self.centers[i] - self.centers[j]))
        return worst

    def boundary_clearance(self):
        c = self.centers
        return float(np.min(np.minimum(c, 1 - c).min(axis=1) - self.radii))

    def to_json(self):
        return {"delta": self.delta, "balls": [
            {"center": c.tolist(), "radius": float(r), "a": a.tolist()}
            for c, r, a in zip(self.centers, self.radii, self.values)]}


def _grid_points(d, spacing):
    n = int(round(1 / spacing))
    ticks = (np.arange(n) + 0.5) * spacing
    grids = np.meshgrid(*([ticks] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _greedy_level(cands, r, d):
    """Lexicographic greedy selection of pairwise disjoint balls of radius r.

    Every candidate within 2r of an accepted center is marked at acceptance,
    so the first unmarked candidate is always the next sequential choice."""
    if len(cands) == 0:
        return np.zeros((0, d))
    order = np.lexsort(cands.T[::-1])
    cands = cands[order]
    tree = cKDTree(cands)
    marked = np.zeros(len(cands), dtype=bool)
    kept = []
    reach = 2 * r * (1 - 1e-12)
    ptr = 0
    while ptr < len(cands):
        ptr += int(np.argmin(marked[ptr:]))
        if marked[ptr]:
            break
        kept.append(ptr)
        marked[tree.query_ball_point(cands[ptr], reach)] = True
        marked[ptr] = True
    return cands[kept]


def _clear_of(points, trees, radii, threshold):
    """Points whose clearance is at least ``threshold``, filtered tree by tree
    so that points ruled out early are not queried again."""
    keep = np.minimum(points, 1 - points).min(axis=1) >= threshold
    points = points[keep]
    for tree, r in sorted(zip(trees, radii), key=lambda tr: -tr[0].n):
        if len(points) == 0:
            break
        bound = max(threshold + r, 0.0)
        dist, _ = tree.query(points, k=1, distance_upper_bound=bound)
        points = points[dist >= bound]
    return points


def _admissible_points(d, r, delta, trees, radii, candidates_per_radius):
    """Grid points with clearance >= r, reached by refining only the cells
    whose center clearance leaves room for such points (clearance is
    1-Lipschitz)."""
    spacing = delta
    points = _grid_points(d, spacing)
    target = r / candidates_per_radius
    offsets = np.array(list(itertools.product((-0.5, 0.5), repeat=d)))
    while spacing > target * (1 + 1e-12):
        alive = _clear_of(points, trees, radii, r - spacing * np.sqrt(d) / 2)
        spacing /= 2
        points = (alive[:, None, :] + offsets[None] * spacing).reshape(-1, d)
    return _clear_of(points, trees, radii, r)


def pack_balls(d, delta, target_uncovered, beta, max_levels=40, candidates_per_radius=4, max_balls=400_000,
               steps_per_octave=4):
    """Greedy disjoint packing of (0, 1)^d by balls of radii delta 2^{-l/s}.

    Halving the radius between levels leaves most of the space between
    touching balls unusable, so s radius steps are taken per octave.
    Candidate centers for level l sit on a dyadic grid of spacing at most
    r_l / c and are accepted coarse to fine, lexicographically within a
    level.  Packing stops once the fraction of Omega outside the inner balls
    B_{(1 - beta) r_i} drops to the target."""
    trees, tree_radii = [], []
    centers, radii, levels = [], [], []
    vol = quadrature.ball_volume(d)
    covered = 0.0
    achieved = 1.0
    for level in range(max_levels):
        r = delta * 2.0 ** (-level / steps_per_octave)
        cands = _admissible_points(d, r, delta, trees, tree_radii, candidates_per_radius)
        chosen = _greedy_level(cands, r, d)
        if len(chosen):
            trees.append(cKDTree(chosen))
            tree_radii.append(r)
            centers.append(chosen)
            radii.append(np.full(len(chosen), r))
            levels.append(np.full(len(chosen), level))
            covered += len(chosen) * vol * r ** d
        achieved = 1 - (1 - beta) ** d * covered
        if achieved <= target_uncovered or sum(map(len, radii)) > max_balls:
            break
    if achieved > target_uncovered:
        raise PackingError(
            f"packing reached uncovered fraction {achieved:.4f} > {target_uncovered} after {level + 1} levels",
            achieved,
        )
    return Covering(np.concatenate(centers), np.concatenate(radii), None, np.concatenate(levels), delta)


# ---------------------------------------------------------------------------
# oscillation


def grid_samples(f, d, resolution):
    ticks = (np.arange(resolution) + 0.5) / resolution
    grids = np.meshgrid(*([ticks] * d), indexing="ij")
    X = np.stack([g.ravel() for g in grids], axis=1)
    vals = np.asarray(f(X), dtype=float)
    return X, vals.reshape((resolution,) * d + (vals.shape[-1],))


def window_oscillation(samples, halfwidth_cells):
    """max over components of (max - min) of each sample window of half-width
    ``halfwidth_cells`` cells."""
    size = 2 * halfwidth_cells + 1
    worst = 0.0
    for k in range(samples.shape[-1]):
        comp = samples[..., k]
        hi = ndimage.maximum_filter(comp, size=size, mode="nearest")
        lo = ndimage.minimum_filter(comp, size=size, mode="nearest")
        worst = max(worst, float(np.max(hi - lo)))
    return worst


def choose_delta(samples, eta, max_power=12):
    """Largest dyadic delta whose window oscillation plus one grid step of
    slack stays below eta."""
    n = samples.shape[0]
    h = 1.0 / n
    step = window_oscillation(samples, 1)
    for power in range(1, max_power + 1):
        delta = 2.0 ** (-power)
        cells = max(1, int(np.ceil(delta / h)))
        osc = window_oscillation(samples, cells)
        if osc + step < eta:
            return delta, osc
    raise ValueError(f"no dyadic delta >= 2^-{max_power} meets the oscillation budget {eta}")


# ---------------------------------------------------------------------------
# approximant


@dataclass
class LusinApproximant:
    covering: Covering
    params: LusinParams
    corrector: VectorCorrector

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        cov = self.covering
        out = np.zeros((len(X), self.corrector.m))
        for level in np.unique(cov.levels):
            sel = cov.levels == level
            C = cov.centers[sel]
            r = float(cov.radii[sel][0])
            tree = cKDTree(C)
            dist, idx = tree.query(X, k=1)
            inside = dist < r
            if not np.any(inside):
                continue
            Y = (X[inside] - C[idx[inside]]) / r
            U = _field_basis(self.params, self.corrector, Y)
            vals = cov.values[sel][idx[inside]]
            rho = np.linalg.norm(Y, axis=1)
            contrib = np.einsum("qij,qj->qi", U, vals)
            out[inside] += np.where((rho < 1)[:, None], contrib, 0.0)
        return out

    def ball_norms(self, radial_order=12):
        """Exact-quadrature L^1, L^2 and sampled sup norm of h."""
        cov = self.covering
        d = cov.centers.shape[1]
        Y, w = unit_ball_rule(d, self.params.breaks, radial_order)
        U = _field_basis(self.params, self.corrector, Y)  # Q x m x m
        l1 = l2 = 0.0
        for start in range(0, len(cov), 2048):
            A = cov.values[start:start + 2048]
            R = cov.radii[start:start + 2048]
            vals = np.linalg.norm(np.einsum("qij,nj->nqi", U, A), axis=2)
            l1 += float(np.sum(R ** d * (vals @ w)))
            l2 += float(np.sum(R ** d * ((vals ** 2) @ w)))
        t = np.concatenate([np.linspace(0, self.params.inner, 4), np.linspace(self.params.inner, self.params.outer, 400)])
        y, _ = quadrature.sphere_rule(d, 64 if d == 2 else 16)
        S = (t[:, None, None] * y[None]).reshape(-1, d)
        US = _field_basis(self.params, self.corrector, S)
        dirs, inv = np.unique(np.round(cov.values, 14), axis=0, return_inverse=True)
        sup = 0.0
        for a in dirs:
            sup = max(sup, float(np.max(np.linalg.norm(US @ a, axis=1))))
        return {1: l1, 2: np.sqrt(l2), np.inf: sup}


@dataclass
class BallBatch:
    """Fields u_{a_i}((x - x_i) / r_i) on disjoint balls, as a measure piece."""

    approximant: LusinApproximant
    radial_order: int = 8
    kind = "ballbatch"

    @property
    def d(self):
        return self.approximant.covering.centers.shape[1]

    @property
    def m(self):
        return self.approximant.corrector.m

    def __len__(self):
        return len(self.approximant.covering)

    def total_variation(self):
        return self.approximant.ball_norms()[1]

    def quadrature(self, phi, order):
        cov = self.approximant.covering
        params = self.approximant.params
        d = self.d
        c = phi.center
        rho = phi.support_radius
        dist = np.linalg.norm(cov.centers - c, axis=1)
        inside = dist + cov.radii <= rho
        straddle = (~inside) & (dist < rho + cov.radii)
        Xs, ws, Ds = [], [], []
        Y, w = unit_ball_rule(d, params.breaks, self.radial_order)
        U = _field_basis(params, self.approximant.corrector, Y)
        idx = np.where(inside)[0]
        for start in range(0, len(idx), 1024):
            sel = idx[start:start + 1024]
            R = cov.radii[sel]
            Xs.append((cov.centers[sel][:, None, :] + R[:, None, None] * Y[None]).reshape(-1, d))
            ws.append((R[:, None] ** d * w[None]).ravel())
            Ds.append(np.einsum("qij,nj->nqi", U, cov.values[sel]).reshape(-1, self.m))
        for i in np.where(straddle)[0]:
            piece = ms.BallField(cov.centers[i], float(cov.radii[i]),
                                 _ball_field(params, self.approximant.corrector, cov.values[i]),
                                 self.m, params.breaks)
            X, wi, D = piece.quadrature(phi, max(order, 12))
            Xs.append(X)
            ws.append(wi)
            Ds.append(D)
        if not Xs:
            return np.zeros((0, d)), np.zeros(0), np.zeros((0, self.m))
        return np.concatenate(Xs), np.concatenate(ws), np.concatenate(Ds)


def _ball_field(params, corrector, a):
    def field(Y):
        U = _field_basis(params, corrector, Y)
        rho = np.linalg.norm(Y, axis=1)
        return np.where((rho < params.outer)[:, None], U @ a, 0.0)

    return field


@dataclass
class LusinReport:
    eps: float
    eta: float
    beta: float
    delta: float
    balls: int
    uncovered_fraction: float
    sup_error_on_K: float
    weak_residual: float
    residual_tolerance: float
    norms_h: dict
    norms_f: dict
    constants: dict
    checks: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.checks.values())

    def to_json(self):
        key = {1: "1", 2: "2", np.inf: "inf"}
        return {
            "eps": self.eps, "eta": self.eta, "beta": self.beta, "delta": self.delta, "balls": self.balls,
            "uncovered_fraction": self.uncovered_fraction, "sup_error_on_K": self.sup_error_on_K,
            "weak_residual": self.weak_residual, "residual_tolerance": self.residual_tolerance,
            "norms_h": {key[p]: v for p, v in self.norms_h.items()},
            "norms_f": {key[p]: v for p, v in self.norms_f.items()},
            "constants": {key[p]: v for p, v in self.constants.items()},
            "checks": self.checks, "passed": self.passed,
        }


def lusin_suite(d, count=8, seed=0):
    rng = np.random.default_rng(seed)
    return [ms.Bump(rng.uniform(0.15, 0.85, d), float(rng.uniform(0.1, 0.3)), 4) for _ in range(count)]


def lusin_approximate(op, witness, f, eps, eta, resolution=512, suite=None, residual_tol=1e-6,
                      max_levels=40, order=12):
    """Cover (0, 1)^d with disjoint balls and glue A-free fields on them.

    ``f`` is a callable on (N x d) points returning (N x m).  Returns
    (covering, approximant, report)."""
    d, m = op.d, op.m
    params = LusinParams(eps, eta, d)
    corrector = VectorCorrector(op, witness)
    X, samples = grid_samples(f, d, resolution)
    delta, osc = choose_delta(samples, eta)
    cov = pack_balls(d, delta, eps, params.beta, max_levels=max_levels)
    cov.values = np.asarray(f(cov.centers), dtype=float).reshape(len(cov), m)
    h = LusinApproximant(cov, params, corrector)

    flat = samples.reshape(-1, m)
    hX = h(X)
    # radii differ between levels, so membership is tested level by level
    in_k = np.zeros(len(X), dtype=bool)
    for r in np.unique(cov.radii):
        dist, _ = cKDTree(cov.centers[cov.radii == r]).query(X, k=1, distance_upper_bound=r)
        in_k |= dist <= (1 - params.beta) * r
    sup_err = float(np.max(np.linalg.norm(flat[in_k] - hX[in_k], axis=1))) if np.any(in_k) else 0.0
    centre_err = float(np.max(np.linalg.norm(h(cov.centers) - cov.values, axis=1)))
    sup_err = max(sup_err, centre_err)

    suite = suite if suite is not None else lusin_suite(d)
    mu = ms.DiscreteMeasure([BallBatch(h)], m)
    residual = ms.weak_residual(op, mu, suite, order)

    norms_h = h.ball_norms()
    cell = resolution ** (-d)
    mags = np.linalg.norm(flat, axis=1)
    # the sup also sees the exact center values, which the sample grid can miss
    sup_f = max(float(mags.max()), float(np.max(np.linalg.norm(cov.values, axis=1))))
    norms_f = {1: float(np.sum(mags) * cell), 2: float(np.sqrt(np.sum(mags ** 2) * cell)), np.inf: sup_f}
    dirs = np.unique(np.round(cov.values / np.maximum(np.linalg.norm(cov.values, axis=1), 1e-300)[:, None], 12), axis=0)
    dirs = [v for v in dirs if np.linalg.norm(v) > 0.5][:16] or [np.eye(m)[0]]
    raw = measured_constants(params, corrector, dirs, d)
    vol = quadrature.ball_volume(d)
    constants = {}
    for p, cp in raw.items():
        inv_p = 1 / p if np.isfinite(p) else 0.0
        constants[p] = cp * (2 * d) ** (1 - inv_p) * vol ** (-inv_p)
    uncovered = cov.uncovered_fraction(params.beta)
    checks = {
        "uncovered_fraction": bool(uncovered <= eps),
        "sup_error_on_K": bool(sup_err < eta),
        "weak_residual": bool(residual <= residual_tol),
    }
    for p, key in ((1, "norm_L1"), (2, "norm_L2"), (np.inf, "norm_Linf")):
        inv_p = 1 / p if np.isfinite(p) else 0.0
        checks[key] = bool(norms_h[p] <= constants[p] * eps ** (inv_p - 1) * norms_f[p] * (1 + 1e-12))
    report = LusinReport(eps, eta, params.beta, delta, len(cov), uncovered, sup_err, residual, residual_tol,
                         norms_h, norms_f, constants, checks)
    return cov, h, report
