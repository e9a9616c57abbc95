"""Balancing measures for scalar operators: cube, dyadic grid and iteration.

For a scalar operator A = U Id_{r,d,m} V^T the normalized problem is
balanced on Q = (-1, 1)^d by a product of a face-to-face tree with a
flat cube.  A measure nu that is free for the normalized operator maps to
an A-free measure through

    nu -> V^{-T} u_# nu,  u(x) = U x,

since <div(U u_# X), phi> = <div X, phi o u>.  The image of the source
e_j 1_Q is (V^{-T} e_j / |det U|) 1_{UQ}.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from . import measures as ms
from . import tree as tr
from .operator import OperatorSpec, SvdNormalization, svd_normalize


class RankConstraintError(ValueError):
    pass


def _normalization(A):
    """SVD-type normalization preferring U = I when A has full row rank."""
    A = np.asarray(A)
    d, m = A.shape
    r = linalg.rank(A)
    if r == d:
        rational = linalg.is_exact(A)
        Vt = linalg.complete_rows(A if rational else A.astype(float), m)
        return SvdNormalization(linalg.eye(d, rational), Vt.T, r)
    return svd_normalize(A)


def check_request(d, r, k):
    if not 1 <= k <= d:
        raise RankConstraintError(f"k={k} must lie in 1..{d}")
    if r == 0:
        return
    if r == 1 and k != d:
        raise RankConstraintError(f"a rank-1 operator is only {d}-balanceable (k = d); got k={k}")
    if k < d + 1 - r:
        raise RankConstraintError(
            f"an operator of rank {r} in dimension {d} is not k-balanceable for k <= d - r = {d - r}; got k={k}"
        )


def _tree_axes(d, r, j, h):
    """Tree axis j, transverse axes and swept axes (0-based)."""
    others = [i for i in range(r) if i != j]
    if h > len(others):
        raise RankConstraintError("not enough rank for the requested face dimension")
    transverse = others[:h]
    used = {j, *transverse}
    sweep = [i for i in range(d) if i not in used]
    return [j] + transverse, sweep


def _face_flow(h, L):
    """Measure in R^{h+1} whose divergence approximates H^h on x_1 = -1
    minus H^h on x_1 = +1.  For h = 0 the limit segment is used exactly."""
    if h == 0:
        return ms.DiscreteMeasure([ms.segment([-1.0], [1.0], [1.0])], 1)
    return tr.build_mu(h, L)


def _embed(flow, axes, sweep, d, m):
    """Sweep the flow, living on coordinates ``axes``, across (-1, 1) in
    every coordinate of ``sweep``; densities land on the same indices of R^m."""
    pieces = []
    for seg in flow.pieces:
        N = len(seg)
        O = np.zeros((N, d))
        O[:, axes] = (seg.P + seg.Q) / 2
        W = np.zeros((N, m))
        W[:, axes] = seg.W
        if not sweep:
            P = np.zeros((N, d))
            Q = np.zeros((N, d))
            P[:, axes] = seg.P
            Q[:, axes] = seg.Q
            pieces.append(ms.Segments(P, Q, W))
            continue
        F = np.zeros((N, d, 1 + len(sweep)))
        F[:, axes, 0] = (seg.Q - seg.P) / 2
        for c, ax in enumerate(sweep, start=1):
            F[:, ax, c] = 1.0
        pieces.append(ms.Patches(O, F, W))
    return ms.DiscreteMeasure(pieces, m)


def normalized_balance(d, m, r, j, k, L):
    """Measure sigma with Id_{r,d,m}(e_j 1_Q + sigma) free, j 0-based, j < r."""
    h = d - k
    axes, sweep = _tree_axes(d, r, j, h)
    flow = _face_flow(h, L)
    emb = _embed(flow, axes, sweep, d, m)
    return ms.push_forward_affine(emb, np.eye(d), None, None, -1.0)


@dataclass
class BalanceResult:
    """``source + sigma`` is A-free up to the tree truncation."""

    source: ms.DiscreteMeasure
    sigma: ms.DiscreteMeasure
    direction: np.ndarray
    norm: SvdNormalization
    k: int
    L: int
    coefficients: np.ndarray = field(default=None)

    @property
    def h(self):
        return self.norm.U.shape[0] - self.k

    def combined(self):
        return self.source + self.sigma

    def residual_bound(self, lip, rigorous=False):
        """Bound on the weak residual against a test function with Lipschitz
        constant ``lip``: tree leaf displacement, swept over (-1, 1)^{k-1},
        pulled back through u and summed over normalized components."""
        h = self.h
        if h == 0:
            return 0.0
        U = linalg.to_float(self.norm.U)
        stretch = float(np.linalg.norm(U, 2))
        per_tree = tr.rigorous_face_bound(h, self.L, lip) if rigorous else tr.face_residual_bound(h, self.L, lip)
        weight = float(np.sum(np.abs(self.coefficients)))
        return weight * per_tree * 2 ** (self.k - 1) * stretch


def _request(A, j, k):
    A = np.asarray(A)
    d, m = A.shape
    if not 1 <= j <= m:
        raise ValueError(f"j={j} must lie in 1..{m}")
    norm = _normalization(A)
    check_request(d, norm.r, k)
    return A, d, m, norm


def balance_normalized_direction(A, j, k, L=12):
    """Balance the j-th normalized basis field V^{-T} e_j / |det U| on UQ."""
    A, d, m, norm = _request(A, j, k)
    U = linalg.to_float(norm.U)
    Vinv_t = linalg.to_float(linalg.inverse(norm.V).T)
    jj = j - 1
    unit = np.zeros(m)
    unit[jj] = 1.0
    src = ms.DiscreteMeasure([ms.cube(np.zeros(d), np.ones(d), unit)], m)
    source = ms.push_forward_affine(src, U, None, Vinv_t, 1.0)
    direction = Vinv_t[:, jj] / abs(np.linalg.det(U))
    coeff = np.zeros(m)
    if jj >= norm.r:
        return BalanceResult(source, ms.zero_measure(m), direction, norm, k, L, coeff)
    coeff[jj] = 1.0
    sig = normalized_balance(d, m, norm.r, jj, k, L)
    sigma = ms.push_forward_affine(sig, U, None, Vinv_t, 1.0)
    return BalanceResult(source, sigma, direction, norm, k, L, coeff)


def _is_identity(U):
    U = linalg.to_float(U)
    return np.array_equal(U, np.eye(U.shape[0]))


def unit_pieces(A, k, L):
    """Per-normalized-direction balancing measures on Q (U = I required).

    Returns (norm, pieces) where pieces[i] has densities already mapped by
    V^{-T}, for i < r."""
    A = np.asarray(A)
    d, m = A.shape
    norm = _normalization(A)
    check_request(d, norm.r, k)
    if not _is_identity(norm.U):
        raise NotImplementedError(
            "balancing on axis-aligned cubes needs a normalization with U = I (full row rank A)"
        )
    Vinv_t = linalg.to_float(linalg.inverse(norm.V).T)
    pieces = []
    for i in range(norm.r):
        sig = normalized_balance(d, m, norm.r, i, k, L)
        pieces.append(ms.push_forward_affine(sig, np.eye(d), None, Vinv_t, 1.0))
    return norm, pieces


def balance_vector_cube(A, v, k, L=12):
    """Balance v 1_Q for a full-row-rank A (so that U = I)."""
    A = np.asarray(A)
    d, m = A.shape
    v = np.asarray(linalg.to_float(np.asarray(v)), dtype=float)
    norm, pieces = unit_pieces(A, k, L)
    coeff = linalg.to_float(norm.V).T @ v
    sigma = ms.zero_measure(m)
    for i, piece in enumerate(pieces):
        if coeff[i] != 0:
            sigma = sigma + ms.push_forward_affine(piece, np.eye(d), None, None, float(coeff[i]))
    source = ms.DiscreteMeasure([ms.cube(np.zeros(d), np.ones(d), v)], m)
    return BalanceResult(source, sigma, v, norm, k, L, np.where(np.arange(m) < norm.r, coeff, 0.0))


def balance_basis_cube(A, j, k, L=12):
    """Balance f_j 1_Q (j 1-based).

    With full row rank A the standard field f_j is balanced on Q itself;
    otherwise the j-th normalized direction is balanced on UQ."""
    A = np.asarray(A)
    d, m = A.shape
    if not 1 <= j <= m:
        raise ValueError(f"j={j} must lie in 1..{m}")
    if linalg.rank(A) == d:
        e = np.zeros(m)
        e[j - 1] = 1.0
        return balance_vector_cube(A, e, k, L)
    return balance_normalized_direction(A, j, k, L)


def measured_c1(A, k, L):
    """sup over unit v of TV(sigma_v) / ||v 1_Q||_1 for the cube construction."""
    A = np.asarray(A)
    d, m = A.shape
    norm, pieces = unit_pieces(A, k, L)
    tv = np.array([ms.total_variation(p) for p in pieces] + [0.0] * (m - norm.r))
    M = tv[:, None] * linalg.to_float(norm.V).T  # coefficients scaled by TV
    best = max(np.linalg.norm(M.T @ np.array(s)) for s in itertools.product((-1, 1), repeat=m))
    return float(best) / 2 ** d


# ---------------------------------------------------------------------------
# dyadic grid functions


@dataclass
class GridFunction:
    """Piecewise constant field on the dyadic cells of (-1, 1)^d."""

    depth: int
    values: np.ndarray  # shape (2^depth,)*d + (m,)

    @property
    def d(self):
        return self.values.ndim - 1

    @property
    def m(self):
        return self.values.shape[-1]

    @property
    def side(self):
        return 2.0 ** (1 - self.depth)

    def cell_centers(self):
        n = 1 << self.depth
        ticks = -1 + (2 * np.arange(n) + 1) / n
        grids = np.meshgrid(*([ticks] * self.d), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def flat_values(self):
        return self.values.reshape(-1, self.m)

    def l1_norm(self):
        return float(np.sum(np.linalg.norm(self.flat_values(), axis=1)) * self.side ** self.d)

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n = 1 << self.depth
        idx = np.clip(np.floor((X + 1) * n / 2).astype(int), 0, n - 1)
        return self.values[tuple(idx.T)]

    def to_json(self):
        out = {}
        for idx in np.ndindex(self.values.shape[:-1]):
            v = self.values[idx]
            if np.any(v != 0):
                out[",".join(map(str, idx))] = v.tolist()
        return {"depth": self.depth, "values": out}

    @classmethod
    def from_json(cls, obj, d, m):
        n = 1 << int(obj["depth"])
        vals = np.zeros((n,) * d + (m,))
        for key, v in obj["values"].items():
            idx = tuple(int(s) for s in str(key).split(","))
            if len(idx) != d or any(not 0 <= i < n for i in idx):
                raise ValueError(f"cell index {key!r} out of range")
            vals[idx] = v
        return cls(int(obj["depth"]), vals)


def _tile(piece, centers, r, scales):
    """Copies of ``piece`` moved to x_c + r x, densities times r^{d-1} or
    r^{d-k} as needed for mass scaling r^d, and times ``scales`` per copy."""
    C = len(centers)
    if isinstance(piece, ms.Segments):
        N, d = piece.P.shape
        P = (centers[:, None, :] + r * piece.P[None]).reshape(-1, d)
        Q = (centers[:, None, :] + r * piece.Q[None]).reshape(-1, d)
        W = (r ** (d - 1)) * scales[:, None, None] * piece.W[None]
        return ms.Segments(P, Q, W.reshape(-1, piece.m))
    if isinstance(piece, ms.Patches):
        N, d = piece.O.shape
        k = piece.k
        O = (centers[:, None, :] + r * piece.O[None]).reshape(-1, d)
        F = np.broadcast_to(r * piece.F[None], (C,) + piece.F.shape).reshape(-1, d, k)
        W = (r ** (d - k)) * scales[:, None, None] * piece.W[None]
        return ms.Patches(O, F, W.reshape(-1, piece.m))
    raise TypeError(f"cannot tile {type(piece).__name__}")


def balance_grid(A, f: GridFunction, k, L=8):
    """Balance a dyadic grid function cell by cell.

    Returns (sigma, massBound) with TV(sigma) <= massBound."""
    A = np.asarray(A)
    d, m = A.shape
    if f.d != d or f.m != m:
        raise ValueError("grid function dimensions disagree with the operator")
    vals = f.flat_values()
    if not np.any(vals):
        return ms.zero_measure(m), 0.0
    norm, pieces = unit_pieces(A, k, L)
    c1 = measured_c1(A, k, L)
    live = np.any(vals != 0, axis=1)
    centers = f.cell_centers()[live]
    coeff = vals[live] @ linalg.to_float(norm.V)  # rows: V^T v per cell
    r = f.side / 2
    out = []
    for i, unit in enumerate(pieces):
        if not np.any(coeff[:, i]):
            continue
        for piece in unit.pieces:
            out.append(_tile(piece, centers, r, coeff[:, i]))
    sigma = ms.DiscreteMeasure(out, m)
    cell_volume = f.side ** d
    mass_bound = c1 * float(np.sum(np.linalg.norm(vals, axis=1))) * cell_volume
    return sigma, mass_bound


def grid_source(f: GridFunction):
    """f itself as a measure made of cube pieces."""
    vals = f.flat_values()
    live = np.any(vals != 0, axis=1)
    centers = f.cell_centers()[live]
    half = f.side / 2
    d = f.d
    F = np.broadcast_to(half * np.eye(d), (len(centers), d, d))
    return ms.DiscreteMeasure([ms.Patches(centers, F, vals[live])], f.m)


# ---------------------------------------------------------------------------
# iteration for sampled continuous fields


@dataclass
class VitaliResult:
    approximants: list  # GridFunction increments phi_l, one per level
    depths: list
    errors: list  # ||f - f_l||_1 per level
    f_norm: float
    sigma: ms.DiscreteMeasure
    mass_bounds: list
    c1: float

    @property
    def total_variation(self):
        return ms.total_variation(self.sigma)


class ConvergenceError(RuntimeError):
    pass


def _block_mean(samples, depth):
    """Average of fine samples (n,)*d + (m,) over dyadic cells at ``depth``."""
    d = samples.ndim - 1
    n = samples.shape[0]
    b = n >> depth
    shape = []
    for _ in range(d):
        shape += [1 << depth, b]
    x = samples.reshape(*shape, samples.shape[-1])
    return x.mean(axis=tuple(range(1, 2 * d, 2)))


def _upsample(coarse, n):
    d = coarse.ndim - 1
    f = n // coarse.shape[0]
    out = coarse
    for axis in range(d):
        out = np.repeat(out, f, axis=axis)
    return out


def sample_grid(func, d, resolution):
    """Cell-midpoint samples of ``func`` on a (resolution,)*d grid of (-1, 1)^d."""
    ticks = -1 + (2 * np.arange(resolution) + 1) / resolution
    grids = np.meshgrid(*([ticks] * d), indexing="ij")
    X = np.stack([g.ravel() for g in grids], axis=1)
    vals = np.asarray(func(X), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    return vals.reshape((resolution,) * d + (vals.shape[-1],))


def vitali_iterate(A, samples, k, L=4, iters=6, max_depth=None, build_sigma=True):
    """Dyadic-cube version of the covering iteration.

    ``samples`` holds midpoint values on a (2^D,)*d grid.  At level l the
    current remainder is replaced by its cell means at the coarsest depth
    whose L^1 error is at most 2^{-l} ||f||_1; that increment is balanced
    with :func:`balance_grid`."""
    if iters < 1:
        raise ValueError("iters must be at least 1")
    samples = np.asarray(samples, dtype=float)
    A = np.asarray(A)
    d, m = A.shape
    n = samples.shape[0]
    D = int(round(np.log2(n)))
    if 1 << D != n or samples.shape != (n,) * d + (m,):
        raise ValueError("samples must be a (2^D,)*d x m array")
    max_depth = D if max_depth is None else min(max_depth, D)
    cell = (2.0 / n) ** d

    def l1(x):
        return float(np.sum(np.linalg.norm(x, axis=-1)) * cell)

    f_norm = l1(samples)
    remainder = samples.copy()
    approximants, depths, errors, bounds = [], [], [], []
    sigma = ms.zero_measure(m)
    c1 = measured_c1(A, k, L)
    for level in range(1, iters + 1):
        budget = 2.0 ** (-level) * f_norm
        chosen = None
        for depth in range(0, max_depth + 1):
            means = _block_mean(remainder, depth)
            err = l1(remainder - _upsample(means, n))
            if err <= budget:
                chosen = (depth, means, err)
                break
        if chosen is None:
            means = _block_mean(remainder, max_depth)
            resid = np.linalg.norm(remainder - _upsample(means, n), axis=-1)
            per_cell = _block_mean(resid[..., None], max_depth)[..., 0]
            worst = np.argwhere(per_cell >= np.max(per_cell) * 0.5)[:8]
            raise ConvergenceError(
                f"level {level}: oscillation budget {budget:.3g} unmet at depth {max_depth}; "
                f"worst cells {[tuple(map(int, w)) for w in worst]}"
            )
        depth, means, err = chosen
        g = GridFunction(depth, means)
        approximants.append(g)
        depths.append(depth)
        errors.append(err)
        remainder = remainder - _upsample(means, n)
        if build_sigma:
            s, bound = balance_grid(A, g, k, L)
            sigma = sigma + s
        else:
            bound = c1 * g.l1_norm()
        bounds.append(bound)
    return VitaliResult(approximants, depths, errors, f_norm, sigma, bounds, c1)


def op_from_matrix(A):
    A = np.asarray(A)
    return OperatorSpec.from_matrices([A], rational=linalg.is_exact(A))
