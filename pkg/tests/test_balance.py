import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from afree import balance as bl
from afree import linalg
from afree import measures as ms


def _residuals(A, result, suite):
    op = bl.op_from_matrix(A)
    return [(abs(ms.weak_apply(op, result.combined(), phi)[0]), result.residual_bound(phi.lipschitz(), rigorous=True))
            for phi in suite]


@pytest.mark.parametrize("d,r,k,ok", [
    (3, 3, 1, True), (3, 2, 1, False), (3, 2, 2, True), (3, 1, 3, True), (3, 1, 2, False), (2, 2, 3, False), (2, 0, 1, True),
])
def test_rank_constraint(d, r, k, ok):
    if ok:
        bl.check_request(d, r, k)
    else:
        with pytest.raises(bl.RankConstraintError):
            bl.check_request(d, r, k)


@pytest.mark.parametrize("d,k", [(2, 1), (2, 2), (3, 1), (3, 2), (3, 3)])
def test_divergence_cube_within_bound(d, k):
    A = linalg.eye(d)
    suite = ms.bump_suite(d, 5, seed=d + k)
    for j in range(1, d + 1):
        res = bl.balance_basis_cube(A, j, k, L=6)
        for val, bound in _residuals(A, res, suite):
            assert val <= bound + 1e-9
        assert ms.total_variation(res.sigma) <= 2 ** (d + 1) * np.sqrt(d)


def test_full_dimensional_tree_converges():
    A = linalg.eye(2)
    phi = ms.Bump(np.array([0.6, 0.4]), 0.7)
    op = bl.op_from_matrix(A)
    vals = [abs(ms.weak_apply(op, bl.balance_basis_cube(A, 1, 1, L).combined(), phi)[0]) for L in (4, 6, 8)]
    assert vals[2] < vals[1] < vals[0]


def test_rank_deficient_operator_uses_normalized_direction():
    A = linalg.exact([[1, 1, 0], [0, 0, 0], [0, 0, 1]])
    res = bl.balance_basis_cube(A, 1, 2, L=6)
    suite = ms.bump_suite(3, 4, seed=2)
    for val, bound in _residuals(A, res, suite):
        assert val <= bound + 1e-9
    # the source is the constant field res.direction on the image cube U Q
    U = linalg.to_float(res.norm.U)
    assert ms.total_variation(res.source) == pytest.approx(np.linalg.norm(res.direction) * 8 * abs(np.linalg.det(U)))


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=2, max_size=2).filter(lambda v: np.linalg.norm(v) > 0.1))
def test_cube_balancing_is_linear_in_v(v):
    A = linalg.exact([[1, 2], [0, 1]])
    phi = ms.Bump(np.array([0.5, -0.3]), 0.8)
    op = bl.op_from_matrix(A)
    e1 = ms.weak_apply(op, bl.balance_vector_cube(A, [1, 0], 2, 5).sigma, phi)
    e2 = ms.weak_apply(op, bl.balance_vector_cube(A, [0, 1], 2, 5).sigma, phi)
    both = ms.weak_apply(op, bl.balance_vector_cube(A, v, 2, 5).sigma, phi)
    assert np.allclose(both, v[0] * e1 + v[1] * e2, atol=1e-12)


def test_grid_balance_mass_and_residual():
    A = linalg.eye(2)
    rng = np.random.default_rng(4)
    vals = rng.integers(-2, 3, size=(4, 4, 2)).astype(float)
    g = bl.GridFunction(2, vals)
    sigma, bound = bl.balance_grid(A, g, 1, L=6)
    assert ms.total_variation(sigma) <= bound * (1 + 1e-12)
    op = bl.op_from_matrix(A)
    mu = bl.grid_source(g) + sigma
    unbalanced = bl.grid_source(g)
    suite = ms.bump_suite(2, 5, seed=9, radius_range=(0.3, 0.6))
    raw = ms.weak_residual(op, unbalanced, suite)
    assert ms.weak_residual(op, mu, suite) < 0.2 * raw


def test_grid_needs_full_row_rank():
    A = linalg.exact([[1, 0], [0, 0]])
    g = bl.GridFunction(1, np.ones((2, 2, 2)))
    with pytest.raises(bl.RankConstraintError):
        bl.balance_grid(A, g, 1, L=4)
    with pytest.raises(NotImplementedError):
        bl.balance_grid(linalg.exact([[0, 0], [1, 0]]), g, 2, L=4)


def test_grid_json_round_trip():
    vals = np.zeros((4, 4, 2))
    vals[1, 2] = [1.5, -2]
    g = bl.GridFunction(2, vals)
    back = bl.GridFunction.from_json(g.to_json(), 2, 2)
    assert np.array_equal(back.values, vals)
    with pytest.raises(ValueError):
        bl.GridFunction.from_json({"depth": 1, "values": {"3,0": [1, 1]}}, 2, 2)


@pytest.mark.parametrize("field", [
    lambda X: np.stack([np.sin(2 * X[:, 0]), X[:, 1] ** 2], axis=1),
    lambda X: np.stack([np.exp(X[:, 0] * X[:, 1]), np.cos(X[:, 0])], axis=1),
    lambda X: np.stack([(X[:, 0] > 0.1).astype(float), np.abs(X[:, 1])], axis=1),
])
def test_vitali_errors_shrink_geometrically(field):
    A = linalg.eye(2)
    samples = bl.sample_grid(field, 2, 64)
    res = bl.vitali_iterate(A, samples, 1, L=4, iters=6, build_sigma=False)
    for level, err in enumerate(res.errors, start=1):
        assert err <= 2.0 ** -level * res.f_norm + 1e-12
    assert sum(res.mass_bounds) <= 2 * res.c1 * res.f_norm * (1 + 1e-9)


def test_vitali_reports_unmet_budget():
    rng = np.random.default_rng(0)
    samples = rng.standard_normal((16, 16, 2))
    with pytest.raises(bl.ConvergenceError, match="worst cells"):
        bl.vitali_iterate(linalg.eye(2), samples, 1, iters=6, max_depth=2, build_sigma=False)
