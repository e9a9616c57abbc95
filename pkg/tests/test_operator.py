import json
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from afree import linalg
from afree.operator import (
    OperatorSpec,
    divergence,
    ell1_wave_cone_scalar,
    fourier_symbol,
    gradient,
    operators_equivalent,
    svd_normalize,
    wave_cone_contains,
)

entries = st.integers(-3, 3)


def operator_tuples(d, m, n):
    return st.lists(st.lists(st.lists(entries, min_size=m, max_size=m), min_size=d, max_size=d),
                    min_size=n, max_size=n)


def _sympy_symbol(mats, xi):
    # row k of the symbol is xi^T A^k, written out independently of the library
    n = len(mats)
    return sympy.Matrix([[sum(xi[i] * mats[k][i][j] for i in range(len(xi))) for j in range(len(mats[0][0]))]
                         for k in range(n)])


@settings(max_examples=50, deadline=None)
@given(operator_tuples(3, 2, 2), st.lists(entries, min_size=3, max_size=3))
def test_symbol_matches_direct_expansion(mats, xi):
    op = OperatorSpec.from_matrices(mats)
    S = fourier_symbol(op, xi)
    assert sympy.Matrix(S.tolist()) == _sympy_symbol(mats, xi)


@settings(max_examples=50, deadline=None)
@given(operator_tuples(2, 3, 2), st.lists(entries, min_size=3, max_size=3))
def test_wave_cone_is_symbol_kernel(mats, f):
    op = OperatorSpec.from_matrices(mats)
    # f in the cone iff the n x d matrix of rows A^k f has a nonzero kernel vector xi
    rows = sympy.Matrix([[sum(mats[k][i][j] * f[j] for j in range(3)) for i in range(2)] for k in range(2)])
    assert wave_cone_contains(op, f) == (rows.rank() < 2)


def test_divergence_cone_is_everything_and_gradient_cone_is_zero():
    div = divergence(2)
    assert wave_cone_contains(div, [1, 0]) and wave_cone_contains(div, [3, -2])
    grad = gradient(3)
    assert not wave_cone_contains(grad, [1])
    assert wave_cone_contains(grad, [0])


def test_symbol_of_divergence():
    S = fourier_symbol(divergence(2), [2, 3])
    assert S.tolist() == [[2, 3]]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(entries, min_size=4, max_size=4), min_size=3, max_size=3))
def test_exact_normalization_reconstructs(rows):
    A = linalg.exact(rows)
    norm = svd_normalize(A)
    assert norm.r == linalg.rank(A)
    assert np.all(norm.reconstruct() == A)
    assert linalg.det(norm.U) != 0 and linalg.det(norm.V) != 0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(entries, min_size=3, max_size=3), min_size=2, max_size=2))
def test_float_normalization_reconstructs(rows):
    A = np.array(rows, dtype=float)
    norm = svd_normalize(A)
    assert norm.r == np.linalg.matrix_rank(A)
    assert np.allclose(norm.reconstruct(), A, atol=1e-12)


def test_scalar_cone_kernel():
    K = ell1_wave_cone_scalar(linalg.exact([[1, 1, 0], [0, 0, 1]]))
    assert len(K) == 1
    assert list(K[0]) in ([Fraction(-1), Fraction(1), Fraction(0)], [Fraction(1), Fraction(-1), Fraction(0)])


def test_equivalence_under_recombination():
    op = OperatorSpec.from_matrices([[[1, 0], [0, 1]], [[0, 1], [-1, 0]]])
    mixed = op.recombine(linalg.exact([[1, 1], [0, 2]]))
    assert operators_equivalent(op, mixed)
    other = OperatorSpec.from_matrices([[[1, 0], [0, 1]], [[0, 1], [1, 0]]])
    assert not operators_equivalent(op, other)


def test_json_round_trip_and_validation():
    op = OperatorSpec.from_matrices([[[Fraction(1, 2), 0], [0, -3]]])
    text = json.dumps(op.to_json())
    assert json.loads(text)["mats"][0][0][0] == "1/2"
    assert OperatorSpec.from_json(text).equals(op)
    with pytest.raises(ValueError):
        OperatorSpec.from_json({"d": 2, "m": 2, "n": 1})
    with pytest.raises(ValueError):
        OperatorSpec(2, 2, 1, np.zeros((1, 3, 2)))
    fop = op.as_float()
    assert OperatorSpec.from_json(fop.to_json()).equals(fop)
