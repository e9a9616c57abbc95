from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from afree import linalg
from afree.surd import Surd

small = st.integers(-4, 4)


def matrices(rows=st.integers(1, 4), cols=st.integers(1, 4)):
    return st.tuples(rows, cols).flatmap(
        lambda rc: st.lists(st.lists(small, min_size=rc[1], max_size=rc[1]), min_size=rc[0], max_size=rc[0])
    )


@settings(max_examples=80, deadline=None)
@given(matrices())
def test_rank_matches_sympy(rows):
    assert linalg.rank(linalg.exact(rows)) == sympy.Matrix(rows).rank()


@settings(max_examples=80, deadline=None)
@given(matrices())
def test_float_rank_matches_exact(rows):
    assert linalg.rank(np.array(rows, dtype=float)) == linalg.rank(linalg.exact(rows))


@settings(max_examples=60, deadline=None)
@given(matrices())
def test_nullspace_is_kernel_basis(rows):
    A = linalg.exact(rows)
    N = linalg.nullspace(A)
    assert len(N) == A.shape[1] - linalg.rank(A)
    for v in N:
        assert all(x == 0 for x in A.dot(v))
    if len(N):
        assert linalg.rank(np.array(N, dtype=object)) == len(N)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(small, min_size=3, max_size=3), min_size=3, max_size=3), st.lists(small, min_size=3, max_size=3))
def test_solve_and_inverse_are_exact(rows, rhs):
    A = linalg.exact(rows)
    M = sympy.Matrix(rows)
    if M.det() == 0:
        with pytest.raises(ValueError):
            linalg.inverse(A)
        return
    assert linalg.det(A) == Fraction(int(M.det().p), int(M.det().q))
    x = linalg.solve(A, linalg.exact(rhs))
    assert all(v == Fraction(b) for v, b in zip(A.dot(x), rhs))
    inv = linalg.inverse(A)
    assert np.all(inv.dot(A) == linalg.eye(3))


def test_complete_rows_gives_invertible_extension():
    rows = linalg.exact([[1, 2, 0]])
    full = linalg.complete_rows(rows, 3)
    assert full.shape == (3, 3)
    assert np.all(full[0] == rows[0])
    assert linalg.det(full) != 0


def test_to_fraction_parses_strings_and_floats():
    assert linalg.to_fraction("3/4") == Fraction(3, 4)
    assert linalg.to_fraction(0.5) == Fraction(1, 2)
    with pytest.raises(TypeError):
        linalg.to_fraction(object())


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 60), st.integers(1, 60), st.fractions(-20, 20, max_denominator=9), st.fractions(-20, 20, max_denominator=9))
def test_surd_arithmetic_matches_floats(a, b, p, q):
    x = Surd.sqrt(a) * p + Surd.sqrt(b) * q
    y = Surd.sqrt(a * b) + 1
    expect = np.sqrt(a) * float(p) + np.sqrt(b) * float(q)
    assert float(x) == pytest.approx(expect, rel=1e-12, abs=1e-12)
    assert float(x * y) == pytest.approx(expect * (np.sqrt(a * b) + 1), rel=1e-12, abs=1e-12)
    if x != 0:
        assert (x * x.inverse()).simplify() == 1


def test_surd_square_is_rational():
    s = Surd.sqrt(Fraction(8, 3))
    assert (s * s).simplify() == Fraction(8, 3)
    assert Surd.sqrt(12) == 2 * Surd.sqrt(3)


def test_surd_json_round_trip():
    s = Surd.sqrt(2) * Fraction(3, 5) + Fraction(1, 7)
    assert Surd.from_json(s.to_json()) == s
