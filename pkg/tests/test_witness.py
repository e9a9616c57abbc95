import json
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from afree import linalg
from afree import witness as wt
from afree.operator import OperatorSpec
from afree.surd import Surd


def _sym(x):
    if isinstance(x, Surd):
        return sum((sympy.Rational(c.numerator, c.denominator) * sympy.sqrt(r) for r, c in x.terms.items()), sympy.Integer(0))
    x = Fraction(x)
    return sympy.Rational(x.numerator, x.denominator)


def _symvec(v):
    return sympy.Matrix([_sym(x) for x in v])


def _relations_hold(A, fr):
    """Defining relations of a one-matrix fragment, rechecked in sympy."""
    M = sympy.Matrix([[_sym(x) for x in row] for row in A])
    lam = _sym(fr.C[0, 0])
    f, e, g = _symvec(fr.f), _symvec(fr.e), _symvec(fr.g[0])
    Bf = lam * M * f
    if fr.p == 0:
        return sympy.simplify(Bf.norm()) == 0
    checks = [
        (Bf.T * Bf)[0] - 1,
        (e.T * e)[0] - 1,
        *(lam * M * g - e),
        (e.T * Bf)[0],
        ((lam * M * g).T * Bf)[0],
    ]
    return all(sympy.simplify(c) == 0 for c in checks)


def rank_two_matrices(d, m):
    return st.lists(st.lists(st.integers(-4, 4), min_size=m, max_size=m), min_size=d, max_size=d).filter(
        lambda rows: sympy.Matrix(rows).rank() >= 2
    )


@settings(max_examples=25, deadline=None)
@given(rank_two_matrices(3, 3))
def test_scalar_witness_relations_in_sympy(rows):
    A = linalg.exact(rows)
    w = wt.scalar_witness(A)
    op = OperatorSpec.from_matrices([A])
    assert wt.verify_witness(op, w, 0).passed
    for fr in w.fragments:
        assert _relations_hold(A, fr)


@settings(max_examples=20, deadline=None)
@given(rank_two_matrices(2, 4))
def test_float_scalar_witness(rows):
    A = np.array(rows, dtype=float) / 3
    w = wt.scalar_witness(A)
    op = OperatorSpec.from_matrices([A], rational=False)
    assert wt.verify_witness(op, w, 1e-10).passed


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.integers(-3, 3), min_size=3, max_size=3), min_size=3, max_size=3))
def test_decision_rule_matches_constructor(rows):
    A = linalg.exact(rows)
    rank = sympy.Matrix(rows).rank()
    assert wt.scalar_condition_decision(A) == (rank != 1)
    if rank == 1:
        with pytest.raises(wt.NotRepresentable):
            wt.scalar_witness(A)
    else:
        assert wt.verify_witness(OperatorSpec.from_matrices([A]), wt.scalar_witness(A)).passed


def test_two_matrix_example_witness():
    op, w = wt.two_matrix_witness()
    report = wt.verify_witness(op, w, 0)
    assert report.passed, report.failed()
    assert [fr.p for fr in w.fragments] == [2, 1, 1, 1, 1]


def test_corrupted_witness_is_rejected():
    op, w = wt.two_matrix_witness()
    bad = w.fragments[0]
    g = bad.g.copy()
    g[0] = g[1]
    report = wt.verify_witness(op, wt.Witness([wt.Fragment(bad.f, bad.C, bad.p, bad.e, g)] + w.fragments[1:]), 0)
    assert not report.passed
    assert "shared_rank" in report.failed()
    missing = wt.verify_witness(op, wt.Witness(w.fragments[:4]), 0)
    assert "basis" in missing.failed()


def test_exact_verification_wants_zero_tolerance():
    op, w = wt.two_matrix_witness()
    with pytest.raises(ValueError):
        wt.verify_witness(op, w, 1e-9)


@pytest.mark.parametrize("d", [2, 3])
def test_div_curl_has_empty_wave_cone(d):
    with pytest.raises(wt.NotFound) as info:
        wt.heuristic_witness_search(wt.div_curl(d), trials=200)
    assert info.value.reason == "wave_cone"


@pytest.mark.parametrize("fixture", [wt.symmetric_divergence_2d, wt.embedded_div_curl])
def test_budget_exhaustion(fixture):
    with pytest.raises(wt.NotFound) as info:
        wt.heuristic_witness_search(fixture(), trials=500)
    assert info.value.reason == "budget"


def test_search_recovers_certificate_for_scalar_operator():
    A = linalg.exact([[1, 0, 2], [0, 1, 1]])
    op = OperatorSpec.from_matrices([A])
    w = wt.heuristic_witness_search(op, trials=500)
    # float certificates come back when the search output does not snap to rationals
    exact = w.fragments[0].C.dtype == object
    assert wt.verify_witness(op if exact else op.as_float(), w, 0 if exact else 1e-8).passed


@pytest.mark.parametrize("make", [
    lambda: wt.two_matrix_witness(),
    lambda: (OperatorSpec.from_matrices([linalg.exact([[1, 2], [3, 5]])]), wt.scalar_witness(linalg.exact([[1, 2], [3, 5]]))),
    lambda: (OperatorSpec.from_matrices([linalg.exact([[1, 1, 0], [0, 1, 1], [1, 0, 0]])]),
             wt.scalar_witness(linalg.exact([[1, 1, 0], [0, 1, 1], [1, 0, 0]]))),
])
def test_witness_json_round_trip(make):
    op, w = make()
    text = json.dumps(wt.witness_to_json(w, op))
    back, op_back = wt.witness_from_json(json.loads(text))
    assert op_back.equals(op)
    assert wt.verify_witness(op_back, back, 0).passed
    assert json.dumps(wt.witness_to_json(back, op_back)) == text


def test_surd_entries_survive_encoding():
    x = Surd.sqrt(2) * Fraction(3, 7) + Fraction(1, 2)
    assert wt.decode_entry(wt.encode_entry(x)) == x
    assert wt.decode_entry(wt.encode_entry(Fraction(-5, 3))) == Fraction(-5, 3)
    assert wt.decode_entry(wt.encode_entry(0.25), rational=False) == 0.25
