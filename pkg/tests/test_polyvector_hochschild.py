from fractions import Fraction
import random

import pytest
from hypothesis import given, settings, strategies as st

from gerbrace.brace_operad import T_12, T_21, T_CUP, T_CUP_OPP, T_ID, BraceElement
from gerbrace.core_algebra import ArgumentError
from gerbrace.polydiff import PolyDiffOp
from gerbrace.polyvector_hochschild import (
    AffineContext,
    Polyvector,
    apply_operator,
    bracket_operator,
    brace_eval,
    cup,
    cup_symmetrization,
    euler_derivation,
    gerstenhaber_bracket,
    graded_bracket_via_braces,
    hkr,
    hochschild_diff,
    monomial_basis,
    mult_cochain,
    random_cochain,
    random_polyvector,
    schouten,
    shifted_degree,
    unit_cochain,
    wedge,
    wedge_operator,
)

CTX = AffineContext(2)
GRADINGS = [(0, 0), (1, 0), (2, 1), (0, 3)]


def sgn(k):
    return -1 if k % 2 else 1


def test_wedge_examples():
    th1, th2, x1 = CTX.theta(1), CTX.theta(2), CTX.x(1)
    assert wedge(CTX.const(), th1) == th1
    assert wedge(th1, th1).is_zero()
    assert wedge(x1 * th1, th2) == CTX.polyvector((1, 0), (1, 2))
    assert wedge(th2, th1) == -wedge(th1, th2)


def test_wedge_truncation_is_opt_in():
    x1 = CTX.x(1)
    big = wedge(wedge(x1, x1), wedge(x1, x1))
    assert not big.is_zero()
    assert wedge(wedge(x1, x1), wedge(x1, x1), truncate=True).is_zero()


def test_schouten_examples():
    assert schouten(CTX.theta(1), CTX.x(1)) == CTX.const()
    assert schouten(CTX.x(1), CTX.x(2)).is_zero()
    assert schouten(CTX.theta(1), CTX.theta(2)).is_zero()
    assert schouten(CTX.theta(1), CTX.x(2)).is_zero()


def test_mixed_context_rejected():
    with pytest.raises(ArgumentError):
        wedge(CTX.x(1), AffineContext(3).x(1))


@pytest.mark.parametrize("t", GRADINGS)
@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_gerstenhaber_axioms(t, seed):
    ctx = AffineContext(2, t, degcap=2)
    rng = random.Random(seed)
    a, b, c = (random_polyvector(ctx, rng) for _ in range(3))
    pa, pb = a.parity(), b.parity()
    assert wedge(a, b) == wedge(b, a) * sgn(pa * pb)
    assert wedge(wedge(a, b), c) == wedge(a, wedge(b, c))
    assert schouten(a, b) == schouten(b, a) * -sgn((pa - 1) * (pb - 1))
    lhs = schouten(a, schouten(b, c))
    rhs = schouten(schouten(a, b), c) + schouten(b, schouten(a, c)) * sgn((pa - 1) * (pb - 1))
    assert lhs == rhs
    assert schouten(a, b * c) == schouten(a, b) * c + b * schouten(a, c) * sgn((pa - 1) * pb)


@pytest.mark.parametrize("t", GRADINGS)
def test_bracket_operator_is_invariant_and_matches_schouten(t):
    ctx = AffineContext(2, t, degcap=2)
    mu = bracket_operator(ctx)
    assert mu.is_invariant() and wedge_operator(ctx).is_invariant()
    rng = random.Random(11)
    for _ in range(40):
        a, b = random_polyvector(ctx, rng), random_polyvector(ctx, rng)
        assert apply_operator(mu, [a, b]) == schouten(a, b) * sgn(a.parity() + 1)


def test_euler_derivation_examples():
    P = euler_derivation(CTX)
    th1, th2 = CTX.theta(1), CTX.theta(2)
    assert apply_operator(P, [th1]) == th1
    assert apply_operator(P, [CTX.x(1)]).is_zero()
    assert apply_operator(P, [th1 * th2]) == (th1 * th2) * 2


def test_polyvector_json_roundtrip():
    rng = random.Random(4)
    for _ in range(10):
        u = random_polyvector(CTX, rng)
        assert Polyvector.from_json(CTX, u.to_json()) == u


def test_odd_generator_cannot_repeat():
    with pytest.raises(ArgumentError):
        Polyvector(CTX, {(0, 0, 2, 0): 1})


def test_monomial_basis_counts():
    # x-degree ≤ 1 in two variables (3 choices) times subsets of {θ1, θ2} (4)
    assert len(monomial_basis(CTX, 1, 2)) == 12


def test_odd_degree_cochains_rejected():
    with pytest.raises(ArgumentError):
        AffineContext(1, (1,)).a_ring


# Hochschild side ------------------------------------------------------------


def test_hkr_examples():
    ring = CTX.a_ring
    assert hkr(CTX.const()) == unit_cochain(CTX)
    d1 = ring.var(0)
    assert hkr(CTX.theta(1)) == PolyDiffOp(ring, 1, {(ring.one(), (d1,)): 1})
    h12 = hkr(CTX.theta(1) * CTX.theta(2))
    d2 = ring.var(1)
    assert h12 == PolyDiffOp(ring, 2, {(ring.one(), (d1, d2)): 1, (ring.one(), (d2, d1)): -1})


def test_hkr_lands_in_cocycles_and_is_injective():
    basis = monomial_basis(CTX, 2, 2)
    images = {}
    for u in basis:
        h = hkr(u)
        assert hochschild_diff(h).is_zero()
        images.setdefault(h.arity, []).append(h)
    for ops in images.values():
        keys = sorted({k for h in ops for k in h.terms})
        rows = [[h.terms.get(k, 0) for k in keys] for h in ops]
        from gerbrace.core_algebra import ExactMatrix, rank

        assert rank(ExactMatrix.from_rows(rows)) == len(ops)


def test_hochschild_diff_of_unit():
    assert hochschild_diff(unit_cochain(CTX)).is_zero()


def test_cup_hkr_defect_is_exact():
    ring = CTX.a_ring
    h1, h2 = hkr(CTX.theta(1)), hkr(CTX.theta(2))
    h12 = hkr(CTX.theta(1) * CTX.theta(2))
    homotopy = PolyDiffOp(ring, 1, {(ring.one(), ((1, 1),)): Fraction(-1, 2)})
    assert cup(h1, h2) - h12.scale(Fraction(1, 2)) == hochschild_diff(homotopy)
    assert cup_symmetrization(h1, h2) == h12.scale(Fraction(1, 2))


def test_bracket_intertwines_hkr():
    u, v = CTX.theta(1), CTX.x(1) * CTX.theta(1)
    assert gerstenhaber_bracket(hkr(u), hkr(v)) == hkr(schouten(u, v))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_hochschild_diff_squares_to_zero(seed):
    rng = random.Random(seed)
    O = random_cochain(CTX, rng, rng.randint(0, 2), terms=3)
    assert hochschild_diff(hochschild_diff(O)).is_zero()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_classical_bracket_equals_brace_bracket(seed):
    rng = random.Random(seed)
    P = random_cochain(CTX, rng, rng.randint(1, 2))
    Q = random_cochain(CTX, rng, rng.randint(1, 2))
    assert gerstenhaber_bracket(P, Q) == graded_bracket_via_braces(P, Q)


def test_bracket_of_even_cochain_with_itself_vanishes():
    rng = random.Random(9)
    for _ in range(20):
        O = random_cochain(CTX, rng, 2)
        if shifted_degree(O) % 2 == 0:
            assert gerstenhaber_bracket(O, O).is_zero()


def test_multiplication_is_maurer_cartan():
    m = mult_cochain(CTX)
    assert gerstenhaber_bracket(m, m).is_zero()


# brace action --------------------------------------------------------------


def test_brace_eval_identity_tree():
    rng = random.Random(1)
    O = random_cochain(CTX, rng, 2)
    assert brace_eval(T_ID, [O]) == O


def test_brace_eval_arity_mismatch():
    with pytest.raises(ArgumentError):
        brace_eval(T_12, [mult_cochain(CTX)])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_two_vertex_trees_give_bracket_and_cup(seed):
    rng = random.Random(seed)
    P = random_cochain(CTX, rng, rng.randint(1, 2))
    Q = random_cochain(CTX, rng, rng.randint(1, 2))
    assert brace_eval(T_12, [P, Q]) + brace_eval(T_21, [P, Q]) == gerstenhaber_bracket(P, Q)
    assert brace_eval(T_CUP, [P, Q]) + brace_eval(T_CUP_OPP, [P, Q]) == cup_symmetrization(P, Q).scale(2)
    assert brace_eval(T_CUP, [P, Q]) == cup(P, Q)


def test_brace_eval_linear_combination():
    rng = random.Random(2)
    P, Q = random_cochain(CTX, rng, 1), random_cochain(CTX, rng, 2)
    X = BraceElement(2, {T_12: 1, T_21: 1})
    assert brace_eval(X, [P, Q]) == gerstenhaber_bracket(P, Q)
