import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from gerbrace.convolution_linfty import (
    ConvElement,
    ConvolutionAlgebra,
    exp_ad,
    identity_element,
    random_invariant,
)
from gerbrace.core_algebra import ArgumentError
from gerbrace.polydiff import PolyDiffOp
from gerbrace.polyvector_hochschild import AffineContext, bracket_operator, euler_derivation
from gerbrace.rigidity_verifier import (
    DeRhamElement,
    DeRhamSpace,
    alpha_element,
    block_of,
    check_intertwine,
    cocycle_basis,
    conv_end_diff,
    correct_structure,
    de_rham_diff,
    de_rham_homotopy,
    exact_primitive,
    p_end,
    rigidity_solve,
    slice_basis,
    split_blocks,
    verify_rigidity,
    vh,
    vh_preimage,
)

CONTEXTS = [(1, (0,)), (1, (2,)), (2, (0, 0)), (2, (0, 2))]


def _space(d, t):
    return DeRhamSpace(AffineContext(d, t))


def _euler_form(space):
    acc = DeRhamElement(space)
    for i in range(1, space.d + 1):
        acc = acc + space.var("th", i) * space.var("thc", i)
    return acc


@pytest.mark.parametrize("d,t", CONTEXTS)
def test_euler_identity(d, t):
    ctx = AffineContext(d, t)
    euler = ConvElement.of(euler_derivation(ctx), ((1,),))
    mu = ConvElement.of(bracket_operator(ctx), ((1,), (2,)))
    assert conv_end_diff(euler, ctx) == mu


def test_vh_of_basic_forms():
    space = _space(2, (0, 0))
    ctx = space.ctx
    E = _euler_form(space)
    assert vh(E) == ConvElement.of(euler_derivation(ctx), ((1,),))
    DE = de_rham_diff(E)
    expected = DeRhamElement(space)
    for i in (1, 2):
        expected = expected + space.var("xc", i) * space.var("thc", i)
    assert DE == expected
    assert vh(DE) == ConvElement.of(bracket_operator(ctx), ((1,), (2,)))


def test_p_end_examples():
    space = _space(1, (0,))
    ring = space.ctx.va_ring
    op = p_end(space.var("thc", 1))
    assert op == PolyDiffOp(ring, 1, {((0, 0), ((0, 1),)): 1})
    assert p_end(space.var("xc", 1)) == PolyDiffOp(ring, 1, {((0, 0), ((1, 0),)): 1})
    with pytest.raises(ArgumentError):
        p_end(space.var("thc", 1) + space.var("xc", 1) * space.var("thc", 1))
    with pytest.raises(ArgumentError):
        vh(space.one())


@pytest.mark.parametrize("d,t", CONTEXTS)
def test_de_rham_differential_squares_to_zero(d, t):
    space = _space(d, t)
    for P in space.monomials(3, min_check=0):
        assert de_rham_diff(de_rham_diff(P)).is_zero()


@pytest.mark.parametrize("d,t", CONTEXTS)
def test_homotopy_identities(d, t):
    space = _space(d, t)
    for P in space.monomials(3, min_check=0):
        e = next(iter(P.terms))
        for part in ("check", "base"):
            lhs = de_rham_diff(de_rham_homotopy(P, part)) + de_rham_homotopy(de_rham_diff(P), part)
            w = sum(e[2 * d:3 * d]) + sum(e[d:2 * d]) if part == "check" else sum(e[3 * d:]) + sum(e[:d])
            assert lhs == P.scale(w)


@pytest.mark.parametrize("d,t", CONTEXTS)
def test_exact_primitive(d, t):
    space = _space(d, t)
    for P in space.monomials(3, min_check=1):
        Q = de_rham_diff(P)
        if Q.is_zero():
            continue
        assert de_rham_diff(exact_primitive(Q)) == Q
    with pytest.raises(ArgumentError):
        exact_primitive(space.one())


@pytest.mark.parametrize("d,t", [(2, (0, 0)), (2, (0, 2)), (2, (1, 1))])
def test_vh_intertwines_differentials(d, t):
    # every monomial with at least one check variable and total degree ≤ 3
    space = _space(d, t)
    for P in space.monomials(3, min_check=1):
        assert check_intertwine(P).ok, P.format()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_vh_is_injective(seed):
    rng = random.Random(seed)
    space = _space(2, rng.choice([(0, 0), (0, 2), (1, 1)]))
    mons = space.monomials(3, min_check=1)
    P = DeRhamElement(space)
    for _ in range(3):
        P = P + rng.choice(mons).scale(rng.choice([-2, -1, 1, 3]))
    if P.is_zero():
        return
    assert vh_preimage(vh(P), space.ctx) == P


def test_vh_preimage_rejects_other_monomials():
    ctx = AffineContext(1)
    assert vh_preimage(alpha_element(ctx), ctx) is None


def test_blocks_are_preserved():
    ctx = AffineContext(2)
    ring = ctx.va_ring
    rng = random.Random(2)
    for _ in range(15):
        X = random_invariant(ring, rng, rng.randint(1, 2), coef_cap=2)
        for b, Xb in split_blocks(X).items():
            for key in conv_end_diff(Xb, ctx).terms:
                bb = block_of(ring, key)
                assert bb[0] == b[0] + 1 and bb[1:] == b[1:]


def test_slice_basis_is_invariant():
    ctx = AffineContext(1)
    blocks = slice_basis(ctx, 2, 1, 1)
    assert blocks
    for elems in blocks.values():
        assert all(X.is_invariant() for X in elems)


def test_rigidity_solve_examples():
    ctx = AffineContext(1)
    ring = ctx.va_ring
    mu = ConvElement.of(bracket_operator(ctx), ((1,), (2,)))
    res = rigidity_solve(mu, ctx)
    assert res.ok and res.method == "de-rham-homotopy"
    assert res.primitive == ConvElement.of(euler_derivation(ctx), ((1,),))
    direct = rigidity_solve(mu, ctx, use_vh=False)
    assert direct.ok and direct.method == "exact-solve"
    assert conv_end_diff(direct.primitive, ctx) == mu
    assert rigidity_solve(ConvElement.zero(ring), ctx).method == "zero"
    json.dumps(res.to_json())


def test_rigidity_solve_rejects_non_cocycles():
    ctx = AffineContext(1)
    with pytest.raises(ArgumentError):
        rigidity_solve(identity_element(ctx.va_ring), ctx)
    rng = random.Random(1)
    while True:
        X = random_invariant(ctx.va_ring, rng, 2)
        if not conv_end_diff(X, ctx).is_zero():
            break
    with pytest.raises(ArgumentError):
        rigidity_solve(X, ctx)


def test_certificate_when_caps_are_too_small():
    ctx = AffineContext(1)
    mu = ConvElement.of(bracket_operator(ctx), ((1,), (2,)))
    res = rigidity_solve(mu, ctx, coef_cap=0, order_cap=0, use_vh=False)
    assert not res.ok and res.primitive is None
    assert res.certificate["left_kernel"]
    json.dumps(res.to_json())


def test_cocycles_are_cocycles():
    ctx = AffineContext(1)
    basis = cocycle_basis(ctx, 2)
    assert basis
    for _, X in basis:
        assert conv_end_diff(X, ctx).is_zero()


@pytest.mark.parametrize("d,n", [(1, 2), (1, 3), (2, 2)])
def test_verify_rigidity(d, n):
    rep = verify_rigidity(AffineContext(d), n)
    assert rep.results and rep.ok
    assert all(conv_end_diff(r.primitive, AffineContext(d)) == r.cocycle for r in rep.results)


@pytest.mark.parametrize("d,N", [(1, 3), (2, 2)])
def test_correct_structure(d, N):
    ctx = AffineContext(d)
    ring = ctx.va_ring
    alpha = alpha_element(ctx)
    g = random_invariant(ring, random.Random(5), 2, degree=0, terms=3)
    Q = exp_ad(g, alpha, N + 1)
    beta = correct_structure(Q, N, ctx)
    assert beta.component(1) == identity_element(ring)
    assert ConvolutionAlgebra(alpha, Q, N + 1).mc_residual(beta).is_zero()


def test_correcting_alpha_gives_identity():
    ctx = AffineContext(1)
    beta = correct_structure(alpha_element(ctx), 3, ctx)
    assert beta == identity_element(ctx.va_ring)


def test_correct_structure_rejects_bad_input():
    ctx = AffineContext(1)
    ring = ctx.va_ring
    with pytest.raises(ArgumentError):
        correct_structure(identity_element(ring), 2, ctx)
