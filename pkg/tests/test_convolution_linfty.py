from fractions import Fraction
import random

import pytest
from hypothesis import given, settings, strategies as st

from gerbrace.core_algebra import ArgumentError
from gerbrace.convolution_linfty import (
    ConvElement,
    ConvolutionAlgebra,
    PolyPath,
    bianchi_defect,
    braces,
    compose_morphisms,
    exp_ad,
    hadamard_compose,
    hamiltonian_twist,
    identity_element,
    lie_bracket,
    mc_adjust,
    one_cell_check,
    pre_lie,
    random_invariant,
    saturated_braces,
    standard_structure,
    symmetrize,
)
from gerbrace.polyvector_hochschild import AffineContext, bracket_operator, euler_derivation, wedge_operator
from gerbrace.rigidity_verifier import correct_structure


def _setup(d, t=None, seed=3, cap=3):
    ctx = AffineContext(d, t)
    ring = ctx.va_ring
    alpha = standard_structure(ctx)
    g = random_invariant(ring, random.Random(seed), 2, degree=0)
    return ctx, ring, alpha, exp_ad(g, alpha, cap + 1)


def _homogeneous(x):
    parts = x.homogeneous_parts()
    return parts[min(parts)] if parts else x


def test_standard_structure_is_maurer_cartan():
    for d, t in [(1, None), (1, (1,)), (2, None)]:
        ctx = AffineContext(d, t)
        alpha = standard_structure(ctx)
        assert alpha.is_invariant()
        assert alpha.degrees() == {1}
        assert lie_bracket(alpha, alpha, 3).is_zero()


def test_gauge_transform_and_twist_stay_maurer_cartan():
    ctx, ring, alpha, Q = _setup(2)
    assert lie_bracket(Q, Q, 4).is_zero()
    assert Q.component(2) == alpha
    twisted = alpha + hamiltonian_twist(ctx, ctx.theta(1) * ctx.theta(2))
    assert lie_bracket(twisted, twisted, 4).is_zero()
    with pytest.raises(ArgumentError):
        hamiltonian_twist(ctx, ctx.theta(1))


def test_exp_ad_rejects_bad_gauge():
    ctx, ring, alpha, _ = _setup(1)
    with pytest.raises(ArgumentError):
        exp_ad(identity_element(ring), alpha, 3)


def test_hadamard_sign_on_odd_factors():
    ctx = AffineContext(1)
    ring = ctx.va_ring
    br = ConvElement.of(bracket_operator(ctx), ((1,), (2,)))
    wd = ConvElement.of(wedge_operator(ctx), ((1, 2),))
    # bracket operator is odd and {b1,b2} has odd degree 1
    lhs = hadamard_compose(wd, 1, br)
    op = wedge_operator(ctx).compose(1, bracket_operator(ctx))
    from gerbrace.free_gerstenhaber import GerElement, ger_compose
    ger = ger_compose(GerElement.of(((1, 2),)), 1, GerElement.of(((1,), (2,))))
    expected = ConvElement.zero(ring)
    for m, c in ger.terms.items():
        expected = expected + ConvElement.of(op, m).scale(-c)
    assert lhs == expected


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_saturated_braces_agree_with_recursive_braces(seed):
    rng = random.Random(seed)
    ctx, ring, alpha, Q = _setup(1, seed=seed % 7)
    m = rng.choice([1, 2, 2, 3])
    Ys = [_homogeneous(random_invariant(ring, rng, rng.randint(1, 2 if m < 3 else 1))) for _ in range(m)]
    X = Q.component(m) if m > 1 else identity_element(ring)
    assert saturated_braces(X, Ys, 4) == braces(X.component(m), Ys, 4)


def test_lie_bracket_is_graded_antisymmetric():
    ctx, ring, alpha, _ = _setup(1)
    rng = random.Random(11)
    for _ in range(20):
        X = _homogeneous(random_invariant(ring, rng, rng.randint(1, 2)))
        Y = _homogeneous(random_invariant(ring, rng, rng.randint(1, 2)))
        p = (X.degrees().pop() * Y.degrees().pop()) % 2 if X and Y else 0
        assert lie_bracket(X, Y, 4) == lie_bracket(Y, X, 4).scale(-1 if p else 1).scale(-1)


def test_pre_lie_identity():
    ctx, ring, alpha, _ = _setup(1)
    rng = random.Random(2)
    for _ in range(10):
        X, Y, Z = (_homogeneous(random_invariant(ring, rng, rng.randint(1, 2))) for _ in range(3))
        py, pz = Y.degrees().pop() % 2, Z.degrees().pop() % 2

        def assoc(a, b, c):
            return pre_lie(pre_lie(a, b, 5), c, 5) - pre_lie(a, pre_lie(b, c, 5), 5)
        assert assoc(X, Y, Z) == assoc(X, Z, Y).scale(-1 if py * pz else 1)


def test_symmetrize_yields_invariants():
    ctx = AffineContext(1)
    ring = ctx.va_ring
    x = symmetrize(ConvElement.of(bracket_operator(ctx).permute([2, 1]), ((1, 2),)))
    assert x.is_invariant()
    assert not ConvElement.of(euler_derivation(ctx), ((1,),)).is_zero()


def _configurations():
    out = []
    for d in (1, 2):
        ctx, ring, alpha, Q = _setup(d)
        out.append((f"d{d}-alpha-Q", ring, ConvolutionAlgebra(alpha, Q, 3)))
    ctx = AffineContext(1)
    alpha = standard_structure(ctx)
    out.append(("d1-alpha-alpha", ctx.va_ring, ConvolutionAlgebra(alpha, alpha, 3)))
    return out


CONFIGS = _configurations()


@pytest.mark.parametrize("name,ring,L", CONFIGS, ids=[c[0] for c in CONFIGS])
@pytest.mark.parametrize("m", [1, 2, 3])
def test_homotopy_lie_relations(name, ring, L, m):
    rng = random.Random(100 + m)
    for _ in range(6):
        vs = [_homogeneous(random_invariant(ring, rng, rng.randint(1, 2 if m < 3 else 1))) for _ in range(m)]
        assert L.relation(vs).is_zero()


def test_relation_requires_homogeneous_input():
    name, ring, L = CONFIGS[0]
    rng = random.Random(0)
    mixed = ConvElement.zero(ring)
    while len(mixed.degrees()) < 2:
        mixed = mixed + random_invariant(ring, rng, rng.randint(1, 2))
    with pytest.raises(ArgumentError):
        L.relation([mixed, mixed])
    with pytest.raises(ArgumentError):
        L.bracket([mixed])


def test_bianchi_identity():
    for t in [None, (1,)]:
        ctx, ring, alpha, Q = _setup(1, t)
        L = ConvolutionAlgebra(alpha, Q, 4)
        rng = random.Random(1)
        for _ in range(3):
            gamma = random_invariant(ring, rng, 1, degree=0) + random_invariant(ring, rng, 2, degree=0)
            assert bianchi_defect(L, gamma).is_zero()


def test_filtration_structure():
    ctx, ring, alpha, Q = _setup(1)
    L = ConvolutionAlgebra(alpha, Q, 4)
    rng = random.Random(4)
    for _ in range(10):
        a, b = rng.randint(1, 2), rng.randint(1, 2)
        x, y = random_invariant(ring, rng, a), random_invariant(ring, rng, b)
        assert L.diff(x).in_filtration(a + 1)
        assert L.bracket([x, y]).in_filtration(a + b)
    x = random_invariant(ring, rng, 2)
    assert x.in_filtration(2) and not x.in_filtration(3)
    assert x.above(2) == x and x.above(3).is_zero() and x.truncate(1).is_zero()


def _alpha_xi_pairs():
    pairs = []
    for d in (1, 2):
        ctx, ring, alpha, Q = _setup(d)
        source = alpha + hamiltonian_twist(ctx, ctx.theta(1) * ctx.theta(2)) if d == 2 else alpha
        pairs.append((f"d{d}-zero", ConvolutionAlgebra(source, Q, 3), ConvElement.zero(ring)))
        pairs.append((f"d{d}-identity", ConvolutionAlgebra(alpha, alpha, 3), identity_element(ring)))
        beta = correct_structure(Q, 2, ctx)
        pairs.append((f"d{d}-corrected", ConvolutionAlgebra(alpha, Q, 3), beta))
    return pairs


PAIRS = _alpha_xi_pairs()


@pytest.mark.parametrize("name,L,alpha", PAIRS, ids=[p[0] for p in PAIRS])
@pytest.mark.parametrize("n", [1, 2])
def test_mc_adjust(name, L, alpha, n):
    assert L.mc_residual(alpha).is_zero()
    rng = random.Random(n)
    xi = random_invariant(L.ring, rng, n, degree=-1, terms=3, order_cap=2)
    res = mc_adjust(L, alpha, xi, n)
    assert one_cell_check(L, res.path).ok
    assert L.mc_residual(res.endpoint).is_zero()
    dxi = L.diff(xi)
    assert (res.endpoint - alpha - dxi).in_filtration(n + 1)
    if dxi.in_filtration(n + 1):
        assert all(v.in_filtration(n + 1) for k, v in res.path.main.items() if k > 0)
        rest = res.endpoint - alpha - dxi - L.bracket([alpha, xi])
        assert rest.in_filtration(n + 2)


def test_mc_adjust_argument_checks():
    name, L, alpha = PAIRS[1]
    rng = random.Random(0)
    xi = random_invariant(L.ring, rng, 2, degree=-1, terms=3, order_cap=2)
    assert not xi.is_zero()
    with pytest.raises(ArgumentError):
        mc_adjust(L, alpha, xi, 3)
    with pytest.raises(ArgumentError):
        mc_adjust(L, alpha, random_invariant(L.ring, rng, 2, degree=0), 2)


def test_one_cell_check_failures():
    name, L, alpha = PAIRS[1]
    ring = L.ring
    rng = random.Random(9)
    bad = alpha + random_invariant(ring, rng, 2, degree=0)
    assert not L.mc_residual(bad).is_zero()
    rep = one_cell_check(L, PolyPath.constant(bad))
    assert not rep.ok and rep.failures[0][0] == "maurer-cartan"
    # a constant path with a non-closed tangent fails the flow equation
    xi = random_invariant(ring, rng, 1, degree=-1, terms=3, order_cap=2)
    assert not L.diff(xi).is_zero()
    rep = one_cell_check(L, PolyPath.constant(alpha, xi))
    assert [e for e, _ in rep.failures] == ["flow"]
    assert rep.to_json()["ok"] is False


def test_composition_of_infinity_morphisms():
    ctx, ring, alpha, Q = _setup(1, seed=7)
    rng = random.Random(8)
    Q2 = exp_ad(random_invariant(ring, rng, 2, degree=0), Q, 4)
    first = correct_structure(Q, 3, ctx)
    second = correct_structure(Q2, 3, ctx, source=Q)
    both = compose_morphisms(second, first, 4)
    assert ConvolutionAlgebra(alpha, Q2, 4).mc_residual(both).is_zero()
    assert both.component(1) == identity_element(ring)


def test_json_roundtrip():
    ctx, ring, alpha, Q = _setup(1)
    assert ConvElement.from_json(ring, Q.to_json()) == Q
    x = alpha.scale(Fraction(-3, 4))
    assert ConvElement.from_json(ring, x.to_json()) == x
