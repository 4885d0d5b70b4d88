from fractions import Fraction
import random

from hypothesis import given, settings, strategies as st

from gerbrace.core_algebra import koszul_sign
from gerbrace.polydiff import PolyDiffOp, SuperRing, poly_add, poly_deriv, poly_mul, poly_parity_split

RING = SuperRing(("x", "y", "a", "b", "c"), (0, 1, 1, 0, 1), (0, 1, 1, 2, -1))


def rand_mono(rng, ring, maxdeg=2):
    e = [0] * ring.size
    for _ in range(rng.randint(0, maxdeg)):
        k = rng.randrange(ring.size)
        if ring.parities[k] and e[k]:
            continue
        e[k] += 1
    return tuple(e)


def rand_poly(rng, ring, terms=3, maxdeg=2):
    p = {}
    for _ in range(terms):
        p = poly_add(p, {rand_mono(rng, ring, maxdeg): Fraction(rng.randint(-3, 3))})
    return p


def rand_homog(rng, ring, terms=3, maxdeg=2):
    p = rand_poly(rng, ring, terms, maxdeg)
    parts = poly_parity_split(ring, p)
    return parts.get(rng.choice(sorted(parts)), {}) if parts else {}


def rand_op(rng, ring, arity, terms=2, homogeneous=True):
    out = {}
    par = rng.randint(0, 1)
    for _ in range(terms * 4):
        e = rand_mono(rng, ring, 2)
        Ds = tuple(rand_mono(rng, ring, 2) for _ in range(arity))
        tp = (ring.parity(e) + sum(ring.parity(D) for D in Ds)) % 2
        if homogeneous and tp != par:
            continue
        out[(e, Ds)] = Fraction(rng.randint(1, 3))
        if len(out) >= terms:
            break
    return PolyDiffOp(ring, arity, out)


def parity_of(ring, p):
    ps = {ring.parity(e) for e in p}
    assert len(ps) <= 1
    return ps.pop() if ps else 0


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_derivative_is_superderivation(seed):
    rng = random.Random(seed)
    k = rng.randrange(RING.size)
    f, g = rand_homog(rng, RING), rand_homog(rng, RING)
    D = RING.var(k)
    lhs = poly_deriv(RING, D, poly_mul(RING, f, g))
    sign = -1 if RING.parities[k] and parity_of(RING, f) else 1
    rhs = poly_add(poly_mul(RING, poly_deriv(RING, D, f), g),
                   poly_mul(RING, f, poly_deriv(RING, D, g)), sign)
    assert lhs == rhs


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_multiplication_associative(seed):
    rng = random.Random(seed)
    f, g, h = (rand_poly(rng, RING) for _ in range(3))
    assert poly_mul(RING, poly_mul(RING, f, g), h) == poly_mul(RING, f, poly_mul(RING, g, h))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_coproduct_is_leibniz(seed):
    rng = random.Random(seed)
    D = rand_mono(rng, RING, 3)
    fs = [rand_homog(rng, RING) for _ in range(3)]
    mult = PolyDiffOp.multiplication(RING, 3)
    lhs = poly_deriv(RING, D, mult.apply(fs))
    diff = PolyDiffOp(RING, 1, {(RING.one(), (D,)): 1})
    assert lhs == diff.compose(1, mult).apply(fs)


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_compose_matches_evaluation(seed):
    rng = random.Random(seed)
    n, k = rng.randint(1, 3), rng.randint(0, 2)
    i = rng.randint(1, n)
    op, op2 = rand_op(rng, RING, n), rand_op(rng, RING, k)
    vs = [rand_homog(rng, RING) for _ in range(n + k - 1)]
    inner = op2.apply(vs[i - 1:i - 1 + k])
    outer_in = vs[:i - 1] + [inner] + vs[i - 1 + k:]
    expected = op.apply(outer_in)
    pre = sum(parity_of(RING, v) for v in vs[:i - 1])
    p2 = op2.term_parity(next(iter(op2.terms))) if op2.terms else 0
    if pre % 2 and p2:
        expected = {m: -c for m, c in expected.items()}
    assert op.compose(i, op2).apply(vs) == expected


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_permute_matches_evaluation(seed):
    rng = random.Random(seed)
    n = rng.randint(1, 4)
    op = rand_op(rng, RING, n, homogeneous=False)
    sigma = list(range(1, n + 1))
    rng.shuffle(sigma)
    vs = [rand_homog(rng, RING) for _ in range(n)]
    eps = koszul_sign(sigma, [parity_of(RING, v) for v in vs])
    expected = op.apply([vs[s - 1] for s in sigma])
    got = op.permute(sigma).apply(vs)
    assert got == {m: eps * c for m, c in expected.items()}


def test_symmetrize_is_invariant():
    rng = random.Random(3)
    for _ in range(20):
        op = rand_op(rng, RING, 3, homogeneous=False).symmetrize()
        assert op.is_invariant()
