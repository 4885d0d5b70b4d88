from fractions import Fraction
from itertools import permutations
from math import comb
import random

import pytest
from hypothesis import given, settings, strategies as st

from gerbrace.core_algebra import (
    ArgumentError,
    ExactMatrix,
    koszul_sign,
    nullspace,
    perm_product,
    permute_degrees,
    rank,
    shuffles,
    solve_exact,
)


def test_koszul_examples():
    assert koszul_sign((2, 1), (1, 1)) == -1
    assert koszul_sign((1, 2, 3), (3, 7, 2)) == 1
    assert koszul_sign((2, 1), (0, 5)) == 1


def test_koszul_length_mismatch():
    with pytest.raises(ArgumentError):
        koszul_sign((1, 2), (1,))


@st.composite
def perm_pair(draw):
    m = draw(st.integers(1, 5))
    sigma = draw(st.permutations(range(1, m + 1)))
    tau = draw(st.permutations(range(1, m + 1)))
    degs = draw(st.lists(st.integers(-3, 4), min_size=m, max_size=m))
    return tuple(sigma), tuple(tau), tuple(degs)


@given(perm_pair())
def test_koszul_cocycle(data):
    sigma, tau, degs = data
    lhs = koszul_sign(perm_product(sigma, tau), degs)
    rhs = koszul_sign(sigma, permute_degrees(degs, tau)) * koszul_sign(tau, degs)
    assert lhs == rhs


def test_shuffle_examples():
    assert shuffles(1, 1) == [(1, 2), (2, 1)]
    assert len(shuffles(2, 1)) == 3
    assert shuffles(0, 2) == [(1, 2)]


def _brute_shuffles(p, q):
    out = []
    for perm in permutations(range(1, p + q + 1)):
        if list(perm[:p]) == sorted(perm[:p]) and list(perm[p:]) == sorted(perm[p:]):
            out.append(perm)
    return sorted(out)


@pytest.mark.parametrize("p,q", [(p, q) for p in range(0, 5) for q in range(0, 8 - p)])
def test_shuffle_counts(p, q):
    sh = shuffles(p, q)
    assert len(sh) == comb(p + q, p)
    assert sh == _brute_shuffles(p, q)


def test_solve_examples():
    res = solve_exact(ExactMatrix.identity(2), [1, 2])
    assert res.solution == [1, 2]
    res = solve_exact(ExactMatrix.zero(1, 1), [1])
    assert res.solution is None and res.certificate == [1]


def test_solve_dimension_mismatch():
    with pytest.raises(ArgumentError):
        solve_exact(ExactMatrix.identity(2), [1])


def _random_matrix(rng, r, c, density=0.6):
    rows = [[Fraction(rng.randint(-3, 3), rng.randint(1, 3)) if rng.random() < density else 0
             for _ in range(c)] for _ in range(r)]
    return ExactMatrix.from_rows(rows)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_solve_consistent_random(seed):
    rng = random.Random(seed)
    A = _random_matrix(rng, 5, 7)
    x0 = [Fraction(rng.randint(-4, 4), rng.randint(1, 4)) for _ in range(7)]
    b = A.matvec(x0)
    res = solve_exact(A, b)
    assert res.ok and A.matvec(res.solution) == b


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_solve_certificate_random(seed):
    rng = random.Random(seed)
    r, c = rng.randint(2, 7), rng.randint(1, 5)
    A = _random_matrix(rng, r, c, 0.5)
    b = [Fraction(rng.randint(-3, 3)) for _ in range(r)]
    res = solve_exact(A, b)
    if res.ok:
        assert A.matvec(res.solution) == b
    else:
        y = res.certificate
        assert all(v == 0 for v in A.vecmat(y))
        assert sum(a * bb for a, bb in zip(y, b)) != 0


def test_nullspace_examples():
    assert nullspace(ExactMatrix.identity(3)) == []
    assert len(nullspace(ExactMatrix.zero(2, 3))) == 3
    (v,) = nullspace(ExactMatrix.from_rows([[1, 1]]))
    assert v[0] == -v[1] != 0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_nullspace_random(seed):
    rng = random.Random(seed)
    r, c = rng.randint(1, 6), rng.randint(1, 8)
    A = _random_matrix(rng, r, c, 0.5)
    basis = nullspace(A)
    assert len(basis) == c - rank(A)
    for v in basis:
        assert all(x == 0 for x in A.matvec(v))
    if basis:
        assert rank(ExactMatrix.from_rows(basis)) == len(basis)
    assert nullspace(A) == basis
