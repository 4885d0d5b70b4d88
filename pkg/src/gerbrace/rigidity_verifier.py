"""Rigidity of the standard Gerstenhaber structure on V_A.

The complex is the invariant part of End_{V_A} ⊗ Λ⁻²Ger with differential
∂ = [α, ·].  Three tools live here:

* the de Rham algebra Ω = V_A[x̌, θ̌] with D = Σ x̌_i ∂/∂θ_i + θ̌^i ∂/∂x^i and
  the comparison map vh(P) = P^End ⊗ b_1…b_n,
* a truncated model of each arity slice, in which cocycles are computed by
  exact nullspace and primitives by exact solving,
* the level-by-level correction of a Ger∞-structure Q with Q_2 = α to an
  ∞-morphism from (V_A, α).

Model slices.  ∂ preserves the total degree shifted by one and, for every
variable i, the weight (#x^i − #∂_{x^i}) − (#θ_i − #∂_{θ_i}) counted over the
coefficient and all derivative slots.  A block is one value of (degree,
weights).  A slice of arity n with caps (c, o) is spanned by symmetrised
terms whose coefficient has x-degree ≤ c and whose slots have order ≤ o.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import factorial
from typing import Iterable, Mapping, Sequence

from .convolution_linfty import (
    ConvElement,
    ConvolutionAlgebra,
    identity_element,
    lie_bracket,
    standard_structure,
    sum_elements,
    symmetrize,
    term_candidates,
)
from .core_algebra import (
    ArgumentError,
    IndependenceFilter,
    InvariantViolation,
    SparseSystem,
    as_scalar,
    nullspace,
    scalar_str,
    solve_exact,
)
from .free_gerstenhaber import monomial_arity, monomial_to_json
from .polydiff import SuperRing, poly_add, poly_deriv, poly_mul
from .polyvector_hochschild import AffineContext


def alpha_element(ctx: AffineContext) -> ConvElement:
    """μ_∧ ⊗ {b1,b2} + μ_, ⊗ b1b2."""
    return _alpha(ctx)


@lru_cache(maxsize=None)
def _alpha(ctx: AffineContext) -> ConvElement:
    return standard_structure(ctx)


def conv_end_diff(X: ConvElement, ctx: AffineContext) -> ConvElement:
    """∂X = [α, X]; every arity-n component is sent to arity n + 1."""
    if X.is_zero():
        return X
    out = lie_bracket(_alpha(ctx), X, max(X.arities()) + 1)
    if not out.is_zero() and not out.arities() <= {n + 1 for n in X.arities()}:
        raise InvariantViolation("the differential did not raise arity by exactly one")
    return out


def product_monomial(n: int):
    return tuple((j,) for j in range(1, n + 1))


# ---------------------------------------------------------------------------
# de Rham algebra


@dataclass(frozen=True)
class DeRhamSpace:
    """Ω = V_A[x̌_1..x̌_d, θ̌^1..θ̌^d] with |x̌_i| = 2 − t_i and |θ̌^i| = t_i + 1."""

    ctx: AffineContext

    @property
    def d(self) -> int:
        return self.ctx.d

    @property
    def ring(self) -> SuperRing:
        return _de_rham_ring(self.ctx)

    def var(self, kind: str, i: int) -> "DeRhamElement":
        offset = {"x": 0, "th": 1, "xc": 2, "thc": 3}[kind]
        return DeRhamElement(self, {self.ring.var(offset * self.d + i - 1): 1})

    def one(self) -> "DeRhamElement":
        return DeRhamElement(self, {self.ring.one(): 1})

    def monomials(self, max_total: int, min_check: int = 1) -> list["DeRhamElement"]:
        """All monomials of total polynomial degree ≤ max_total and check-degree ≥ min_check."""
        ring = self.ring
        exps = [()]
        for k in range(ring.size):
            top = 1 if ring.parities[k] else max_total
            exps = [e + (a,) for e in exps for a in range(top + 1) if sum(e) + a <= max_total]
        out = []
        for e in sorted(exps, key=lambda e: (sum(e), e)):
            if sum(e[2 * self.d:]) >= min_check:
                out.append(DeRhamElement(self, {e: 1}))
        return out


@lru_cache(maxsize=None)
def _de_rham_ring(ctx: AffineContext) -> SuperRing:
    d, t = ctx.d, ctx.t
    names = (tuple(f"x{i}" for i in range(1, d + 1)) + tuple(f"th{i}" for i in range(1, d + 1))
             + tuple(f"xc{i}" for i in range(1, d + 1)) + tuple(f"thc{i}" for i in range(1, d + 1)))
    degs = tuple(t) + tuple(1 - ti for ti in t) + tuple(2 - ti for ti in t) + tuple(ti + 1 for ti in t)
    return SuperRing(names, tuple(g % 2 for g in degs), degs)


class DeRhamElement:
    __slots__ = ("space", "terms")

    def __init__(self, space: DeRhamSpace, terms: Mapping | None = None):
        self.space = space
        self.terms = {e: as_scalar(v) for e, v in (terms or {}).items() if v}

    def _check(self, other: "DeRhamElement"):
        if self.space != other.space:
            raise ArgumentError("de Rham elements over different contexts")

    def __add__(self, other):
        self._check(other)
        return DeRhamElement(self.space, poly_add(self.terms, other.terms))

    def __sub__(self, other):
        self._check(other)
        return DeRhamElement(self.space, poly_add(self.terms, other.terms, -1))

    def __mul__(self, other):
        if isinstance(other, DeRhamElement):
            self._check(other)
            return DeRhamElement(self.space, poly_mul(self.space.ring, self.terms, other.terms))
        return self.scale(other)

    def scale(self, c) -> "DeRhamElement":
        c = as_scalar(c)
        return DeRhamElement(self.space, {e: c * v for e, v in self.terms.items()})

    def __eq__(self, other) -> bool:
        return isinstance(other, DeRhamElement) and self.space == other.space and self.terms == other.terms

    def __hash__(self):
        return hash((self.space, frozenset(self.terms.items())))

    def is_zero(self) -> bool:
        return not self.terms

    def check_degree(self, e) -> int:
        return sum(e[2 * self.space.d:])

    def check_degrees(self) -> set[int]:
        return {self.check_degree(e) for e in self.terms}

    def degrees(self) -> set[int]:
        return {self.space.ring.degree(e) for e in self.terms}

    def parts_by(self, fn) -> dict:
        out: dict = {}
        for e, v in self.terms.items():
            out.setdefault(fn(e), {})[e] = v
        return {k: DeRhamElement(self.space, t) for k, t in out.items()}

    def format(self) -> str:
        if not self.terms:
            return "0"
        ring = self.space.ring
        return " + ".join(f"{scalar_str(v)}*{ring.format_mono(e)}" for e, v in sorted(self.terms.items()))

    def __repr__(self):
        return f"DeRhamElement({self.format()})"

    def to_json(self) -> dict:
        return {"variables": list(self.space.ring.names),
                "terms": [{"mono": list(e), "coef": str(v)} for e, v in sorted(self.terms.items())]}


def _vector_field(P: DeRhamElement, pairs: Iterable[tuple[int, int]]) -> DeRhamElement:
    """Σ z_a ∂/∂z_b over the given (a, b) index pairs, as a left derivation."""
    ring = P.space.ring
    acc: dict = {}
    for a, b in pairs:
        der = poly_deriv(ring, ring.var(b), P.terms)
        if der:
            acc = poly_add(acc, poly_mul(ring, {ring.var(a): 1}, der))
    return DeRhamElement(P.space, acc)


def de_rham_diff(P: DeRhamElement) -> DeRhamElement:
    """D = Σ x̌_i ∂/∂θ_i + Σ θ̌^i ∂/∂x^i."""
    d = P.space.d
    return _vector_field(P, [(2 * d + i, d + i) for i in range(d)] + [(3 * d + i, i) for i in range(d)])


def de_rham_homotopy(P: DeRhamElement, part: str = "check") -> DeRhamElement:
    """One of two contracting homotopies for D.

    part="check": h = Σ θ_i ∂/∂x̌_i, with Dh + hD = #x̌ + #θ on monomials.
    part="base":  h = Σ x^i ∂/∂θ̌^i, with Dh + hD = #θ̌ + #x.
    """
    d = P.space.d
    if part == "check":
        return _vector_field(P, [(d + i, 2 * d + i) for i in range(d)])
    if part == "base":
        return _vector_field(P, [(i, 3 * d + i) for i in range(d)])
    raise ArgumentError(f"unknown homotopy {part!r}")


def _weight(space: DeRhamSpace, e, part: str) -> int:
    d = space.d
    if part == "check":
        return sum(e[2 * d:3 * d]) + sum(e[d:2 * d])
    return sum(e[3 * d:]) + sum(e[:d])


def exact_primitive(P: DeRhamElement) -> DeRhamElement:
    """A primitive of a D-cocycle of positive check-degree.

    D preserves both counts #x̌ + #θ and #θ̌ + #x.  Parts where the first is
    positive are integrated with the first homotopy; the rest have θ̌-degree
    ≥ 1 and are integrated with the second.
    """
    acc = DeRhamElement(P.space)
    for N, part in P.parts_by(lambda e: _weight(P.space, e, "check")).items():
        if N:
            acc = acc + de_rham_homotopy(part, "check").scale(Fraction(1, N))
            continue
        for M, sub in part.parts_by(lambda e: _weight(P.space, e, "base")).items():
            if M == 0:
                raise ArgumentError("constants are not exact")
            acc = acc + de_rham_homotopy(sub, "base").scale(Fraction(1, M))
    return acc


# ---------------------------------------------------------------------------
# the comparison map


def _split(space: DeRhamSpace, e) -> tuple[tuple[int, ...], tuple[tuple[int, ...], ...]]:
    """Coefficient exponent on V_A and the derivative slots read off the check part."""
    d = space.d
    coef = tuple(e[:2 * d])
    slots = []
    for k in range(2 * d):
        slots.extend([k] * e[2 * d + k])
    size = 2 * d
    return coef, tuple(tuple(1 if j == k else 0 for j in range(size)) for k in slots)


def _vh_sign(space: DeRhamSpace, e) -> int:
    # (−1)^{t_i} for each check variable of index i; trivial for an ungraded A
    d, t = space.d, space.ctx.t
    k = sum(t[i] * (e[2 * d + i] + e[3 * d + i]) for i in range(d))
    return -1 if k % 2 else 1


def p_end(P: DeRhamElement):
    """The operator P^End: Σ over permutations of slot assignments with Koszul signs."""
    from .polydiff import PolyDiffOp

    ks = P.check_degrees()
    if len(ks) > 1:
        raise ArgumentError("p_end needs a homogeneous check-degree")
    ring = P.space.ctx.va_ring
    n = ks.pop() if ks else 0
    terms: dict = {}
    for e, v in P.terms.items():
        coef, slots = _split(P.space, e)
        key = (coef, slots)
        terms[key] = terms.get(key, 0) + v
    return PolyDiffOp(ring, n, terms).symmetrize()


def vh(P: DeRhamElement) -> ConvElement:
    """vh(P) = P^End ⊗ b_1 b_2 … b_n, summed over check-degrees n ≥ 1."""
    ring = P.space.ctx.va_ring
    acc: dict = {}
    for e, v in P.terms.items():
        n = P.check_degree(e)
        if n == 0:
            raise ArgumentError("vh is defined on elements of positive check-degree")
        coef, slots = _split(P.space, e)
        key = (product_monomial(n), coef, slots)
        acc[key] = acc.get(key, 0) + _vh_sign(P.space, e) * v
    return symmetrize(ConvElement(ring, acc))


def vh_preimage(X: ConvElement, ctx: AffineContext) -> DeRhamElement | None:
    """The unique P with vh(P) = X, or None when X is not in the image."""
    space = DeRhamSpace(ctx)
    d = ctx.d
    out: dict = {}
    for (M, e, Ds), v in X.terms.items():
        if M != product_monomial(monomial_arity(M)):
            return None
        idx = []
        for D in Ds:
            if sum(D) != 1:
                return None
            idx.append(D.index(1))
        if idx != sorted(idx):
            continue
        check = [0] * (2 * d)
        for k in idx:
            check[k] += 1
        mult = 1
        for c in check:
            mult *= factorial(c)
        full = tuple(e) + tuple(check)
        out[full] = out.get(full, 0) + Fraction(v, mult) * _vh_sign(space, full)
    P = DeRhamElement(space, out)
    return P if vh(P) == X else None


@dataclass
class IntertwineReport:
    ok: bool
    lhs: ConvElement
    rhs: ConvElement


def check_intertwine(P: DeRhamElement) -> IntertwineReport:
    """Compare ∂(vh P) with vh(D P)."""
    ctx = P.space.ctx
    lhs = conv_end_diff(vh(P), ctx) if not P.is_zero() else ConvElement.zero(ctx.va_ring)
    DP = de_rham_diff(P)
    rhs = vh(DP) if not DP.is_zero() else ConvElement.zero(ctx.va_ring)
    return IntertwineReport(lhs == rhs, lhs, rhs)


# ---------------------------------------------------------------------------
# graded slices


def block_of(ring: SuperRing, key) -> tuple:
    """(degree, per-variable weights) of a term; ∂ shifts the degree by one and keeps the weights."""
    M, e, Ds = key
    d = ring.size // 2
    w = [e[k] - sum(D[k] for D in Ds) for k in range(2 * d)]
    return (ConvElement(ring).term_degree(key),) + tuple(w[i] - w[d + i] for i in range(d))


def shift_block(block: tuple, by: int) -> tuple:
    return (block[0] + by,) + tuple(block[1:])


def split_blocks(X: ConvElement) -> dict[tuple, ConvElement]:
    raw: dict = {}
    for k, v in X.terms.items():
        raw.setdefault(block_of(X.ring, k), {})[k] = v
    return {b: ConvElement(X.ring, t) for b, t in raw.items()}


def slice_basis(ctx: AffineContext, n: int, coef_cap: int, order_cap: int,
                blocks: set | None = None) -> dict[tuple, list[ConvElement]]:
    """Independent invariant elements of arity n spanning the capped slice, grouped by block."""
    ring = ctx.va_ring
    filters: dict = {}
    out: dict = {}
    for key in term_candidates(ring, n, coef_cap, order_cap):
        b = block_of(ring, key)
        if blocks is not None and b not in blocks:
            continue
        X = symmetrize(ConvElement(ring, {key: 1}))
        if X.is_zero():
            continue
        if filters.setdefault(b, IndependenceFilter()).add(X.terms):
            out.setdefault(b, []).append(X)
    return out


def _combine(ring: SuperRing, elems: Sequence[ConvElement], coeffs: Sequence) -> ConvElement:
    return sum_elements(ring, (X.scale(c) for X, c in zip(elems, coeffs) if c))


def cocycle_basis(ctx: AffineContext, n: int, coef_cap: int = 2, order_cap: int = 1) -> list[tuple[tuple, ConvElement]]:
    """A basis of the cocycles in the capped slice of arity n, block by block."""
    out = []
    for b, elems in sorted(slice_basis(ctx, n, coef_cap, order_cap).items()):
        system = SparseSystem()
        for j, X in enumerate(elems):
            system.add_column(j, conv_end_diff(X, ctx).terms)
        if not system.row_index:
            out.extend((b, X) for X in elems)
            continue
        for vec in nullspace(system.matrix()):
            out.append((b, _combine(ctx.va_ring, elems, vec)))
    return out


# ---------------------------------------------------------------------------
# solving ∂Y = X


@dataclass
class RigidityResult:
    """Outcome of rigidity_solve; exactly one of primitive and certificate is set."""

    cocycle: ConvElement
    primitive: ConvElement | None
    method: str
    certificate: dict | None = None

    @property
    def ok(self) -> bool:
        return self.primitive is not None

    def to_json(self) -> dict:
        out = {"cocycle": self.cocycle.to_json(), "method": self.method, "ok": self.ok}
        if self.primitive is not None:
            out["primitive"] = self.primitive.to_json()
        if self.certificate is not None:
            out["certificate"] = self.certificate
        return out


def _caps_of(X: ConvElement) -> tuple[int, int]:
    d = X.ring.size // 2
    coef = max((sum(e[:d]) for _, e, _ in X.terms), default=0)
    order = max((sum(D) for _, _, Ds in X.terms for D in Ds), default=0)
    return coef, order


@lru_cache(maxsize=256)
def _primitive_block(ctx: AffineContext, n: int, coef_cap: int, order_cap: int, block: tuple):
    # candidate primitives of one block and the matrix of their differentials
    elems = slice_basis(ctx, n, coef_cap, order_cap, {block}).get(block, [])
    return elems, [conv_end_diff(Y, ctx).terms for Y in elems]


def rigidity_solve(X: ConvElement, ctx: AffineContext, *, coef_cap: int | None = None,
                   order_cap: int | None = None, use_vh: bool = True) -> RigidityResult:
    """Find Y of arity n − 1 with [α, Y] = X for a cocycle X of arity n ≥ 2.

    X is first pulled back through vh and integrated with the de Rham
    homotopy.  Otherwise ∂Y = X is solved exactly, block by block, over the
    slice of arity n − 1 whose caps exceed those of X by one (or the given
    caps).  If a block is inconsistent the result carries the left-kernel
    witness instead of a primitive.
    """
    ring = ctx.va_ring
    if X.is_zero():
        return RigidityResult(X, X, "zero")
    ars = X.arities()
    if len(ars) != 1 or min(ars) < 2:
        raise ArgumentError("rigidity_solve expects a single arity n ≥ 2")
    dX = conv_end_diff(X, ctx)
    if not dX.is_zero():
        raise ArgumentError(f"not a cocycle: ∂X has {len(dX.terms)} nonzero terms")
    n = ars.pop()
    if use_vh:
        P = vh_preimage(X, ctx)
        if P is not None:
            Y = vh(exact_primitive(P))
            if conv_end_diff(Y, ctx) == X:
                return RigidityResult(X, Y, "de-rham-homotopy")
    c0, o0 = _caps_of(X)
    cc = c0 + 1 if coef_cap is None else coef_cap
    oc = o0 + 1 if order_cap is None else order_cap
    acc = ConvElement.zero(ring)
    for b, Xb in sorted(split_blocks(X).items()):
        elems, columns = _primitive_block(ctx, n - 1, cc, oc, shift_block(b, -1))
        system = SparseSystem()
        for j, col in enumerate(columns):
            system.add_column(j, col)
        rhs = system.rhs(Xb.terms)
        A = system.matrix()
        res = solve_exact(A, rhs)
        if not res.ok:
            rows = {v: k for k, v in system.row_index.items()}
            witness = [{"ger": monomial_to_json(rows[i][0]), "mono": list(rows[i][1]),
                        "derivs": [list(D) for D in rows[i][2]], "value": str(y)}
                       for i, y in enumerate(res.certificate) if y]
            cert = {"block": list(b), "caps": [cc, oc], "columns": A.cols, "left_kernel": witness}
            return RigidityResult(X, None, "exact-solve", cert)
        acc = acc + _combine(ring, elems, res.solution)
    if conv_end_diff(acc, ctx) != X:
        raise InvariantViolation("solver returned a non-primitive")
    return RigidityResult(X, acc, "exact-solve")


@dataclass
class RigidityReport:
    d: int
    arity: int
    caps: tuple[int, int]
    results: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def failures(self) -> list:
        return [r for r in self.results if not r.ok]

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {"d": self.d, "arity": self.arity, "coef_cap": self.caps[0], "order_cap": self.caps[1],
                "cocycles": len(self.results), "failures": len(self.failures),
                "seconds": round(self.seconds, 3), "entries": [r.to_json() for r in self.results]}


def verify_rigidity(ctx: AffineContext, n: int, coef_cap: int = 2, order_cap: int = 1) -> RigidityReport:
    """Every basis cocycle of the capped arity-n slice, paired with a primitive or a certificate."""
    if n < 2:
        raise ArgumentError("rigidity concerns arities n ≥ 2")
    start = time.perf_counter()
    report = RigidityReport(ctx.d, n, (coef_cap, order_cap))
    for _, X in cocycle_basis(ctx, n, coef_cap, order_cap):
        report.results.append(rigidity_solve(X, ctx))
    report.seconds = time.perf_counter() - start
    return report


# ---------------------------------------------------------------------------
# correcting a Ger∞-structure


def correct_structure(Q: ConvElement, N: int, ctx: AffineContext,
                      source: ConvElement | None = None) -> ConvElement:
    """β = id + β_2 + … + β_N, a Maurer–Cartan element of Hom(Ger∨(V_A, source), (V_A, Q)).

    source defaults to α.  At step n the obstruction γ is the arity-(n+1)
    part of the Maurer–Cartan residual of β_1 + … + β_{n−1}; it is a
    ∂-cocycle and β_n solves [α, β_n] = −γ.
    """
    alpha = _alpha(ctx)
    source = alpha if source is None else source
    for S, name in ((Q, "target"), (source, "source")):
        if S.component(2) != alpha:
            raise ArgumentError(f"the {name} structure must have α as its binary part")
        if S.component(1):
            raise ArgumentError(f"the {name} structure must have no unary part")
    if N < 1:
        raise ArgumentError("N must be positive")
    L = ConvolutionAlgebra(source, Q, N + 1)
    beta = identity_element(ctx.va_ring)
    for n in range(2, N + 1):
        gamma = L.mc_residual(beta).component(n + 1)
        if gamma.is_zero():
            continue
        if not conv_end_diff(gamma, ctx).is_zero():
            raise InvariantViolation(f"obstruction at arity {n + 1} is not a cocycle")
        res = rigidity_solve(gamma.scale(-1), ctx)
        if not res.ok:
            raise InvariantViolation(f"no primitive for the obstruction at arity {n + 1}: {res.certificate}")
        beta = beta + res.primitive
    return beta
