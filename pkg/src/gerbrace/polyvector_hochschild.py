"""Polyvector fields on graded affine space and polydifferential Hochschild cochains.

V_A is the free graded-commutative algebra on x^1..x^d (degrees t_i) and
θ_1..θ_d (degrees 1 − t_i).  Hochschild cochains are polydifferential
operators on A = K[x^1..x^d]; those require even t_i so that A is an
ordinary commutative algebra with even elements.

Shifted conventions on the cochain side: an operator of arity k whose
coefficient has internal degree m has total degree k + m and shifted
degree k + m − 1.  Braces and the bracket below are written in the shifted
degree, where they carry no décalage signs.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import combinations, permutations
from typing import Mapping, Sequence

from .core_algebra import ArgumentError, as_scalar, koszul_sign, reorder_sign
from .polydiff import (
    PolyDiffOp,
    SuperRing,
    poly_add,
    poly_deriv,
    poly_mul,
    poly_parity_split,
    poly_scale,
    right_deriv,
)


@dataclass(frozen=True)
class AffineContext:
    d: int
    t: tuple[int, ...] = ()
    degcap: int = 3
    arity_cap: int = 4
    order_cap: int = 2

    def __post_init__(self):
        if self.d < 1:
            raise ArgumentError("need at least one variable")
        t = tuple(self.t) if self.t else (0,) * self.d
        if len(t) != self.d:
            raise ArgumentError(f"expected {self.d} generator degrees, got {len(t)}")
        object.__setattr__(self, "t", t)
        if self.degcap < 1:
            raise ArgumentError("degcap must be positive")

    @cached_property
    def va_ring(self) -> SuperRing:
        names = tuple(f"x{i}" for i in range(1, self.d + 1)) + tuple(f"th{i}" for i in range(1, self.d + 1))
        par = tuple(ti % 2 for ti in self.t) + tuple((1 - ti) % 2 for ti in self.t)
        deg = tuple(self.t) + tuple(1 - ti for ti in self.t)
        return SuperRing(names, par, deg)

    @cached_property
    def a_ring(self) -> SuperRing:
        if any(ti % 2 for ti in self.t):
            raise ArgumentError("Hochschild cochains are modelled only for even generator degrees")
        return SuperRing(tuple(f"x{i}" for i in range(1, self.d + 1)), (0,) * self.d, tuple(self.t))

    def x_index(self, i: int) -> int:
        return i - 1

    def th_index(self, i: int) -> int:
        return self.d + i - 1

    def x(self, i: int) -> "Polyvector":
        return Polyvector(self, {self.va_ring.var(self.x_index(i)): 1})

    def theta(self, i: int) -> "Polyvector":
        return Polyvector(self, {self.va_ring.var(self.th_index(i)): 1})

    def const(self, c=1) -> "Polyvector":
        return Polyvector(self, {self.va_ring.one(): c})

    def polyvector(self, x_exps: Sequence[int], thetas: Sequence[int] = (), coef=1) -> "Polyvector":
        e = list(x_exps) + [0] * self.d
        for j in thetas:
            e[self.th_index(j)] += 1
        return Polyvector(self, {tuple(e): coef})

    def x_degree(self, e) -> int:
        return sum(e[: self.d])

    def theta_length(self, e) -> int:
        return sum(e[self.d:])


class Polyvector:
    """Element of V_A stored as {exponent tuple over (x, θ): coefficient}."""

    __slots__ = ("ctx", "terms")

    def __init__(self, ctx: AffineContext, terms: Mapping | None = None):
        self.ctx = ctx
        ring = ctx.va_ring
        clean = {}
        for e, v in (terms or {}).items():
            e = tuple(e)
            if len(e) != ring.size:
                raise ArgumentError("exponent vector of wrong length")
            for k in ring.odd_indices():
                if e[k] > 1:
                    raise ArgumentError("odd generator repeated in a monomial")
            v = as_scalar(v)
            if v:
                clean[e] = v
        self.terms = clean

    def _check(self, other):
        if not isinstance(other, Polyvector) or other.ctx != self.ctx:
            raise ArgumentError("polyvectors from different contexts")

    def __add__(self, other):
        self._check(other)
        return Polyvector(self.ctx, poly_add(self.terms, other.terms))

    def __sub__(self, other):
        self._check(other)
        return Polyvector(self.ctx, poly_add(self.terms, other.terms, -1))

    def __neg__(self):
        return Polyvector(self.ctx, poly_scale(self.terms, -1))

    def __mul__(self, other):
        if isinstance(other, Polyvector):
            return wedge(self, other)
        return Polyvector(self.ctx, poly_scale(self.terms, as_scalar(other)))

    def __rmul__(self, c):
        return Polyvector(self.ctx, poly_scale(self.terms, as_scalar(c)))

    def __eq__(self, other):
        if not isinstance(other, Polyvector):
            return NotImplemented
        return self.ctx == other.ctx and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __bool__(self):
        return bool(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def degrees(self) -> set[int]:
        return {self.ctx.va_ring.degree(e) for e in self.terms}

    def parity(self) -> int:
        ps = {self.ctx.va_ring.parity(e) for e in self.terms}
        if len(ps) > 1:
            raise ArgumentError("polyvector has mixed parity")
        return ps.pop() if ps else 0

    def homogeneous_parts(self) -> dict[int, "Polyvector"]:
        return {p: Polyvector(self.ctx, part) for p, part in poly_parity_split(self.ctx.va_ring, self.terms).items()}

    def truncate(self, degcap: int | None = None) -> "Polyvector":
        cap = self.ctx.degcap if degcap is None else degcap
        return Polyvector(self.ctx, {e: v for e, v in self.terms.items() if self.ctx.x_degree(e) <= cap})

    def format(self) -> str:
        if not self.terms:
            return "0"
        ring = self.ctx.va_ring
        return " + ".join(f"{v}*{ring.format_mono(e)}" for e, v in sorted(self.terms.items()))

    __repr__ = format

    def to_json(self) -> list:
        d = self.ctx.d
        return [{"coef": str(v), "x": list(e[:d]), "theta": [j + 1 for j in range(d) if e[d + j]]}
                if all(x <= 1 for x in e[d:]) else
                {"coef": str(v), "x": list(e[:d]), "theta_exp": list(e[d:])}
                for e, v in sorted(self.terms.items())]

    @classmethod
    def from_json(cls, ctx: AffineContext, data) -> "Polyvector":
        acc: dict = {}
        for item in data:
            e = list(item["x"]) + [0] * ctx.d
            if "theta_exp" in item:
                e[ctx.d:] = item["theta_exp"]
            else:
                for j in item.get("theta", []):
                    e[ctx.th_index(j)] += 1
            acc = poly_add(acc, {tuple(e): Fraction(item["coef"])})
        return cls(ctx, acc)


def wedge(u: Polyvector, v: Polyvector, truncate: bool = False) -> Polyvector:
    """Graded-commutative product.  Truncation at degcap is opt-in, since the
    truncation ideal is not closed under the bracket."""
    u._check(v)
    out = Polyvector(u.ctx, poly_mul(u.ctx.va_ring, u.terms, v.terms))
    return out.truncate() if truncate else out


def schouten(u: Polyvector, v: Polyvector) -> Polyvector:
    """Odd Poisson bracket of degree −1 with {θ_i, x^j} = δ_ij.

    {u, v} = Σ_i (u ∂⃖/∂θ_i)(∂v/∂x^i) − (u ∂⃖/∂x^i)(∂v/∂θ_i)
    """
    u._check(v)
    return Polyvector(u.ctx, schouten_terms(u.ctx.va_ring, u.ctx.d, u.terms, v.terms))


def schouten_terms(ring: SuperRing, d: int, u: Mapping, v: Mapping) -> dict:
    """The same bracket on raw polynomials over a ring whose first 2d variables
    are x^1..x^d, θ_1..θ_d; any further variables behave as constants."""
    out: dict = {}
    for i in range(d):
        xi, ti = i, d + i
        a = poly_mul(ring, right_deriv(ring, ti, u), poly_deriv(ring, ring.var(xi), v))
        b = poly_mul(ring, right_deriv(ring, xi, u), poly_deriv(ring, ring.var(ti), v))
        out = poly_add(poly_add(out, a), b, -1)
    return out


def monomial_basis(ctx: AffineContext, max_xdeg: int | None = None, max_theta: int | None = None) -> list[Polyvector]:
    """Monomials of V_A with x-degree ≤ max_xdeg and θ-length ≤ max_theta."""
    ring = ctx.va_ring
    cap = ctx.degcap if max_xdeg is None else max_xdeg
    tcap = ctx.d if max_theta is None else max_theta
    out = []
    for e in _exponents(ring, ctx.d, cap, tcap):
        out.append(Polyvector(ctx, {e: 1}))
    return out


def _exponents(ring: SuperRing, d: int, xcap: int, tcap: int):
    def block(offset: int, cap: int):
        out = [()]
        for j in range(d):
            limit = 1 if ring.parities[offset + j] else cap
            out = [b + (k,) for b in out for k in range(min(limit, cap) + 1)]
        return [b for b in out if sum(b) <= cap]

    xs = block(0, xcap)
    ths = block(d, tcap) if ring.size > d else [()]
    return sorted(x + t for x in xs for t in ths)


def random_polyvector(ctx: AffineContext, rng: random.Random, terms: int = 3,
                      max_xdeg: int | None = None, homogeneous: bool = True) -> Polyvector:
    basis = monomial_basis(ctx, max_xdeg)
    acc = Polyvector(ctx)
    for _ in range(terms):
        acc = acc + rng.choice(basis) * rng.randint(-3, 3)
    if homogeneous and acc.terms:
        parts = acc.homogeneous_parts()
        acc = parts[rng.choice(sorted(parts))]
    return acc


# ---------------------------------------------------------------------------
# operators on V_A


def euler_derivation(ctx: AffineContext) -> PolyDiffOp:
    """P(v) = Σ_i θ_i ∂v/∂θ_i as a unary operator on V_A."""
    ring = ctx.va_ring
    terms = {}
    for i in range(1, ctx.d + 1):
        k = ctx.th_index(i)
        terms[(ring.var(k), (ring.var(k),))] = 1
    return PolyDiffOp(ring, 1, terms)


def wedge_operator(ctx: AffineContext) -> PolyDiffOp:
    return PolyDiffOp.multiplication(ctx.va_ring, 2)


def bracket_operator(ctx: AffineContext) -> PolyDiffOp:
    """The S_2-invariant operator μ_, on V_A.

    It is the symmetrisation of Σ_i (−1)^{t_i} m∘(∂/∂θ_i ⊗ ∂/∂x^i) and
    evaluates to μ(u, v) = (−1)^{|u|+1} schouten(u, v).
    """
    ring = ctx.va_ring
    terms = {}
    for i in range(1, ctx.d + 1):
        key = (ring.one(), (ring.var(ctx.th_index(i)), ring.var(ctx.x_index(i))))
        terms[key] = -1 if ctx.t[i - 1] % 2 else 1
    return PolyDiffOp(ring, 2, terms).symmetrize()


def apply_operator(op: PolyDiffOp, args: Sequence[Polyvector], ctx: AffineContext | None = None) -> Polyvector:
    if ctx is None:
        if not args:
            raise ArgumentError("nullary operators need an explicit context")
        ctx = args[0].ctx
    return Polyvector(ctx, op.apply([a.terms for a in args]))


# ---------------------------------------------------------------------------
# Hochschild cochains on A = K[x]


def shifted_degree(op: PolyDiffOp) -> int:
    deg = op.degree()
    return (deg if deg is not None else 0) + op.arity - 1


def cochain_degree(op: PolyDiffOp) -> int:
    return shifted_degree(op) + 1


def mult_cochain(ctx: AffineContext) -> PolyDiffOp:
    return PolyDiffOp.multiplication(ctx.a_ring, 2)


def unit_cochain(ctx: AffineContext) -> PolyDiffOp:
    return PolyDiffOp.constant(ctx.a_ring, {ctx.a_ring.one(): 1})


def _hom_parts(op: PolyDiffOp) -> list[PolyDiffOp]:
    by_deg: dict[int, dict] = {}
    for key, v in op.terms.items():
        by_deg.setdefault(op.term_degree(key), {})[key] = v
    return [PolyDiffOp(op.ring, op.arity, t) for _, t in sorted(by_deg.items())]


def brace(P: PolyDiffOp, Qs: Sequence[PolyDiffOp]) -> PolyDiffOp:
    """Brace operation P{Q_1,…,Q_r} on shifted cochains.

    Sum over increasing slot choices i_1 < … < i_r of P; Q_j picks up the
    sign (−1)^{|Q_j|'·(number of inputs placed before it)}.
    """
    ring = P.ring
    r = len(Qs)
    arity = P.arity + sum(Q.arity for Q in Qs) - r
    if r == 0:
        return P
    if r > P.arity:
        return PolyDiffOp.zero(ring, arity)
    parts = [_hom_parts(Q) for Q in Qs]
    acc: dict = {}
    for choice in _product(parts):
        sdeg = [shifted_degree(Q) for Q in choice]
        for slots in combinations(range(1, P.arity + 1), r):
            exp = 0
            before = 0
            for j, (i, Q) in enumerate(zip(slots, choice)):
                exp += sdeg[j] * (i - 1 - j + before)
                before += Q.arity
            res = P
            for i, Q in reversed(list(zip(slots, choice))):
                res = res.compose(i, Q)
            acc = poly_add(acc, res.terms, -1 if exp % 2 else 1)
    return PolyDiffOp(ring, arity, acc)


def _product(parts):
    if not parts:
        yield ()
        return
    for head in parts[0]:
        for tail in _product(parts[1:]):
            yield (head,) + tail


def graded_bracket_via_braces(P: PolyDiffOp, Q: PolyDiffOp) -> PolyDiffOp:
    acc = None
    for Pp in _hom_parts(P):
        for Qq in _hom_parts(Q):
            s = -1 if (shifted_degree(Pp) * shifted_degree(Qq)) % 2 else 1
            term = brace(Pp, [Qq]) - brace(Qq, [Pp]).scale(s)
            acc = term if acc is None else acc + term
    return acc if acc is not None else PolyDiffOp.zero(P.ring, P.arity + Q.arity - 1)


def hochschild_diff(O: PolyDiffOp) -> PolyDiffOp:
    """d_H O = [m, O] = m{O} − (−1)^{|O|'} O{m}."""
    m = PolyDiffOp.multiplication(O.ring, 2)
    acc = PolyDiffOp.zero(O.ring, O.arity + 1)
    for part in _hom_parts(O):
        s = -1 if shifted_degree(part) % 2 else 1
        acc = acc + brace(m, [part]) - brace(part, [m]).scale(s)
    return acc


def gerstenhaber_bracket(P: PolyDiffOp, Q: PolyDiffOp) -> PolyDiffOp:
    """Classical bracket [P,Q] = P∘Q − (−1)^{|P|'|Q|'} Q∘P,
    P∘Q = Σ_i (−1)^{(i−1)|Q|'} P∘_i Q."""

    def circ(X: PolyDiffOp, Y: PolyDiffOp) -> PolyDiffOp:
        acc = PolyDiffOp.zero(X.ring, X.arity + Y.arity - 1)
        ys = shifted_degree(Y)
        for i in range(1, X.arity + 1):
            term = X.compose(i, Y)
            acc = acc + (term.scale(-1) if ((i - 1) * ys) % 2 else term)
        return acc

    acc = PolyDiffOp.zero(P.ring, P.arity + Q.arity - 1)
    for Pp in _hom_parts(P):
        for Qq in _hom_parts(Q):
            s = -1 if (shifted_degree(Pp) * shifted_degree(Qq)) % 2 else 1
            acc = acc + circ(Pp, Qq) - circ(Qq, Pp).scale(s)
    return acc


def cup(P: PolyDiffOp, Q: PolyDiffOp) -> PolyDiffOp:
    """Cup product with the décalage sign: (−1)^{k|Q|'} P(a_1..a_k)·Q(a_{k+1}..).

    This is the sign for which m{P, Q} = P ∪ Q holds on shifted cochains.
    """
    ring = P.ring
    acc: dict = {}
    for (e, Ds), a in P.terms.items():
        for Qq in _hom_parts(Q):
            s = -1 if (P.arity * shifted_degree(Qq)) % 2 else 1
            for (f, Es), b in Qq.terms.items():
                key = (tuple(x + y for x, y in zip(e, f)), Ds + Es)
                acc = poly_add(acc, {key: s * a * b})
    return PolyDiffOp(ring, P.arity + Q.arity, acc)


def cup_symmetrization(P: PolyDiffOp, Q: PolyDiffOp) -> PolyDiffOp:
    """½(P ∪ Q − (−1)^{|P|'|Q|'} Q ∪ P)."""
    acc = PolyDiffOp.zero(P.ring, P.arity + Q.arity)
    for Pp in _hom_parts(P):
        for Qq in _hom_parts(Q):
            s = -1 if (shifted_degree(Pp) * shifted_degree(Qq)) % 2 else 1
            acc = acc + cup(Pp, Qq) - cup(Qq, Pp).scale(s)
    return acc.scale(Fraction(1, 2))


def hkr(u: Polyvector) -> PolyDiffOp:
    """Alternating polydifferential operator of a polyvector field, no 1/k! factor.

    θ_{j_1}…θ_{j_k} ↦ (a_1,…,a_k) ↦ Σ_σ sgn(σ) ∂_{j_σ(1)} a_1 ⋯ ∂_{j_σ(k)} a_k,
    so that hkr(θ_i)(a) = ∂a/∂x^i.
    """
    ctx = u.ctx
    ring = ctx.a_ring
    d = ctx.d
    lengths = {ctx.theta_length(e) for e in u.terms}
    if len(lengths) > 1:
        raise ArgumentError("hkr needs a polyvector of fixed θ-length")
    k = lengths.pop() if lengths else 0
    acc: dict = {}
    for e, c in u.terms.items():
        if any(x > 1 for x in e[d:]):
            raise ArgumentError("hkr is defined for odd θ only")
        js = [j for j in range(d) if e[d + j]]
        coef_mono = tuple(e[:d])
        for perm in permutations(range(k)):
            sgn = koszul_sign(tuple(p + 1 for p in perm), (1,) * k)
            Ds = tuple(ring.var(js[p]) for p in perm)
            acc = poly_add(acc, {(coef_mono, Ds): sgn * c})
    return PolyDiffOp(ring, k, acc)


def random_cochain(ctx: AffineContext, rng: random.Random, arity: int, terms: int = 2,
                   max_coef_deg: int | None = None, order_cap: int | None = None) -> PolyDiffOp:
    ring = ctx.a_ring
    cdeg = ctx.degcap if max_coef_deg is None else max_coef_deg
    ocap = ctx.order_cap if order_cap is None else order_cap
    monos = [m for m in _exponents(ring, ctx.d, cdeg, 0)]
    ders = [m for m in _exponents(ring, ctx.d, ocap, 0)]
    acc: dict = {}
    for _ in range(terms):
        key = (rng.choice(monos), tuple(rng.choice(ders) for _ in range(arity)))
        acc = poly_add(acc, {key: Fraction(rng.randint(-3, 3) or 1)})
    return PolyDiffOp(ring, arity, acc)


def evaluate_cochain(op: PolyDiffOp, args: Sequence[Mapping]) -> dict:
    return op.apply(args)


# brace-tree action -----------------------------------------------------------


def brace_eval(T, ops: Sequence[PolyDiffOp]) -> PolyDiffOp:
    """Action of a brace tree (or a linear combination) on cochains.

    Labelled vertex i carries ops[i-1]; neutral vertices carry the
    multiplication.  Value = ω(T)·κ·(nested braces), where ω(T) is the sign
    of the label sequence in depth-first order and κ the Koszul sign of
    rearranging m^r P_1 … P_n into depth-first order (shifted degrees, m odd).
    """
    from .brace_operad import BraceElement, dfs_word, tree_arity, tree_sign_data

    if isinstance(T, BraceElement):
        if T.arity != len(ops):
            raise ArgumentError(f"{T.arity}-ary element evaluated on {len(ops)} operators")
        acc = None
        for tree, c in T.terms.items():
            term = brace_eval(tree, ops).scale(c)
            acc = term if acc is None else acc + term
        if acc is None:
            raise ArgumentError("cannot evaluate the zero element without an output arity")
        return acc
    n = tree_arity(T)
    if n != len(ops):
        raise ArgumentError(f"tree of arity {n} evaluated on {len(ops)} operators")
    if not ops:
        raise ArgumentError("at least one operator is required")
    ring = ops[0].ring
    m = PolyDiffOp.multiplication(ring, 2)
    parts = [_hom_parts(op) for op in ops]
    acc = None
    for choice in _product(parts):
        sdeg = [shifted_degree(op) for op in choice]
        sign = tree_sign_data(T, sdeg)
        val = _eval_node(T, choice, m)
        term = val.scale(sign)
        acc = term if acc is None else acc + term
    if acc is None:
        r = sum(1 for lab in dfs_word(T) if lab == 0)
        return PolyDiffOp.zero(ring, sum(op.arity for op in ops) + r - n + 1)
    return acc


def _eval_node(node, ops, m):
    label, children = node
    head = m if label == 0 else ops[label - 1]
    return brace(head, [_eval_node(c, ops, m) for c in children])
