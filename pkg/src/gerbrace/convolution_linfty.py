"""Convolution algebras of Ger∨ with endomorphisms of V_A.

Elements are finite sums Σ Op ⊗ M with Op a polydifferential operator on
V_A of arity n and M a normal-form monomial of Λ⁻²Ger(n); such a sum is an
S_n-equivariant map Ger∨(n) ⊗ V_A^{⊗n} → V_A.  Its degree is |Op| + deg M.

The arity-wise tensor product End_{V_A} ⊗ Λ⁻²Ger is an operad with

    (Op ⊗ M) ∘_i (Op' ⊗ M') = (−1)^{|M||Op'|} (Op ∘_i Op') ⊗ (M ∘_i M')

and the diagonal symmetric-group action.  On invariant elements the
shuffle-summed insertion X • Y is a graded pre-Lie product; symmetric
braces, the Lie bracket and the Λ⁻¹Lie∞ brackets of a convolution algebra
Hom(Ger∨(V), W) are all derived from it.

A truncation ``arity_cap`` N works modulo the subspace of arity > N, which
is an ideal for every operation here.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations
from math import factorial
from typing import Iterable, Mapping, Sequence

from .core_algebra import ArgumentError, InvariantViolation, as_scalar, koszul_sign, shuffles
from .free_gerstenhaber import (
    compose_monomials,
    enumerate_basis,
    format_monomial,
    monomial_arity,
    monomial_degree,
    monomial_from_json,
    monomial_parity,
    monomial_to_json,
    relabel_monomial,
)
from .polydiff import PolyDiffOp, SuperRing

Key = tuple  # (ger monomial, coefficient exponent, derivative slots)


class ConvElement:
    """Sparse sum of (Op term ⊗ Ger monomial) keyed by (M, e, Ds)."""

    __slots__ = ("ring", "terms", "_hash")

    def __init__(self, ring: SuperRing, terms: Mapping | None = None):
        self.ring = ring
        clean = {}
        for key, v in (terms or {}).items():
            v = as_scalar(v)
            if v:
                M, e, Ds = key
                if len(Ds) != monomial_arity(M):
                    raise ArgumentError("operator arity differs from the Ger monomial arity")
                clean[key] = v
        self.terms = clean
        self._hash = None

    @classmethod
    def zero(cls, ring: SuperRing) -> "ConvElement":
        return cls(ring)

    @classmethod
    def of(cls, op: PolyDiffOp, ger) -> "ConvElement":
        """op ⊗ ger, with ger a monomial or a GerElement."""
        items = ger.terms.items() if hasattr(ger, "terms") else [(ger, 1)]
        out: dict = {}
        for M, c in items:
            if monomial_arity(M) != op.arity:
                raise ArgumentError("operator and Ger element have different arities")
            for (e, Ds), v in op.terms.items():
                key = (M, e, Ds)
                out[key] = out.get(key, 0) + c * v
        return cls(op.ring, out)

    # -- linear structure
    def _check(self, other: "ConvElement"):
        if not isinstance(other, ConvElement) or other.ring != self.ring:
            raise ArgumentError("convolution elements over different rings")

    def __add__(self, other: "ConvElement") -> "ConvElement":
        self._check(other)
        return ConvElement(self.ring, _add(self.terms, other.terms))

    def __sub__(self, other: "ConvElement") -> "ConvElement":
        self._check(other)
        return ConvElement(self.ring, _add(self.terms, other.terms, -1))

    def __neg__(self) -> "ConvElement":
        return self.scale(-1)

    def scale(self, c) -> "ConvElement":
        c = as_scalar(c)
        return ConvElement(self.ring, {k: c * v for k, v in self.terms.items()})

    def __eq__(self, other) -> bool:
        return isinstance(other, ConvElement) and self.ring == other.ring and self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    # -- gradings
    def term_degree(self, key: Key) -> int:
        M, e, Ds = key
        return self.ring.degree(e) - sum(self.ring.degree(D) for D in Ds) + monomial_degree(M)

    def term_parity(self, key: Key) -> int:
        return self.term_degree(key) % 2

    def degrees(self) -> set[int]:
        return {self.term_degree(k) for k in self.terms}

    def arities(self) -> set[int]:
        return {monomial_arity(k[0]) for k in self.terms}

    def min_arity(self) -> int | None:
        return min(self.arities(), default=None)

    def in_filtration(self, n: int) -> bool:
        """Membership in F_n: every component has arity ≥ n."""
        return all(a >= n for a in self.arities())

    def component(self, n: int) -> "ConvElement":
        return ConvElement(self.ring, {k: v for k, v in self.terms.items() if monomial_arity(k[0]) == n})

    def truncate(self, cap: int | None) -> "ConvElement":
        if cap is None:
            return self
        return ConvElement(self.ring, {k: v for k, v in self.terms.items() if monomial_arity(k[0]) <= cap})

    def above(self, n: int) -> "ConvElement":
        """Components of arity ≥ n."""
        return ConvElement(self.ring, {k: v for k, v in self.terms.items() if monomial_arity(k[0]) >= n})

    def parity_parts(self) -> dict[int, "ConvElement"]:
        parts: dict[int, dict] = {}
        for k, v in self.terms.items():
            parts.setdefault(self.term_parity(k), {})[k] = v
        return {p: ConvElement(self.ring, t) for p, t in parts.items()}

    def homogeneous_parts(self) -> dict[int, "ConvElement"]:
        parts: dict[int, dict] = {}
        for k, v in self.terms.items():
            parts.setdefault(self.term_degree(k), {})[k] = v
        return {p: ConvElement(self.ring, t) for p, t in sorted(parts.items())}

    def groups(self) -> dict:
        """{M: PolyDiffOp}, the operator attached to each Ger monomial."""
        raw: dict = {}
        for (M, e, Ds), v in self.terms.items():
            raw.setdefault(M, {})[(e, Ds)] = v
        return {M: PolyDiffOp(self.ring, monomial_arity(M), t) for M, t in raw.items()}

    # -- symmetric group action
    def permute(self, sigma: Sequence[int]) -> "ConvElement":
        """Diagonal action: Op^σ ⊗ M^σ on the arity-|σ| component (others unchanged)."""
        sigma = tuple(sigma)
        n = len(sigma)
        out: dict = {}
        for M, op in self.groups().items():
            if monomial_arity(M) != n:
                for k, v in op.terms.items():
                    out[(M,) + k] = out.get((M,) + k, 0) + v
                continue
            pop = op.permute(sigma)
            for MM, c in relabel_monomial(M, sigma).items():
                for (e, Ds), v in pop.terms.items():
                    key = (MM, e, Ds)
                    out[key] = out.get(key, 0) + c * v
        return ConvElement(self.ring, out)

    def is_invariant(self) -> bool:
        for n in self.arities():
            part = self.component(n)
            for j in range(1, n):
                sigma = list(range(1, n + 1))
                sigma[j - 1], sigma[j] = sigma[j], sigma[j - 1]
                if part.permute(sigma) != part:
                    return False
        return True

    # -- presentation
    def format(self) -> str:
        if not self.terms:
            return "0"
        pieces = []
        for M, op in sorted(self.groups().items(), key=lambda kv: (monomial_arity(kv[0]), kv[0])):
            pieces.append(f"({op.format()}) (x) {format_monomial(M)}")
        return " + ".join(pieces)

    def __repr__(self):
        return f"ConvElement({self.format()})"

    def to_json(self) -> dict:
        rows = []
        for (M, e, Ds), v in sorted(self.terms.items(), key=lambda kv: (monomial_arity(kv[0][0]), repr(kv[0]))):
            rows.append({"arity": monomial_arity(M), "ger": monomial_to_json(M), "coef": str(v),
                         "mono": list(e), "derivs": [list(D) for D in Ds]})
        return {"variables": list(self.ring.names), "terms": rows}

    @classmethod
    def from_json(cls, ring: SuperRing, data: Mapping) -> "ConvElement":
        if list(data.get("variables", ring.names)) != list(ring.names):
            raise ArgumentError("element variables do not match the context")
        out: dict = {}
        for row in data["terms"]:
            M = monomial_from_json(row["ger"])
            if monomial_arity(M) != int(row.get("arity", monomial_arity(M))):
                raise ArgumentError("stated arity does not match the Ger monomial")
            key = (M, tuple(row["mono"]), tuple(tuple(D) for D in row["derivs"]))
            out[key] = out.get(key, 0) + Fraction(row["coef"])
        return cls(ring, out)


def _add(a: Mapping, b: Mapping, scale=1) -> dict:
    out = dict(a)
    for k, v in b.items():
        w = out.get(k, 0) + scale * v
        if w:
            out[k] = w
        else:
            out.pop(k, None)
    return out


def sum_elements(ring: SuperRing, items: Iterable[ConvElement]) -> ConvElement:
    acc: dict = {}
    for x in items:
        for k, v in x.terms.items():
            acc[k] = acc.get(k, 0) + v
    return ConvElement(ring, acc)


# ---------------------------------------------------------------------------
# operad structure


def hadamard_compose(X: ConvElement, i: int, Y: ConvElement, arity: int | None = None) -> ConvElement:
    """X ∘_i Y on the components of X of the given arity (all arities ≥ i if None)."""
    X._check(Y)
    ring = X.ring
    out: dict = {}
    ygroups = [(Mp, op.terms) for Mp, op in Y.groups().items()]
    for M, op in X.groups().items():
        n = monomial_arity(M)
        if n < i or (arity is not None and n != arity):
            continue
        m_odd = monomial_parity(M)
        for Mp, yterms in ygroups:
            # (−1)^{|M||Op'|}, split by parity of the inner operator
            by_par: dict[int, dict] = {}
            for k, v in yterms.items():
                by_par.setdefault(_op_term_parity(ring, k), {})[k] = v
            ger = compose_monomials(M, i, Mp).terms
            if not ger:
                continue
            for p, part in by_par.items():
                comp = op.compose(i, PolyDiffOp(ring, monomial_arity(Mp), part))
                s = -1 if (m_odd and p) else 1
                for MM, c in ger.items():
                    for (e, Ds), v in comp.terms.items():
                        key = (MM, e, Ds)
                        out[key] = out.get(key, 0) + s * c * v
    return ConvElement(ring, out)


def _op_term_parity(ring: SuperRing, key) -> int:
    e, Ds = key
    return (ring.parity(e) + sum(ring.parity(D) for D in Ds)) % 2


def symmetrize(X: ConvElement) -> ConvElement:
    """Σ_{σ∈S_n} X^σ on each arity-n component (no 1/n! factor)."""
    out = ConvElement.zero(X.ring)
    for n in sorted(X.arities()):
        part = X.component(n)
        out = out + sum_elements(X.ring, (part.permute(s) for s in permutations(range(1, n + 1))))
    return out


def pre_lie(X: ConvElement, Y: ConvElement, cap: int | None = None) -> ConvElement:
    """X • Y = Σ over shuffles of (X ∘_1 Y)^σ, for S-invariant X and Y.

    Only results of arity ≤ cap are formed.
    """
    X._check(Y)
    ring = X.ring
    acc: dict = {}
    for n in sorted(X.arities()):
        Xn = X.component(n)
        for k in sorted(Y.arities()):
            N = n + k - 1
            if cap is not None and N > cap:
                continue
            Z = hadamard_compose(Xn, 1, Y.component(k))
            if Z.is_zero():
                continue
            for sigma in shuffles(k, n - 1):
                for key, v in Z.permute(sigma).terms.items():
                    acc[key] = acc.get(key, 0) + v
    return ConvElement(ring, acc)


def _sign(k: int) -> int:
    return -1 if k % 2 else 1


def _homogeneous_expansion(Ys: Sequence[ConvElement]):
    """Expand a list of elements into lists of parity-homogeneous parts."""
    combos = [[]]
    for Y in Ys:
        parts = Y.parity_parts()
        combos = [c + [(p, P)] for c in combos for p, P in sorted(parts.items())]
    return combos


def braces(X: ConvElement, Ys: Sequence[ConvElement], cap: int | None = None) -> ConvElement:
    """Symmetric braces X{Y_1,…,Y_m} of a pre-Lie algebra.

    X{} = X and X{Y_1..Y_m} = X{Y_1..Y_{m−1}} • Y_m − Σ_i ± X{Y_1,…,Y_i • Y_m,…,Y_{m−1}},
    the sign being the Koszul sign of moving Y_m to the right of Y_{i+1}..Y_{m−1}.
    """
    if not Ys:
        return X.truncate(cap)
    acc = ConvElement.zero(X.ring)
    for combo in _homogeneous_expansion(Ys):
        if any(P.is_zero() for _, P in combo):
            continue
        acc = acc + _braces_homogeneous(X, combo, cap)
    return acc


def _braces_homogeneous(X: ConvElement, combo, cap) -> ConvElement:
    *head, (pm, Ym) = combo
    out = pre_lie(_braces_homogeneous(X, head, cap) if head else X, Ym, cap)
    for i in range(len(head)):
        passed = sum(p for p, _ in head[i + 1:])
        s = _sign(pm * passed)
        pi, Yi = head[i]
        inner = pre_lie(Yi, Ym, cap)
        if inner.is_zero():
            continue
        new = head[:i] + [((pi + pm) % 2, inner)] + head[i + 1:]
        out = out - _braces_homogeneous(X, new, cap).scale(s)
    return out


def saturated_braces(X: ConvElement, Ys: Sequence[ConvElement], cap: int | None = None) -> ConvElement:
    """X{Y_1,…,Y_m} restricted to the arity-m part of X, where every slot is filled.

    Equals (−1)^{Σ_{i<j}|Y_i||Y_j|} Σ over (k_1,…,k_m)-shuffles of
    (X ∘ (Y_1,…,Y_m))^σ, the parallel composite being formed from the last
    slot to the first.
    """
    m = len(Ys)
    Xm = X.component(m)
    if Xm.is_zero() or any(Y.is_zero() for Y in Ys):
        return ConvElement.zero(X.ring)
    comps = []
    for Y in Ys:
        opts = []
        for p, Yp in sorted(Y.parity_parts().items()):
            opts.extend((k, Yp.component(k), p) for k in sorted(Yp.arities()))
        comps.append(opts)
    acc: dict = {}
    choices = [[]]
    for opts in comps:
        choices = [c + [o] for c in choices for o in opts]
    for choice in choices:
        ks = [k for k, _, _ in choice]
        if cap is not None and sum(ks) > cap:
            continue
        pars = [p for _, _, p in choice]
        odd_pairs = sum(pars[i] * pars[j] for i in range(m) for j in range(i + 1, m))
        s = _sign(odd_pairs)
        Z = Xm
        for slot in range(m, 0, -1):
            Z = hadamard_compose(Z, slot, choice[slot - 1][1])
            if Z.is_zero():
                break
        if Z.is_zero():
            continue
        for sigma in shuffles(*ks):
            for key, v in Z.permute(sigma).terms.items():
                acc[key] = acc.get(key, 0) + s * v
    return ConvElement(X.ring, acc)


def lie_bracket(X: ConvElement, Y: ConvElement, cap: int | None = None) -> ConvElement:
    """[X, Y] = X • Y − (−1)^{|X||Y|} Y • X."""
    acc = ConvElement.zero(X.ring)
    for p, Xp in X.parity_parts().items():
        for q, Yq in Y.parity_parts().items():
            acc = acc + pre_lie(Xp, Yq, cap) - pre_lie(Yq, Xp, cap).scale(_sign(p * q))
    return acc


def invariant_from_term(op: PolyDiffOp, M) -> ConvElement:
    """The symmetrisation of a single tensor op ⊗ M."""
    return symmetrize(ConvElement.of(op, M))


def term_candidates(ring: SuperRing, arity: int, coef_cap: int = 1, order_cap: int = 1) -> list[Key]:
    """All keys (M, e, Ds) with coefficient x-degree ≤ coef_cap and slot orders ≤ order_cap."""
    from .polyvector_hochschild import _exponents

    d = ring.size // 2
    coefs = _exponents(ring, d, coef_cap, d)
    derivs = [D for D in _exponents(ring, d, order_cap, order_cap) if sum(D) <= order_cap]
    slots = [()]
    for _ in range(arity):
        slots = [s + (D,) for s in slots for D in derivs]
    return [(M, e, Ds) for M in enumerate_basis(arity) for e in coefs for Ds in slots]


def random_invariant(ring: SuperRing, rng: random.Random, arity: int, *, coef_cap: int = 1,
                     order_cap: int = 1, terms: int = 2, degree: int | None = None) -> ConvElement:
    """Random S-invariant element of one arity (and one degree if given); zero if none exists."""
    cands = term_candidates(ring, arity, coef_cap, order_cap)
    if degree is not None:
        probe = ConvElement(ring)
        cands = [k for k in cands if probe.term_degree(k) == degree]
    for _ in range(50):
        if not cands:
            break
        acc: dict = {}
        for _ in range(terms):
            k = rng.choice(cands)
            acc[k] = acc.get(k, 0) + rng.choice([-2, -1, 1, 1, 2, 3])
        out = symmetrize(ConvElement(ring, acc))
        if not out.is_zero():
            return out
    return ConvElement.zero(ring)


# ---------------------------------------------------------------------------
# Gerstenhaber structures on V_A


def standard_structure(ctx) -> ConvElement:
    """α = μ_∧ ⊗ {b1,b2} + μ_, ⊗ b1b2, the Gerstenhaber structure of V_A."""
    from .polyvector_hochschild import bracket_operator, wedge_operator

    return ConvElement.of(wedge_operator(ctx), ((1, 2),)) + ConvElement.of(bracket_operator(ctx), ((1,), (2,)))


def identity_element(ring: SuperRing) -> ConvElement:
    return ConvElement.of(PolyDiffOp.identity(ring), ((1,),))


def exp_ad(g: ConvElement, X: ConvElement, cap: int) -> ConvElement:
    """exp(ad_g) X truncated at arity ≤ cap, for g of degree 0 in F_2."""
    if not g.in_filtration(2) or g.degrees() - {0}:
        raise ArgumentError("the gauge parameter must have degree 0 and arity ≥ 2")
    acc = X.truncate(cap)
    term = acc
    k = 1
    while True:
        term = lie_bracket(g, term, cap).scale(Fraction(1, k))
        if term.is_zero():
            return acc
        acc = acc + term
        k += 1


def hamiltonian_twist(ctx, pi) -> ConvElement:
    """The unary component λ(π, ·) ⊗ b1 added by twisting with a degree-2 polyvector π."""
    from .polyvector_hochschild import bracket_operator

    if pi.degrees() != {2}:
        raise ArgumentError(f"the twisting polyvector must have degree 2, not {sorted(pi.degrees())}")
    ring = ctx.va_ring
    const = PolyDiffOp.constant(ring, pi.terms)
    op = bracket_operator(ctx).compose(1, const)
    return ConvElement.of(op, ((1,),))


# ---------------------------------------------------------------------------
# convolution Λ⁻¹Lie∞-algebras


class ConvolutionAlgebra:
    """Hom(Ger∨(V), W) for two Ger∞-structures Q_V, Q_W on the space of V_A.

    ∂f = Q_W^{(1)}{f} − (−1)^{|f|} f • Q_V and {f_1,…,f_m} = Q_W^{(m)}{f_1,…,f_m},
    where Q^{(m)} is the arity-m component.  Everything is computed modulo
    arity > arity_cap.
    """

    def __init__(self, source: ConvElement, target: ConvElement, arity_cap: int):
        if arity_cap < 1:
            raise ArgumentError("arity cap must be positive")
        source._check(target)
        self.ring = source.ring
        self.source = source
        self.target = target
        self.cap = arity_cap
        self._target_parts = {n: target.component(n) for n in target.arities()}

    def zero(self) -> ConvElement:
        return ConvElement.zero(self.ring)

    def diff(self, f: ConvElement) -> ConvElement:
        acc = self.zero()
        unary = self._target_parts.get(1)
        if unary is not None:
            acc = acc + saturated_braces(unary, [f], self.cap)
        for p, fp in f.parity_parts().items():
            acc = acc - pre_lie(fp, self.source, self.cap).scale(_sign(p))
        return acc

    def bracket(self, fs: Sequence[ConvElement]) -> ConvElement:
        m = len(fs)
        if m < 2:
            raise ArgumentError("multi-brackets take at least two arguments")
        Qm = self._target_parts.get(m)
        if Qm is None or any(f.is_zero() for f in fs):
            return self.zero()
        # cheap filtration bound: the result has arity Σ arity(f_i)
        if sum(f.min_arity() for f in fs) > self.cap:
            return self.zero()
        return saturated_braces(Qm, list(fs), self.cap)

    def bracket_power(self, gamma: ConvElement, m: int, tail: ConvElement | None = None) -> ConvElement:
        """{γ,…,γ}_m, or {γ,…,γ,tail}_{m+1} when tail is given."""
        args = [gamma] * m + ([tail] if tail is not None else [])
        if len(args) < 2:
            raise ArgumentError("need at least two arguments")
        return self.bracket(args)

    def max_bracket_arity(self) -> int:
        return max(self._target_parts, default=1)

    def curvature_terms(self, gamma: ConvElement) -> ConvElement:
        """Σ_{m≥2} (1/m!) {γ,…,γ}_m."""
        acc = self.zero()
        for m in range(2, self.max_bracket_arity() + 1):
            acc = acc + self.bracket([gamma] * m).scale(Fraction(1, factorial(m)))
        return acc

    def mc_residual(self, gamma: ConvElement) -> ConvElement:
        return (self.diff(gamma) + self.curvature_terms(gamma)).truncate(self.cap)

    def relation(self, vs: Sequence[ConvElement]) -> ConvElement:
        """Left-hand side of the m-th Λ⁻¹Lie∞ relation on homogeneous v_1..v_m."""
        m = len(vs)
        degs = []
        for v in vs:
            ds = v.degrees()
            if len(ds) > 1:
                raise ArgumentError("relations are evaluated on homogeneous elements")
            degs.append(ds.pop() if ds else 0)
        if m == 1:
            return self.diff(self.diff(vs[0]))
        acc = self.diff(self.bracket(vs))
        before = 0
        for i in range(m):
            new = list(vs)
            new[i] = self.diff(vs[i])
            acc = acc + self.bracket(new).scale(_sign(before))
            before += degs[i]
        for k in range(2, m):
            for sigma in shuffles(k, m - k):
                s = koszul_sign(sigma, degs)
                inner = self.bracket([vs[a - 1] for a in sigma[:k]])
                rest = [vs[a - 1] for a in sigma[k:]]
                acc = acc + self.bracket([inner] + rest).scale(s)
        return acc.truncate(self.cap)


# ---------------------------------------------------------------------------
# polynomial paths and 1-cells


@dataclass
class PolyPath:
    """α'(t) + dt·α''(t) with coefficients {power of t: ConvElement}."""

    ring: SuperRing
    main: dict
    dt_part: dict = field(default_factory=dict)

    @staticmethod
    def constant(x: ConvElement, dt: ConvElement | None = None) -> "PolyPath":
        return PolyPath(x.ring, _poly_clean({0: x}), _poly_clean({0: dt}) if dt is not None else {})

    def at(self, t) -> ConvElement:
        return _poly_eval(self.ring, self.main, t)

    def dt_at(self, t) -> ConvElement:
        return _poly_eval(self.ring, self.dt_part, t)

    def t_degree(self) -> int:
        return max((k for k, v in self.main.items() if not v.is_zero()), default=0)

    def to_json(self) -> dict:
        return {"main": {str(k): v.to_json() for k, v in sorted(self.main.items())},
                "dt": {str(k): v.to_json() for k, v in sorted(self.dt_part.items())}}


def _poly_eval(ring: SuperRing, poly: Mapping[int, ConvElement], t) -> ConvElement:
    t = as_scalar(t)
    acc = ConvElement.zero(ring)
    for k, v in poly.items():
        acc = acc + v.scale(t ** k)
    return acc


def _poly_clean(p: Mapping[int, ConvElement]) -> dict:
    return {k: v for k, v in p.items() if not v.is_zero()}


def _poly_add(p: Mapping, q: Mapping, scale=1) -> dict:
    out = dict(p)
    for k, v in q.items():
        out[k] = out[k] + v.scale(scale) if k in out else v.scale(scale)
    return _poly_clean(out)


def _poly_derivative(p: Mapping) -> dict:
    return _poly_clean({k - 1: v.scale(k) for k, v in p.items() if k > 0})


def _poly_integral(p: Mapping) -> dict:
    return _poly_clean({k + 1: v.scale(Fraction(1, k + 1)) for k, v in p.items()})


def _poly_equal(p: Mapping, q: Mapping) -> bool:
    return _poly_clean(p) == _poly_clean(q)


def _poly_bracket(L: ConvolutionAlgebra, polys: Sequence[Mapping]) -> dict:
    """Multilinear extension of the bracket to polynomials in t."""
    out: dict = {}
    combos = [(0, [])]
    for p in polys:
        combos = [(d + k, args + [v]) for d, args in combos for k, v in p.items()]
    for d, args in combos:
        val = L.bracket(args)
        if not val.is_zero():
            out[d] = out[d] + val if d in out else val
    return _poly_clean(out)


def _poly_curvature(L: ConvolutionAlgebra, a: Mapping) -> dict:
    out: dict = {k: L.diff(v) for k, v in a.items()}
    for m in range(2, L.max_bracket_arity() + 1):
        out = _poly_add(out, _poly_bracket(L, [a] * m), Fraction(1, factorial(m)))
    return _poly_clean({k: v.truncate(L.cap) for k, v in out.items()})


def _flow(L: ConvolutionAlgebra, a: Mapping, xi: Mapping) -> dict:
    """∂ξ + Σ_{m≥1} (1/m!) {a,…,a,ξ}_{m+1}."""
    out = _poly_clean({k: L.diff(v) for k, v in xi.items()})
    for m in range(1, L.max_bracket_arity()):
        out = _poly_add(out, _poly_bracket(L, [a] * m + [xi]), Fraction(1, factorial(m)))
    return _poly_clean({k: v.truncate(L.cap) for k, v in out.items()})


@dataclass
class CellReport:
    ok: bool
    failures: list  # (equation name, first failing arity)

    def to_json(self) -> dict:
        return {"ok": self.ok, "failures": [{"equation": e, "arity": a} for e, a in self.failures]}


def _first_arity(poly: Mapping) -> int | None:
    ars = [v.min_arity() for v in poly.values() if not v.is_zero()]
    return min(ars) if ars else None


def one_cell_check(L: ConvolutionAlgebra, path: PolyPath) -> CellReport:
    """Check the Maurer–Cartan equation for α'(t) and the flow equation
    dα'/dt = ∂α'' + Σ_{m≥1} (1/m!) {α',…,α',α''} as polynomial identities."""
    failures = []
    curv = _poly_curvature(L, path.main)
    a = _first_arity(curv)
    if a is not None:
        failures.append(("maurer-cartan", a))
    lhs = _poly_clean({k: v.truncate(L.cap) for k, v in _poly_derivative(path.main).items()})
    defect = _poly_add(lhs, _flow(L, path.main, path.dt_part), -1)
    a = _first_arity(defect)
    if a is not None:
        failures.append(("flow", a))
    return CellReport(not failures, failures)


@dataclass
class AdjustResult:
    path: PolyPath
    endpoint: ConvElement
    iterations: int


def mc_adjust(L: ConvolutionAlgebra, alpha: ConvElement, xi: ConvElement, n: int,
              depth: int | None = None) -> AdjustResult:
    """Iterate α'_{k+1}(t) = α + ∫_0^t (∂ξ + Σ_{m≥1} (1/m!) {α'_k,…,α'_k,ξ}) dt
    until it stabilises modulo arity > cap; return the 1-cell α' + dt·ξ and α'(1).

    Stabilisation is guaranteed: each iteration fixes one more arity.
    """
    if n < 1:
        raise ArgumentError("filtration index must be at least 1")
    if not xi.in_filtration(n):
        raise ArgumentError(f"ξ has components of arity {xi.min_arity()} < {n}")
    if xi.degrees() - {-1}:
        raise ArgumentError("ξ must have degree −1")
    if alpha.degrees() - {0}:
        raise ArgumentError("α must have degree 0")
    alpha = alpha.truncate(L.cap)
    xi = xi.truncate(L.cap)
    limit = depth if depth is not None else L.cap + 2
    base = _poly_clean({0: alpha})
    xi_poly = _poly_clean({0: xi})
    current = base
    for k in range(1, limit + 1):
        step = _poly_add(base, _poly_integral(_flow(L, current, xi_poly)))
        if _poly_equal(step, current):
            path = PolyPath(L.ring, step, xi_poly)
            return AdjustResult(path, path.at(1), k)
        current = step
    raise InvariantViolation(f"adjustment sequence did not stabilise within {limit} iterations")


# ---------------------------------------------------------------------------
# Bianchi identity and composition of ∞-morphisms


def bianchi_defect(L: ConvolutionAlgebra, gamma: ConvElement) -> ConvElement:
    """Σ_{k≥2} (1/k!) ∂{γ^k} + Σ_{k≥1} (1/k!) {γ^k, ∂γ} + Σ_{k≥2,t≥1} (1/k!t!) {γ^t, {γ^k}}.

    Vanishes for every degree-0 γ in a Λ⁻¹Lie∞-algebra.
    """
    if gamma.degrees() - {0}:
        raise ArgumentError("the Bianchi identity is stated for degree-0 elements")
    top = L.max_bracket_arity()
    acc = L.zero()
    dg = L.diff(gamma)
    for k in range(2, top + 1):
        acc = acc + L.diff(L.bracket([gamma] * k)).scale(Fraction(1, factorial(k)))
    for k in range(1, top):
        acc = acc + L.bracket([gamma] * k + [dg]).scale(Fraction(1, factorial(k)))
    for k in range(2, top + 1):
        inner = L.bracket([gamma] * k)
        if inner.is_zero():
            continue
        for t in range(1, top):
            acc = acc + L.bracket([gamma] * t + [inner]).scale(Fraction(1, factorial(k) * factorial(t)))
    return acc.truncate(L.cap)


def compose_morphisms(outer: ConvElement, inner: ConvElement, cap: int) -> ConvElement:
    """The ∞-morphism U → W obtained from inner: V ⇝ U and outer: U ⇝ W.

    Both are degree-0 elements of the respective convolution algebras; the
    composite is Σ_m (1/m!) outer_m{inner, …, inner}.
    """
    if outer.degrees() - {0} or inner.degrees() - {0}:
        raise ArgumentError("∞-morphisms have degree 0")
    if not inner.in_filtration(1) or inner.is_zero():
        return ConvElement.zero(outer.ring)
    acc = ConvElement.zero(outer.ring)
    lowest = inner.min_arity()
    for m in sorted(outer.arities()):
        if m * lowest > cap:
            break
        acc = acc + saturated_braces(outer, [inner] * m, cap).scale(Fraction(1, factorial(m)))
    return acc.truncate(cap)
