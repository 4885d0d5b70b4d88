"""Supercommutative polynomial rings and polydifferential operators on them.

A ring has ordered variables z_1..z_N, each with a parity and an integer
degree.  Monomials are exponent tuples (odd exponents are 0 or 1) and are
kept in increasing variable order.  Left partial derivatives ∂_k have the
parity of z_k and degree −deg z_k; the algebra they generate is again
supercommutative, so derivative multi-indices reuse the monomial routines.

An operator term ``(e, (D_1, …, D_n))`` with coefficient c stands for

    v_1, …, v_n  ↦  c · z^e · (D_1 v_1)(D_2 v_2)…(D_n v_n) · κ

where κ = (−1)^{Σ_{a>b} |D_a||v_b|} is the Koszul sign of passing the
derivatives over the inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import permutations, product
from typing import Iterable, Mapping, Sequence

from .core_algebra import ArgumentError, as_scalar, reorder_sign

Mono = tuple[int, ...]
Poly = dict  # Mono -> Fraction


@dataclass(frozen=True)
class SuperRing:
    names: tuple[str, ...]
    parities: tuple[int, ...]
    degrees: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.names) == len(self.parities) == len(self.degrees)):
            raise ArgumentError("ring data of inconsistent length")

    @property
    def size(self) -> int:
        return len(self.names)

    def one(self) -> Mono:
        return (0,) * self.size

    def var(self, k: int) -> Mono:
        e = [0] * self.size
        e[k] = 1
        return tuple(e)

    def parity(self, e: Mono) -> int:
        return _parity(self, e)

    def degree(self, e: Mono) -> int:
        return _degree(self, e)

    def odd_indices(self) -> tuple[int, ...]:
        return tuple(k for k, p in enumerate(self.parities) if p)

    def mul(self, e: Mono, f: Mono):
        return _mono_mul(self, e, f)

    def deriv(self, c: Mono, e: Mono):
        return _deriv(self, c, e)

    def coproduct(self, c: Mono, r: int):
        return _coproduct(self, c, r)

    def format_mono(self, e: Mono) -> str:
        parts = []
        for k, x in enumerate(e):
            if x == 1:
                parts.append(self.names[k])
            elif x > 1:
                parts.append(f"{self.names[k]}^{x}")
        return "*".join(parts) if parts else "1"

    def format_deriv(self, c: Mono) -> str:
        parts = []
        for k, x in enumerate(c):
            if x == 1:
                parts.append(f"d[{self.names[k]}]")
            elif x > 1:
                parts.append(f"d[{self.names[k]}]^{x}")
        return "".join(parts) if parts else "1"


@lru_cache(maxsize=None)
def _parity(ring: SuperRing, e: Mono) -> int:
    return sum(x * p for x, p in zip(e, ring.parities)) % 2


@lru_cache(maxsize=None)
def _degree(ring: SuperRing, e: Mono) -> int:
    return sum(x * d for x, d in zip(e, ring.degrees))


@lru_cache(maxsize=1 << 20)
def _mono_mul(ring: SuperRing, e: Mono, f: Mono):
    """z^e · z^f = sign · z^{e+f}, or None when an odd variable repeats."""
    sign = 1
    odd_in_e_after = 0
    # walk variables from the right, counting odd factors of e to the right
    n = ring.size
    for k in range(n - 1, -1, -1):
        if ring.parities[k]:
            if e[k] and f[k]:
                return None
            if f[k] and odd_in_e_after % 2:
                sign = -sign
            odd_in_e_after += e[k]
    return sign, tuple(a + b for a, b in zip(e, f))


@lru_cache(maxsize=1 << 20)
def _deriv(ring: SuperRing, c: Mono, e: Mono):
    """∂^c z^e = coef · z^g, with ∂_N applied first; None when zero."""
    coef = 1
    cur = list(e)
    for k in range(ring.size - 1, -1, -1):
        for _ in range(c[k]):
            if cur[k] == 0:
                return None
            coef *= cur[k]
            if ring.parities[k]:
                odd_before = sum(cur[l] for l in range(k) if ring.parities[l])
                if odd_before % 2:
                    coef = -coef
            cur[k] -= 1
    return coef, tuple(cur)


@lru_cache(maxsize=None)
def _coproduct(ring: SuperRing, c: Mono, r: int):
    """Iterated coproduct of ∂^c into r tensor factors.

    Returns a tuple of (sign, (c_1, …, c_r)); products in the tensor power
    carry the Koszul sign (−1)^{Σ_{i>j}|A_i||B_j|}.
    """
    zero = ring.one()
    terms: dict[tuple[Mono, ...], int] = {tuple([zero] * r): 1}
    for k in range(ring.size):
        for _ in range(c[k]):
            new: dict[tuple[Mono, ...], int] = {}
            pk = ring.parities[k]
            for parts, s in terms.items():
                for j in range(r):
                    if pk and parts[j][k]:
                        continue
                    sgn = s
                    if pk:
                        later = sum(_parity(ring, parts[i]) for i in range(j + 1, r))
                        if later % 2:
                            sgn = -sgn
                    nj = list(parts[j])
                    nj[k] += 1
                    key = parts[:j] + (tuple(nj),) + parts[j + 1:]
                    new[key] = new.get(key, 0) + sgn
            terms = {p: s for p, s in new.items() if s}
    return tuple((s, p) for p, s in sorted(terms.items()))


# ---------------------------------------------------------------------------
# polynomials


def poly_clean(p: Mapping) -> dict:
    return {m: as_scalar(v) for m, v in p.items() if v}


def poly_add(p: Mapping, q: Mapping, scale=1) -> dict:
    out = dict(p)
    for m, v in q.items():
        w = out.get(m, 0) + scale * v
        if w:
            out[m] = w
        else:
            out.pop(m, None)
    return out


def poly_scale(p: Mapping, c) -> dict:
    if not c:
        return {}
    return {m: c * v for m, v in p.items()}


def poly_mul(ring: SuperRing, p: Mapping, q: Mapping) -> dict:
    out: dict = {}
    for e, a in p.items():
        for f, b in q.items():
            r = _mono_mul(ring, e, f)
            if r is None:
                continue
            s, g = r
            w = out.get(g, 0) + s * a * b
            if w:
                out[g] = w
            else:
                out.pop(g, None)
    return out


def poly_deriv(ring: SuperRing, c: Mono, p: Mapping) -> dict:
    out: dict = {}
    for e, a in p.items():
        r = _deriv(ring, c, e)
        if r is None:
            continue
        s, g = r
        w = out.get(g, 0) + s * a
        if w:
            out[g] = w
        else:
            out.pop(g, None)
    return out


def poly_parity_split(ring: SuperRing, p: Mapping) -> dict[int, dict]:
    parts: dict[int, dict] = {}
    for e, a in p.items():
        parts.setdefault(_parity(ring, e), {})[e] = a
    return parts


def right_deriv(ring: SuperRing, k: int, p: Mapping) -> dict:
    """Right partial derivative p ∂⃖_k."""
    out: dict = {}
    var = ring.var(k)
    pk = ring.parities[k]
    for e, a in p.items():
        r = _deriv(ring, var, e)
        if r is None:
            continue
        s, g = r
        if pk and (_parity(ring, e) - pk) % 2:
            s = -s
        w = out.get(g, 0) + s * a
        if w:
            out[g] = w
        else:
            out.pop(g, None)
    return out


# ---------------------------------------------------------------------------
# polydifferential operators


class PolyDiffOp:
    """Finite sum of terms c·z^e·m∘(∂^{D_1}⊗…⊗∂^{D_n}) over a SuperRing."""

    __slots__ = ("ring", "arity", "terms", "_hash")

    def __init__(self, ring: SuperRing, arity: int, terms: Mapping | None = None):
        self.ring = ring
        self.arity = arity
        clean = {}
        if terms:
            for key, v in terms.items():
                e, Ds = key
                if len(Ds) != arity:
                    raise ArgumentError(f"term has {len(Ds)} slots, operator arity is {arity}")
                v = as_scalar(v)
                if v:
                    clean[(tuple(e), tuple(tuple(D) for D in Ds))] = v
        self.terms = clean
        self._hash = None

    # -- construction helpers
    @classmethod
    def zero(cls, ring: SuperRing, arity: int) -> "PolyDiffOp":
        return cls(ring, arity, {})

    @classmethod
    def identity(cls, ring: SuperRing) -> "PolyDiffOp":
        return cls(ring, 1, {(ring.one(), (ring.one(),)): 1})

    @classmethod
    def multiplication(cls, ring: SuperRing, arity: int = 2) -> "PolyDiffOp":
        return cls(ring, arity, {(ring.one(), (ring.one(),) * arity): 1})

    @classmethod
    def constant(cls, ring: SuperRing, poly: Mapping) -> "PolyDiffOp":
        return cls(ring, 0, {(e, ()): v for e, v in poly.items()})

    # -- basic algebra
    def _check(self, other: "PolyDiffOp"):
        if not isinstance(other, PolyDiffOp):
            raise ArgumentError("expected a PolyDiffOp")
        if other.ring != self.ring or other.arity != self.arity:
            raise ArgumentError("operators live in different spaces")

    def __add__(self, other: "PolyDiffOp") -> "PolyDiffOp":
        self._check(other)
        return PolyDiffOp(self.ring, self.arity, poly_add(self.terms, other.terms))

    def __sub__(self, other: "PolyDiffOp") -> "PolyDiffOp":
        self._check(other)
        return PolyDiffOp(self.ring, self.arity, poly_add(self.terms, other.terms, -1))

    def __neg__(self) -> "PolyDiffOp":
        return self.scale(-1)

    def scale(self, c) -> "PolyDiffOp":
        c = as_scalar(c)
        return PolyDiffOp(self.ring, self.arity, {k: c * v for k, v in self.terms.items()})

    def __mul__(self, c):
        return self.scale(c)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolyDiffOp):
            return NotImplemented
        return self.ring == other.ring and self.arity == other.arity and self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.ring, self.arity, frozenset(self.terms.items())))
        return self._hash

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    # -- grading
    def term_degree(self, key) -> int:
        e, Ds = key
        return self.ring.degree(e) - sum(self.ring.degree(D) for D in Ds)

    def term_parity(self, key) -> int:
        e, Ds = key
        return (self.ring.parity(e) + sum(self.ring.parity(D) for D in Ds)) % 2

    def degrees(self) -> set[int]:
        return {self.term_degree(k) for k in self.terms}

    def degree(self) -> int | None:
        ds = self.degrees()
        if len(ds) > 1:
            raise ArgumentError(f"operator is inhomogeneous (degrees {sorted(ds)})")
        return ds.pop() if ds else None

    def max_order(self) -> int:
        return max((sum(D) for _, Ds in self.terms for D in Ds), default=0)

    # -- evaluation
    def apply(self, inputs: Sequence[Mapping]) -> dict:
        if len(inputs) != self.arity:
            raise ArgumentError(f"operator of arity {self.arity} applied to {len(inputs)} inputs")
        ring = self.ring
        split = [poly_parity_split(ring, v) for v in inputs]
        out: dict = {}
        for (e, Ds), c in self.terms.items():
            dpar = [ring.parity(D) for D in Ds]
            choices = []
            for j, D in enumerate(Ds):
                opts = []
                for p, part in split[j].items():
                    val = poly_deriv(ring, D, part)
                    if val:
                        opts.append((p, val))
                if not opts:
                    break
                choices.append(opts)
            else:
                for combo in product(*choices):
                    sign = 1
                    acc = 0
                    for a in range(self.arity):
                        # inputs b < a already counted in acc
                        if dpar[a] and acc % 2:
                            sign = -sign
                        acc += combo[a][0]
                    val = {e: Fraction(c * sign)}
                    for _, dv in combo:
                        val = poly_mul(ring, val, dv)
                        if not val:
                            break
                    if val:
                        out = poly_add(out, val)
        return out

    # -- operadic structure
    def compose(self, i: int, other: "PolyDiffOp") -> "PolyDiffOp":
        """Partial composition self ∘_i other.

        Evaluated on inputs it equals
        (−1)^{|other|(|v_1|+…+|v_{i−1}|)} self(v_1,…,other(v_i,…),…).
        """
        if not 1 <= i <= self.arity:
            raise ArgumentError(f"slot {i} out of range for arity {self.arity}")
        if other.ring != self.ring:
            raise ArgumentError("operators over different rings")
        ring = self.ring
        k = other.arity
        out: dict = {}
        for (e, Ds), a in self.terms.items():
            Di = Ds[i - 1]
            pre_par = sum(ring.parity(D) for D in Ds[: i - 1]) % 2
            post_par = sum(ring.parity(D) for D in Ds[i:]) % 2
            cop = _coproduct(ring, Di, k + 1)
            for (e2, Ds2), b in other.terms.items():
                s0 = -1 if (post_par and self_par_term(ring, e2, Ds2)) else 1
                fpar = [ring.parity(e2)] + [ring.parity(D) for D in Ds2]
                for sD, Es in cop:
                    r0 = _deriv(ring, Es[0], e2)
                    if r0 is None:
                        continue
                    c0, q = r0
                    s1 = 1
                    acc = 0
                    for j in range(k + 1):
                        if ring.parity(Es[j]) and acc % 2:
                            s1 = -s1
                        acc += fpar[j]
                    sign = s0 * sD * s1 * c0
                    Fs = []
                    for l in range(k):
                        rl = _mono_mul(ring, Es[l + 1], Ds2[l])
                        if rl is None:
                            break
                        sign *= rl[0]
                        Fs.append(rl[1])
                    else:
                        if pre_par and ring.parity(q):
                            sign = -sign
                        r3 = _mono_mul(ring, e, q)
                        if r3 is None:
                            continue
                        sign *= r3[0]
                        key = (r3[1], Ds[: i - 1] + tuple(Fs) + Ds[i:])
                        w = out.get(key, 0) + sign * a * b
                        if w:
                            out[key] = w
                        else:
                            out.pop(key, None)
        return PolyDiffOp(ring, self.arity + k - 1, out)

    def permute(self, sigma: Sequence[int]) -> "PolyDiffOp":
        """Op^σ(v_1,…,v_n) = ε·Op(v_σ(1),…,v_σ(n)), ε the Koszul sign of the rearrangement."""
        n = self.arity
        if len(sigma) != n:
            raise ArgumentError("permutation size differs from arity")
        ring = self.ring
        out: dict = {}
        for (e, Ds), c in self.terms.items():
            new = [None] * n
            for a in range(n):
                new[sigma[a] - 1] = Ds[a]
            s = reorder_sign([ring.parity(D) for D in Ds], sigma)
            key = (e, tuple(new))
            w = out.get(key, 0) + s * c
            if w:
                out[key] = w
            else:
                out.pop(key, None)
        return PolyDiffOp(ring, n, out)

    def symmetrize(self) -> "PolyDiffOp":
        """Σ_σ Op^σ over the full symmetric group (no 1/n! factor)."""
        acc: dict = {}
        for sigma in permutations(range(1, self.arity + 1)):
            acc = poly_add(acc, self.permute(sigma).terms)
        return PolyDiffOp(self.ring, self.arity, acc)

    def is_invariant(self) -> bool:
        n = self.arity
        for j in range(1, n):
            sigma = list(range(1, n + 1))
            sigma[j - 1], sigma[j] = sigma[j], sigma[j - 1]
            if self.permute(sigma) != self:
                return False
        return True

    # -- presentation
    def format(self) -> str:
        if not self.terms:
            return "0"
        pieces = []
        for (e, Ds), c in sorted(self.terms.items()):
            slots = " (x) ".join(self.ring.format_deriv(D) for D in Ds)
            pieces.append(f"{c} {self.ring.format_mono(e)} m[{slots}]")
        return " + ".join(pieces)

    def __repr__(self):
        return f"PolyDiffOp(arity={self.arity}, {self.format()})"

    def to_json(self) -> dict:
        return {
            "arity": self.arity,
            "variables": list(self.ring.names),
            "terms": [
                {"coef": str(c), "mono": list(e), "derivs": [list(D) for D in Ds]}
                for (e, Ds), c in sorted(self.terms.items())
            ],
        }

    @classmethod
    def from_json(cls, ring: SuperRing, data: Mapping) -> "PolyDiffOp":
        if list(data.get("variables", ring.names)) != list(ring.names):
            raise ArgumentError("operator variables do not match the context")
        terms = {}
        for t in data["terms"]:
            key = (tuple(t["mono"]), tuple(tuple(D) for D in t["derivs"]))
            terms[key] = terms.get(key, 0) + Fraction(t["coef"])
        return cls(ring, int(data["arity"]), terms)


def self_par_term(ring: SuperRing, e: Mono, Ds: Sequence[Mono]) -> int:
    return (ring.parity(e) + sum(ring.parity(D) for D in Ds)) % 2


def operator_parity(op: PolyDiffOp) -> int:
    pars = {op.term_parity(k) for k in op.terms}
    if len(pars) > 1:
        raise ArgumentError("operator has mixed parity")
    return pars.pop() if pars else 0


def sum_ops(ring: SuperRing, arity: int, ops: Iterable[PolyDiffOp]) -> PolyDiffOp:
    acc: dict = {}
    for op in ops:
        acc = poly_add(acc, op.terms)
    return PolyDiffOp(ring, arity, acc)
