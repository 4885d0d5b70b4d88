"""Free Λ⁻²Ger-algebra on labelled generators b_1..b_n.

A monomial is a tuple of factors; each factor is a tuple of generator
indices (a_1,…,a_p) standing for the right-nested bracket
{b_{a_1},{b_{a_2},…,{b_{a_{p−1}}, b_{a_p}}…}} with a_p the largest index of
the factor.  Factors are listed by increasing largest index.

Signs.  Expressions denote operations: the product is even and symmetric,
the bracket λ is odd and S_2-invariant, and a tree of operations denotes
their operadic composite (left-to-right, Koszul signs included).  In a
Gerstenhaber algebra with odd Poisson bracket {,} one has
λ(u, v) = (−1)^{|u|+1}{u, v}.  A factor with p letters has parity p − 1.

The rewriting itself runs in the tensor algebra on odd letters y_i, where
[u, v] = uv − (−1)^{|u||v|} vu models {,} on even generators; a right-nested
basis word is the unique tensor monomial ending in its largest letter.
Evaluated on even inputs, an expression in λ differs from the same
expression in {,} by a sign fixed by its shape, which converts between the
two.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import permutations
from typing import Iterable, Mapping, Sequence

from .core_algebra import ArgumentError, ExactMatrix, as_scalar, reorder_sign
from .polydiff import SuperRing, poly_add, poly_mul, poly_scale

Factor = tuple  # tuple[int, ...]
GerMonomial = tuple  # tuple[Factor, ...]


# ---------------------------------------------------------------------------
# monomials


def factor_parity(f: Factor) -> int:
    return (len(f) - 1) % 2


def monomial_parity(m: GerMonomial) -> int:
    return sum(factor_parity(f) for f in m) % 2


def monomial_arity(m: GerMonomial) -> int:
    return sum(len(f) for f in m)


def monomial_degree(m: GerMonomial) -> int:
    """n + t − 2 for n generators in t factors."""
    return monomial_arity(m) + len(m) - 2


def is_normal(m: GerMonomial) -> bool:
    letters = [a for f in m for a in f]
    if sorted(letters) != list(range(1, len(letters) + 1)):
        return False
    if any(f[-1] != max(f) for f in m):
        return False
    return all(m[j][-1] < m[j + 1][-1] for j in range(len(m) - 1))


def format_factor(f: Factor) -> str:
    if len(f) == 1:
        return f"b{f[0]}"
    return "{b%d,%s}" % (f[0], format_factor(f[1:]))


def format_monomial(m: GerMonomial) -> str:
    return "".join(format_factor(f) for f in m) if m else "1"


def factor_to_json(f: Factor):
    if len(f) == 1:
        return ["b", [f[0]]]
    if len(f) == 2:
        return ["br", [f[0], f[1]]]
    return ["br", [f[0], factor_to_json(f[1:])]]


def factor_from_json(data) -> Factor:
    kind, body = data
    if kind == "b":
        return (int(body[0]),)
    if kind != "br":
        raise ArgumentError(f"unknown factor kind {kind!r}")
    head, rest = body
    tail = (int(rest),) if isinstance(rest, int) else factor_from_json(rest)
    return (int(head),) + tail


def monomial_to_json(m: GerMonomial) -> list:
    return [factor_to_json(f) for f in m]


def monomial_from_json(data) -> GerMonomial:
    m = tuple(factor_from_json(f) for f in data)
    if not is_normal(m):
        raise ArgumentError(f"not a normal-form monomial: {data!r}")
    return m


# ---------------------------------------------------------------------------
# basis


def _set_partitions(items: tuple[int, ...]):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [(first,)] + part
        for j in range(len(part)):
            yield part[:j] + [(first,) + part[j]] + part[j + 1:]


def _basis_key(m: GerMonomial):
    return (-len(m), m)


@lru_cache(maxsize=None)
def _basis(n: int) -> tuple:
    out = []
    for blocks in _set_partitions(tuple(range(1, n + 1))):
        options = []
        for block in blocks:
            top = max(block)
            rest = [a for a in block if a != top]
            options.append([tuple(p) + (top,) for p in permutations(rest)])
        for choice in _cartesian(options):
            out.append(tuple(sorted(choice, key=lambda f: f[-1])))
    return tuple(sorted(out, key=_basis_key))


def _cartesian(options):
    if not options:
        yield ()
        return
    for head in options[0]:
        for tail in _cartesian(options[1:]):
            yield (head,) + tail


def enumerate_basis(n: int) -> list[GerMonomial]:
    """Normal-form monomials spanning Λ⁻²Ger(n): most factors first, then lexicographic."""
    if n < 1:
        raise ArgumentError("arity must be positive")
    return list(_basis(n))


# ---------------------------------------------------------------------------
# bracket words via the tensor algebra


def _word_tensor(f: Factor) -> dict:
    if len(f) == 1:
        return {f: 1}
    return _tensor_bracket({(f[0],): 1}, _word_tensor(f[1:]))


def _tensor_bracket(u: Mapping, v: Mapping) -> dict:
    out: dict = {}
    for a, x in u.items():
        for b, y in v.items():
            s = -1 if (len(a) * len(b)) % 2 else 1
            for w, c in ((a + b, x * y), (b + a, -s * x * y)):
                val = out.get(w, 0) + c
                if val:
                    out[w] = val
                else:
                    out.pop(w, None)
    return out


def _tensor_to_words(t: Mapping) -> dict:
    out = {}
    for w, c in t.items():
        if w[-1] == max(w):
            out[w] = c
    return out


@lru_cache(maxsize=None)
def _bracket_words(f: Factor, g: Factor) -> tuple:
    """{f, g} of two bracket words, expanded in right-nested basis words."""
    t = _tensor_bracket(_word_tensor(f), _word_tensor(g))
    return tuple(sorted(_tensor_to_words(t).items()))


# ---------------------------------------------------------------------------
# elements


def _sort_factors(factors: Sequence[Factor]) -> tuple[GerMonomial, int]:
    order = sorted(range(len(factors)), key=lambda j: factors[j][-1])
    targets = [0] * len(factors)
    for pos, j in enumerate(order):
        targets[j] = pos
    s = reorder_sign([factor_parity(f) for f in factors], targets)
    return tuple(factors[j] for j in order), s


class GerElement:
    """Linear combination of normal-form monomials on generators 1..arity."""

    __slots__ = ("arity", "terms")

    def __init__(self, arity: int, terms: Mapping[GerMonomial, object] | None = None, check: bool = True):
        self.arity = arity
        clean = {}
        for m, v in (terms or {}).items():
            m = tuple(tuple(f) for f in m)
            v = as_scalar(v)
            if not v:
                continue
            if check and (not is_normal(m) or monomial_arity(m) != arity):
                raise ArgumentError(f"{format_monomial(m)} is not a normal monomial of arity {arity}")
            clean[m] = clean.get(m, 0) + v
        self.terms = {m: v for m, v in clean.items() if v}

    @classmethod
    def of(cls, m: GerMonomial, coef=1) -> "GerElement":
        return cls(monomial_arity(m), {m: coef})

    def __add__(self, other: "GerElement") -> "GerElement":
        if self.arity != other.arity:
            raise ArgumentError("arity mismatch")
        acc = dict(self.terms)
        for m, v in other.terms.items():
            acc[m] = acc.get(m, 0) + v
        return GerElement(self.arity, acc, check=False)

    def __sub__(self, other: "GerElement") -> "GerElement":
        return self + other.scale(-1)

    def scale(self, c) -> "GerElement":
        c = as_scalar(c)
        return GerElement(self.arity, {m: c * v for m, v in self.terms.items()}, check=False)

    def __eq__(self, other) -> bool:
        return isinstance(other, GerElement) and self.arity == other.arity and self.terms == other.terms

    def __hash__(self):
        return hash((self.arity, frozenset(self.terms.items())))

    def is_zero(self) -> bool:
        return not self.terms

    def degrees(self) -> set[int]:
        return {monomial_degree(m) for m in self.terms}

    def is_homogeneous(self) -> bool:
        return len(self.degrees()) <= 1

    def coefficient(self, m: GerMonomial) -> Fraction:
        return self.terms.get(tuple(m), Fraction(0))

    def format(self) -> str:
        if not self.terms:
            return "0"
        return " + ".join(f"{v}*{format_monomial(m)}" for m, v in sorted(self.terms.items(), key=lambda kv: _basis_key(kv[0])))

    __repr__ = format

    def to_json(self) -> dict:
        return {"arity": self.arity,
                "terms": [{"coef": str(v), "monomial": monomial_to_json(m)}
                          for m, v in sorted(self.terms.items(), key=lambda kv: _basis_key(kv[0]))]}

    @classmethod
    def from_json(cls, data: Mapping) -> "GerElement":
        return cls(int(data["arity"]), {monomial_from_json(t["monomial"]): Fraction(t["coef"]) for t in data["terms"]})


def dual_pairing(dual_of: GerMonomial, x: GerElement) -> Fraction:
    """⟨m*, x⟩: the coefficient of m in x (the dual basis is Kronecker)."""
    return x.coefficient(dual_of)


# raw products of factor lists -------------------------------------------------


def _raw_product(A: Mapping, B: Mapping) -> dict:
    out: dict = {}
    for a, x in A.items():
        for b, y in B.items():
            m, s = _sort_factors(a + b)
            out[m] = out.get(m, 0) + s * x * y
    return {m: v for m, v in out.items() if v}


def _expand_factors(prefix: tuple, lie: Sequence, suffix: tuple, coef) -> dict:
    out: dict = {}
    for w, c in lie:
        m, s = _sort_factors(prefix + (w,) + suffix)
        out[m] = out.get(m, 0) + s * c * coef
    return out


def _raw_bracket(A: Mapping, B: Mapping) -> dict:
    """{X, Y} for X, Y given as {monomial: coef}, by the two Leibniz rules."""
    out: dict = {}
    for F, x in A.items():
        pF = [factor_parity(f) for f in F]
        for G, y in B.items():
            pG = [factor_parity(g) for g in G]
            shiftG = (sum(pG) - 1) % 2
            for i, f in enumerate(F):
                s1 = -1 if (shiftG * sum(pF[i + 1:])) % 2 else 1
                shiftF = (pF[i] - 1) % 2
                for j, g in enumerate(G):
                    s2 = -1 if (shiftF * sum(pG[:j])) % 2 else 1
                    lie = _bracket_words(f, g)
                    inner = G[:j] + (None,) + G[j + 1:]
                    full_prefix = F[:i] + inner[:j]
                    full_suffix = inner[j + 1:] + F[i + 1:]
                    for m, v in _expand_factors(full_prefix, lie, full_suffix, s1 * s2 * x * y).items():
                        out[m] = out.get(m, 0) + v
    return {m: v for m, v in out.items() if v}


# expressions -----------------------------------------------------------------
#   ("b", i) | ("prod", e1, e2, …) | ("br", e1, e2)


def expr_generators(expr) -> list[int]:
    if expr[0] == "b":
        return [int(expr[1])]
    return [g for sub in expr[1:] for g in expr_generators(sub)]


def _normalize_raw(expr) -> dict:
    kind = expr[0]
    if kind == "b":
        return {((int(expr[1]),),): Fraction(1)}
    if kind == "prod":
        acc = {(): Fraction(1)}
        for sub in expr[1:]:
            acc = _raw_product(acc, _normalize_raw(sub))
        return acc
    if kind == "br":
        if len(expr) != 3:
            raise ArgumentError("a bracket takes exactly two arguments")
        return _raw_bracket(_normalize_raw(expr[1]), _normalize_raw(expr[2]))
    raise ArgumentError(f"unknown expression node {kind!r}")


def _shape_sign(expr) -> tuple[int, int]:
    """(sign, parity) with λ-expression = sign · {,}-expression on even inputs."""
    kind = expr[0]
    if kind == "b":
        return 1, 0
    parts = [_shape_sign(e) for e in expr[1:]]
    sign = 1
    for s, _ in parts:
        sign *= s
    parity = sum(p for _, p in parts) % 2
    if kind == "br":
        if parts[0][1] == 0:
            sign = -sign
        parity = (parity + 1) % 2
    return sign, parity


def _normalize_operadic(expr) -> dict:
    sign, _ = _shape_sign(expr)
    out = {}
    for m, c in _normalize_raw(expr).items():
        # monomial shape sign: each bracket of a right-nested word meets an even left input
        ms = -1 if (monomial_arity(m) - len(m)) % 2 else 1
        out[m] = sign * ms * c
    return out


def normalize(expr) -> GerElement:
    """Expand a product/bracket expression in distinct generators in the monomial basis."""
    if isinstance(expr, str):
        expr = parse_expression(expr)
    gens = expr_generators(expr)
    if len(set(gens)) != len(gens):
        raise ArgumentError("repeated generator in expression")
    if sorted(gens) != list(range(1, len(gens) + 1)):
        raise ArgumentError("generators must be exactly b1..bn")
    return GerElement(len(gens), _normalize_operadic(expr), check=False)


def factor_expr(f: Factor):
    if len(f) == 1:
        return ("b", f[0])
    return ("br", ("b", f[0]), factor_expr(f[1:]))


def monomial_expr(m: GerMonomial):
    if len(m) == 1:
        return factor_expr(m[0])
    return ("prod",) + tuple(factor_expr(f) for f in m)


def parse_expression(text: str):
    """Parse e.g. ``"b1{b2,b3b4}"``: juxtaposition is the product, braces the bracket."""
    s = text.replace(" ", "")
    pos = 0

    def product():
        nonlocal pos
        items = [atom()]
        while pos < len(s) and s[pos] in "b{(":
            items.append(atom())
        return items[0] if len(items) == 1 else ("prod",) + tuple(items)

    def atom():
        nonlocal pos
        if pos >= len(s):
            raise ArgumentError(f"unexpected end of {text!r}")
        ch = s[pos]
        if ch == "b":
            pos += 1
            start = pos
            while pos < len(s) and s[pos].isdigit():
                pos += 1
            if start == pos:
                raise ArgumentError(f"generator index missing in {text!r}")
            return ("b", int(s[start:pos]))
        if ch == "{":
            pos += 1
            left = product()
            expect(",")
            right = product()
            expect("}")
            return ("br", left, right)
        if ch == "(":
            pos += 1
            inner = product()
            expect(")")
            return inner
        raise ArgumentError(f"unexpected {ch!r} in {text!r}")

    def expect(ch):
        nonlocal pos
        if pos >= len(s) or s[pos] != ch:
            raise ArgumentError(f"expected {ch!r} at position {pos} in {text!r}")
        pos += 1

    out = product()
    if pos != len(s):
        raise ArgumentError(f"trailing characters in {text!r}")
    return out


def _relabel_expr(expr, mapping: Mapping[int, int]):
    if expr[0] == "b":
        return ("b", mapping[int(expr[1])])
    return (expr[0],) + tuple(_relabel_expr(e, mapping) for e in expr[1:])


def _substitute_expr(expr, label: int, replacement):
    if expr[0] == "b":
        return replacement if int(expr[1]) == label else expr
    return (expr[0],) + tuple(_substitute_expr(e, label, replacement) for e in expr[1:])


# composition ---------------------------------------------------------------------


def compose_monomials(m: GerMonomial, i: int, mp: GerMonomial) -> GerElement:
    n = monomial_arity(m)
    if not 1 <= i <= n:
        raise ArgumentError(f"slot {i} out of range for arity {n}")
    return GerElement(n + monomial_arity(mp) - 1, _compose_cached(m, i, mp), check=False)


@lru_cache(maxsize=1 << 18)
def _compose_cached(m: GerMonomial, i: int, mp: GerMonomial) -> dict:
    n, k = monomial_arity(m), monomial_arity(mp)
    outer = {j: (j if j < i else j + k - 1) for j in range(1, n + 1) if j != i}
    outer[i] = -1
    inner = _relabel_expr(monomial_expr(mp), {j: j + i - 1 for j in range(1, k + 1)})
    expr = _substitute_expr(_relabel_expr(monomial_expr(m), outer), -1, inner)
    raw = _normalize_operadic(expr)
    # the grafted tree composes m' before the brackets met after leaf i
    if monomial_parity(mp) and _brackets_after_leaf(monomial_expr(m), i) % 2:
        raw = {key: -v for key, v in raw.items()}
    return raw


def _brackets_after_leaf(expr, label: int) -> int:
    seen = False
    count = 0

    def walk(e):
        nonlocal seen, count
        if e[0] == "b":
            if int(e[1]) == label:
                seen = True
            return
        if seen and e[0] == "br":
            count += 1
        for sub in e[1:]:
            walk(sub)

    walk(expr)
    return count


def ger_compose(x: GerElement, i: int, y: GerElement) -> GerElement:
    if not 1 <= i <= x.arity:
        raise ArgumentError(f"slot {i} out of range for arity {x.arity}")
    acc = GerElement(x.arity + y.arity - 1)
    for m, a in x.terms.items():
        for mp, b in y.terms.items():
            acc = acc + compose_monomials(m, i, mp).scale(a * b)
    return acc


def relabel(x: GerElement, sigma: Sequence[int]) -> GerElement:
    """Rename b_a to b_{σ(a)} and normalise (generators are even: no sign)."""
    sigma = tuple(int(a) for a in sigma)
    if sorted(sigma) != list(range(1, x.arity + 1)):
        raise ArgumentError("not a permutation")
    acc: dict = {}
    for m, c in x.terms.items():
        for mm, v in relabel_monomial(m, sigma).items():
            acc[mm] = acc.get(mm, 0) + c * v
    return GerElement(x.arity, acc, check=False)


@lru_cache(maxsize=1 << 18)
def relabel_monomial(m: GerMonomial, sigma: tuple) -> dict:
    """Normal form of a single relabelled monomial, as {monomial: coefficient}."""
    mapping = {a: sigma[a - 1] for a in range(1, len(sigma) + 1)}
    return _normalize_operadic(_relabel_expr(monomial_expr(m), mapping))


# cooperad components ----------------------------------------------------------


def _shape_data(n: int, top: Sequence[int]):
    top = tuple(sorted(int(a) for a in top))
    if not top or len(set(top)) != len(top) or top[0] < 1 or top[-1] > n:
        raise ArgumentError(f"top corolla {top} is not a non-empty subset of 1..{n}")
    a = len(top)
    bottom = sorted(set(range(1, n + 1)) - set(top) | {top[0]})
    slot = bottom.index(top[0]) + 1
    # labels of the composite x ∘_slot y, mapped back to 1..n
    mapping = {}
    for j, lab in enumerate(bottom, start=1):
        if j < slot:
            mapping[j] = lab
        elif j > slot:
            mapping[j + a - 1] = lab
    for l, lab in enumerate(top, start=1):
        mapping[slot + l - 1] = lab
    return top, bottom, slot, mapping


def graft_along(x: GerElement, y: GerElement, n: int, top: Sequence[int]) -> GerElement:
    """Composite of the two-level tree whose top corolla carries the labels ``top``."""
    top, bottom, slot, mapping = _shape_data(n, top)
    if x.arity != len(bottom) or y.arity != len(top):
        raise ArgumentError("element arities do not fit the shape")
    composite = ger_compose(x, slot, y)
    sigma = [mapping[j] for j in range(1, n + 1)]
    return relabel(composite, sigma)


def composition_matrix(n: int, top: Sequence[int]) -> ExactMatrix:
    """Columns: pairs (x, y) of basis monomials; rows: basis of arity n."""
    top, bottom, _, _ = _shape_data(n, top)
    rows_basis = enumerate_basis(n)
    index = {m: r for r, m in enumerate(rows_basis)}
    pairs = [(x, y) for x in enumerate_basis(len(bottom)) for y in enumerate_basis(len(top))]
    entries = {}
    for c, (x, y) in enumerate(pairs):
        z = graft_along(GerElement.of(x), GerElement.of(y), n, top)
        for m, v in z.terms.items():
            entries[(index[m], c)] = v
    return ExactMatrix(len(rows_basis), len(pairs), entries)


def cooperad_delta(n: int, top: Sequence[int]) -> ExactMatrix:
    """Comultiplication component Ger∨(n) → Ger∨(bottom) ⊗ Ger∨(top) in dual bases.

    Rows index the pairs (x*, y*), columns the dual basis of arity n.  Each
    entry is the pairing ⟨z*, graft(x, y)⟩.
    """
    top, bottom, _, _ = _shape_data(n, top)
    cols = enumerate_basis(n)
    pairs = [(x, y) for x in enumerate_basis(len(bottom)) for y in enumerate_basis(len(top))]
    entries = {}
    for r, (x, y) in enumerate(pairs):
        z = graft_along(GerElement.of(x), GerElement.of(y), n, top)
        for c, m in enumerate(cols):
            v = dual_pairing(m, z)
            if v:
                entries[(r, c)] = v
    return ExactMatrix(len(pairs), len(cols), entries)


def delta_pair_index(n: int, top: Sequence[int]) -> list[tuple[GerMonomial, GerMonomial]]:
    top, bottom, _, _ = _shape_data(n, top)
    return [(x, y) for x in enumerate_basis(len(bottom)) for y in enumerate_basis(len(top))]


# evaluation in a Gerstenhaber algebra --------------------------------------------


class GrassmannEnvelope:
    """Evaluate free expressions on polyvectors through even stand-ins ε_i·v_i.

    Each input v_i is multiplied by a fresh auxiliary generator ε_i of the
    same parity, making it even.  Expressions are then evaluated literally
    with the wedge product and λ(u, v) = (−1)^{|u|+1}{u, v}; on even inputs no
    further Koszul signs arise.
    """

    def __init__(self, ctx, inputs: Sequence):
        from .polyvector_hochschild import schouten_terms

        self._schouten = schouten_terms
        self.ctx = ctx
        base = ctx.va_ring
        pars = [v.parity() for v in inputs]
        self.ring = SuperRing(base.names + tuple(f"e{i}" for i in range(1, len(inputs) + 1)),
                              base.parities + tuple(pars),
                              base.degrees + tuple(pars))
        extra = len(inputs)
        self.values = []
        for j, v in enumerate(inputs):
            eps = [0] * extra
            eps[j] = 1
            lifted = {tuple(e) + (0,) * extra: c for e, c in v.terms.items()}
            self.values.append(poly_mul(self.ring, {(0,) * base.size + tuple(eps): 1}, lifted))

    def bracket(self, u: Mapping, v: Mapping) -> dict:
        pars = {self.ring.parity(e) for e in u}
        if len(pars) > 1:
            raise ArgumentError("bracket argument of mixed parity")
        val = self._schouten(self.ring, self.ctx.d, u, v)
        return val if pars == {1} else poly_scale(val, -1)

    def evaluate(self, expr) -> dict:
        kind = expr[0]
        if kind == "b":
            return dict(self.values[int(expr[1]) - 1])
        if kind == "prod":
            acc = {self.ring.one(): Fraction(1)}
            for sub in expr[1:]:
                acc = poly_mul(self.ring, acc, self.evaluate(sub))
            return acc
        if kind == "br":
            return self.bracket(self.evaluate(expr[1]), self.evaluate(expr[2]))
        raise ArgumentError(f"unknown expression node {kind!r}")

    def evaluate_element(self, x: GerElement) -> dict:
        acc: dict = {}
        for m, c in x.terms.items():
            acc = poly_add(acc, poly_scale(self.evaluate(monomial_expr(m)), c))
        return acc


def expression_operator(expr, ctx):
    """The multilinear operator on V_A denoted by an expression.

    Products become the wedge operator and brackets the S_2-invariant odd
    operator; subtrees are composed left to right and the leaf order is
    applied as a permutation.  This is a route to the operad structure that
    shares no code with the rewriting above.
    """
    from .polydiff import PolyDiffOp
    from .polyvector_hochschild import bracket_operator, wedge_operator

    ring = ctx.va_ring
    wedge_op, br_op = wedge_operator(ctx), bracket_operator(ctx)

    def planar(e):
        kind = e[0]
        if kind == "b":
            return PolyDiffOp.identity(ring)
        subs = [planar(x) for x in e[1:]]
        if kind == "br":
            head = br_op
        elif len(subs) == 1:
            return subs[0]
        else:
            head = wedge_op
            while len(subs) > 2:
                # fold n-ary products to the left
                subs = [_parallel(wedge_op, subs[:2])] + subs[2:]
        return _parallel(head, subs)

    leaves = expr_generators(expr)
    return planar(expr).permute(leaves)


def _parallel(head, subs):
    out = head
    pos = 1
    for sub in subs:
        out = out.compose(pos, sub)
        pos += sub.arity
    return out
