"""Brace trees, their operadic composition and differential.

A tree is a nested tuple ``(label, children)``.  Label i ≥ 1 is the labelled
vertex i, label 0 a neutral vertex; the planted root sits implicitly above
the top node.  Children are planar (ordered).

Composition and differential are transported from the free brace algebra on
formal generators P_1..P_n and an odd generator m.  A tree T corresponds to
the operation

    O_T(P_1,…,P_n) = κ_T(p) · (nested braces read off T),

κ_T the Koszul sign of rearranging m^r P_1 … P_n into depth-first order
(p the shifted parities, m odd), and the basis element T itself is
ω(T)·O_T, where ω(T) is the sign of the labels in depth-first order.  With
this orientation the two-vertex trees add up to the Gerstenhaber bracket.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

from .core_algebra import ArgumentError, InvariantViolation, as_scalar, check_permutation, koszul_sign, reorder_sign

Tree = tuple  # (label, tuple_of_children)

NEUTRAL = 0
T_ID: Tree = (1, ())
T_12: Tree = (1, ((2, ()),))
T_21: Tree = (2, ((1, ()),))
T_CUP: Tree = (0, ((1, ()), (2, ())))
T_CUP_OPP: Tree = (0, ((2, ()), (1, ())))


# ---------------------------------------------------------------------------
# plain tree helpers


def leaf(label: int) -> Tree:
    return (label, ())


def preorder(T: Tree) -> list[int]:
    out = [T[0]]
    for c in T[1]:
        out.extend(preorder(c))
    return out


def tree_arity(T: Tree) -> int:
    return sum(1 for lab in preorder(T) if lab != NEUTRAL)


def neutral_count(T: Tree) -> int:
    return sum(1 for lab in preorder(T) if lab == NEUTRAL)


def edge_count(T: Tree) -> int:
    return len(preorder(T))


def brace_degree(T: Tree) -> int:
    """2·|neutral vertices| − |edges| + 1, the root edge included."""
    return 2 * neutral_count(T) - edge_count(T) + 1


def is_valid(T: Tree) -> bool:
    """Neutral vertices need at least two children; labels are 1..n once each."""
    labels = [lab for lab in preorder(T) if lab != NEUTRAL]
    if sorted(labels) != list(range(1, len(labels) + 1)) or not labels:
        return False
    return _neutral_ok(T)


def _neutral_ok(T: Tree) -> bool:
    if T[0] == NEUTRAL and len(T[1]) < 2:
        return False
    return all(_neutral_ok(c) for c in T[1])


def serialize(T: Tree) -> str:
    head = "m" if T[0] == NEUTRAL else str(T[0])
    if not T[1]:
        return head
    return head + "{" + ",".join(serialize(c) for c in T[1]) + "}"


def parse_tree(text: str) -> Tree:
    """Inverse of :func:`serialize`, e.g. ``"1{2,m{3,4}}"``."""
    pos = 0
    text = text.replace(" ", "")

    def node() -> Tree:
        nonlocal pos
        if pos < len(text) and text[pos] == "m":
            label = NEUTRAL
            pos += 1
        else:
            start = pos
            while pos < len(text) and text[pos].isdigit():
                pos += 1
            if start == pos:
                raise ArgumentError(f"expected a label at position {start} in {text!r}")
            label = int(text[start:pos])
        kids = []
        if pos < len(text) and text[pos] == "{":
            pos += 1
            kids.append(node())
            while text[pos] == ",":
                pos += 1
                kids.append(node())
            if text[pos] != "}":
                raise ArgumentError(f"expected '}}' at position {pos} in {text!r}")
            pos += 1
        return (label, tuple(kids))

    try:
        T = node()
    except IndexError:
        raise ArgumentError(f"unexpected end of tree {text!r}") from None
    if pos != len(text):
        raise ArgumentError(f"trailing characters in tree {text!r}")
    return T


def tree_to_json(T: Tree, planted: bool = True) -> dict:
    def rec(t):
        d = {"kind": "nu", "children": [rec(c) for c in t[1]]} if t[0] == NEUTRAL else \
            {"kind": "lab", "label": t[0], "children": [rec(c) for c in t[1]]}
        return d

    body = rec(T)
    return {"kind": "root", "children": [body]} if planted else body


def tree_from_json(data: Mapping) -> Tree:
    if data.get("kind") == "root":
        kids = data.get("children", [])
        if len(kids) != 1:
            raise ArgumentError("the root of a planted tree has exactly one child")
        data = kids[0]
    kind = data.get("kind")
    children = tuple(tree_from_json(c) for c in data.get("children", []))
    if kind == "nu":
        return (NEUTRAL, children)
    if kind == "lab":
        return (int(data["label"]), children)
    raise ArgumentError(f"unknown vertex kind {kind!r}")


def ascii_tree(T: Tree) -> str:
    """Drawing with the root at the bottom, vertices written as labels or 'o'."""
    lines: list[str] = []

    def rec(t, prefix: str, last: bool):
        name = "o" if t[0] == NEUTRAL else str(t[0])
        lines.append(prefix + ("`-- " if last else "|-- ") + name)
        child_prefix = prefix + ("    " if last else "|   ")
        for j, c in enumerate(t[1]):
            rec(c, child_prefix, j == len(t[1]) - 1)

    lines.append("root")
    rec(T, "", True)
    return "\n".join(lines)


def relabel(T: Tree, mapping: Mapping[int, int]) -> Tree:
    lab = T[0] if T[0] == NEUTRAL else mapping.get(T[0], T[0])
    return (lab, tuple(relabel(c, mapping) for c in T[1]))


# ---------------------------------------------------------------------------
# signs


def omega(T: Tree) -> int:
    """Sign of the permutation listing the labels in depth-first order."""
    labels = [lab for lab in preorder(T) if lab != NEUTRAL]
    return reorder_sign([1] * len(labels), [lab for lab in labels]) if labels else 1


def _symbol_parity(label: int, par: Mapping[int, int]) -> int:
    return 1 if label == NEUTRAL else par.get(label, 0) % 2


def kappa(T: Tree, par: Mapping[int, int]) -> int:
    """Koszul sign of m^r P_1 … P_n → depth-first word (m's kept in DFS order)."""
    word = preorder(T)
    r = sum(1 for lab in word if lab == NEUTRAL)
    # canonical position of every DFS symbol
    targets_of_dfs = []
    m_seen = 0
    for lab in word:
        if lab == NEUTRAL:
            targets_of_dfs.append(m_seen)
            m_seen += 1
        else:
            targets_of_dfs.append(r + lab - 1)
    # reorder_sign moves item a to position target[a]; here we go canonical → DFS
    canon_par = [0] * len(word)
    dfs_pos = [0] * len(word)
    for pos, (lab, tgt) in enumerate(zip(word, targets_of_dfs)):
        canon_par[tgt] = _symbol_parity(lab, par)
        dfs_pos[tgt] = pos
    return reorder_sign(canon_par, dfs_pos)


def tree_sign_data(T: Tree, shifted_degrees: Sequence[int]) -> int:
    """ω(T)·κ_T for inputs of the given shifted degrees (used by the cochain action)."""
    par = {i + 1: d % 2 for i, d in enumerate(shifted_degrees)}
    return omega(T) * kappa(T, par)


def dfs_word(T: Tree) -> list[int]:
    return preorder(T)


# ---------------------------------------------------------------------------
# free brace algebra: grafting with Koszul signs


def _annotate(T: Tree, start: int) -> tuple[tuple, int]:
    uid = start
    kids = []
    nxt = start + 1
    for c in T[1]:
        ac, nxt = _annotate(c, nxt)
        kids.append(ac)
    return (T[0], uid, tuple(kids)), nxt


def _strip(A) -> Tree:
    return (A[0], tuple(_strip(c) for c in A[2]))


def _uids(A) -> list[int]:
    out = [A[1]]
    for c in A[2]:
        out.extend(_uids(c))
    return out


def _attach(A, ys: Sequence, j: int):
    """All ways to attach ys[j:] (in order) below the vertices of A.

    Yields (new annotated tree, index of first unused y).
    """
    label, uid, kids = A
    k = len(ys)

    def rec(pos: int, jj: int, acc: tuple):
        # gap before kids[pos] (or final gap when pos == len(kids))
        for stop in range(jj, k + 1):
            gap = tuple(ys[jj:stop])
            if pos == len(kids):
                yield acc + gap, stop
                continue
            for sub, nj in _attach(kids[pos], ys, stop):
                yield from rec(pos + 1, nj, acc + gap + (sub,))

    for new_kids, nj in rec(0, j, ()):
        yield (label, uid, new_kids), nj


def graft(X: Tree, Ys: Sequence[Tree], par: Mapping[int, int]) -> dict[Tree, int]:
    """X{Y_1,…,Y_k} in the free brace algebra, as {tree: sign}."""
    AX, nxt = _annotate(X, 0)
    ays = []
    for Y in Ys:
        AY, nxt = _annotate(Y, nxt)
        ays.append(AY)
    labels_by_uid = {}
    for A in [AX] + ays:
        for lab, uid in zip(preorder(_strip(A)), _uids(A)):
            labels_by_uid[uid] = lab
    parities = [_symbol_parity(labels_by_uid[u], par) for u in range(nxt)]
    out: dict[Tree, int] = {}
    for A, j in _attach(AX, ays, 0):
        if j != len(ays):
            continue
        order = _uids(A)
        target = [0] * nxt
        for pos, u in enumerate(order):
            target[u] = pos
        s = reorder_sign(parities, target)
        T = _strip(A)
        out[T] = out.get(T, 0) + s
    return {T: s for T, s in out.items() if s}


def _replace_at(T: Tree, path: tuple[int, ...], new: Tree) -> Tree:
    if not path:
        return new
    label, kids = T
    j = path[0]
    return (label, kids[:j] + (_replace_at(kids[j], path[1:], new),) + kids[j + 1:])


def _find_label(T: Tree, label: int, path=()) -> tuple[int, ...] | None:
    if T[0] == label:
        return path
    for j, c in enumerate(T[1]):
        p = _find_label(c, label, path + (j,))
        if p is not None:
            return p
    return None


def _subtree(T: Tree, path: tuple[int, ...]) -> Tree:
    for j in path:
        T = T[1][j]
    return T


def _vertex_paths(T: Tree, path=()):
    yield path, T[0]
    for j, c in enumerate(T[1]):
        yield from _vertex_paths(c, path + (j,))


def substitute_at(T: Tree, path: tuple[int, ...], E: Mapping[Tree, Fraction],
                  par: Mapping[int, int]) -> dict[Tree, Fraction]:
    """Replace the vertex at ``path`` by the value E, grafting its children onto E."""
    node = _subtree(T, path)
    out: dict[Tree, Fraction] = {}
    for Et, c in E.items():
        for G, s in graft(Et, node[1], par).items():
            R = _replace_at(T, path, G)
            out[R] = out.get(R, 0) + c * s
    return {R: v for R, v in out.items() if v}


def _add_into(acc: dict, other: Mapping, scale=1) -> None:
    for k, v in other.items():
        w = acc.get(k, 0) + scale * v
        if w:
            acc[k] = w
        else:
            acc.pop(k, None)


# ---------------------------------------------------------------------------
# elements of the operad


class BraceElement:
    """Finite linear combination of brace trees of a fixed arity."""

    __slots__ = ("arity", "terms")

    def __init__(self, arity: int, terms: Mapping[Tree, object] | None = None, check: bool = True):
        self.arity = arity
        clean = {}
        for T, v in (terms or {}).items():
            v = as_scalar(v)
            if not v:
                continue
            if check:
                if not is_valid(T):
                    raise ArgumentError(f"invalid brace tree {serialize(T)}")
                if tree_arity(T) != arity:
                    raise ArgumentError(f"tree {serialize(T)} does not have arity {arity}")
            clean[T] = clean.get(T, 0) + v
        self.terms = {T: v for T, v in clean.items() if v}

    @classmethod
    def of(cls, T: Tree, coef=1) -> "BraceElement":
        return cls(tree_arity(T), {T: coef})

    def __add__(self, other: "BraceElement") -> "BraceElement":
        if other.arity != self.arity:
            raise ArgumentError("arity mismatch")
        acc = dict(self.terms)
        _add_into(acc, other.terms)
        return BraceElement(self.arity, acc, check=False)

    def __sub__(self, other: "BraceElement") -> "BraceElement":
        return self + other.scale(-1)

    def scale(self, c) -> "BraceElement":
        c = as_scalar(c)
        return BraceElement(self.arity, {T: c * v for T, v in self.terms.items()}, check=False)

    def __eq__(self, other) -> bool:
        return isinstance(other, BraceElement) and self.arity == other.arity and self.terms == other.terms

    def __hash__(self):
        return hash((self.arity, frozenset(self.terms.items())))

    def is_zero(self) -> bool:
        return not self.terms

    def degrees(self) -> set[int]:
        return {brace_degree(T) for T in self.terms}

    def format(self) -> str:
        if not self.terms:
            return "0"
        return " + ".join(f"{v}*{serialize(T)}" for T, v in sorted(self.terms.items(), key=lambda kv: tree_key(kv[0])))

    __repr__ = format

    def to_json(self) -> dict:
        return {"arity": self.arity,
                "terms": [{"coef": str(v), "tree": serialize(T)}
                          for T, v in sorted(self.terms.items(), key=lambda kv: tree_key(kv[0]))]}

    @classmethod
    def from_json(cls, data: Mapping) -> "BraceElement":
        terms: dict = {}
        for t in data["terms"]:
            T = parse_tree(t["tree"]) if isinstance(t["tree"], str) else tree_from_json(t["tree"])
            terms[T] = terms.get(T, 0) + Fraction(t.get("coef", "1"))
        return cls(int(data["arity"]), terms)


def tree_key(T: Tree):
    return (neutral_count(T), serialize(T))


# ---------------------------------------------------------------------------
# enumeration


@lru_cache(maxsize=None)
def _planar_shapes(size: int) -> tuple:
    """Planar rooted trees with ``size`` vertices, as nested tuples of children."""
    if size == 1:
        return ((),)
    return tuple(kids for kids in _forests(size - 1))


@lru_cache(maxsize=None)
def _forests(size: int) -> tuple:
    if size == 0:
        return ((),)
    out = []
    for first in range(1, size + 1):
        for head in _planar_shapes(first):
            for tail in _forests(size - first):
                out.append((head,) + tail)
    return tuple(out)


def _shape_vertices(shape, path=()):
    yield path, len(shape)
    for j, c in enumerate(shape):
        yield from _shape_vertices(c, path + (j,))


def _fill(shape, assignment: dict, path=()) -> Tree:
    return (assignment[path], tuple(_fill(c, assignment, path + (j,)) for j, c in enumerate(shape)))


def enumerate_brace_trees(n: int, max_neutral: int) -> list[Tree]:
    """All brace trees of arity n with at most ``max_neutral`` neutral vertices."""
    from itertools import combinations, permutations

    if n < 1:
        raise ArgumentError("arity must be positive")
    if max_neutral < 0:
        raise ArgumentError("neutral cap must be non-negative")
    out = set()
    for r in range(0, max_neutral + 1):
        for shape in _planar_shapes(n + r):
            verts = list(_shape_vertices(shape))
            for neutral in combinations(range(len(verts)), r):
                if any(verts[v][1] < 2 for v in neutral):
                    continue
                labelled = [v for v in range(len(verts)) if v not in neutral]
                for perm in permutations(range(1, n + 1)):
                    assignment = {verts[v][0]: NEUTRAL for v in neutral}
                    for v, lab in zip(labelled, perm):
                        assignment[verts[v][0]] = lab
                    out.add(_fill(shape, assignment))
    return sorted(out, key=tree_key)


# ---------------------------------------------------------------------------
# operadic composition


def _generic_parities(par: Mapping[int, int] | None, n: int) -> dict[int, int]:
    return {i: (par or {}).get(i, 0) % 2 for i in range(1, n + 1)}


def compose_trees(T: Tree, i: int, Tp: Tree, par: Mapping[int, int] | None = None) -> dict[Tree, Fraction]:
    """T ∘_i T′ on basis trees.  ``par`` fixes formal parities of the final inputs;
    the result does not depend on them (this is checked in the tests)."""
    n, k = tree_arity(T), tree_arity(Tp)
    if not 1 <= i <= n:
        raise ArgumentError(f"slot {i} out of range for arity {n}")
    p = _generic_parities(par, n + k - 1)
    r_prime = neutral_count(Tp)
    # parities seen by T: the i-th input is the value of O_{T'}
    p_outer = {}
    for j in range(1, n + 1):
        if j < i:
            p_outer[j] = p[j]
        elif j > i:
            p_outer[j] = p[j + k - 1]
        else:
            p_outer[j] = (r_prime + sum(p[l] for l in range(i, i + k))) % 2
    p_inner = {j: p[j + i - 1] for j in range(1, k + 1)}
    sign = omega(T) * omega(Tp) * kappa(T, p_outer) * kappa(Tp, p_inner)
    if r_prime % 2 and sum(p[j] for j in range(1, i)) % 2:
        sign = -sign
    PLACE = -1
    outer_map = {j: (j if j < i else j + k - 1) for j in range(1, n + 1) if j != i}
    outer_map[i] = PLACE
    T_rel = relabel(T, outer_map)
    Tp_rel = relabel(Tp, {j: j + i - 1 for j in range(1, k + 1)})
    path = _find_label(T_rel, PLACE)
    value = substitute_at(T_rel, path, {Tp_rel: Fraction(1)}, p)
    out: dict[Tree, Fraction] = {}
    for R, c in value.items():
        out[R] = out.get(R, 0) + sign * c * kappa(R, p) * omega(R)
    return {R: v for R, v in out.items() if v}


def brace_compose(X: BraceElement, i: int, Y: BraceElement, par: Mapping[int, int] | None = None) -> BraceElement:
    if not 1 <= i <= X.arity:
        raise ArgumentError(f"slot {i} out of range for arity {X.arity}")
    acc: dict = {}
    for T, a in X.terms.items():
        for Tp, b in Y.terms.items():
            _add_into(acc, compose_trees(T, i, Tp, par), a * b)
    for R in acc:
        if not is_valid(R):
            raise InvariantViolation(f"composition produced invalid tree {serialize(R)}")
    return BraceElement(X.arity + Y.arity - 1, acc, check=False)


def relabel_element(X: BraceElement, sigma: Sequence[int], par: Mapping[int, int] | None = None) -> BraceElement:
    """Right action X^σ, with X^σ(P_1,…,P_n) = ε·X(P_σ(1),…,P_σ(n))."""
    sigma = check_permutation(sigma)
    n = X.arity
    if len(sigma) != n:
        raise ArgumentError("permutation size differs from arity")
    p = _generic_parities(par, n)
    eps = koszul_sign(sigma, [p[a] for a in range(1, n + 1)])
    p_pulled = {a: p[sigma[a - 1]] for a in range(1, n + 1)}
    mapping = {a: sigma[a - 1] for a in range(1, n + 1)}
    acc: dict = {}
    for T, c in X.terms.items():
        R = relabel(T, mapping)
        s = eps * omega(T) * kappa(T, p_pulled) * kappa(R, p) * omega(R)
        _add_into(acc, {R: c * s})
    return BraceElement(n, acc, check=False)


# ---------------------------------------------------------------------------
# differential


def _ad_m(value: Mapping[Tree, Fraction], par: Mapping[int, int]) -> dict[Tree, Fraction]:
    """[m, X] = m{X} − (−1)^{|X|} X{m} on a homogeneous value X."""
    out: dict[Tree, Fraction] = {}
    m_leaf = (NEUTRAL, ())
    for X, c in value.items():
        parity = sum(_symbol_parity(lab, par) for lab in preorder(X)) % 2
        _add_into(out, {(NEUTRAL, (X,)): c})
        s = 1 if parity else -1
        for G, g in graft(X, [m_leaf], par).items():
            _add_into(out, {G: s * c * g})
    return out


def _tree_differential(T: Tree, par: Mapping[int, int]) -> dict[Tree, Fraction]:
    """κ_T·(ad_m − D)(expr_T) as free-brace-algebra trees, D the vertex derivation."""
    value = {T: Fraction(1)}
    out = _ad_m(value, par)
    word = preorder(T)
    before = 0
    m_leaf = (NEUTRAL, ())
    for (path, lab), sym in zip(_vertex_paths(T), word):
        sgn = -1 if before % 2 else 1
        base = leaf(lab)
        E = _ad_m({base: Fraction(1)}, par)
        # on m itself ad_m(m) = 2·m{m}; only m{m} keeps the neutral-vertex condition
        weight = Fraction(1, 2) if lab == NEUTRAL else 1
        _add_into(out, substitute_at(T, path, E, par), -sgn * weight)
        before += _symbol_parity(lab, par)
    return out


def tree_differential(T: Tree, par: Mapping[int, int] | None = None) -> dict[Tree, Fraction]:
    n = tree_arity(T)
    p = _generic_parities(par, n)
    raw = _tree_differential(T, p)
    sign = omega(T) * kappa(T, p)
    out: dict[Tree, Fraction] = {}
    for R, c in raw.items():
        _add_into(out, {R: sign * c * kappa(R, p) * omega(R)})
    return out


def brace_differential(X: BraceElement, par: Mapping[int, int] | None = None) -> BraceElement:
    acc: dict = {}
    for T, c in X.terms.items():
        _add_into(acc, tree_differential(T, par), c)
    bad = [R for R in acc if not is_valid(R)]
    if bad:
        raise InvariantViolation("differential left trees violating the neutral-vertex condition: "
                                 + ", ".join(serialize(R) for R in bad[:5]))
    return BraceElement(X.arity, acc, check=False)


@dataclass
class DSquaredReport:
    arity: int
    max_neutral: int
    trees_checked: int
    violations: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {"arity": self.arity, "max_neutral": self.max_neutral, "trees_checked": self.trees_checked,
                "violations": self.violations, "seconds": round(self.seconds, 3), "ok": self.ok}


def check_d_squared(n: int, max_neutral: int) -> DSquaredReport:
    start = time.perf_counter()
    trees = enumerate_brace_trees(n, max_neutral)
    report = DSquaredReport(n, max_neutral, len(trees))
    for T in trees:
        dd = brace_differential(brace_differential(BraceElement.of(T)))
        if not dd.is_zero():
            report.violations.append({"tree": serialize(T), "d2": dd.format()})
    report.seconds = time.perf_counter() - start
    return report


def block_permutation(sigma: Sequence[int], i: int, k: int) -> tuple[int, tuple[int, ...]]:
    """(b, τ) with X^σ ∘_i Y = (X ∘_b Y)^τ for Y of arity k."""
    sigma = check_permutation(sigma)
    n = len(sigma)
    if not 1 <= i <= n:
        raise ArgumentError(f"slot {i} out of range for arity {n}")
    b = sigma.index(i) + 1
    tau: list[int] = []
    for a in range(1, n + 1):
        if a == b:
            tau.extend(range(i, i + k))
        else:
            s = sigma[a - 1]
            tau.append(s if s < i else s + k - 1)
    return b, tuple(tau)
