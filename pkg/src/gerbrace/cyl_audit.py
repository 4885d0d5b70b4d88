"""Degree count for derivations of the two-coloured cylinder operad of Λ²coCom.

Generators are corollas of three kinds:

* ``a``: n ≥ 2 inputs of colour α, output α, degree 3 − 2n
* ``b``: n ≥ 2 inputs of colour β, output β, degree 3 − 2n
* ``m``: n ≥ 1 inputs of colour α, output β, degree 2 − 2n

A derivation applied to the mixed generator of arity n is a sum over trees
with n α-coloured leaves and a β-coloured root edge.  Its degree is the sum of
the vertex degrees minus 2 − 2n, and this always equals the number k₁ of
vertices of kind a or b.

Trees are unordered (children are sorted), leaves are labelled 1..n, and a
tree is written as nested tuples: a leaf is its label, an internal vertex is
(kind, child, child, …).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Iterable, Sequence

from .core_algebra import ArgumentError

KINDS = ("a", "b", "m")
# kind -> (input colour, output colour, minimal arity)
_SHAPE = {"a": ("alpha", "alpha", 2), "b": ("beta", "beta", 2), "m": ("alpha", "beta", 1)}


def corolla_degree(kind: str, arity: int) -> int:
    if kind not in _SHAPE:
        raise ArgumentError(f"unknown corolla kind {kind!r}")
    if arity < _SHAPE[kind][2]:
        raise ArgumentError(f"corolla {kind} needs at least {_SHAPE[kind][2]} inputs")
    return 2 - 2 * arity if kind == "m" else 3 - 2 * arity


def _key(t) -> tuple:
    # leaves sort before internal vertices, internal vertices by serialisation
    return (0, t, "") if isinstance(t, int) else (1, 0, serialize(t))


def make_vertex(kind: str, children: Iterable) -> tuple:
    return (kind,) + tuple(sorted(children, key=_key))


def serialize(t) -> str:
    if isinstance(t, int):
        return str(t)
    return t[0] + "(" + ",".join(serialize(c) for c in t[1:]) + ")"


def parse(text: str):
    """Inverse of serialize, e.g. "m(2,5,a(1,3,4))"."""
    pos = 0

    def node():
        nonlocal pos
        if pos >= len(text):
            raise ArgumentError("unexpected end of tree")
        if text[pos].isdigit():
            start = pos
            while pos < len(text) and text[pos].isdigit():
                pos += 1
            return int(text[start:pos])
        kind = text[pos]
        if kind not in _SHAPE or pos + 1 >= len(text) or text[pos + 1] != "(":
            raise ArgumentError(f"bad vertex at position {pos}")
        pos += 2
        kids = [node()]
        while pos < len(text) and text[pos] == ",":
            pos += 1
            kids.append(node())
        if pos >= len(text) or text[pos] != ")":
            raise ArgumentError(f"missing ')' at position {pos}")
        pos += 1
        return make_vertex(kind, kids)

    t = node()
    if pos != len(text):
        raise ArgumentError(f"trailing characters at position {pos}")
    validate(t)
    return t


def _colour(t) -> str:
    return "alpha" if isinstance(t, int) else _SHAPE[t[0]][1]


def vertices(t) -> list[tuple[str, int]]:
    """(kind, number of inputs) for every internal vertex."""
    if isinstance(t, int):
        return []
    out = [(t[0], len(t) - 1)]
    for c in t[1:]:
        out.extend(vertices(c))
    return out


def leaves(t) -> list[int]:
    if isinstance(t, int):
        return [t]
    return [x for c in t[1:] for x in leaves(c)]


def validate(t) -> None:
    """Colour, arity and labelling checks for a tree with a β root edge."""
    def rec(s):
        if isinstance(s, int):
            return
        kind = s[0]
        if kind not in _SHAPE:
            raise ArgumentError(f"unknown corolla kind {kind!r}")
        want, _, least = _SHAPE[kind]
        if len(s) - 1 < least:
            raise ArgumentError(f"vertex {kind} has {len(s) - 1} inputs, needs {least}")
        for c in s[1:]:
            if _colour(c) != want:
                raise ArgumentError(f"edge colour mismatch below a vertex of kind {kind}")
            rec(c)

    if isinstance(t, int) or _colour(t) != "beta":
        raise ArgumentError("the root edge must carry colour β")
    rec(t)
    labels = sorted(leaves(t))
    if labels != list(range(1, len(labels) + 1)):
        raise ArgumentError("leaves must be labelled 1..n exactly once")


# ---------------------------------------------------------------------------
# enumeration by grammar


def _set_partitions(items: tuple[int, ...]):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [(first,) + part[i]] + part[i + 1:]
        yield [(first,)] + part


@lru_cache(maxsize=None)
def _trees(colour: str, labels: tuple[int, ...], k: int) -> tuple:
    """Trees with the given output colour, leaf set and exactly k internal vertices."""
    out = set()
    if colour == "alpha" and len(labels) == 1 and k == 0:
        return (labels[0],)
    if k < 1:
        return ()
    kinds = ("a",) if colour == "alpha" else ("m", "b")
    for kind in kinds:
        child_colour, _, least = _SHAPE[kind]
        for blocks in _set_partitions(labels):
            if len(blocks) < least:
                continue
            for split in _compositions(k - 1, len(blocks)):
                options = [_trees(child_colour, tuple(sorted(b)), kb) for b, kb in zip(blocks, split)]
                for kids in product(*options):
                    out.add(make_vertex(kind, kids))
    return tuple(sorted(out, key=serialize))


def _compositions(total: int, parts: int):
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def enumerate_two_colored_trees(n: int, k: int) -> list:
    """All trees with n labelled α-leaves, a β root edge and k internal vertices."""
    if n < 1 or k < 1:
        raise ArgumentError("need n ≥ 1 and k ≥ 1")
    return list(_trees("beta", tuple(range(1, n + 1)), k))


# ---------------------------------------------------------------------------
# enumeration by parent functions


def enumerate_by_parent_maps(n: int, k: int) -> list:
    """Independent enumerator: kinds for k internal vertices and a parent for every other node."""
    if n < 1 or k < 1:
        raise ArgumentError("need n ≥ 1 and k ≥ 1")
    found = set()
    # internal vertex 0 is the root vertex; nodes 1..k−1 internal, then leaves
    others = list(range(1, k)) + [("leaf", j) for j in range(1, n + 1)]
    for kinds in product(KINDS, repeat=k):
        if _SHAPE[kinds[0]][1] != "beta":
            continue
        for parents in product(range(k), repeat=len(others)):
            t = _build(kinds, others, parents)
            if t is not None:
                found.add(t)
    return sorted(found, key=serialize)


def _build(kinds: Sequence[str], others: list, parents: Sequence[int]):
    children: dict[int, list] = {v: [] for v in range(len(kinds))}
    for node, p in zip(others, parents):
        children[p].append(node)
    # reachability from the root rules out cycles among internal vertices
    seen = set()

    def grow(v):
        if v in seen:
            return None
        seen.add(v)
        kind = kinds[v]
        want, _, least = _SHAPE[kind]
        if len(children[v]) < least:
            return None
        kids = []
        for c in children[v]:
            if isinstance(c, tuple):
                if want != "alpha":
                    return None
                kids.append(c[1])
                continue
            if _SHAPE[kinds[c]][1] != want:
                return None
            sub = grow(c)
            if sub is None:
                return None
            kids.append(sub)
        return make_vertex(kind, kids)

    t = grow(0)
    if t is None or len(seen) != len(kinds):
        return None
    return t


# ---------------------------------------------------------------------------
# the degree count


@dataclass
class DegreeReport:
    tree: str
    n: int
    k: int
    k1: int
    k2: int
    degree: int
    degree_from_arities: int
    edge_identity: bool

    @property
    def ok(self) -> bool:
        return self.edge_identity and self.degree == self.degree_from_arities == self.k1


def degree_identity_check(t, degree_table=corolla_degree) -> DegreeReport:
    """|𝒟| = Σ vertex degrees − |X| with |X| = 2 − 2n, compared with k₁."""
    validate(t)
    vs = vertices(t)
    n = len(leaves(t))
    k1 = sum(1 for kind, _ in vs if kind in "ab")
    k2 = len(vs) - k1
    deg = sum(degree_table(kind, a) for kind, a in vs) - (2 - 2 * n)
    via = 2 * (n - 1) + sum((3 - 2 * a) if kind in "ab" else (2 - 2 * a) for kind, a in vs)
    edges = sum(a - 1 for _, a in vs) == n - 1
    return DegreeReport(serialize(t), n, len(vs), k1, k2, deg, via, edges)


@dataclass
class AuditReport:
    n_max: int
    k_max: int
    reports: list = field(default_factory=list)
    counts: dict = field(default_factory=dict)  # (n, k) -> (grammar count, parent-map count)
    all_mixed: list = field(default_factory=list)
    mismatches: list = field(default_factory=list)  # (n, k) where the two tree sets differ

    @property
    def violations(self) -> list:
        return [r for r in self.reports if not r.ok or (r.k >= 2 and r.degree < 1)]

    @property
    def enumerators_agree(self) -> bool:
        return not self.mismatches and all(a == b for a, b in self.counts.values())

    @property
    def ok(self) -> bool:
        return not self.violations and not self.all_mixed and self.enumerators_agree

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tree", "n", "k", "k1", "degree", "pass"])
        for r in self.reports:
            w.writerow([r.tree, r.n, r.k, r.k1, r.degree, "yes" if r.ok else "no"])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"n_max": self.n_max, "k_max": self.k_max, "trees": len(self.reports),
                "violations": [r.tree for r in self.violations], "all_mixed_with_k_ge_2": self.all_mixed,
                "enumerators_agree": self.enumerators_agree,
                "counts": [{"n": n, "k": k, "grammar": a, "parent_maps": b}
                           for (n, k), (a, b) in sorted(self.counts.items())]}


def no_nonpositive_derivations(n_max: int, k_max: int, cross_check: bool = True) -> AuditReport:
    """Check |𝒟| = k₁ ≥ 1 on every tree with 2 ≤ k ≤ k_max internal vertices and n ≤ n_max leaves.

    Trees made only of mixed corollas would be the sole source of degree ≤ 0;
    they are collected in ``all_mixed`` (expected empty, since a mixed output
    cannot feed a mixed input).
    """
    report = AuditReport(n_max, k_max)
    for n in range(1, n_max + 1):
        for k in range(2, k_max + 1):
            trees = enumerate_two_colored_trees(n, k)
            if cross_check:
                other = enumerate_by_parent_maps(n, k)
                report.counts[(n, k)] = (len(trees), len(other))
                if set(other) != set(trees):
                    report.mismatches.append((n, k))
            for t in trees:
                r = degree_identity_check(t)
                report.reports.append(r)
                if r.k1 == 0:
                    report.all_mixed.append(r.tree)
    return report
