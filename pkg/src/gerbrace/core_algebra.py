"""Exact scalars, Koszul signs, shuffles and deterministic rational linear algebra."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from math import gcd
from typing import Iterable, Mapping, Sequence

Scalar = Fraction


class ArgumentError(ValueError):
    """Malformed input to a public operation."""


class InvariantViolation(RuntimeError):
    """A checked mathematical identity failed."""


def as_scalar(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x)


def scalar_str(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


# ---------------------------------------------------------------------------
# permutations and signs


def check_permutation(perm: Sequence[int]) -> tuple[int, ...]:
    perm = tuple(int(p) for p in perm)
    if sorted(perm) != list(range(1, len(perm) + 1)):
        raise ArgumentError(f"not a permutation of 1..{len(perm)}: {perm}")
    return perm


def koszul_sign(perm: Sequence[int], degs: Sequence[int]) -> int:
    """Sign of v_1⊗…⊗v_m ↦ v_perm(1)⊗…⊗v_perm(m).

    ``degs[j-1]`` is the degree of ``v_j``.  Each inversion of two odd
    vectors contributes a factor −1.
    """
    if len(perm) != len(degs):
        raise ArgumentError("permutation and degree tuple differ in length")
    perm = check_permutation(perm)
    odd = [degs[p - 1] % 2 for p in perm]
    sign = 1
    m = len(perm)
    for i in range(m):
        if not odd[i]:
            continue
        for j in range(i + 1, m):
            if odd[j] and perm[i] > perm[j]:
                sign = -sign
    return sign


def reorder_sign(parities: Sequence[int], targets: Sequence[int]) -> int:
    """Koszul sign for moving item a (parity ``parities[a]``) to position ``targets[a]``."""
    sign = 1
    n = len(targets)
    for a in range(n):
        if not parities[a] % 2:
            continue
        for b in range(a + 1, n):
            if parities[b] % 2 and targets[a] > targets[b]:
                sign = -sign
    return sign


def perm_product(sigma: Sequence[int], tau: Sequence[int]) -> tuple[int, ...]:
    """Rearrange by ``tau`` and then by ``sigma``: i ↦ tau(sigma(i))."""
    if len(sigma) != len(tau):
        raise ArgumentError("permutations of different size")
    return tuple(tau[s - 1] for s in sigma)


def permute_degrees(degs: Sequence[int], tau: Sequence[int]) -> tuple[int, ...]:
    return tuple(degs[t - 1] for t in tau)


def inverse_perm(perm: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(perm)
    for i, p in enumerate(perm, start=1):
        inv[p - 1] = i
    return tuple(inv)


@lru_cache(maxsize=None)
def _shuffles(blocks: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
    n = sum(blocks)
    out: list[tuple[int, ...]] = []

    def rec(k: int, remaining: tuple[int, ...], acc: list[tuple[int, ...]]):
        if k == len(blocks):
            images = [v for block in acc for v in block]
            out.append(tuple(images))
            return
        for chosen in combinations(remaining, blocks[k]):
            rest = tuple(v for v in remaining if v not in chosen)
            rec(k + 1, rest, acc + [chosen])

    rec(0, tuple(range(1, n + 1)), [])
    out.sort()
    return tuple(out)


def shuffles(*blocks: int) -> list[tuple[int, ...]]:
    """All (p_1,…,p_k)-shuffles, lexicographic in their image sequences."""
    if any(p < 0 for p in blocks):
        raise ArgumentError("block sizes must be non-negative")
    return list(_shuffles(tuple(int(p) for p in blocks)))


# ---------------------------------------------------------------------------
# exact matrices


@dataclass(frozen=True)
class ExactMatrix:
    rows: int
    cols: int
    entries: Mapping[tuple[int, int], Fraction] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for (r, c), v in self.entries.items():
            if not (0 <= r < self.rows and 0 <= c < self.cols):
                raise ArgumentError(f"entry ({r},{c}) outside {self.rows}x{self.cols}")
            v = as_scalar(v)
            if v:
                clean[(r, c)] = v
        object.__setattr__(self, "entries", clean)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence]) -> "ExactMatrix":
        nr = len(rows)
        nc = len(rows[0]) if nr else 0
        ent = {}
        for i, row in enumerate(rows):
            if len(row) != nc:
                raise ArgumentError("ragged rows")
            for j, v in enumerate(row):
                if v:
                    ent[(i, j)] = as_scalar(v)
        return cls(nr, nc, ent)

    @classmethod
    def identity(cls, n: int) -> "ExactMatrix":
        return cls(n, n, {(i, i): Fraction(1) for i in range(n)})

    @classmethod
    def zero(cls, rows: int, cols: int) -> "ExactMatrix":
        return cls(rows, cols, {})

    def to_rows(self) -> list[list[Fraction]]:
        out = [[Fraction(0)] * self.cols for _ in range(self.rows)]
        for (r, c), v in self.entries.items():
            out[r][c] = v
        return out

    def transpose(self) -> "ExactMatrix":
        return ExactMatrix(self.cols, self.rows, {(c, r): v for (r, c), v in self.entries.items()})

    def matvec(self, x: Sequence) -> list[Fraction]:
        if len(x) != self.cols:
            raise ArgumentError("dimension mismatch in matvec")
        out = [Fraction(0)] * self.rows
        for (r, c), v in self.entries.items():
            if x[c]:
                out[r] += v * x[c]
        return out

    def vecmat(self, y: Sequence) -> list[Fraction]:
        if len(y) != self.rows:
            raise ArgumentError("dimension mismatch in vecmat")
        out = [Fraction(0)] * self.cols
        for (r, c), v in self.entries.items():
            if y[r]:
                out[c] += y[r] * v
        return out

    def row_dicts(self) -> list[dict[int, Fraction]]:
        rows: list[dict[int, Fraction]] = [dict() for _ in range(self.rows)]
        for (r, c), v in self.entries.items():
            rows[r][c] = v
        return rows


# ---------------------------------------------------------------------------
# fraction-free elimination


def _integer_row(row: Mapping[int, Fraction]) -> dict[int, int]:
    den = 1
    for v in row.values():
        den = den * v.denominator // gcd(den, v.denominator)
    return _primitive({c: int(v * den) for c, v in row.items() if v})


def _primitive(row: dict[int, int]) -> dict[int, int]:
    g = 0
    for v in row.values():
        g = gcd(g, v)
        if g == 1:
            break
    if g > 1:
        row = {c: v // g for c, v in row.items()}
    if row and row[min(row)] < 0:
        row = {c: -v for c, v in row.items()}
    return row


def _combine(p: int, row: dict[int, int], q: int, piv: dict[int, int]) -> dict[int, int]:
    """p·row − q·piv, dropping zeros."""
    out = {c: p * v for c, v in row.items()} if p != 1 else dict(row)
    for c, v in piv.items():
        w = out.get(c, 0) - q * v
        if w:
            out[c] = w
        else:
            out.pop(c, None)
    return out


class _Echelon:
    """Incrementally maintained integer echelon form keyed by pivot column."""

    def __init__(self):
        self.pivots: dict[int, dict[int, int]] = {}
        self.order: list[int] = []  # pivot columns, sorted

    def reduce(self, row: dict[int, int]) -> dict[int, int]:
        while row:
            lead = min(row)
            piv = self.pivots.get(lead)
            if piv is None:
                # eliminate remaining known pivot columns beyond the lead lazily
                return row
            a, b = piv[lead], row[lead]
            g = gcd(a, b)
            row = _primitive(_combine(a // g, row, b // g, piv))
        return row

    def insert(self, row: dict[int, int]) -> int | None:
        row = self.reduce(row)
        if not row:
            return None
        lead = min(row)
        self.pivots[lead] = _primitive(row)
        lo, hi = 0, len(self.order)
        while lo < hi:
            mid = (lo + hi) // 2
            if self.order[mid] < lead:
                lo = mid + 1
            else:
                hi = mid
        self.order.insert(lo, lead)
        return lead

    def rref(self) -> dict[int, dict[int, Fraction]]:
        """Reduced rows with pivot entry 1 (unique for the row space)."""
        done: dict[int, dict[int, int]] = {}
        for lead in reversed(self.order):
            row = self.pivots[lead]
            for c in [c for c in row if c != lead and c in done]:
                if c not in row:
                    continue
                piv = done[c]
                a, b = piv[c], row[c]
                g = gcd(a, b)
                row = _combine(a // g, row, b // g, piv)
            done[lead] = _primitive(row)
        out = {}
        for lead, row in done.items():
            p = row[lead]
            out[lead] = {c: Fraction(v, p) for c, v in row.items()}
        return out


def row_reduce(A: ExactMatrix) -> dict[int, dict[int, Fraction]]:
    """Reduced row echelon form as {pivot column: row}."""
    ech = _Echelon()
    for row in A.row_dicts():
        if row:
            ech.insert(_integer_row(row))
    return ech.rref()


def rank(A: ExactMatrix) -> int:
    ech = _Echelon()
    for row in A.row_dicts():
        if row:
            ech.insert(_integer_row(row))
    return len(ech.order)


def nullspace(A: ExactMatrix) -> list[list[Fraction]]:
    """Basis of {x : A·x = 0}, one vector per non-pivot column."""
    R = row_reduce(A)
    basis = []
    for f in range(A.cols):
        if f in R:
            continue
        x = [Fraction(0)] * A.cols
        x[f] = Fraction(1)
        for lead, row in R.items():
            v = row.get(f)
            if v:
                x[lead] = -v
        basis.append(x)
    return basis


@dataclass(frozen=True)
class SolveResult:
    solution: list[Fraction] | None = None
    certificate: list[Fraction] | None = None

    @property
    def ok(self) -> bool:
        return self.solution is not None


def solve_exact(A: ExactMatrix, b: Sequence) -> SolveResult:
    """Solve A·x = b exactly; free variables are set to zero.

    When the system is inconsistent the result carries a row vector y with
    y·A = 0 and y·b ≠ 0 instead.
    """
    if len(b) != A.rows:
        raise ArgumentError(f"right-hand side has length {len(b)}, expected {A.rows}")
    b = [as_scalar(v) for v in b]
    aug_rows = A.row_dicts()
    for i, v in enumerate(b):
        if v:
            aug_rows[i][A.cols] = v
    ech = _Echelon()
    for row in aug_rows:
        if row:
            ech.insert(_integer_row(row))
    if A.cols in ech.pivots:
        return SolveResult(certificate=_certificate(A, b))
    R = ech.rref()
    x = [Fraction(0)] * A.cols
    for lead, row in R.items():
        x[lead] = row.get(A.cols, Fraction(0))
    return SolveResult(solution=x)


def _certificate(A: ExactMatrix, b: Sequence[Fraction]) -> list[Fraction]:
    for y in nullspace(A.transpose()):
        if sum((yi * bi for yi, bi in zip(y, b)), Fraction(0)) != 0:
            return y
    raise InvariantViolation("inconsistent system without a left-kernel witness")


class SparseSystem:
    """Column-keyed builder for linear systems whose unknowns and equations are labelled."""

    def __init__(self):
        self.col_index: dict = {}
        self.row_index: dict = {}
        self.entries: dict[tuple[int, int], Fraction] = {}

    def column(self, key) -> int:
        if key not in self.col_index:
            self.col_index[key] = len(self.col_index)
        return self.col_index[key]

    def row(self, key) -> int:
        if key not in self.row_index:
            self.row_index[key] = len(self.row_index)
        return self.row_index[key]

    def add_column(self, key, vector: Mapping) -> None:
        c = self.column(key)
        for rk, v in vector.items():
            if v:
                r = self.row(rk)
                self.entries[(r, c)] = self.entries.get((r, c), Fraction(0)) + as_scalar(v)

    def matrix(self) -> ExactMatrix:
        return ExactMatrix(len(self.row_index), len(self.col_index), self.entries)

    def rhs(self, vector: Mapping) -> list[Fraction]:
        for rk in vector:
            self.row(rk)
        b = [Fraction(0)] * len(self.row_index)
        for rk, v in vector.items():
            b[self.row_index[rk]] += as_scalar(v)
        return b


def dot(x: Iterable, y: Iterable) -> Fraction:
    return sum((a * b for a, b in zip(x, y)), Fraction(0))


class IndependenceFilter:
    """Accepts sparse vectors (keyed by arbitrary hashables) that are independent of those seen so far."""

    def __init__(self):
        self._ech = _Echelon()
        self._index: dict = {}

    def add(self, vector: Mapping) -> bool:
        row = {self._index.setdefault(k, len(self._index)): as_scalar(v) for k, v in vector.items() if v}
        if not row:
            return False
        return self._ech.insert(_integer_row(row)) is not None

    @property
    def rank(self) -> int:
        return len(self._ech.order)
