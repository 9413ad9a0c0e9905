"""Max-plus algebra over saturating nanosecond intervals.

The carrier set is the intervals of :mod:`calsim.timekit`: integers with
+/- infinity sentinels. Addition is max, multiplication is saturating
integer addition, with one extra convention: -inf annihilates products even
against +inf, so a missing edge stays missing no matter what it is combined
with. This is what makes sparse matrices behave like graphs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

from .timekit import INF, NEG_INF, format_interval, interval_add, interval_sub


class ShapeError(ValueError):
    """Operand dimensions do not conform."""


class PositiveCycleError(ValueError):
    """The matrix has a positive-weight cycle; the Kleene star diverges."""

    def __init__(self, cycle: tuple[int, ...]):
        self.cycle = cycle
        path = " -> ".join(str(i) for i in cycle + cycle[:1])
        super().__init__(f"positive-weight cycle: {path}")


class CycleClass(enum.Enum):
    NEGATIVE = "negative"
    ZERO = "zero"
    POSITIVE = "positive"


def mp_mul(a: int, b: int) -> int:
    """Scalar product: saturating add with -inf as annihilator."""
    if a == NEG_INF or b == NEG_INF:
        return NEG_INF
    return interval_add(a, b)


def mp_add(a: int, b: int) -> int:
    """Scalar sum: max."""
    return a if a >= b else b


Vector = tuple[int, ...]


@dataclass(frozen=True)
class MaxPlusMatrix:
    """A square matrix of intervals; -inf entries mean "no edge"."""

    rows: tuple[Vector, ...]

    def __post_init__(self) -> None:
        n = len(self.rows)
        for row in self.rows:
            if len(row) != n:
                raise ShapeError(f"matrix is not square: {n} rows, row of {len(row)}")

    @property
    def n(self) -> int:
        return len(self.rows)

    def __getitem__(self, ij: tuple[int, int]) -> int:
        i, j = ij
        return self.rows[i][j]

    @staticmethod
    def from_rows(rows: Iterable[Sequence[int]]) -> MaxPlusMatrix:
        return MaxPlusMatrix(tuple(tuple(row) for row in rows))

    @staticmethod
    def identity(n: int) -> MaxPlusMatrix:
        return MaxPlusMatrix(
            tuple(tuple(0 if i == j else NEG_INF for j in range(n)) for i in range(n))
        )

    @staticmethod
    def full(n: int, value: int) -> MaxPlusMatrix:
        return MaxPlusMatrix(tuple(tuple(value for _ in range(n)) for _ in range(n)))

    def __str__(self) -> str:
        return "\n".join(
            "[" + ", ".join(format_interval(v) for v in row) + "]" for row in self.rows
        )


def mp_mat_mul(a: MaxPlusMatrix, b: MaxPlusMatrix) -> MaxPlusMatrix:
    """Matrix product: result[i][k] = max_j (a[i][j] + b[j][k])."""
    if a.n != b.n:
        raise ShapeError(f"dimension mismatch: {a.n} vs {b.n}")
    n = a.n
    out = []
    for i in range(n):
        row = []
        for k in range(n):
            best = NEG_INF
            for j in range(n):
                best = mp_add(best, mp_mul(a.rows[i][j], b.rows[j][k]))
            row.append(best)
        out.append(tuple(row))
    return MaxPlusMatrix(tuple(out))


def mp_mat_vec(a: MaxPlusMatrix, v: Vector) -> Vector:
    """Matrix-vector product in max-plus."""
    if a.n != len(v):
        raise ShapeError(f"dimension mismatch: {a.n} vs {len(v)}")
    out = []
    for i in range(a.n):
        best = NEG_INF
        for j in range(a.n):
            best = mp_add(best, mp_mul(a.rows[i][j], v[j]))
        out.append(best)
    return tuple(out)


def mp_vec_add(u: Vector, v: Vector) -> Vector:
    if len(u) != len(v):
        raise ShapeError(f"dimension mismatch: {len(u)} vs {len(v)}")
    return tuple(mp_add(a, b) for a, b in zip(u, v))


def mp_mat_add(a: MaxPlusMatrix, b: MaxPlusMatrix) -> MaxPlusMatrix:
    if a.n != b.n:
        raise ShapeError(f"dimension mismatch: {a.n} vs {b.n}")
    return MaxPlusMatrix(
        tuple(tuple(mp_add(x, y) for x, y in zip(ra, rb)) for ra, rb in zip(a.rows, b.rows))
    )


def classify_cycles(g: MaxPlusMatrix) -> CycleClass:
    """Sign of the maximum cycle mean, via diagonals of the matrix powers.

    (g^k)[i][i] is the best closed walk of length k through i; any closed
    walk decomposes into cycles, so checking k <= n decides the sign. A
    matrix with no cycles at all classifies as negative.
    """
    n = g.n
    if n == 0:
        return CycleClass.NEGATIVE
    power = g
    saw_zero = False
    for _ in range(n):
        for i in range(n):
            d = power.rows[i][i]
            if d > 0 and d != NEG_INF:
                return CycleClass.POSITIVE
            if d == 0:
                saw_zero = True
        power = mp_mat_mul(power, g)
    return CycleClass.ZERO if saw_zero else CycleClass.NEGATIVE


def find_positive_cycle(g: MaxPlusMatrix) -> tuple[int, ...]:
    """Recover one positive-weight cycle as a node sequence.

    Walk-weight DP with parent pointers; the first closed walk of positive
    weight is trimmed to a simple cycle.
    """
    n = g.n
    # best[k][v] = (weight, parent) of the heaviest length-k walk start->v
    for start in range(n):
        best: list[dict[int, tuple[int, int]]] = [dict() for _ in range(n + 1)]
        best[0][start] = (0, -1)
        for k in range(1, n + 1):
            for u, (w, _) in best[k - 1].items():
                for v in range(n):
                    edge = g.rows[u][v]
                    if edge == NEG_INF:
                        continue
                    cand = mp_mul(w, edge)
                    if v not in best[k] or cand > best[k][v][0]:
                        best[k][v] = (cand, u)
            if start in best[k] and best[k][start][0] > 0:
                # reconstruct the closed walk, then trim to a simple cycle
                walk = [start]
                node, kk = start, k
                while kk > 0:
                    node = best[kk][node][1]
                    walk.append(node)
                    kk -= 1
                walk.reverse()
                seen: dict[int, int] = {}
                for idx, v in enumerate(walk):
                    if v in seen:
                        return tuple(walk[seen[v]:idx])
                    seen[v] = idx
                return tuple(walk[:-1])
    raise ValueError("no positive cycle present")


def kleene_star(g: MaxPlusMatrix) -> MaxPlusMatrix:
    """g* = I + g + g^2 + ... + g^(n-1); requires no positive cycle."""
    if classify_cycles(g) is CycleClass.POSITIVE:
        raise PositiveCycleError(find_positive_cycle(g))
    star = MaxPlusMatrix.identity(g.n)
    power = MaxPlusMatrix.identity(g.n)
    for _ in range(max(g.n - 1, 0)):
        power = mp_mat_mul(power, g)
        star = mp_mat_add(star, power)
    return star


def build_gamma(
    latency: MaxPlusMatrix,
    inconsistency: MaxPlusMatrix,
    offsets: Vector,
) -> MaxPlusMatrix:
    """Elementwise latency[i][j] - inconsistency[i][j] - offsets[j].

    An infinite inconsistency tolerance means the peer can never force a
    wait, so the entry becomes -inf (no edge) rather than attempting
    inf - inf arithmetic.
    """
    n = latency.n
    if inconsistency.n != n or len(offsets) != n:
        raise ShapeError("latency, inconsistency, and offsets must conform")
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            c = inconsistency.rows[i][j]
            if c == INF:
                row.append(NEG_INF)
                continue
            row.append(interval_sub(interval_sub(latency.rows[i][j], c), offsets[j]))
        rows.append(tuple(row))
    return MaxPlusMatrix(tuple(rows))


def cal_unavailability(gamma: MaxPlusMatrix, offsets: Vector) -> Vector:
    """Worst-case unavailability vector A = (I + gamma) O."""
    return mp_mat_vec(mp_mat_add(MaxPlusMatrix.identity(gamma.n), gamma), offsets)


@dataclass(frozen=True)
class OffsetSolution:
    """Result of solving O = Z + gamma*O for the processing offsets."""

    offsets: Vector
    cycle_class: CycleClass
    warning: str | None = None
    witness_cycle: tuple[int, ...] | None = None


def pessimistic_offsets(gamma: MaxPlusMatrix, z: Vector) -> OffsetSolution:
    """Least processing offsets satisfying O = Z + gamma*O.

    Negative cycle weights give the unique solution gamma* Z. Zero-weight
    cycles still yield a solution, flagged as possibly non-unique. A
    positive cycle has no finite solution: every node would wait forever,
    reported as all-infinity offsets with the witness cycle.
    """
    if gamma.n != len(z):
        raise ShapeError(f"dimension mismatch: {gamma.n} vs {len(z)}")
    klass = classify_cycles(gamma)
    if klass is CycleClass.POSITIVE:
        cycle = find_positive_cycle(gamma)
        return OffsetSolution(
            offsets=tuple(INF for _ in z),
            cycle_class=klass,
            warning="positive cycle: every node must wait forever",
            witness_cycle=cycle,
        )
    offsets = mp_mat_vec(kleene_star(gamma), z)
    warning = None
    if klass is CycleClass.ZERO:
        warning = "zero-weight cycle present: solution may not be unique"
    return OffsetSolution(offsets=offsets, cycle_class=klass, warning=warning)
