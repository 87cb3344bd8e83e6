"""Exact set algebra on unions of full tower levels.

A :class:`LevelSet` at stage ``J`` is a canonical list of half-open level
ranges ``[lo, hi)`` inside ``[0, n_J)``.  Level ``l`` of the stage-``J``
tower is the union of levels ``offset_J(i) + l`` of the stage-``J+1`` tower,
so any set can be re-expressed one stage up (:func:`lift_once`).  Inside a
tower ``T`` moves level ``l`` to ``l + 1`` for every ``l < n_J - 1``, which
makes ``T**m`` a plain shift once enough headroom has been gained by lifting.

Only non-negative powers are supported.  Negative powers are never needed:
``m(T^p A & T^q B) = m(A & T^(q-p) B)`` for ``q >= p``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .tower import SchemaError, TowerSchema

Interval = tuple[int, int]


class DepthExhausted(RuntimeError):
    """The schema is too shallow to represent the requested set."""

    def __init__(self, message: str, required_stage: int | None = None):
        super().__init__(message)
        self.required_stage = required_stage


def canonical(intervals: Iterable[Sequence[int]]) -> tuple[Interval, ...]:
    """Sort, drop empties, merge overlapping and adjacent ranges."""
    items = sorted((int(lo), int(hi)) for lo, hi in intervals if int(hi) > int(lo))
    out: list[list[int]] = []
    for lo, hi in items:
        if out and lo <= out[-1][1]:
            if hi > out[-1][1]:
                out[-1][1] = hi
        else:
            out.append([lo, hi])
    return tuple((lo, hi) for lo, hi in out)


@dataclass(frozen=True)
class LevelSet:
    stage: int
    intervals: tuple[Interval, ...]

    @classmethod
    def make(cls, stage: int, intervals: Iterable[Sequence[int]],
             schema: TowerSchema | None = None) -> "LevelSet":
        ivs = canonical(intervals)
        if ivs and ivs[0][0] < 0:
            raise ValueError(f"negative level {ivs[0][0]}")
        if schema is not None:
            n = schema.height(stage)
            if ivs and ivs[-1][1] > n:
                raise ValueError(f"level {ivs[-1][1] - 1} outside stage-{stage} tower of height {n}")
        return cls(stage, ivs)

    @classmethod
    def empty(cls, stage: int) -> "LevelSet":
        return cls(stage, ())

    def is_empty(self) -> bool:
        return not self.intervals

    def count(self) -> int:
        """Number of levels."""
        return sum(hi - lo for lo, hi in self.intervals)

    def top(self) -> int:
        """Highest level index, or -1 for the empty set."""
        return self.intervals[-1][1] - 1 if self.intervals else -1

    def shift(self, m: int) -> "LevelSet":
        return LevelSet(self.stage, tuple((lo + m, hi + m) for lo, hi in self.intervals))

    def levels(self) -> list[int]:
        """Explicit level indices; only sensible for small sets."""
        return [x for lo, hi in self.intervals for x in range(lo, hi)]

    def to_json(self) -> dict:
        return {"stage": self.stage,
                "intervals": [[str(lo), str(hi)] for lo, hi in self.intervals]}

    @classmethod
    def from_json(cls, doc, schema: TowerSchema | None = None) -> "LevelSet":
        return cls.make(int(doc["stage"]),
                        [(int(lo), int(hi)) for lo, hi in doc["intervals"]], schema)


def _resolve_max_stage(schema: TowerSchema, max_stage: int | None) -> int:
    if max_stage is None:
        return schema.top_stage
    return min(int(max_stage), schema.top_stage)


def tower_set(schema: TowerSchema, j: int) -> LevelSet:
    """The whole stage-``j`` tower ``X_j``."""
    return LevelSet(j, ((0, schema.height(j)),))


def base_set(schema: TowerSchema, j: int) -> LevelSet:
    """The bottom level ``E_j`` of the stage-``j`` tower."""
    schema.height(j)
    return LevelSet(j, ((0, 1),))


def column_base(schema: TowerSchema, j: int, i: int) -> LevelSet:
    """Sub-base ``E_j^i``: bottom of column ``i``, expressed at stage ``j+1``."""
    offs = schema.column_offsets(j)
    if not 1 <= i <= len(offs):
        raise SchemaError(f"column {i} out of range 1..{len(offs)} at stage {j}")
    return LevelSet(j + 1, ((offs[i - 1], offs[i - 1] + 1),))


def measure(schema: TowerSchema, A: LevelSet) -> Fraction:
    return A.count() * schema.width(A.stage)


def lift_once(schema: TowerSchema, A: LevelSet) -> LevelSet:
    J = A.stage
    if J >= schema.top_stage:
        raise DepthExhausted(
            f"insufficient depth: cannot lift stage {J} (schema depth {schema.depth})", J + 1)
    offs = schema.column_offsets(J)
    # columns are separated by at least one spacer, so the copies stay disjoint and sorted
    return LevelSet(J + 1, tuple((o + lo, o + hi) for o in offs for lo, hi in A.intervals))


def lift_to(schema: TowerSchema, A: LevelSet, stage: int) -> LevelSet:
    if stage < A.stage:
        raise ValueError(f"cannot lower a stage-{A.stage} set to stage {stage}")
    while A.stage < stage:
        A = lift_once(schema, A)
    return A


def headroom_stage(schema: TowerSchema, A: LevelSet, m: int, max_stage: int | None = None) -> int:
    """Smallest stage at which every level ``l`` of ``A`` has ``l + m < n_J``."""
    limit = _resolve_max_stage(schema, max_stage)
    J, top = A.stage, A.top()
    while top + m >= schema.height(J):
        if J >= limit:
            raise DepthExhausted(
                f"depth exhausted: T^{m} needs a stage beyond {limit}; "
                f"at least stage {J + 1} is required", J + 1)
        # the topmost copy of a level sits in the last column
        top += schema.column_offsets(J)[-1]
        J += 1
    return J


def apply_power(schema: TowerSchema, A: LevelSet, m: int,
                max_stage: int | None = None) -> LevelSet:
    """The exact image ``T^m A``; the result's stage is where it stabilised."""
    if m < 0:
        raise ValueError("only non-negative powers of T are supported")
    if m == 0 or A.is_empty():
        return A
    J = headroom_stage(schema, A, m, max_stage)
    return lift_to(schema, A, J).shift(m)


def common_stage(schema: TowerSchema, *sets: LevelSet,
                 max_stage: int | None = None) -> tuple[LevelSet, ...]:
    J = max(s.stage for s in sets)
    limit = _resolve_max_stage(schema, max_stage)
    if J > limit:
        raise DepthExhausted(f"common stage {J} exceeds max stage {limit}", J)
    return tuple(lift_to(schema, s, J) for s in sets)


def _intersect_ivs(a: Sequence[Interval], b: Sequence[Interval]) -> list[Interval]:
    out = []
    i = k = 0
    while i < len(a) and k < len(b):
        lo = max(a[i][0], b[k][0])
        hi = min(a[i][1], b[k][1])
        if lo < hi:
            out.append((lo, hi))
        if a[i][1] < b[k][1]:
            i += 1
        else:
            k += 1
    return out


def _difference_ivs(a: Sequence[Interval], b: Sequence[Interval]) -> list[Interval]:
    out = []
    k = 0
    for lo, hi in a:
        cur = lo
        while k < len(b) and b[k][1] <= cur:
            k += 1
        t = k
        while t < len(b) and b[t][0] < hi:
            if b[t][0] > cur:
                out.append((cur, b[t][0]))
            cur = max(cur, b[t][1])
            if cur >= hi:
                break
            t += 1
        if cur < hi:
            out.append((cur, hi))
    return out


def intersect(schema: TowerSchema, A: LevelSet, B: LevelSet,
              max_stage: int | None = None) -> LevelSet:
    A, B = common_stage(schema, A, B, max_stage=max_stage)
    return LevelSet(A.stage, tuple(_intersect_ivs(A.intervals, B.intervals)))


def union(schema: TowerSchema, A: LevelSet, B: LevelSet,
          max_stage: int | None = None) -> LevelSet:
    A, B = common_stage(schema, A, B, max_stage=max_stage)
    return LevelSet(A.stage, canonical(A.intervals + B.intervals))


def difference(schema: TowerSchema, A: LevelSet, B: LevelSet,
               max_stage: int | None = None) -> LevelSet:
    A, B = common_stage(schema, A, B, max_stage=max_stage)
    return LevelSet(A.stage, tuple(_difference_ivs(A.intervals, B.intervals)))


def is_disjoint(schema: TowerSchema, A: LevelSet, B: LevelSet,
                max_stage: int | None = None) -> bool:
    return intersect(schema, A, B, max_stage).is_empty()


def same_set(schema: TowerSchema, A: LevelSet, B: LevelSet,
             max_stage: int | None = None) -> bool:
    """Equality as measurable sets (compares canonical forms at a common stage)."""
    A, B = common_stage(schema, A, B, max_stage=max_stage)
    return A.intervals == B.intervals


def is_subset(schema: TowerSchema, A: LevelSet, B: LevelSet,
              max_stage: int | None = None) -> bool:
    return difference(schema, A, B, max_stage).is_empty()


def shifted_intersection_measure(schema: TowerSchema, A: LevelSet, B: LevelSet,
                                 p: int, q: int, max_stage: int | None = None) -> Fraction:
    """``m(T^p A & T^q B)``, reduced to a single non-negative power."""
    if p < 0 or q < 0:
        raise ValueError("shifts must be non-negative")
    if q >= p:
        left, right = A, apply_power(schema, B, q - p, max_stage)
    else:
        left, right = apply_power(schema, A, p - q, max_stage), B
    return measure(schema, intersect(schema, left, right, max_stage))
