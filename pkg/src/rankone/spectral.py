"""Correlation sequences of level sets and a product-dissipativity heuristic.

``rho(n) = m(T^n E & E) / m(E)`` is computed exactly.  The partial sums
``S(N) = sum_{n<=N} rho(n)^2`` are the finite-horizon proxy used for
``T x T``: a bounded ``S`` is consistent with dissipativity of the product,
a growing one with conservativity.  No finite horizon decides either.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .levelsets import (
    DepthExhausted,
    LevelSet,
    apply_power,
    headroom_stage,
    intersect,
    lift_to,
    measure,
    shifted_intersection_measure,
)
from .tower import TowerSchema

HEURISTIC_LABEL = "heuristic evidence, not a proof"


@dataclass(frozen=True)
class CorrelationSequence:
    base: LevelSet
    values: tuple[Fraction, ...]
    stage: int

    @property
    def n_max(self) -> int:
        """Largest ``n`` computed exactly."""
        return len(self.values) - 1


def _overlap_count(ivs, m: int) -> int:
    """Number of levels in ``(ivs + m) & ivs`` for a canonical interval list."""
    total = 0
    k = 0
    for lo, hi in ivs:
        lo, hi = lo + m, hi + m
        while k < len(ivs) and ivs[k][1] <= lo:
            k += 1
        t = k
        while t < len(ivs) and ivs[t][0] < hi:
            total += min(hi, ivs[t][1]) - max(lo, ivs[t][0])
            t += 1
    return total


def correlation_sequence(schema: TowerSchema, E: LevelSet, N: int,
                         max_stage: int | None = None, workers: int = 1,
                         truncate: bool = False) -> CorrelationSequence:
    """Exact ``rho(0..N)`` for a set of positive measure.

    All values are taken at one stage with headroom for ``T^N``; with
    ``truncate=True`` the horizon is cut back to what the schema supports
    instead of raising :class:`DepthExhausted`.
    """
    if E.count() == 0:
        raise ValueError("correlation sequence needs a set of positive measure")
    if N < 0:
        raise ValueError("horizon must be non-negative")
    try:
        J = headroom_stage(schema, E, N, max_stage)
    except DepthExhausted:
        if not truncate:
            raise
        J = max(E.stage, schema.top_stage if max_stage is None
                else min(max_stage, schema.top_stage))
        room = schema.height(J) - 1 - lift_to(schema, E, J).top()
        if room < 0:
            raise
        N = min(N, room)
    lifted = lift_to(schema, E, J)
    ivs = lifted.intervals
    base = lifted.count()

    def rho(n: int) -> Fraction:
        return Fraction(_overlap_count(ivs, n), base)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(rho, range(N + 1)))
    else:
        values = [rho(n) for n in range(N + 1)]
    return CorrelationSequence(E, tuple(values), J)


@dataclass(frozen=True)
class DissipativityReport:
    partial_sums: tuple[Fraction, ...]  # S(1..N)
    n_max: int
    nonzero_returns: int
    trend: str
    shift_invariance_ok: bool
    label: str = HEURISTIC_LABEL

    def summary(self) -> dict:
        last = self.partial_sums[-1] if self.partial_sums else Fraction(0)
        return {
            "label": self.label,
            "n_max": self.n_max,
            "S_N": str(last),
            "S_N_float": float(last),
            "nonzero_returns": self.nonzero_returns,
            "trend": self.trend,
            "shift_invariance_ok": self.shift_invariance_ok,
        }


def partial_sums(seq: CorrelationSequence) -> tuple[Fraction, ...]:
    out = []
    acc = Fraction(0)
    for v in seq.values[1:]:
        acc += v * v
        out.append(acc)
    return tuple(out)


def _trend(sums: Sequence[Fraction]) -> str:
    if not sums or sums[-1] == 0:
        return "zero"
    half = len(sums) // 2
    first = sums[half - 1] if half else Fraction(0)
    growth_late = sums[-1] - first
    if growth_late == 0:
        return "saturated"
    if growth_late * 2 >= sums[-1]:
        return "growing"
    return "slowing"


def shift_invariance_check(schema: TowerSchema, E: LevelSet, ns: Sequence[int],
                           shifts: Sequence[int], max_stage: int | None = None) -> bool:
    """``m(T^(a+n) E & T^a E)`` does not depend on ``a`` (exact spot checks)."""
    for n in ns:
        ref = shifted_intersection_measure(schema, E, E, n, 0, max_stage)
        for a in shifts:
            Ea = apply_power(schema, E, a, max_stage)
            got = measure(schema, intersect(schema, apply_power(schema, Ea, n, max_stage), Ea,
                                            max_stage))
            if got != ref:
                return False
    return True


def product_dissipativity_diagnostic(schema: TowerSchema, E: LevelSet, N: int,
                                     max_stage: int | None = None, workers: int = 1,
                                     spot_shifts: Sequence[int] = (1, 7, 113)
                                     ) -> tuple[CorrelationSequence, DissipativityReport]:
    seq = correlation_sequence(schema, E, N, max_stage=max_stage, workers=workers)
    sums = partial_sums(seq)
    returns = [n for n in range(1, len(seq.values)) if seq.values[n]]
    spot = returns[:3] or [1]
    try:
        ok = shift_invariance_check(schema, E, spot, spot_shifts, max_stage)
    except DepthExhausted:
        # not enough headroom for the spot shifts; check the identity at a = 0 only
        ok = shift_invariance_check(schema, E, spot, (0,), max_stage)
    report = DissipativityReport(sums, seq.n_max, len(returns), _trend(sums), ok)
    return seq, report


def to_csv(seq: CorrelationSequence, comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "rho_num", "rho_den", "rho_float", "partial_sum_float"])
    acc = Fraction(0)
    for n, v in enumerate(seq.values):
        if n > 0:
            acc += v * v
        w.writerow([n, v.numerator, v.denominator, repr(float(v)), repr(float(acc))])
    return buf.getvalue()
