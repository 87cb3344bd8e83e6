"""Members ``T_a`` of the branching family and their certificates.

A member is fixed by a finite bit prefix ``a_1..a_K`` and a schedule shared
by the whole family.  Bit ``a_k = 1`` raises the spacers that place the
copies of ``X_{j(k)}`` inside ``X_{j(k)+1}`` to at least
``L(k) * (n(k) + 1) + 1``; with those spacers the images
``T^{p n(k)} X_{j(k)}``, ``p = 1..L(k)``, are pairwise disjoint.  Bit
``a_k = 0`` keeps the minimal spacers.

Disjointness certificates are exact.  Entropy reports are Monte Carlo and
carry a standard error.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .gaussian import (
    MAX_ALPHABET_BITS,
    PartitionSpec,
    ProgressionSchedule,
    ScheduleEntry,
    block_independence_check,
    default_partition,
    gram,
    hk_estimate,
    hk_report,
    supported_in,
    xi_entropy,
)
from .levelsets import apply_power, common_stage, intersect, measure, tower_set
from .tower import (
    GROWTH,
    SchemaError,
    TowerSchema,
    build_schema,
    minimal_spacers,
    raised_spacers,
)

log = logging.getLogger(__name__)

CITED_IMPLICATION = (
    "cited, not verified: if K0 is infinite, G(T_a') has completely positive P-entropy "
    "along P = (P_k, k in K0) while h_P(G(T_a)) = 0, and the P-entropy disjointness "
    "theorem then makes G(T_a) and G(T_a') disjoint"
)
ZERO_BRANCH_NOTE = (
    "decay of h_k with L is guaranteed only as an existence statement (for some L large "
    "enough); these are finite-L estimates and do not show h_P = 0"
)


class BranchPreconditionError(RuntimeError):
    """A branch check was asked for on a member that does not qualify."""


class InternalInconsistency(RuntimeError):
    """Exact disjointness held but the Gram matrix has a nonzero cross block."""


@dataclass(frozen=True)
class FamilySpec:
    bits: tuple[int, ...]
    schedule: ProgressionSchedule

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))
        if any(b not in (0, 1) for b in self.bits):
            raise SchemaError(f"bits must be 0 or 1, got {self.bits}")
        if len(self.bits) > len(self.schedule):
            raise SchemaError(
                f"{len(self.bits)} bits but the schedule has only {len(self.schedule)} entries")

    def bit(self, k: int) -> int:
        return self.bits[k - 1] if k <= len(self.bits) else 0

    def required_depth(self) -> int:
        if not self.bits:
            return 1
        return max(self.schedule.entry(k).j for k in range(1, len(self.bits) + 1)) + 1

    def with_bits(self, bits: Iterable[int]) -> "FamilySpec":
        return FamilySpec(tuple(bits), self.schedule)

    def to_json(self) -> dict:
        return {"bits": list(self.bits), "schedule": self.schedule.to_json()}

    @classmethod
    def from_json(cls, doc) -> "FamilySpec":
        try:
            return cls(tuple(doc.get("bits", ())), ProgressionSchedule.from_json(doc["schedule"]))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(f"malformed family document: {exc}") from exc


@dataclass(frozen=True)
class Certificate:
    k: int
    kind: str
    status: str
    witness: dict | None = None
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status in ("certified", "consistent")

    def to_json(self) -> dict:
        return {"k": self.k, "kind": self.kind, "status": self.status,
                "witness": self.witness, "details": self.details}


def branch_floor(L: int, n: int) -> int:
    """Smallest integer strictly above ``L * (n + 1)``."""
    return L * (n + 1) + 1


def build_member(spec: FamilySpec, depth: int | None = None) -> TowerSchema:
    """Schema of ``T_a``; branch decisions are recorded in ``schema.notes``."""
    need = spec.required_depth()
    if depth is None:
        depth = need
    if depth < need:
        raise SchemaError(f"schedule needs depth >= {need} for {len(spec.bits)} bits, got {depth}")
    raise_at = {}
    for k, bit in enumerate(spec.bits, start=1):
        if bit:
            entry = spec.schedule.entry(k)
            raise_at[entry.j] = entry

    overrides: dict[int, tuple[int, ...]] = {}
    notes = []
    n = 1
    for j in range(1, depth + 1):
        r = 2**j
        if j in raise_at:
            entry = raise_at[j]
            floor = branch_floor(entry.L, n)
            if floor > GROWTH * n:
                overrides[j] = raised_spacers(j, n, r, floor)
                notes.append(f"k={entry.k}: stage {j} spacers raised to floor {floor}")
            else:
                notes.append(f"k={entry.k}: override subsumed by minimal policy at stage {j} "
                             f"(floor {floor} <= {GROWTH * n})")
        n = n * r + sum(overrides.get(j) or minimal_spacers(j, n, r))
    for note in notes:
        log.info(note)
    return build_schema(depth, overrides, notes=notes)


def disjoint_bound(schema: TowerSchema, j: int) -> int:
    """Largest ``L`` for which disjointness of ``T^{p n_j} X_j`` follows from the spacers alone.

    Copies of ``X_j`` in ``X_{j+1}`` are separated by at least ``s_j(1)``
    spacer levels, so shifts ``d n_j <= s_j(1)`` cannot carry one copy onto
    another.
    """
    return min(schema.stage(j).spacers) // schema.height(j) + 1


def certify_disjoint(schema: TowerSchema, entry: ScheduleEntry,
                     max_stage: int | None = None) -> Certificate:
    j, L = entry.j, entry.L
    n = schema.height(j)
    X = tower_set(schema, j)
    images = common_stage(schema, *(apply_power(schema, X, p * n, max_stage)
                                    for p in range(1, L + 1)), max_stage=max_stage)
    details = {"j": j, "n": str(n), "L": L, "stage": images[0].stage if images else j}
    for a in range(L):
        for b in range(a + 1, L):
            overlap = intersect(schema, images[a], images[b], max_stage)
            if not overlap.is_empty():
                witness = {"pair": [a + 1, b + 1],
                           "overlap_measure": str(measure(schema, overlap))}
                return Certificate(entry.k, "disjointness", "not-certified", witness, details)
    return Certificate(entry.k, "disjointness", "certified", None, details)


def positive_branch_check(schema: TowerSchema, entry: ScheduleEntry, partition: PartitionSpec,
                          N: int, seed: int, workers: int = 1,
                          max_stage: int | None = None,
                          certificate: Certificate | None = None) -> Certificate:
    """Independence (exact) and ``h_k ~ H(xi)`` (within 3 stderr) for a certified member."""
    cert = certificate or certify_disjoint(schema, entry, max_stage)
    if cert.status != "certified":
        raise BranchPreconditionError(
            f"k={entry.k}: images of X_{entry.j} are not certified disjoint; refusing")
    if not supported_in(schema, partition, entry.j):
        raise BranchPreconditionError(f"partition vectors must lie in X_{entry.j}")
    cov = gram(schema, partition, entry.shifts(schema), max_stage)
    ind = block_independence_check(cov)
    if not ind:
        raise InternalInconsistency(
            f"k={entry.k}: disjoint images but nonzero covariance {ind.witness_json()}")
    hk = hk_estimate(schema, entry, partition, N, seed, workers, max_stage, cov=cov)
    H, exact = xi_entropy(schema, partition, N, seed, max_stage)
    within = abs(hk.value - H) <= 3 * hk.stderr
    details = {"H_xi_exact": exact, "deviation": hk.value - H,
               "disjointness": cert.to_json()}
    return Certificate(entry.k, "entropy-report", "consistent" if within else "inconsistent",
                       hk_report(hk, H), details)


@dataclass(frozen=True)
class ScanReport:
    k: int
    j: int
    n: int
    H_xi: float
    rows: tuple[dict, ...]
    truncated: bool
    trend: str
    note: str = ZERO_BRANCH_NOTE

    def to_json(self) -> dict:
        return {"k": self.k, "j": self.j, "n": str(self.n), "H_xi": self.H_xi,
                "rows": list(self.rows), "truncated": self.truncated, "trend": self.trend,
                "note": self.note}

    def row(self, L: int) -> dict:
        for r in self.rows:
            if r["L"] == L:
                return r
        raise KeyError(L)


def _scan_trend(rows: Sequence[dict]) -> str:
    if len(rows) < 2:
        return "single"
    steps_up = any(b["mm"] > a["mm"] + 3 * max(a["stderr"], b["stderr"])
                   for a, b in zip(rows, rows[1:]))
    first, last = rows[0], rows[-1]
    spread = 3 * (first["stderr"] ** 2 + last["stderr"] ** 2) ** 0.5
    if steps_up:
        return "mixed"
    if last["mm"] < first["mm"] - spread:
        return "decreasing"
    return "flat"


def zero_branch_scan(schema: TowerSchema, entry: ScheduleEntry, partition: PartitionSpec,
                     L_range: Iterable[int], N: int, seed: int, workers: int = 1,
                     max_stage: int | None = None) -> ScanReport:
    """``h_k`` estimates for a range of progression lengths."""
    rows = []
    truncated = False
    for L in L_range:
        if partition.d * L > MAX_ALPHABET_BITS:
            warnings.warn(f"L={L} exceeds the {MAX_ALPHABET_BITS}-bit alphabet at "
                          f"d={partition.d}; scan truncated", stacklevel=2)
            truncated = True
            break
        hk = hk_estimate(schema, entry.with_L(L), partition, N, seed, workers, max_stage)
        rows.append({"L": L, "plugin": hk.estimate.plugin, "mm": hk.estimate.mm,
                     "stderr": hk.estimate.stderr, "independent": hk.independence.independent})
    H, _ = xi_entropy(schema, partition, N, seed, max_stage)
    return ScanReport(entry.k, entry.j, schema.height(entry.j), H, tuple(rows), truncated,
                      _scan_trend(rows))


def divergence_sets(bits_a: Sequence[int], bits_b: Sequence[int]) -> tuple[list[int], list[int]]:
    """``K = {k: a_k != a'_k}`` and ``K0 = {k: a_k = 0, a'_k = 1}``."""
    size = max(len(bits_a), len(bits_b))
    pad_a = list(bits_a) + [0] * (size - len(bits_a))
    pad_b = list(bits_b) + [0] * (size - len(bits_b))
    K = [k for k in range(1, size + 1) if pad_a[k - 1] != pad_b[k - 1]]
    K0 = [k for k in K if pad_a[k - 1] == 0 and pad_b[k - 1] == 1]
    return K, K0


def divergence_report(spec_a: FamilySpec, spec_b: FamilySpec, depth: int | None = None,
                      N: int = 100_000, seed: int = 0, d: int = 1, workers: int = 1,
                      estimates: bool = True, max_stage: int | None = None) -> dict:
    """Pair the positive-branch certificate of ``a'`` with the zero-branch data of ``a`` on ``K0``."""
    if spec_a.schedule != spec_b.schedule:
        raise SchemaError("family members must share the schedule")
    K, K0 = divergence_sets(spec_a.bits, spec_b.bits)
    report = {"bits_a": list(spec_a.bits), "bits_b": list(spec_b.bits), "K": K, "K0": K0}
    if not K:
        report["conclusion"] = "no separation"
        return report
    depth = depth or max(spec_a.required_depth(), spec_b.required_depth())
    member_a = build_member(spec_a, depth)
    member_b = build_member(spec_b, depth)
    pairs = []
    for k in K0:
        entry = spec_a.schedule.entry(k)
        pos = certify_disjoint(member_b, entry, max_stage)
        zero = certify_disjoint(member_a, entry, max_stage)
        item = {"k": k, "positive_disjointness": pos.to_json(),
                "zero_disjointness": zero.to_json(),
                "zero_disjoint_bound_L": disjoint_bound(member_a, entry.j)}
        if estimates:
            part_b = default_partition(member_b, entry.j, d)
            part_a = default_partition(member_a, entry.j, d)
            if pos.ok:
                item["positive_entropy"] = positive_branch_check(
                    member_b, entry, part_b, N, seed, workers, max_stage, pos).to_json()
            item["zero_scan"] = zero_branch_scan(
                member_a, entry, part_a, [entry.L], N, seed, workers, max_stage).to_json()
        if zero.ok:
            item["note"] = (f"zero-branch member is itself exactly independent at L={entry.L}; "
                            f"shifts below the first return of X_{entry.j} cannot separate")
        pairs.append(item)
    report["pairs"] = pairs
    report["conclusion"] = CITED_IMPLICATION if K0 else "K0 empty; swap roles to separate"
    return report
