"""Finite-dimensional model of the Gaussian suspension ``G(T)``.

An indicator ``1_U`` of a level set spans one coordinate of the Gaussian
field; ``G^p`` acts on it as ``1_{T^p U}``.  For vectors ``U_1..U_d`` and
shifts ``p_1 < ... < p_L`` the coordinates ``W(T^p U_i)`` are jointly
centered Gaussian with covariance ``m(T^p U_i & T^q U_l)``, computed exactly
by :func:`gram`.  The partition ``xi`` is the sign cylinder of the ``d``
coordinates, and ``H(join_p G^p xi)`` is estimated from sign-pattern counts.

Monte-Carlo determinism: samples are drawn in fixed chunks of
``CHUNK_SIZE`` rows; chunk ``c`` uses ``SeedSequence(seed, spawn_key=(0, c))``
and the bootstrap uses ``spawn_key=(1,)``.  The worker count never changes
the output.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import product
from typing import Callable, Iterable, Sequence

import numpy as np

from .levelsets import LevelSet, is_subset, shifted_intersection_measure, tower_set
from .tower import SchemaError, TowerSchema

MAX_ALPHABET_BITS = 20
CHUNK_SIZE = 1 << 14
BOOTSTRAP_RESAMPLES = 100
PSD_RTOL = 1e-9
LN2 = math.log(2.0)


class AlphabetTooLarge(ValueError):
    """Joint sign alphabet exceeds ``2**MAX_ALPHABET_BITS`` cells."""


class NotPSD(ValueError):
    """Covariance has an eigenvalue below ``-PSD_RTOL * max(diag)``."""


@dataclass(frozen=True)
class PartitionSpec:
    """Sign-cylinder partition generated by ``d`` indicator coordinates."""

    vectors: tuple[LevelSet, ...]

    def __post_init__(self):
        if not self.vectors:
            raise ValueError("a partition needs at least one vector")
        if any(v.is_empty() for v in self.vectors):
            raise ValueError("partition vectors must have positive measure")

    @property
    def d(self) -> int:
        return len(self.vectors)

    def cells(self) -> list[str]:
        return ["".join(p) for p in product("+-", repeat=self.d)]

    def to_json(self) -> dict:
        return {"vectors": [v.to_json() for v in self.vectors]}

    @classmethod
    def from_json(cls, doc, schema: TowerSchema | None = None) -> "PartitionSpec":
        return cls(tuple(LevelSet.from_json(v, schema) for v in doc["vectors"]))


def default_partition(schema: TowerSchema, j: int, d: int = 1) -> PartitionSpec:
    """Split ``X_j`` into ``d`` contiguous, pairwise disjoint level blocks."""
    n = schema.height(j)
    if not 1 <= d <= n:
        raise ValueError(f"cannot split a tower of height {n} into {d} vectors")
    cuts = [n * i // d for i in range(d + 1)]
    return PartitionSpec(tuple(LevelSet(j, ((cuts[i], cuts[i + 1]),)) for i in range(d)))


@dataclass(frozen=True)
class ScheduleEntry:
    """One progression ``P_k = {n(k), 2n(k), ..., L(k) n(k)}`` with ``n(k) = n_{j(k)}``."""

    k: int
    j: int
    L: int

    def n(self, schema: TowerSchema) -> int:
        return schema.height(self.j)

    def shifts(self, schema: TowerSchema) -> tuple[int, ...]:
        n = self.n(schema)
        return tuple(p * n for p in range(1, self.L + 1))

    def with_L(self, L: int) -> "ScheduleEntry":
        return replace(self, L=L)


@dataclass(frozen=True)
class ProgressionSchedule:
    entries: tuple[ScheduleEntry, ...]

    def __post_init__(self):
        for pos, e in enumerate(self.entries, start=1):
            if e.k != pos:
                raise SchemaError(f"schedule entry {pos} has k={e.k}; entries must be k=1,2,...")
            if e.L < 1:
                raise SchemaError(f"schedule entry k={e.k}: L must be >= 1")
            if e.j < 1:
                raise SchemaError(f"schedule entry k={e.k}: j must be >= 1")
        for a, b in zip(self.entries, self.entries[1:]):
            if not a.j < b.j:
                raise SchemaError(f"schedule stages must increase: j({a.k})={a.j}, j({b.k})={b.j}")

    @classmethod
    def default(cls, K: int, j: Callable[[int], int] = lambda k: 2 * k,
                L: Callable[[int], int] = lambda k: k + 2) -> "ProgressionSchedule":
        return cls(tuple(ScheduleEntry(k, j(k), L(k)) for k in range(1, K + 1)))

    def entry(self, k: int) -> ScheduleEntry:
        if not 1 <= k <= len(self.entries):
            raise SchemaError(f"no schedule entry for k={k}")
        return self.entries[k - 1]

    def __len__(self) -> int:
        return len(self.entries)

    def to_json(self) -> list:
        return [{"k": e.k, "j": e.j, "L": e.L} for e in self.entries]

    @classmethod
    def from_json(cls, doc: Iterable) -> "ProgressionSchedule":
        return cls(tuple(ScheduleEntry(int(e["k"]), int(e["j"]), int(e["L"])) for e in doc))


@dataclass(frozen=True)
class CovarianceMatrix:
    """Exact Gram matrix; row ``b * d + i`` is vector ``i`` shifted by ``shifts[b]``."""

    shifts: tuple[int, ...]
    d: int
    entries: tuple[tuple[Fraction, ...], ...]

    @property
    def dimension(self) -> int:
        return len(self.entries)

    def index(self, block: int, i: int) -> int:
        return block * self.d + i

    def label(self, idx: int) -> tuple[int, int]:
        """``(shift, vector number)``, vector numbers counted from 1."""
        return (self.shifts[idx // self.d], idx % self.d + 1)

    def restrict(self, shifts: Sequence[int]) -> "CovarianceMatrix":
        pos = {s: b for b, s in enumerate(self.shifts)}
        try:
            rows = [pos[s] * self.d + i for s in shifts for i in range(self.d)]
        except KeyError as exc:
            raise ValueError(f"shift {exc.args[0]} is not in the covariance") from None
        entries = tuple(tuple(self.entries[a][b] for b in rows) for a in rows)
        return CovarianceMatrix(tuple(shifts), self.d, entries)

    def to_float(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.entries], dtype=float)

    def to_json(self) -> dict:
        return {"shifts": [str(s) for s in self.shifts], "d": self.d,
                "entries": [[str(x) for x in row] for row in self.entries]}


def gram(schema: TowerSchema, partition: PartitionSpec, shifts: Sequence[int],
         max_stage: int | None = None) -> CovarianceMatrix:
    shifts = tuple(int(s) for s in shifts)
    if any(s < 0 for s in shifts):
        raise ValueError("shifts must be non-negative")
    if list(shifts) != sorted(set(shifts)):
        raise ValueError("shifts must be distinct and sorted")
    d = partition.d
    D = d * len(shifts)
    cache: dict[tuple[int, int, int], Fraction] = {}
    rows = [[Fraction(0)] * D for _ in range(D)]
    for a in range(D):
        p, i = shifts[a // d], a % d
        for b in range(a, D):
            q, l = shifts[b // d], b % d
            # only the relative shift matters
            key = (i, l, q - p)
            if key not in cache:
                lo = min(p, q)
                cache[key] = shifted_intersection_measure(
                    schema, partition.vectors[i], partition.vectors[l], p - lo, q - lo, max_stage)
            rows[a][b] = rows[b][a] = cache[key]
    return CovarianceMatrix(shifts, d, tuple(tuple(r) for r in rows))


@dataclass(frozen=True)
class IndependenceResult:
    independent: bool
    witness: tuple[tuple[int, int], tuple[int, int]] | None = None
    value: Fraction | None = None

    def __bool__(self) -> bool:
        return self.independent

    def witness_json(self):
        if self.witness is None:
            return None
        (p, i), (q, l) = self.witness
        return {"row": [str(p), i], "col": [str(q), l], "value": str(self.value)}


def block_independence_check(cov: CovarianceMatrix) -> IndependenceResult:
    """Exact test that all cross-shift covariance blocks vanish.

    Jointly Gaussian coordinates with zero cross-covariance are independent,
    so a positive answer certifies independence of the sign algebras at
    distinct shifts.
    """
    d = cov.d
    for a in range(cov.dimension):
        for b in range(cov.dimension):
            if a // d == b // d:
                continue
            if cov.entries[a][b] != 0:
                return IndependenceResult(False, (cov.label(a), cov.label(b)), cov.entries[a][b])
    return IndependenceResult(True)


def _factor(cov) -> np.ndarray:
    """Matrix ``A`` with ``A @ A.T == cov`` from a clamped eigendecomposition."""
    C = cov.to_float() if isinstance(cov, CovarianceMatrix) else np.asarray(cov, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("covariance must be square")
    if not np.array_equal(C, C.T):
        raise ValueError("covariance must be symmetric")
    lam, V = np.linalg.eigh(C)
    tol = PSD_RTOL * max(float(np.max(np.diag(C))), 0.0) if C.size else 0.0
    if lam.size and lam.min() < -tol:
        raise NotPSD(f"covariance not PSD: min eigenvalue {lam.min():.3e} < -{tol:.3e}")
    # round-off eigenvalues would otherwise leak noise into duplicated coordinates
    return V * np.sqrt(np.where(lam > tol, lam, 0.0))


def _chunks(N: int) -> list[tuple[int, int]]:
    return [(c, min(CHUNK_SIZE, N - c * CHUNK_SIZE)) for c in range(-(-N // CHUNK_SIZE))]


def _chunk_samples(A: np.ndarray, seed: int, c: int, size: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0, c)))
    z = rng.standard_normal((size, A.shape[1]))
    return z @ A.T


def _map_chunks(fn, N: int, workers: int) -> list:
    jobs = _chunks(N)
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda job: fn(*job), jobs))
    return [fn(c, size) for c, size in jobs]


def sample_gaussian(cov, N: int, seed: int, workers: int = 1) -> np.ndarray:
    """``N`` centered Gaussian rows with covariance ``cov``."""
    if N < 1:
        raise ValueError("sample count must be positive")
    A = _factor(cov)
    parts = _map_chunks(lambda c, size: _chunk_samples(A, seed, c, size), N, workers)
    return np.concatenate(parts, axis=0)


def sign_counts(cov, N: int, seed: int, workers: int = 1) -> np.ndarray:
    """Histogram of sign patterns; bit ``t`` of a cell index is ``x_t > 0``."""
    A = _factor(cov)
    D = A.shape[0]
    if D > MAX_ALPHABET_BITS:
        raise AlphabetTooLarge(f"alphabet 2^{D} exceeds 2^{MAX_ALPHABET_BITS}")
    weights = (1 << np.arange(D, dtype=np.int64))

    def count(c: int, size: int) -> np.ndarray:
        x = _chunk_samples(A, seed, c, size)
        codes = (x > 0).astype(np.int64) @ weights
        return np.bincount(codes, minlength=1 << D)

    return np.sum(_map_chunks(count, N, workers), axis=0)


def partition_entropy(probabilities: Sequence) -> float:
    """Shannon entropy in nats with ``0 ln 0 = 0``."""
    probs = list(probabilities)
    if any(p < 0 for p in probs):
        raise ValueError("probabilities must be non-negative")
    if abs(float(sum(probs)) - 1.0) > 1e-12:
        raise ValueError(f"probabilities sum to {float(sum(probs))!r}, not 1")
    return -sum(float(p) * math.log(float(p)) for p in probs if p > 0)


def _plugin(counts: np.ndarray, N: int) -> float:
    c = counts[counts > 0].astype(float)
    return float(-np.sum(c / N * np.log(c / N)))


def _miller_madow(counts: np.ndarray, N: int) -> float:
    return _plugin(counts, N) + (np.count_nonzero(counts) - 1) / (2.0 * N)


@dataclass(frozen=True)
class EntropyEstimate:
    plugin: float
    mm: float
    stderr: float
    samples: int
    bits: int
    observed_cells: int

    @property
    def value(self) -> float:
        """Point estimate (Miller-Madow corrected)."""
        return self.mm

    def scaled(self, factor: float) -> "EntropyEstimate":
        return replace(self, plugin=self.plugin * factor, mm=self.mm * factor,
                       stderr=self.stderr * factor)

    def to_json(self) -> dict:
        return {"plugin": self.plugin, "mm": self.mm, "stderr": self.stderr}


def entropy_from_counts(counts: np.ndarray, seed: int,
                        resamples: int = BOOTSTRAP_RESAMPLES) -> tuple[float, float, float]:
    """Plug-in and Miller-Madow entropy plus a bootstrap standard error."""
    counts = np.asarray(counts)
    N = int(counts.sum())
    observed = counts[counts > 0]
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
    p = observed / N
    boots = np.array([_miller_madow(rng.multinomial(N, p), N) for _ in range(resamples)])
    return _plugin(observed, N), _miller_madow(observed, N), float(np.std(boots, ddof=1))


def joint_entropy_mc(cov: CovarianceMatrix, partition: PartitionSpec,
                     blocks: Sequence[int] | None, N: int, seed: int,
                     workers: int = 1) -> EntropyEstimate:
    """Estimate ``H(join_{p in blocks} G^p xi)`` from ``N`` Gaussian samples."""
    if cov.d != partition.d:
        raise ValueError(f"covariance has d={cov.d}, partition has d={partition.d}")
    if blocks is not None:
        cov = cov.restrict(blocks)
    bits = cov.dimension
    if bits > MAX_ALPHABET_BITS:
        raise AlphabetTooLarge(
            f"joint alphabet 2^{bits} (d={cov.d}, {len(cov.shifts)} blocks) "
            f"exceeds 2^{MAX_ALPHABET_BITS}")
    counts = sign_counts(cov, N, seed, workers)
    plugin, mm, se = entropy_from_counts(counts, seed)
    return EntropyEstimate(plugin, mm, se, N, bits, int(np.count_nonzero(counts)))


def orthant_oracle(rho: float) -> tuple[float, float, float, float]:
    """Sign-cell probabilities ``(++, +-, -+, --)`` of a standard bivariate normal."""
    if not -1.0 <= rho <= 1.0:
        raise ValueError("correlation must lie in [-1, 1]")
    a = math.asin(rho) / (2.0 * math.pi)
    return (0.25 + a, 0.25 - a, 0.25 - a, 0.25 + a)


def xi_entropy(schema: TowerSchema, partition: PartitionSpec, N: int = 100_000,
               seed: int = 0, max_stage: int | None = None) -> tuple[float, bool]:
    """``H(xi)`` and whether it is exact (disjoint vectors or ``d = 2``)."""
    cov = gram(schema, partition, (0,), max_stage)
    d = partition.d
    off = [cov.entries[a][b] for a in range(d) for b in range(d) if a != b]
    if all(x == 0 for x in off):
        return d * LN2, True
    if d == 2:
        c = cov.entries
        rho = float(c[0][1]) / math.sqrt(float(c[0][0]) * float(c[1][1]))
        return partition_entropy(orthant_oracle(min(1.0, rho))), True
    est = joint_entropy_mc(cov, partition, None, N, seed)
    return est.mm, False


@dataclass(frozen=True)
class HkEstimate:
    k: int
    n: int
    L: int
    estimate: EntropyEstimate  # already divided by L
    joint: EntropyEstimate
    independence: IndependenceResult = field(compare=False)

    @property
    def value(self) -> float:
        return self.estimate.mm

    @property
    def stderr(self) -> float:
        return self.estimate.stderr


def hk_estimate(schema: TowerSchema, entry: ScheduleEntry, partition: PartitionSpec,
                N: int, seed: int, workers: int = 1, max_stage: int | None = None,
                cov: CovarianceMatrix | None = None) -> HkEstimate:
    """``h_k = H(join_{p in P_k} G^p xi) / |P_k|`` by Monte Carlo."""
    bits = partition.d * entry.L
    if bits > MAX_ALPHABET_BITS:
        raise AlphabetTooLarge(
            f"k={entry.k}: d*L = {partition.d}*{entry.L} exceeds {MAX_ALPHABET_BITS} bits")
    if cov is None:
        cov = gram(schema, partition, entry.shifts(schema), max_stage)
    joint = joint_entropy_mc(cov, partition, None, N, seed, workers)
    return HkEstimate(entry.k, entry.n(schema), entry.L, joint.scaled(1.0 / entry.L), joint,
                      block_independence_check(cov))


def hk_report(hk: HkEstimate, H_xi: float) -> dict:
    return {
        "k": hk.k,
        "P_k": {"n": str(hk.n), "L": hk.L},
        "H_xi": H_xi,
        "h_k": hk.estimate.to_json(),
        "independent": hk.independence.independent,
        "witness": hk.independence.witness_json(),
    }


def supported_in(schema: TowerSchema, partition: PartitionSpec, j: int) -> bool:
    X = tower_set(schema, j)
    return all(is_subset(schema, v, X) for v in partition.vectors)

