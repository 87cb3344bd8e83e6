"""Inductive cutting-and-stacking schema for the Sidon rank-one towers.

Stage ``j`` starts from a tower of height ``n_j`` whose levels all have
width ``w_j``.  The base is cut into ``r_j`` equal columns, column ``i``
receives ``s_j(i)`` spacer levels on top, and the columns are stacked left
to right.  The result is the stage ``j+1`` tower of height

    n_{j+1} = n_j * r_j + sum_i s_j(i).

Everything here is integer/rational bookkeeping; no point of the space is
ever represented.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

DEFAULT_MAX_STAGE = 8
GROWTH = 10


class SchemaError(ValueError):
    """Raised for an invalid schema or spacer override."""


def max_stage_cap() -> int:
    """Global cap on schema depth; ``RANKONE_MAX_STAGE`` overrides it."""
    raw = os.environ.get("RANKONE_MAX_STAGE")
    if raw is None:
        return DEFAULT_MAX_STAGE
    try:
        cap = int(raw)
    except ValueError:
        raise SchemaError(f"RANKONE_MAX_STAGE must be an integer, got {raw!r}")
    if cap < 1:
        raise SchemaError("RANKONE_MAX_STAGE must be >= 1")
    return cap


@dataclass(frozen=True)
class StageParams:
    j: int
    r: int
    spacers: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "spacers", tuple(int(s) for s in self.spacers))


@dataclass(frozen=True)
class TowerSchema:
    """Full construction state through stage ``depth``.

    ``heights[j-1]`` is ``n_j`` and ``base_widths[j-1]`` is ``w_j`` for
    ``j = 1..depth+1``; ``offsets[j-1][i-1]`` is the level at which column
    ``i`` of the stage-``j`` tower starts inside the stage-``j+1`` tower.

    The constructor does not check consistency (loaded files may be
    tampered); use :func:`validate`.
    """

    stages: tuple[StageParams, ...]
    heights: tuple[int, ...]
    base_widths: tuple[Fraction, ...]
    offsets: tuple[tuple[int, ...], ...]
    notes: tuple[str, ...] = field(default=(), compare=False)

    @property
    def depth(self) -> int:
        return len(self.stages)

    @property
    def top_stage(self) -> int:
        """Highest stage whose tower is known (``depth + 1``)."""
        return len(self.stages) + 1

    def height(self, j: int) -> int:
        self._check_tower_stage(j)
        return self.heights[j - 1]

    def width(self, j: int) -> Fraction:
        self._check_tower_stage(j)
        return self.base_widths[j - 1]

    def stage(self, j: int) -> StageParams:
        if not 1 <= j <= self.depth:
            raise SchemaError(f"stage {j} has no parameters (depth {self.depth})")
        return self.stages[j - 1]

    def column_offsets(self, j: int) -> tuple[int, ...]:
        self.stage(j)
        return self.offsets[j - 1]

    def _check_tower_stage(self, j: int) -> None:
        if not 1 <= j <= self.top_stage:
            raise SchemaError(f"stage {j} out of range 1..{self.top_stage}")

    def to_json(self) -> dict:
        return {
            "stages": [
                {"j": st.j, "r": st.r, "spacers": [str(s) for s in st.spacers]}
                for st in self.stages
            ],
            "heights": [str(n) for n in self.heights],
            "base_widths": [str(w) for w in self.base_widths],
            "offsets": [[str(o) for o in offs] for offs in self.offsets],
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "TowerSchema":
        """Load a schema document.

        Derived fields are recomputed from the stage list; stored values,
        when present, are kept as-is so that :func:`validate` can report a
        mismatch.
        """
        try:
            stages = tuple(
                StageParams(int(st["j"]), int(st["r"]), tuple(int(s) for s in st["spacers"]))
                for st in doc["stages"]
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed schema document: {exc}") from exc
        fresh = assemble(stages)
        heights = fresh.heights
        widths = fresh.base_widths
        offsets = fresh.offsets
        if "heights" in doc:
            heights = tuple(int(n) for n in doc["heights"])
        if "base_widths" in doc:
            widths = tuple(Fraction(w) for w in doc["base_widths"])
        if "offsets" in doc:
            offsets = tuple(tuple(int(o) for o in offs) for offs in doc["offsets"])
        return cls(stages, heights, widths, offsets)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def minimal_spacers(j: int, n_j: int, r: int) -> tuple[int, ...]:
    """Smallest integer spacers with ``s(1) = 10 n_j`` and ``s(i) > 10 s(i-1)``."""
    if n_j < 1 or r < 1:
        raise SchemaError(f"stage {j}: need n_j >= 1 and r >= 1, got n_j={n_j}, r={r}")
    out = [GROWTH * n_j]
    for _ in range(r - 1):
        out.append(GROWTH * out[-1] + 1)
    return tuple(out)


def raised_spacers(j: int, n_j: int, r: int, floor: int) -> tuple[int, ...]:
    """Minimal spacers with every entry lifted to at least ``floor``."""
    first = max(GROWTH * n_j, floor)
    out = [first]
    for _ in range(r - 1):
        out.append(max(GROWTH * out[-1] + 1, floor))
    return tuple(out)


def next_height(n_j: int, params: StageParams) -> int:
    return n_j * params.r + sum(params.spacers)


def stage_offsets(n_j: int, params: StageParams) -> tuple[int, ...]:
    offs = [0]
    for s in params.spacers[:-1]:
        offs.append(offs[-1] + n_j + s)
    return tuple(offs)


def check_stage(n_j: int, params: StageParams) -> list[str]:
    """Violations of the Sidon spacer rules for one stage."""
    j = params.j
    problems = []
    if params.r < 1:
        problems.append(f"column count at stage {j}: r={params.r} < 1")
    if len(params.spacers) != params.r:
        problems.append(
            f"column count at stage {j}: {len(params.spacers)} spacers for r={params.r}"
        )
    if params.spacers and params.spacers[0] < GROWTH * n_j:
        problems.append(
            f"first spacer at ({j},1): s={params.spacers[0]} < 10*n_{j}={GROWTH * n_j}"
        )
    for i in range(1, len(params.spacers)):
        if not params.spacers[i] > GROWTH * params.spacers[i - 1]:
            problems.append(f"spacer growth at ({j},{i + 1})")
    return problems


def assemble(stages: Sequence[StageParams]) -> TowerSchema:
    """Derive heights, widths and offsets from stage parameters (no checks)."""
    heights = [1]
    widths = [Fraction(1)]
    offsets = []
    for st in stages:
        n = heights[-1]
        offsets.append(stage_offsets(n, st))
        heights.append(next_height(n, st))
        widths.append(widths[-1] / st.r if st.r else Fraction(0))
    return TowerSchema(tuple(stages), tuple(heights), tuple(widths), tuple(offsets))


ColumnRule = Callable[[int], int]


def default_columns(j: int) -> int:
    return 2**j


def build_schema(
    depth: int,
    policy: str | Mapping[int, Sequence[int]] = "minimal",
    columns: ColumnRule | Mapping[int, int] | None = None,
    notes: Sequence[str] = (),
) -> TowerSchema:
    """Build a validated schema of the given depth.

    ``policy`` is ``"minimal"`` or a mapping ``{stage: spacers}`` of explicit
    overrides; stages not in the mapping use minimal spacers.  An override
    fixes ``r`` for its stage.  ``columns`` gives ``r_j`` (default ``2**j``).
    """
    if depth < 1:
        raise SchemaError(f"depth must be >= 1, got {depth}")
    cap = max_stage_cap()
    if depth > cap:
        raise SchemaError(f"depth {depth} exceeds stage cap {cap} (RANKONE_MAX_STAGE)")
    if isinstance(policy, str):
        if policy != "minimal":
            raise SchemaError(f"unknown spacer policy {policy!r}")
        overrides: Mapping[int, Sequence[int]] = {}
    else:
        overrides = policy
    if columns is None:
        col_rule: ColumnRule = default_columns
    elif callable(columns):
        col_rule = columns
    else:
        mapping = dict(columns)
        col_rule = lambda j: mapping.get(j, default_columns(j))  # noqa: E731

    stages = []
    n = 1
    for j in range(1, depth + 1):
        if j in overrides:
            spacers = tuple(int(s) for s in overrides[j])
            params = StageParams(j, len(spacers), spacers)
            problems = check_stage(n, params)
            if problems:
                raise SchemaError("; ".join(problems))
        else:
            r = int(col_rule(j))
            params = StageParams(j, r, minimal_spacers(j, n, r))
        if params.r != default_columns(j):
            warnings.warn(
                f"stage {j} uses r={params.r} columns instead of 2**{j}; "
                "the product-dissipativity growth assumption no longer applies",
                stacklevel=2,
            )
        stages.append(params)
        n = next_height(n, params)
    schema = assemble(stages)
    if notes:
        schema = TowerSchema(
            schema.stages, schema.heights, schema.base_widths, schema.offsets, tuple(notes)
        )
    return schema


def validate(schema: TowerSchema) -> list[str]:
    """Every violated schema invariant, as readable messages; empty if consistent."""
    problems = []
    if not schema.heights or schema.heights[0] != 1:
        problems.append("initial height: n_1 must be 1")
    if not schema.base_widths or schema.base_widths[0] != 1:
        problems.append("initial width: w_1 must be 1")
    want = schema.depth + 1
    if len(schema.heights) != want:
        problems.append(f"height count: {len(schema.heights)} heights for depth {schema.depth}")
    if len(schema.base_widths) != want:
        problems.append(f"width count: {len(schema.base_widths)} widths for depth {schema.depth}")
    if len(schema.offsets) != schema.depth:
        problems.append(f"offset count: {len(schema.offsets)} stages of offsets")
    if problems:
        return problems

    for idx, st in enumerate(schema.stages):
        j = idx + 1
        if st.j != j:
            problems.append(f"stage index at position {j}: found j={st.j}")
        n = schema.heights[idx]
        problems.extend(check_stage(n, st))
        if schema.heights[idx + 1] != next_height(n, st):
            problems.append(f"height recurrence at stage {j}")
        offs = schema.offsets[idx]
        if len(offs) != st.r:
            problems.append(f"offset count at stage {j}")
            continue
        if offs and offs[0] != 0:
            problems.append(f"offset at ({j},1): expected 0")
        for i in range(1, len(offs)):
            if offs[i] != offs[i - 1] + n + st.spacers[i - 1]:
                problems.append(f"offset at ({j},{i + 1})")
        if offs and offs[-1] + n + st.spacers[-1] != schema.heights[idx + 1]:
            problems.append(f"column closure at stage {j}")
        if st.r >= 1 and schema.base_widths[idx + 1] != schema.base_widths[idx] / st.r:
            problems.append(f"width recurrence at stage {j}")
    return problems


def load_schema(path: str | os.PathLike, check: bool = True) -> TowerSchema:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not JSON ({exc})") from exc
    schema = TowerSchema.from_json(doc)
    if check:
        problems = validate(schema)
        if problems:
            raise SchemaError(f"{path}: " + "; ".join(problems))
    return schema
