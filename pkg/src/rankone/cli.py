"""Command-line front end.

Every output document carries the artifact version and an echo of the
configuration (minus ``--workers`` and ``--out``, which never change the
result).  Exit codes: 0 success/certified, 1 violation/not certified,
2 usage or input error, 3 internal inconsistency.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .family import (
    BranchPreconditionError,
    FamilySpec,
    InternalInconsistency,
    build_member,
    certify_disjoint,
    divergence_report,
    positive_branch_check,
    zero_branch_scan,
)
from .gaussian import (
    AlphabetTooLarge,
    NotPSD,
    ProgressionSchedule,
    block_independence_check,
    default_partition,
    gram,
    hk_estimate,
    hk_report,
    xi_entropy,
)
from .levelsets import (
    DepthExhausted,
    LevelSet,
    apply_power,
    base_set,
    difference,
    intersect,
    is_disjoint,
    measure,
    union,
)
from .spectral import product_dissipativity_diagnostic, to_csv
from .tower import SchemaError, TowerSchema, build_schema, load_schema, validate

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3
_NOT_ECHOED = {"func", "workers", "out"}


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def _bits(text: str) -> tuple[int, ...]:
    cleaned = text.replace(",", "").strip()
    if cleaned and set(cleaned) - {"0", "1"}:
        raise argparse.ArgumentTypeError(f"bits must be a 0/1 string, got {text!r}")
    return tuple(int(c) for c in cleaned)


def _L_range(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",")]


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not JSON ({exc})")


def _config(args) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v)
            for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED}


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _emit_json(args, result) -> None:
    doc = {"version": __version__, "config": _config(args), "result": result}
    _emit(args, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _schema_from(args) -> TowerSchema:
    if getattr(args, "schema", None):
        return load_schema(args.schema)
    if getattr(args, "depth", None):
        return build_schema(args.depth)
    raise UsageError("give --schema FILE or --depth D")


def _family_from(args, need_k: int = 1) -> FamilySpec:
    if args.family:
        spec = FamilySpec.from_json(_read_json(args.family))
    else:
        longest = max(len(getattr(args, "bits", None) or ()),
                      len(getattr(args, "against", None) or ()))
        spec = FamilySpec((), ProgressionSchedule.default(max(need_k, longest)))
    if getattr(args, "L", None) and getattr(args, "k", None):
        entries = list(spec.schedule.entries)
        entries[args.k - 1] = spec.schedule.entry(args.k).with_L(args.L)
        spec = FamilySpec(spec.bits, ProgressionSchedule(tuple(entries)))
    if getattr(args, "bits", None) is not None:
        spec = spec.with_bits(args.bits)
    return spec


def _entry(spec: FamilySpec, args):
    return spec.schedule.entry(args.k)


def _member(spec: FamilySpec, args) -> TowerSchema:
    if getattr(args, "schema", None):
        return load_schema(args.schema)
    need = max(spec.required_depth(), spec.schedule.entry(args.k).j + 1)
    return build_member(spec, max(args.depth or 0, need))


# -- schema -----------------------------------------------------------------

def cmd_schema_build(args) -> int:
    if args.policy == "minimal":
        policy = "minimal"
    else:
        doc = _read_json(args.policy)
        policy = {int(j): [int(s) for s in sp] for j, sp in doc.items()}
    schema = build_schema(args.depth, policy)
    _emit(args, schema.dumps() + "\n")
    return EXIT_OK


def cmd_schema_validate(args) -> int:
    schema = TowerSchema.from_json(_read_json(args.schema))
    problems = validate(schema)
    for p in problems:
        print(f"violation: {p}", file=sys.stderr)
    _emit_json(args, {"valid": not problems, "violations": problems})
    return EXIT_VIOLATION if problems else EXIT_OK


# -- level sets ---------------------------------------------------------------

def cmd_setops(args) -> int:
    schema = _schema_from(args)
    A = LevelSet.from_json(_read_json(args.a), schema)
    B = LevelSet.from_json(_read_json(args.b), schema) if args.b else None
    if args.op in ("intersect", "union", "difference", "disjoint") and B is None:
        raise UsageError(f"{args.op} needs --b")
    if args.op == "measure":
        value = measure(schema, A)
        result = {"measure": str(value), "measure_float": float(value)}
    elif args.op == "power":
        img = apply_power(schema, A, args.m, args.max_stage)
        result = {"set": img.to_json(), "stage": img.stage}
    elif args.op == "disjoint":
        result = {"disjoint": is_disjoint(schema, A, B, args.max_stage)}
    else:
        fn = {"intersect": intersect, "union": union, "difference": difference}[args.op]
        out = fn(schema, A, B, args.max_stage)
        result = {"set": out.to_json(), "measure": str(measure(schema, out))}
    _emit_json(args, result)
    return EXIT_OK


def cmd_correlate(args) -> int:
    schema = _schema_from(args)
    E = LevelSet.from_json(_read_json(args.set), schema) if args.set else base_set(schema, args.stage)
    seq, report = product_dissipativity_diagnostic(schema, E, args.n_max, args.max_stage,
                                                   args.workers)
    if args.format == "csv":
        comments = [f"rankone {__version__}", "config " + json.dumps(_config(args), sort_keys=True),
                    "diagnostic " + json.dumps(report.summary(), sort_keys=True)]
        _emit(args, to_csv(seq, comments))
    else:
        _emit_json(args, {"rho": [str(v) for v in seq.values], "stage": seq.stage,
                          "report": report.summary()})
    return EXIT_OK


# -- gaussian ---------------------------------------------------------------

def cmd_gram(args) -> int:
    spec = _family_from(args, args.k)
    schema = _member(spec, args)
    entry = _entry(spec, args)
    part = default_partition(schema, entry.j, args.d)
    cov = gram(schema, part, entry.shifts(schema), args.max_stage)
    ind = block_independence_check(cov)
    _emit_json(args, {"covariance": cov.to_json(), "independent": ind.independent,
                      "witness": ind.witness_json()})
    return EXIT_OK if ind else EXIT_VIOLATION


def cmd_entropy(args) -> int:
    spec = _family_from(args, args.k)
    schema = _member(spec, args)
    entry = _entry(spec, args)
    part = default_partition(schema, entry.j, args.d)
    hk = hk_estimate(schema, entry, part, args.samples, args.seed, args.workers, args.max_stage)
    H, exact = xi_entropy(schema, part, args.samples, args.seed, args.max_stage)
    result = hk_report(hk, H)
    result["H_xi_exact"] = exact
    result["seed"] = args.seed
    _emit_json(args, result)
    return EXIT_OK


# -- family -----------------------------------------------------------------

def cmd_family_certify(args) -> int:
    spec = _family_from(args, args.k)
    schema = _member(spec, args)
    entry = _entry(spec, args)
    cert = certify_disjoint(schema, entry, args.max_stage)
    result = {"member": spec.to_json(), "notes": list(schema.notes),
              "certificate": cert.to_json()}
    if args.samples and cert.ok:
        part = default_partition(schema, entry.j, args.d)
        result["entropy"] = positive_branch_check(schema, entry, part, args.samples, args.seed,
                                                  args.workers, args.max_stage, cert).to_json()
    _emit_json(args, result)
    return EXIT_OK if cert.ok else EXIT_VIOLATION


def cmd_family_scan(args) -> int:
    spec = _family_from(args, args.k)
    schema = _member(spec, args)
    entry = _entry(spec, args)
    part = default_partition(schema, entry.j, args.d)
    report = zero_branch_scan(schema, entry, part, args.L_range, args.samples, args.seed,
                              args.workers, args.max_stage)
    _emit_json(args, report.to_json())
    return EXIT_OK


def cmd_family_report(args) -> int:
    spec_a = _family_from(args, args.k or 1)
    spec_b = spec_a.with_bits(args.against)
    report = divergence_report(spec_a, spec_b, args.depth, args.samples or 100_000, args.seed,
                               args.d, args.workers, estimates=bool(args.samples),
                               max_stage=args.max_stage)
    _emit_json(args, report)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, schema: bool = True) -> None:
    if schema:
        p.add_argument("--schema", help="schema JSON file")
        p.add_argument("--depth", type=_positive_int, help="build a minimal schema of this depth")
    p.add_argument("--max-stage", type=_positive_int, default=None)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--out", help="output file (default stdout)")


def _family_args(p: argparse.ArgumentParser, k_required: bool = True) -> None:
    p.add_argument("--family", help="family JSON file (bits + schedule)")
    p.add_argument("--bits", type=_bits, default=None, help="bit prefix, e.g. 101")
    p.add_argument("--k", type=_positive_int, required=k_required)
    p.add_argument("--L", type=_positive_int, default=None, help="override L(k)")
    p.add_argument("--d", type=_positive_int, default=1, help="partition vectors")


def _stochastic(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--samples", type=_positive_int, required=required,
                   default=None if required else 0)
    p.add_argument("--seed", type=int, required=required, default=0)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rankone", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rankone {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sch = sub.add_parser("schema", help="build or validate tower schemas")
    ssub = sch.add_subparsers(dest="action", required=True)
    p = ssub.add_parser("build")
    p.add_argument("--depth", type=_positive_int, required=True)
    p.add_argument("--policy", default="minimal", help="'minimal' or a JSON override file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_schema_build)
    p = ssub.add_parser("validate")
    p.add_argument("--schema", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_schema_validate)

    p = sub.add_parser("setops", help="exact level-set operations")
    p.add_argument("op", choices=["measure", "intersect", "union", "difference", "disjoint",
                                  "power"])
    p.add_argument("--a", required=True, help="LevelSet JSON")
    p.add_argument("--b", help="second LevelSet JSON")
    p.add_argument("--m", type=_nonneg_int, default=0, help="power of T")
    _common(p)
    p.set_defaults(func=cmd_setops)

    p = sub.add_parser("correlate", help="exact correlation sequence and S(N)")
    p.add_argument("--set", help="LevelSet JSON (default: base of --stage)")
    p.add_argument("--stage", type=_positive_int, default=1)
    p.add_argument("--n-max", type=_nonneg_int, default=100)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    _common(p)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("gram", help="exact Gram matrix over P_k and block independence")
    _family_args(p)
    _common(p)
    p.set_defaults(func=cmd_gram)

    p = sub.add_parser("entropy", help="Monte-Carlo h_k estimate")
    _family_args(p)
    _stochastic(p)
    _common(p)
    p.set_defaults(func=cmd_entropy)

    fam = sub.add_parser("family", help="branching family members and certificates")
    fsub = fam.add_subparsers(dest="action", required=True)
    p = fsub.add_parser("certify")
    _family_args(p)
    _stochastic(p, required=False)
    _common(p)
    p.set_defaults(func=cmd_family_certify)
    p = fsub.add_parser("scan")
    _family_args(p)
    p.add_argument("--L-range", type=_L_range, default=list(range(1, 7)), help="e.g. 1..6")
    _stochastic(p)
    _common(p)
    p.set_defaults(func=cmd_family_scan)
    p = fsub.add_parser("report")
    _family_args(p, k_required=False)
    p.add_argument("--against", type=_bits, required=True, help="bits of the second member")
    _stochastic(p, required=False)
    _common(p, schema=False)
    p.add_argument("--depth", type=_positive_int, default=None)
    p.set_defaults(func=cmd_family_report)
    return parser


def _qualified(exc: BaseException) -> str:
    return f"{type(exc).__module__.rsplit('.', 1)[-1]}: {exc}"


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InternalInconsistency as exc:
        print(f"rankone: internal inconsistency: {_qualified(exc)}", file=sys.stderr)
        return EXIT_INTERNAL
    except NotPSD as exc:
        print(f"rankone: internal inconsistency: {_qualified(exc)}", file=sys.stderr)
        return EXIT_INTERNAL
    except UsageError as exc:
        print(f"rankone: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SchemaError, DepthExhausted, AlphabetTooLarge, BranchPreconditionError,
            ValueError, KeyError) as exc:
        print(f"rankone: {_qualified(exc)}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
