"""Command-line front end.

Exit status: 0 when every bound check passes, 2 when a run completed but
violated its bound, 1 on usage or runtime errors. Summaries are printed as
``key=value`` lines; ``bounds`` prints CSV.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from pathlib import Path

from .adversaries import AdversaryKind, AdversarySpec
from .bandit import ETA_RULES
from .bounds import bound_table
from .core import Direction
from .harness import (
    _DIRECTION,
    Algorithm,
    ExperimentConfig,
    ExperimentError,
    compare_to_bound,
    export,
    run_experiment,
    verification_suite,
)
from .regularizers import NumericalFailure

EXIT_PASS, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2

CONFIG_KEYS = {
    "algorithm", "adversary", "d", "s", "T", "replications", "base_seed",
    "record_trajectory_every", "bandit_q", "bandit_eta_rule", "out", "format", "sweep",
}
ADVERSARY_KEYS = {"kind", "direction", "epsilon", "ramp"}
SWEEP_KEYS = {"d", "s", "T"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _ramp(text):
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("ramp must be comma-separated integers, e.g. 1,2,5,8")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparse-regret", description="Regret experiments with sparse outcome vectors.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run one experiment (or a sweep) and check it against its bound")
    run.add_argument("--config", type=Path, help="JSON config file; excludes the experiment flags")
    run.add_argument("--algo", choices=[a.value for a in Algorithm])
    run.add_argument("--adversary", choices=[k.value for k in AdversaryKind])
    run.add_argument("--direction", choices=[d.value for d in Direction])
    run.add_argument("--d", type=int)
    run.add_argument("--s", type=int)
    run.add_argument("--T", type=int)
    run.add_argument("--reps", type=int, default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--epsilon", type=float)
    run.add_argument("--ramp", type=_ramp, help="sparsity levels over equal blocks, e.g. 1,2,5,8")
    run.add_argument("--stride", type=int, help="trajectory subsampling stride (default T/100)")
    run.add_argument("--bandit-q", type=float, help="override the bandit exponent")
    run.add_argument("--eta-rule", choices=ETA_RULES, default=None)
    run.add_argument("--out", type=Path)
    run.add_argument("--format", choices=("csv", "json"))

    bounds = sub.add_parser("bounds", help="print the summary bound table at (d, s, T) as CSV")
    bounds.add_argument("--d", type=int, required=True)
    bounds.add_argument("--s", type=int, required=True)
    bounds.add_argument("--T", type=int, required=True)

    verify = sub.add_parser("verify", help="run the bound-verification suite")
    verify.add_argument("--only", action="append", choices=sorted(verification_suite()), help="run only these checks")
    verify.add_argument("--seed", type=int, default=7)
    return parser


def _direction_for(algorithm: Algorithm, kind: AdversaryKind, given):
    if given is not None:
        return Direction(given)
    if algorithm in _DIRECTION:
        return _DIRECTION[algorithm]
    return Direction.GAIN if kind is AdversaryKind.FIRST_S_GAINS else Direction.LOSS


def _make_config(doc: dict) -> ExperimentConfig:
    algorithm = Algorithm(doc["algorithm"])
    adv = doc["adversary"]
    kind = AdversaryKind(adv["kind"])
    ramp = adv.get("ramp")
    spec = AdversarySpec(
        kind=kind,
        d=doc["d"],
        s=doc["s"],
        T=doc["T"],
        direction=_direction_for(algorithm, kind, adv.get("direction")),
        epsilon=adv.get("epsilon"),
        ramp=tuple(ramp) if ramp is not None else None,
    )
    return ExperimentConfig(
        algorithm=algorithm,
        adversary=spec,
        replications=doc.get("replications", 1),
        base_seed=doc.get("base_seed", 0),
        record_trajectory_every=doc.get("record_trajectory_every"),
        bandit_q=doc.get("bandit_q"),
        bandit_eta_rule=doc.get("bandit_eta_rule") or "balanced",
    )


def _doc_from_flags(args) -> dict:
    missing = [f"--{name}" for name in ("algo", "adversary", "d", "s", "T") if getattr(args, name) is None]
    if missing:
        raise UsageError(f"missing required flags: {' '.join(missing)}")
    return {
        "algorithm": args.algo,
        "adversary": {"kind": args.adversary, "direction": args.direction, "epsilon": args.epsilon, "ramp": args.ramp},
        "d": args.d,
        "s": args.s,
        "T": args.T,
        "replications": 1 if args.reps is None else args.reps,
        "base_seed": 0 if args.seed is None else args.seed,
        "record_trajectory_every": args.stride,
        "bandit_q": args.bandit_q,
        "bandit_eta_rule": args.eta_rule,
        "out": None if args.out is None else str(args.out),
        "format": args.format,
    }


def _check_keys(doc: dict, allowed: set, where: str):
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise UsageError(f"unknown keys in {where}: {', '.join(unknown)}")


def _doc_from_file(path: Path) -> dict:
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise UsageError("config must be a JSON object")
    _check_keys(doc, CONFIG_KEYS, "config")
    if not isinstance(doc.get("adversary"), dict):
        raise UsageError("config needs an adversary object")
    _check_keys(doc["adversary"], ADVERSARY_KEYS, "adversary")
    for key in ("algorithm",):
        if key not in doc:
            raise UsageError(f"config is missing {key!r}")
    return doc


def _expand(doc: dict):
    """Cartesian product over the optional sweep block."""
    sweep = doc.get("sweep")
    if sweep is None:
        for key in ("d", "s", "T"):
            if key not in doc:
                raise UsageError(f"config is missing {key!r}")
        yield doc, None
        return
    if not isinstance(sweep, dict):
        raise UsageError("sweep must be an object of lists")
    _check_keys(sweep, SWEEP_KEYS, "sweep")
    axes = {}
    for key in ("d", "s", "T"):
        values = sweep.get(key, [doc[key]] if key in doc else None)
        if values is None:
            raise UsageError(f"{key!r} is given neither directly nor in the sweep")
        if not isinstance(values, list) or not values or not all(isinstance(v, int) for v in values):
            raise UsageError(f"sweep.{key} must be a non-empty list of integers")
        axes[key] = values
    for d, s, T in itertools.product(axes["d"], axes["s"], axes["T"]):
        yield {**doc, "d": d, "s": s, "T": T}, f"d{d}_s{s}_T{T}"


def _output_path(out, tag):
    if out is None:
        return None
    out = Path(out)
    return out if tag is None else out.with_name(f"{out.stem}_{tag}{out.suffix}")


def _command_run(args) -> int:
    flags = ("algo", "adversary", "direction", "d", "s", "T", "reps", "seed", "epsilon", "ramp", "stride",
             "bandit_q", "eta_rule", "out", "format")
    if args.config is not None:
        given = [f for f in flags if getattr(args, f) is not None]
        if given:
            raise UsageError(f"--config cannot be combined with {', '.join('--' + f.replace('_', '-') for f in given)}")
        doc = _doc_from_file(args.config)
    else:
        doc = _doc_from_flags(args)
    status = EXIT_PASS
    for run_doc, tag in _expand(doc):
        config = _make_config(run_doc)
        result = run_experiment(config)
        report = compare_to_bound(result)
        lines = [
            f"algorithm={config.algorithm.value}",
            f"adversary={config.adversary.kind.value}",
            f"d={config.d}",
            f"s={config.s}",
            f"T={config.T}",
            f"replications={config.replications}",
            f"seed={config.base_seed}",
            *report.lines(),
        ]
        path = _output_path(run_doc.get("out"), tag)
        if path is not None:
            fmt = run_doc.get("format") or ("json" if path.suffix == ".json" else "csv")
            export(result, fmt, path)
            lines.append(f"output={path}")
        print("\n".join(lines))
        if tag is not None:
            print()
        if not report.passed:
            status = EXIT_VIOLATION
    return status


def _command_bounds(args) -> int:
    table = bound_table(args.d, args.s, args.T)
    print("setting,bound")
    for name, value in table.items():
        print(f"{name},{'' if value is None else repr(value)}")
    return EXIT_PASS


def _command_verify(args) -> int:
    suite = verification_suite(args.seed)
    names = args.only or list(suite)
    status = EXIT_PASS
    for name in names:
        report = compare_to_bound(run_experiment(suite[name]))
        print(f"check={name} " + " ".join(report.lines()), flush=True)
        if not report.passed:
            status = EXIT_VIOLATION
    return status


COMMANDS = {"run": _command_run, "bounds": _command_bounds, "verify": _command_verify}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
    except (ValueError, KeyError, TypeError, OSError, ExperimentError, NumericalFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
