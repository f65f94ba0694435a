"""Command-line front end: single runs, sweeps, closure fuzzing, and
configuration checking.

Exit codes: 0 success, 1 usage/config error, 2 budget exhausted,
3 property violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .core import (
    ConfigurationError,
    ParameterError,
    agent_to_dict,
    config_to_json,
    new_params,
)
from .harness import (
    GENERATORS,
    ExperimentSpec,
    RngStream,
    closure_fuzz,
    generate_config,
    mix_seed,
    run,
    sweep,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BUDGET = 2
EXIT_VIOLATION = 3


def _fail(reason: str, message: str) -> int:
    print(f"error: {reason}: {message}", file=sys.stderr)
    return EXIT_USAGE


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the interface pins 1
    def error(self, message):
        print(f"error: usage: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_constants(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigurationError("constants file must be a JSON object")
    return data


def _default_jobs() -> int:
    env = os.environ.get("SSRK_DEFAULT_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def cmd_run(args) -> int:
    try:
        constants = _load_constants(args.constants)
        params = new_params(args.n, args.rho, **constants)
    except (ParameterError, ConfigurationError, OSError, json.JSONDecodeError) as exc:
        return _fail("parameter-range", str(exc))
    try:
        rng = RngStream(args.seed)
        config0 = generate_config(
            args.init, params, rng, distinct_ranks=args.distinct_ranks
        )
    except ConfigurationError as exc:
        return _fail("configuration", str(exc))
    result = run(
        config0,
        params,
        seed=args.seed,
        max_interactions=args.max_interactions,
        rng=rng,
        want_final=args.snapshot_out is not None,
    )
    if args.snapshot_out is not None:
        report, final = result
        try:
            with open(args.snapshot_out, "w") as fh:
                fh.write(config_to_json(final) + "\n")
        except OSError as exc:
            return _fail("io", str(exc))
    else:
        report = result
    print(json.dumps(report.to_dict(), sort_keys=True, indent=2))
    return EXIT_OK if report.first_safe_entry is not None else EXIT_BUDGET


def cmd_sweep(args) -> int:
    try:
        with open(args.spec) as fh:
            spec = ExperimentSpec.from_json(fh.read())
    except (OSError, json.JSONDecodeError, ConfigurationError, ParameterError) as exc:
        return _fail("spec", str(exc))
    out = args.out if args.out is not None else spec.output
    if out is None:
        return _fail("spec", "no output path (--out flag or spec 'output' key)")
    parent = os.path.dirname(os.path.abspath(out))
    if not os.path.isdir(parent):
        return _fail("io", f"output directory does not exist: {parent}")
    sweep(spec, jobs=args.jobs, out_path=out)
    return EXIT_OK


def cmd_fuzz_closure(args) -> int:
    if args.configs < 1:
        return _fail("configuration", "--configs must be >= 1 (nothing to test)")
    try:
        params = new_params(args.n, args.rho)
    except ParameterError as exc:
        return _fail("parameter-range", str(exc))
    violation = closure_fuzz(params, args.configs, args.seed)
    if violation is None:
        print(
            json.dumps(
                {"configs": args.configs, "n": args.n, "rho": args.rho, "violations": 0},
                sort_keys=True,
            )
        )
        return EXIT_OK
    payload = {
        "config_index": violation.config_index,
        "pair": list(violation.pair),
        "pre": [agent_to_dict(a) for a in violation.pre],
        "post": [agent_to_dict(a) for a in violation.post],
    }
    print(json.dumps(payload, sort_keys=True, indent=2))
    print("error: closure-violation: safe set not closed under interaction",
          file=sys.stderr)
    return EXIT_VIOLATION


def cmd_check_config(args) -> int:
    if (args.constants is None) == (args.spec is None):
        return _fail("usage", "provide exactly one of --constants or --spec")
    try:
        if args.spec is not None:
            with open(args.spec) as fh:
                ExperimentSpec.from_json(fh.read())
            print(json.dumps({"valid": True, "kind": "spec"}, sort_keys=True))
        else:
            constants = _load_constants(args.constants)
            # validate keys and ranges against a small reference population
            new_params(args.n, args.rho, **constants)
            print(json.dumps({"valid": True, "kind": "constants"}, sort_keys=True))
    except (OSError, json.JSONDecodeError, ConfigurationError, ParameterError) as exc:
        return _fail("invalid-config", str(exc))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ssrk", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a single seeded run")
    p_run.add_argument("--n", type=int, required=True)
    p_run.add_argument("--rho", type=int, required=True)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--init", choices=sorted(GENERATORS), default="uniform_random")
    p_run.add_argument("--max-interactions", type=int, default=10_000_000)
    p_run.add_argument("--constants", metavar="JSON_PATH")
    p_run.add_argument("--snapshot-out", metavar="PATH")
    p_run.add_argument("--distinct-ranks", action="store_true")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run an experiment grid to CSV")
    p_sweep.add_argument("--spec", required=True, metavar="JSON_PATH")
    p_sweep.add_argument("--out", metavar="CSV_PATH")
    p_sweep.add_argument("--jobs", type=int, default=_default_jobs())
    p_sweep.set_defaults(func=cmd_sweep)

    p_fuzz = sub.add_parser(
        "fuzz-closure", help="exhaustive safe-set closure check on fuzzed configs"
    )
    p_fuzz.add_argument("--n", type=int, required=True)
    p_fuzz.add_argument("--rho", type=int, required=True)
    p_fuzz.add_argument("--configs", type=int, required=True)
    p_fuzz.add_argument("--seed", type=int, default=0)
    p_fuzz.set_defaults(func=cmd_fuzz_closure)

    p_check = sub.add_parser("check-config", help="validate a constants or spec file")
    p_check.add_argument("--constants", metavar="JSON_PATH")
    p_check.add_argument("--spec", metavar="JSON_PATH")
    p_check.add_argument("--n", type=int, default=16,
                         help="population used to range-check constants")
    p_check.add_argument("--rho", type=int, default=2)
    p_check.set_defaults(func=cmd_check_config)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ParameterError, ConfigurationError) as exc:
        return _fail("configuration", str(exc))


if __name__ == "__main__":
    raise SystemExit(main())
