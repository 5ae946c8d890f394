"""Command-line front end.

Exit codes: 0 success (possibly with warnings), 1 validation failure,
2 numerical failure, 3 configuration or IO error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from . import scenario as sc
from .errors import (
    ConfigError,
    DegenerateLagrangian,
    DegenerateSymplectic,
    GuardTripped,
    InvalidParams,
    OutOfChart,
    SingularFrame,
    StepSizeUnderflow,
    UnknownModel,
    ValidationFailure,
)
from .models import REGISTRY, build, model_names

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_CONFIG = 0, 1, 2, 3
WORKERS_ENV = "VIRIALKIT_MAX_WORKERS"

NUMERICAL = (StepSizeUnderflow, DegenerateLagrangian, DegenerateSymplectic, SingularFrame, OutOfChart, GuardTripped)
VALIDATION = (ValidationFailure, InvalidParams, UnknownModel)


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, VALIDATION):
        return EXIT_VALIDATION
    if isinstance(exc, NUMERICAL):
        return EXIT_NUMERICAL
    raise exc


def cmd_validate(args) -> int:
    try:
        prepared = sc.prepare(sc.load(args.scenario))
    except (ConfigError, *VALIDATION) as exc:
        _err(str(exc))
        return _exit_code(exc)
    m = prepared.model
    print(f"scenario {prepared.scenario.name}: ok")
    print(f"  model {m.name} ({prepared.dynamics.formalism}), state {', '.join(prepared.dynamics.state_names)}")
    print(f"  virial functions: {', '.join(prepared.virials)}")
    for k, v in sorted(m.checks.items()):
        print(f"  check {k}: {v:.3e}")
    return EXIT_OK


def _run_one(path: str, out: str, tmax: Optional[float], period: Optional[str]) -> tuple[int, str]:
    try:
        scen = sc.load(path)
        prepared = sc.prepare(scen, t_max=tmax)
        result = sc.execute(prepared, period)
        formats = scen.config.get("outputs", {}).get("formats", sc.ALL_OUTPUTS)
        sc.write_outputs(result, out, formats)
    except Exception as exc:  # mapped to the exit-code contract
        try:
            return _exit_code(exc), str(exc)
        except Exception:
            return EXIT_NUMERICAL, f"{type(exc).__name__}: {exc}"
    bad = [k for k, e in result.report["virial"].items() if not e["consistent"]]
    note = f"{scen.name}: wrote {out}"
    if result.aborted:
        note += " (guard tripped, partial trajectory)"
    if bad:
        note += f" (self-consistency above tolerance: {', '.join(bad)})"
    return EXIT_OK, note


def cmd_run(args) -> int:
    if args.batch is None and args.scenario is None:
        _err("run needs --scenario or --batch")
        return EXIT_CONFIG
    if args.batch is not None:
        return _run_batch(args)
    out = args.out
    if out is None:
        try:
            cfg = sc.load(args.scenario).config
        except ConfigError as exc:
            _err(str(exc))
            return EXIT_CONFIG
        out = cfg.get("outputs", {}).get("directory")
        if out is None:
            _err("no output directory: pass --out or set outputs.directory")
            return EXIT_CONFIG
    code, msg = _run_one(args.scenario, out, args.tmax, args.period)
    (print if code == EXIT_OK else _err)(msg)
    return code


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return max(1, min(4, os.cpu_count() or 1))
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _run_batch(args) -> int:
    directory = Path(args.batch)
    if not directory.is_dir():
        _err(f"batch directory {directory} not found")
        return EXIT_CONFIG
    if args.out is None:
        _err("--batch needs --out")
        return EXIT_CONFIG
    paths = sorted(directory.glob("*.json"))
    jobs = [(str(p), str(Path(args.out) / p.stem), args.tmax, args.period) for p in paths]
    n = min(_workers(), max(len(jobs), 1))
    if n == 1:
        results = [_run_one(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(_run_one, *zip(*jobs)))
    worst = EXIT_OK
    for code, msg in results:  # scenario order
        (print if code == EXIT_OK else _err)(msg)
        worst = max(worst, code)
    return worst


def _model_rows() -> list[dict]:
    rows = []
    for name in model_names():
        m = build(name)
        rows.append(
            {
                "name": name,
                "description": m.description,
                "formalisms": list(m.formalisms),
                "params": sc._clean(m.params),
                "units": m.units,
                "initial_states": list(m.initial_states),
                "virial_functions": m.virial_names(),
                "constants": {k: {"value": c.value, "provenance": c.provenance} for k, c in m.constants.items()},
                "scenarios": [sc.example_scenario(m, f) for f in m.formalisms],
            }
        )
    return rows


def cmd_list_models(args) -> int:
    rows = _model_rows()
    if args.json:
        print(json.dumps(rows, indent=2))
        return EXIT_OK
    for r in rows:
        print(f"{r['name']}: {r['description']}")
        print(f"  formalisms: {', '.join(r['formalisms'])}")
        print(f"  params: {', '.join(f'{k}={v}' for k, v in r['params'].items())}")
        for f, names in r["virial_functions"].items():
            print(f"  virial [{f}]: {', '.join(names)}")
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        params = json.loads(args.params) if args.params else None
    except json.JSONDecodeError as exc:
        _err(f"--params is not valid JSON: {exc}")
        return EXIT_CONFIG
    try:
        m = build(args.model, params)
    except VALIDATION as exc:
        _err(str(exc))
        return EXIT_VALIDATION
    print(f"model {m.name}: all checks passed")
    for k, v in sorted(m.checks.items()):
        print(f"  {k}: {v:.3e}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="virialkit", description="Virial averages for mechanical systems")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="schema check and model build without integration")
    v.add_argument("--scenario", required=True)
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("run", help="integrate a scenario and write trajectory, report and convergence data")
    r.add_argument("--scenario")
    r.add_argument("--batch", help="run every *.json scenario in this directory")
    r.add_argument("--out")
    r.add_argument("--tmax", type=float)
    r.add_argument("--period", help="auto, none or a number")
    r.set_defaults(func=cmd_run)

    lm = sub.add_parser("list-models", help="print the model registry")
    lm.add_argument("--json", action="store_true")
    lm.set_defaults(func=cmd_list_models)

    c = sub.add_parser("check", help="jet and structure-equation verification of one model")
    c.add_argument("--model", required=True, help=f"one of {', '.join(sorted(REGISTRY))}")
    c.add_argument("--params", help="JSON object of parameter overrides")
    c.set_defaults(func=cmd_check)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
