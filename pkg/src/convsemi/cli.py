"""Command line: run scenario checks and write JSON/CSV reports.

Exit status: 0 all checks within tolerance, 1 a check failed, 2 the
scenario could not be parsed, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import traceback
from pathlib import Path

from .report import emit_report
from .scenario import (
    ScenarioError,
    Workspace,
    bundled_scenarios,
    load_scenario,
    run_check,
    select_checks,
)

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_INTERNAL = 0, 1, 2, 3

DEFAULT_SCENARIO = "nilpotent-extension"

_COMMANDS = {
    "identities": ("identities", "convolution-algebra identity suite"),
    "build": ("build", "construct the base family, dump it as CSV"),
    "extend": ("extend", "extend the family along the ladder, dump each level"),
    "verify": ("verify", "composition, generator and splitting residuals"),
    "homo": ("homo", "homomorphism suite"),
    "kernel": ("kernel", "Laplace, product and W_k diagnostics"),
    "run": (None, "every check listed in the scenario"),
}


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _nonneg(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convsemi",
        description="Verify local k-convoluted semigroups, their extension and the G_k homomorphism.",
    )
    parser.add_argument("--list", action="store_true", help="list bundled scenarios and exit")
    sub = parser.add_subparsers(dest="command")
    for name, (_, help_text) in _COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument(
            "--config",
            default=DEFAULT_SCENARIO,
            help=f"scenario file or bundled scenario name (default: {DEFAULT_SCENARIO})",
        )
        p.add_argument("--out", type=Path, default=None, help="directory for summary.json and traces/")
        p.add_argument("--dt", type=_positive, default=None, help="override the scenario grid step")
        p.add_argument("--tol", type=_nonneg, default=None, help="override every check tolerance")
        p.add_argument("--json", action="store_true", help="print the JSON summary to stdout")
        if name == "extend":
            p.add_argument("--depth", type=int, default=None, help="ladder depth (default: scenario depth)")
    return parser


def _dump_families(command: str, ws: Workspace, out: Path | None, depth: int | None) -> None:
    if out is None:
        return
    fam_dir = out / "families"
    fam_dir.mkdir(parents=True, exist_ok=True)
    if command == "build":
        ws.base.to_csv(fam_dir / "level_1.csv")
        (fam_dir / "level_1.json").write_text(ws.base.to_json() + "\n", encoding="utf-8")
    elif command == "extend":
        top = ws.ladder(depth)
        for n in range(1, top.power + 1):
            fam = top.level(n)
            fam.to_csv(fam_dir / f"level_{n}.csv")
            (fam_dir / f"level_{n}.json").write_text(fam.to_json() + "\n", encoding="utf-8")


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list:
        print("\n".join(bundled_scenarios()))
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_PARSE
    category = _COMMANDS[args.command][0]
    try:
        scenario = load_scenario(args.config)
        if args.dt is not None:
            scenario = scenario.with_dt(args.dt)
        checks = select_checks(scenario, category)
        ws = Workspace(scenario)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    start = time.perf_counter()
    results = []
    try:
        for spec in checks:
            report = run_check(ws, spec, args.tol)
            results.append((spec.name, spec.op, report))
            if not args.json:
                status = "PASS" if report.passed else "FAIL"
                print(f"{status}  {spec.name:<28} residual={report.max_abs_residual:.3e}  tol={report.tolerance_used:.3e}")
        _dump_families(args.command, ws, args.out, getattr(args, "depth", None))
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except Exception:  # noqa: BLE001 - reported as an internal error
        traceback.print_exc()
        return EXIT_INTERNAL
    wall_ms = (time.perf_counter() - start) * 1e3
    summary = emit_report(scenario.name, results, ws.grid, wall_ms, args.out)
    if args.json:
        print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK if all(r.passed for _, _, r in results) else EXIT_FAIL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
