"""Command line entry point: ``ikl simulate|accept|validate|norms``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from ..errors import ConfigError, IklError, ValidationError
from ..topology import block_norm_p_one
from .acceptance import acceptance_suite
from .runner import _jsonable, output_root, run
from .scenario import Scenario, parse_scenario

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _load(args: argparse.Namespace) -> Scenario:
    scenario = parse_scenario(args.config)
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    return scenario


def _print_json(obj) -> None:
    print(json.dumps(_jsonable(obj), indent=2, sort_keys=True))


def cmd_simulate(args: argparse.Namespace) -> int:
    scenario = _load(args)
    report = run(scenario, out_dir=args.out, threads=args.threads)
    for name, res in report.checks.items():
        print(f"{res.status.value:<14} {name} {res.message}".rstrip())
    if report.error:
        print(f"error: {report.error}", file=sys.stderr)
    print(f"csv: {report.csv_path}")
    print(f"json: {report.json_path}")
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_accept(args: argparse.Namespace) -> int:
    report = acceptance_suite(args.filter, threads=args.threads, on_result=lambda r: print(r.line(), flush=True))
    if report.warning:
        print(f"warning: {report.warning}", file=sys.stderr)
    root = output_root(args.out)
    root.mkdir(parents=True, exist_ok=True)
    path = root / "acceptance.json"
    path.write_text(json.dumps(_jsonable(report.to_dict()), indent=2, sort_keys=True) + "\n")
    passed = sum(r.passed for r in report.results)
    print(f"{passed}/{len(report.results)} criteria passed; report: {path}")
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_validate(args: argparse.Namespace) -> int:
    scenario = _load(args)
    fw = scenario.framework()
    _print_json({"scenario": scenario.name, "config_hash": scenario.config_hash(),
                 "step": scenario.step(), "tail_certificate": scenario.tail_certificate(),
                 "framework": fw.to_dict()})
    return EXIT_OK


def cmd_norms(args: argparse.Namespace) -> int:
    scenario = _load(args)
    k, n = scenario.topology, scenario.truncation_N
    lower = k.norm_minus_inf_one()
    table = {
        "scenario": scenario.name,
        "truncation_N": n,
        "norm_inf_1": k.norm_inf_one(),
        "norm_minus_inf_1": lower.value,
        "norm_minus_inf_1_fails_in_limit": lower.f3_fails_in_limit,
        "norm_p_1": {str(p): k.norm_p_one(p) for p in (1.0, 2.0)},
        "block_norm_p_1": {str(p): block_norm_p_one(k, n, p) for p in (1.0, 2.0, math.inf)},
        "tail": [],
    }
    m = 1
    while m <= n:
        table["tail"].append({"N": m, "tail_bound": k.tail_bound(m)})
        m *= 2
    if table["tail"][-1]["N"] != n:
        table["tail"].append({"N": n, "tail_bound": k.tail_bound(n)})
    _print_json(table)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="DIR", help="output root (default: $IKL_OUT_DIR or ./ikl_out)")
    common.add_argument("--seed", type=int, metavar="U64", help="override the scenario seed")
    common.add_argument("--threads", type=int, default=1, metavar="N", help="worker threads; never changes results")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ikl", description="Infinite Kuramoto model laboratory.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", parents=[common], help="run one scenario")
    p.add_argument("config", type=Path)
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("accept", parents=[common], help="run the acceptance suite")
    p.add_argument("--filter", metavar="PATTERN", help="substring of criterion names to run")
    p.set_defaults(func=cmd_accept)
    p = sub.add_parser("validate", parents=[common], help="framework report for a scenario")
    p.add_argument("config", type=Path)
    p.set_defaults(func=cmd_validate)
    p = sub.add_parser("norms", parents=[common], help="topology norms and tail table")
    p.add_argument("config", type=Path)
    p.set_defaults(func=cmd_norms)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IklError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
