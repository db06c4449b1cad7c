"""
Command-line entry point.

Every subcommand prints one JSON document on standard output. Exit codes:
0 on success or PASS, 2 when an audit or reproduction verdict fails, 1 on
usage, instance or other tool errors.
"""

from typing import Any, Dict, Optional, Sequence
import argparse
import json
import logging
import sys

from welfare.audit import approximation_audit, monotonicity_sweep, worst_ratio
from welfare.checks import run_all_checks
from welfare.config import Config
from welfare.exceptions import InstanceFormatError, WelfareError
from welfare.fixtures import FIXTURES, fixture_names
from welfare.greedy import brute_force_opt
from welfare.instances import instance_document, resolve_instance, save_instance, save_table
from welfare.mechanisms import (
    MECHANISM_IDS, CoveringMechanism, TwoPlayerMechanism, construct_distributions,
    construct_probability_table, get_mechanism
)
from welfare.model import BidProfile
from welfare.repro import REPRO_CASES, reproduce
from welfare.types import format_rational

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAIL = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors through the tool-error exit code."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _emit(payload: Dict[str, Any]) -> None:
    print(json.dumps(payload, indent=2, default=str))


def _add_instance_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--instance", required=True, help="instance file, or fixture:NAME")
    parser.add_argument("--epsilon", default=None, help="ε of a fixture, as num/den")
    parser.add_argument("--N", dest="N", default=None, help="N of a fixture")


def _model(args: argparse.Namespace):
    return resolve_instance(args.instance, args.epsilon, args.N)


def cmd_run(args: argparse.Namespace) -> int:
    model = _model(args)
    bids = BidProfile.parse(args.bids)
    mechanism = get_mechanism(args.mechanism)
    outcome = mechanism.run(model, bids, args.seed)
    payload = outcome.model_dump(mode="json")
    payload["expected_utilities"] = [format_rational(v) for v in mechanism.expected_utilities(model, bids)]
    if args.export_table:
        if isinstance(mechanism, (TwoPlayerMechanism, CoveringMechanism)):
            save_table(mechanism.table(model, bids.total), args.export_table)
        elif args.mechanism == "disjoint" and model.player_count == 2:
            save_table(construct_distributions(model, bids.total, 0, disjoint=True), args.export_table)
        else:
            raise UsageError(f"mechanism {args.mechanism} has no table to export")
        payload["table"] = args.export_table
    _emit(payload)
    return EXIT_OK


def cmd_audit(args: argparse.Namespace) -> int:
    model = _model(args)
    mechanism = get_mechanism(args.mechanism)
    report = monotonicity_sweep(mechanism, model, args.cap)
    payload: Dict[str, Any] = {"monotonicity": report.model_dump(mode="json")}
    passed = report.passed
    if args.approximation:
        approximation = approximation_audit(mechanism, model, args.cap, True if args.disjoint else None)
        ratio = worst_ratio(approximation)
        payload["approximation"] = approximation.model_dump(mode="json")
        payload["worst_ratio"] = format_rational(ratio) if ratio is not None else None
        passed = passed and approximation.passed
    payload["verdict"] = "PASS" if passed else "FAIL"
    _emit(payload)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_repro(args: argparse.Namespace) -> int:
    report = reproduce(args.case, args.epsilon, args.N)
    _emit(report.model_dump(mode="json"))
    return EXIT_OK if report.holds else EXIT_FAIL


def cmd_opt(args: argparse.Namespace) -> int:
    model = _model(args)
    bids = BidProfile.parse(args.bids)
    profile, value = brute_force_opt(model, bids, args.disjoint)
    _emit({
        "model": model.name,
        "bids": list(bids),
        "disjoint": args.disjoint or model.disjoint_only,
        "optimum": format_rational(value),
        "profile": profile.to_dict(model.labels),
    })
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    model = _model(args)
    results = run_all_checks(model, args.max_ground)
    _emit({"model": model.name, "checks": [r.model_dump(mode="json") for r in results]})
    return EXIT_OK


def cmd_table(args: argparse.Namespace) -> int:
    model = _model(args)
    a, b = BidProfile.parse(args.bids).budgets
    if args.kind == "P":
        table = construct_probability_table(model, a, b)
    else:
        table = construct_distributions(model, a, b, args.disjoint)
    problems = table.verify()
    if args.output:
        save_table(table, args.output)
    payload = table.to_export().model_dump(mode="json")
    payload["problems"] = problems
    _emit(payload)
    return EXIT_OK if not problems else EXIT_FAIL


def cmd_export(args: argparse.Namespace) -> int:
    model = _model(args)
    if args.output:
        save_instance(model, args.output)
        _emit({"model": model.name, "output": args.output})
    else:
        _emit(instance_document(model).model_dump(mode="json", by_alias=True))
    return EXIT_OK


def cmd_fixtures(args: argparse.Namespace) -> int:
    _emit({
        "fixtures": [
            {"name": name, "parameters": list(FIXTURES[name][1]), "description": FIXTURES[name][2]}
            for name in fixture_names()
        ],
        "repro_cases": sorted(REPRO_CASES),
        "mechanisms": list(MECHANISM_IDS),
    })
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from welfare.server import AuditServer

    uvicorn.run(AuditServer().get_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="welfare", description="Strategyproof allocation mechanisms and their audits")
    parser.add_argument("--verbose", "-v", action="store_true", help="log debug output to stderr")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = commands.add_parser("run", help="draw one allocation from a mechanism")
    _add_instance_options(run)
    run.add_argument("--bids", required=True, help="comma-separated budgets, e.g. 2,1")
    run.add_argument("--mechanism", default="two-player", choices=MECHANISM_IDS)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--export-table", default=None, help="write the mechanism table as JSON")
    run.set_defaults(handler=cmd_run)

    audit = commands.add_parser("audit", help="monotonicity sweep (and optionally approximation audit)")
    _add_instance_options(audit)
    audit.add_argument("--mechanism", default="two-player", choices=MECHANISM_IDS)
    audit.add_argument("--cap", type=int, default=Config.DEFAULT_BUDGET_CAP)
    audit.add_argument("--approximation", action="store_true", help="also compare welfare with the optimum")
    audit.add_argument("--disjoint", action="store_true", help="optimum over disjoint allocations")
    audit.set_defaults(handler=cmd_audit)

    repro = commands.add_parser("repro", help="reproduce a counterexample")
    repro.add_argument("--case", required=True, choices=sorted(REPRO_CASES))
    repro.add_argument("--epsilon", default=None)
    repro.add_argument("--N", dest="N", default=None)
    repro.set_defaults(handler=cmd_repro)

    opt = commands.add_parser("opt", help="brute-force optimum")
    _add_instance_options(opt)
    opt.add_argument("--bids", required=True)
    opt.add_argument("--disjoint", action="store_true")
    opt.set_defaults(handler=cmd_opt)

    check = commands.add_parser("check", help="run every structural checker")
    _add_instance_options(check)
    check.add_argument("--max-ground", type=int, default=Config.MAX_CHECK_GROUND)
    check.set_defaults(handler=cmd_check)

    table = commands.add_parser("table", help="build and export a mechanism table")
    _add_instance_options(table)
    table.add_argument("--bids", required=True)
    table.add_argument("--kind", choices=["M", "P"], default="M")
    table.add_argument("--disjoint", action="store_true")
    table.add_argument("--output", default=None)
    table.set_defaults(handler=cmd_table)

    export = commands.add_parser("export", help="write an instance or fixture as an instance file")
    _add_instance_options(export)
    export.add_argument("--output", default=None, help="file to write (default: standard output)")
    export.set_defaults(handler=cmd_export)

    fixtures = commands.add_parser("fixtures", help="list bundled fixtures, repro cases and mechanisms")
    fixtures.set_defaults(handler=cmd_fixtures)

    serve = commands.add_parser("serve", help="start the HTTP audit service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(handler=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.handler(args)
    except InstanceFormatError as exc:
        _emit({"error": "instance", "source": exc.source, "diagnostics": [list(d) for d in exc.diagnostics]})
        logger.error(str(exc))
        return EXIT_ERROR
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (WelfareError, ValueError) as exc:
        _emit({"error": type(exc).__name__, "message": str(exc)})
        logger.error(str(exc))
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
