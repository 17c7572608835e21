"""Command-line surface of the middle-convolution engine.

Every subcommand reads and writes the JSON documents of the core modules. Exit status is 0 on
success or a passing verdict, 1 on a failing verdict and 2 on usage or validation errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from sympy import divisors

from src.core.convolution import mc, mc_selfcheck, selfcheck_passed
from src.core.errors import MonodromyError, ParseError
from src.core.fields import CYCLOTOMIC, FINITE, make_residue_map, rational_field
from src.core.group_analysis import SL, SL_PLUS_MINUS, enumerate_group, reduce_tuple, sl_certificate
from src.core.oracle import plan_for_rank
from src.core.pipeline import PipelineConfig, run_pipeline
from src.core.tuples import (
    RANK_ONE_PATTERNS,
    construct_T,
    construct_rank_one,
    deserialize,
    deserialize_rank_one,
    direct_sum,
    entry_census,
    entry_jordan_data,
    is_rank_one_document,
    serialize,
    serialize_rank_one,
    tensor_rank_one,
)
from src.utils.config import get_settings
from src.utils.logger import get_logger

logger = get_logger(__name__)

BASE_DIR = Path(__file__).resolve().parents[1]
DEFAULT_BATCH_CONFIG = BASE_DIR / "config" / "pipelines.json"


def _emit(payload: bytes | str | dict, output: str | None) -> None:
    if isinstance(payload, dict):
        payload = json.dumps(payload, indent=2)
    if isinstance(payload, bytes):
        payload = payload.decode("utf-8")
    if output:
        Path(output).parent.mkdir(parents=True, exist_ok=True)
        Path(output).write_text(payload, encoding="utf-8")
        logger.info(f"Written → {output}")
    else:
        print(payload)


def _read(path: str) -> bytes:
    return Path(path).read_bytes()


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"{text!r} is not a rational number", "argv")


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ParseError(f"{text!r} is not a comma-separated list of integers", "argv")


def _default_orders(field) -> list[int]:
    if field.kind == FINITE:
        return list(divisors(field.size - 1))
    if field.kind == CYCLOTOMIC:
        return list(divisors(2 * field.order))
    return [1, 2]


def cmd_construct(args: argparse.Namespace) -> int:
    _emit(serialize(construct_T(args.m, args.r)), args.output)
    return 0


def cmd_rank_one(args: argparse.Namespace) -> int:
    pattern = args.pattern if args.pattern else [_fraction(v) for v in args.values.split(",")]
    r = args.r if args.r is not None else len(pattern) - 1
    _emit(serialize_rank_one(construct_rank_one(pattern, r, rational_field())), args.output)
    return 0


def cmd_tensor(args: argparse.Namespace) -> int:
    first, second = _read(args.first), _read(args.second)
    if is_rank_one_document(first):
        first, second = second, first
    if not is_rank_one_document(second):
        raise ParseError("one of the two documents must be a rank-one tuple", args.second)
    _emit(serialize(tensor_rank_one(deserialize(first), deserialize_rank_one(second))), args.output)
    return 0


def cmd_direct_sum(args: argparse.Namespace) -> int:
    _emit(serialize(direct_sum(deserialize(_read(args.first)), deserialize(_read(args.second)))), args.output)
    return 0


def cmd_convolve(args: argparse.Namespace) -> int:
    T = deserialize(_read(args.input))
    _emit(serialize(mc(T, _fraction(args.lam))), args.output)
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    T = deserialize(_read(args.input))
    orders = _int_list(args.orders) if args.orders else _default_orders(T.field)
    census = entry_census(T, args.order_bound)
    jordan = entry_jordan_data(T, orders)
    if args.csv:
        Path(args.csv).parent.mkdir(parents=True, exist_ok=True)
        census.to_frame().to_csv(args.csv, index=False)
        logger.info(f"Census table → {args.csv}")
    _emit(
        {
            "n": T.n,
            "r": T.r,
            "field": T.field.descriptor(),
            "eigenvalue_orders": orders,
            "census": census.to_json(),
            "jordan": [jd.to_json() for jd in jordan],
        },
        args.output,
    )
    return 0


def cmd_reduce(args: argparse.Namespace) -> int:
    T = deserialize(_read(args.input))
    rmap = make_residue_map(T.field, args.ell, args.k)
    _emit(serialize(reduce_tuple(T, rmap)), args.output)
    return 0


def cmd_certify(args: argparse.Namespace) -> int:
    T = deserialize(_read(args.input))
    seed = deserialize(_read(args.seed)) if args.seed else None
    orders = _int_list(args.orders) if args.orders else None
    cert = sl_certificate(T, args.mode, orders, seed)
    _emit(cert.to_json(), args.output)
    return 0 if cert.verdict else 1


def cmd_selfcheck(args: argparse.Namespace) -> int:
    T = deserialize(_read(args.input))
    report = mc_selfcheck(T, _fraction(args.lam))
    _emit(report, args.output)
    return 0 if selfcheck_passed(report) else 1


def cmd_pipeline(args: argparse.Namespace) -> int:
    config = PipelineConfig(
        family=args.family,
        m=args.m,
        r=args.r,
        q=args.q,
        report_path=args.report,
        eigenvalue_orders=_int_list(args.orders) if args.orders else None,
        mode=args.mode,
        selfcheck=not args.no_selfcheck,
    )
    report = run_pipeline(config)
    if not args.report:
        print(report.dumps())
    print(f"{'🟢' if report.verdict else '🔴'} verdict: {report.verdict}", file=sys.stderr)
    return 0 if report.verdict else 1


def cmd_batch(args: argparse.Namespace) -> int:
    config_path = Path(args.config) if args.config else DEFAULT_BATCH_CONFIG
    try:
        entries = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", str(config_path))
    if not isinstance(entries, list):
        raise ParseError("batch config must be a list of pipeline entries", str(config_path))
    report_dir = Path(args.report_dir or get_settings().report_dir)
    status = 0
    for entry in entries:
        config = PipelineConfig.from_dict(entry)
        name = f"family{config.family}_m{config.m}_r{config.r}" + (f"_q{config.q}" if config.q else "")
        config.report_path = str(report_dir / f"{name}.json")
        report = run_pipeline(config)
        print(f"{'✅' if report.verdict else '❌'} {name}")
        if not report.verdict:
            status = 1
    return status


def cmd_plan(args: argparse.Namespace) -> int:
    _emit(plan_for_rank(args.n, args.q), None)
    return 0


def cmd_group_order(args: argparse.Namespace) -> int:
    T = deserialize(_read(args.input))
    bound = args.bound or get_settings().group_bound
    order = enumerate_group(T.entries, bound)
    _emit({"order": order if order is not None else "exceeds bound", "bound": bound}, None)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mconv", description="Exact middle convolution of monodromy tuples")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="Build the seed tuple T_{m,r}")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("rank-one", help="Build a rank-one twist")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--pattern", choices=sorted(RANK_ONE_PATTERNS))
    group.add_argument("--values", help="comma-separated rationals, infinity last")
    p.add_argument("--r", type=int)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_rank_one)

    p = sub.add_parser("tensor", help="Twist a tuple by a rank-one tuple")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_tensor)

    p = sub.add_parser("direct-sum", help="Block-diagonal sum of two tuples")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_direct_sum)

    p = sub.add_parser("convolve", help="Apply MC_lambda")
    p.add_argument("input")
    p.add_argument("--lambda", dest="lam", default="-1")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_convolve)

    p = sub.add_parser("analyze", help="Entry census and Jordan data")
    p.add_argument("input")
    p.add_argument("--orders", help="comma-separated eigenvalue orders")
    p.add_argument("--order-bound", type=int, default=1000)
    p.add_argument("--csv", help="write the census table as CSV")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("reduce", help="Reduce a cyclotomic tuple modulo a prime")
    p.add_argument("input")
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--k", type=int)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("certify", help="Run the SL certificate battery")
    p.add_argument("input")
    p.add_argument("--mode", choices=[SL, SL_PLUS_MINUS], default=SL)
    p.add_argument("--orders", help="eigenvalue orders for the self-duality check")
    p.add_argument("--seed", help="reduced seed tuple for the informational form check")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("selfcheck", help="Consistency checks of one convolution step")
    p.add_argument("input")
    p.add_argument("--lambda", dest="lam", default="-1")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_selfcheck)

    p = sub.add_parser("pipeline", help="Build and check one family G_{i,m,r}")
    p.add_argument("--family", type=int, choices=[1, 2, 3, 4], required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--q", type=int)
    p.add_argument("--report")
    p.add_argument("--orders")
    p.add_argument("--mode", choices=[SL, SL_PLUS_MINUS])
    p.add_argument("--no-selfcheck", action="store_true")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("batch", help="Run every pipeline of a grid file")
    p.add_argument("--config")
    p.add_argument("--report-dir")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("plan", help="Family and r realizing a rank over F_q")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("group-order", help="Order of a small finite matrix group")
    p.add_argument("input")
    p.add_argument("--bound", type=int)
    p.set_defaults(func=cmd_group_order)

    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else 2
    try:
        return args.func(args)
    except (MonodromyError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(cli_main())
