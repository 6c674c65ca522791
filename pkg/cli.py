"""
Command-line front end of the sieve laboratory.

    python cli.py tuple check --h 0,2,6
    python cli.py series --h 0,2 --pmax 1000000
    python cli.py weights dump --h 0,2,6 --x 1000000 --theta 0.3333 --R 50
    python cli.py integrals --k 4 --m 1 --budget 100000 --seed 1
    python cli.py experiment --config config.yaml

Exit codes: 0 success, 1 domain or resource error, 2 usage error.
"""
import argparse
import logging
import os
import sys
from typing import Any, Dict, List, Optional

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError

from errors import DomainError, ResourceError, SieveLabError
from experiment import ExperimentConfig, run_report, write_csv_rows, write_report
from integrals import MONTE_CARLO, METHODS, integral_I, integral_L
from numtheory import factorize, small_primes
from series import DEFAULT_PMAX, class_count, singular_series
from tuples import AdmissibleTuple, DEFAULT_THETA, build_context, greedy_admissible, omega
from weights import build_weight_table, dump_table

logger = logging.getLogger("SieveLab")

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

ENV_OVERRIDES = {
    "workers": ("SIEVELAB_WORKERS", int),
    "block_size": ("SIEVELAB_BLOCK_SIZE", int),
    "segment_size": ("SIEVELAB_SEGMENT_SIZE", int),
    "max_support": ("SIEVELAB_MAX_SUPPORT", int),
    "db_url": ("SIEVELAB_DB_URL", str),
}


def setup_logging():
    """stderr logging at LOG_LEVEL (WARNING by default), optionally mirrored to LOG_FILE."""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    log_file = os.getenv("LOG_FILE")
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=os.getenv("LOG_LEVEL", "WARNING").upper(),
        format=LOG_FORMAT,
        handlers=handlers,
    )


def parse_offsets(text: str) -> List[int]:
    """Comma-separated naturals; ordering is checked later."""
    parts = [p.strip() for p in text.split(",")]
    if not parts or any(not p.isdigit() for p in parts):
        raise argparse.ArgumentTypeError(f"offsets must be comma-separated naturals, got {text!r}")
    return [int(p) for p in parts]


def load_config(path: str, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Load an experiment from YAML, then environment variables, then explicit flags.
    Later sources take precedence.
    """
    load_dotenv()
    conf: Dict[str, Any] = {}
    if not os.path.exists(path):
        raise DomainError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        conf = yaml.safe_load(f) or {}
    if not isinstance(conf, dict):
        raise DomainError(f"config file {path} must hold a mapping")
    logger.info(f"Loaded config from {path}")

    if isinstance(conf.get("offsets"), str):
        conf["offsets"] = parse_offsets(conf["offsets"])

    for key, (env_name, cast) in ENV_OVERRIDES.items():
        value = os.getenv(env_name)
        if value:
            conf[key] = cast(value)

    for key, value in (overrides or {}).items():
        if value is not None:
            conf[key] = value
    return ExperimentConfig(**conf)


def _context_from_args(args) -> Any:
    B = factorize(args.B) if getattr(args, "B", None) else None
    return build_context(
        args.h,
        B=B,
        theta=getattr(args, "theta", DEFAULT_THETA),
        x=getattr(args, "x", 10 ** 6),
        R=getattr(args, "R", None),
    )


def cmd_tuple(args) -> int:
    if args.action == "greedy":
        if args.k is None:
            raise DomainError("tuple greedy needs --k")
        print(",".join(str(h) for h in greedy_admissible(args.k)))
        return 0
    if args.h is None:
        raise DomainError("tuple check needs --h")
    adm = AdmissibleTuple(tuple(args.h))
    ctx = _context_from_args(args)
    print(f"admissible: {','.join(str(h) for h in adm.offsets)} (k={adm.k})")
    print(f"W = {ctx.W}")
    print("p\tomega(p)")
    listed = sorted(set(int(p) for p in small_primes(2 * adm.k * adm.k)) | set(ctx.difference_primes))
    for p in listed:
        print(f"{p}\t{omega(ctx, p)}")
    for bp in ctx.bad_primes:
        print(f"bad prime {bp.p}: residues {list(bp.residues)} chosen indices {list(bp.indices)}")
    for j in range(1, adm.k + 1):
        print(f"W_{j} = {ctx.W_of(j)}")
    return 0


def cmd_series(args) -> int:
    ctx = _context_from_args(args)
    s_b = singular_series(ctx, ctx.B, args.pmax)
    s_wb = singular_series(ctx, ctx.WB, args.pmax)
    print(f"S_B = {s_b.value!r} tail_bound {s_b.tail_bound!r} p_max {s_b.truncation_prime}")
    print(f"S_WB = {s_wb.value!r} tail_bound {s_wb.tail_bound!r} p_max {s_wb.truncation_prime}")
    print(f"phi_omega(W) = {class_count(ctx)}")
    return 0


def cmd_weights(args) -> int:
    ctx = _context_from_args(args)
    table = build_weight_table(ctx, p_max=args.pmax)
    dump_table(table, sys.stdout)
    return 0


def cmd_integrals(args) -> int:
    est = integral_I(args.k, method=args.method, budget=args.budget, seed=args.seed, workers=args.workers)
    print(f"I_{args.k}(F) = {est.value!r} std_error {est.std_error!r} method {est.method}")
    l1 = integral_L("F1", args.k, args.m)
    l2 = integral_L("F2", args.k, args.m)
    print(f"L_{args.k}(F1) = {l1.value!r}")
    print(f"L_{args.k}(F2) = {l2.value!r}")
    if est.value > 0:
        print(f"L(F1)/I = {l1.value / est.value!r}")
    if l1.value > 0:
        print(f"L(F2)/(k^2 L(F1)) = {l2.value / (args.k ** 2 * l1.value)!r}")
    return 0


def cmd_experiment(args) -> int:
    config = load_config(args.config, {
        "workers": args.workers,
        "seed": args.seed,
        "output": args.output,
        "integral_budget": args.budget,
        "db_url": args.db_url,
    })
    report = run_report(config)
    if config.output:
        write_report(report, config.output, config.metadata_output)
    else:
        write_csv_rows(report, sys.stdout)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sievelab", description="Multidimensional Selberg sieve laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_tuple = sub.add_parser("tuple", help="admissibility and local data of a tuple")
    p_tuple.add_argument("action", choices=["check", "greedy"])
    p_tuple.add_argument("--h", type=parse_offsets)
    p_tuple.add_argument("--k", type=int)
    p_tuple.add_argument("--B", type=int)
    p_tuple.set_defaults(func=cmd_tuple)

    p_series = sub.add_parser("series", help="singular series with tail bound")
    p_series.add_argument("--h", type=parse_offsets, required=True)
    p_series.add_argument("--pmax", type=int, default=DEFAULT_PMAX)
    p_series.add_argument("--B", type=int)
    p_series.set_defaults(func=cmd_series)

    p_weights = sub.add_parser("weights", help="sieve weight table")
    p_weights.add_argument("action", choices=["dump"])
    p_weights.add_argument("--h", type=parse_offsets, required=True)
    p_weights.add_argument("--x", type=int, required=True)
    p_weights.add_argument("--theta", type=float, default=DEFAULT_THETA)
    p_weights.add_argument("--R", type=float)
    p_weights.add_argument("--B", type=int)
    p_weights.add_argument("--pmax", type=int, default=DEFAULT_PMAX)
    p_weights.set_defaults(func=cmd_weights)

    p_int = sub.add_parser("integrals", help="I_k(F), L_k(F1), L_k(F2)")
    p_int.add_argument("--k", type=int, required=True)
    p_int.add_argument("--m", type=int, default=1)
    p_int.add_argument("--budget", type=int, default=10 ** 5)
    p_int.add_argument("--seed", type=int, default=0)
    p_int.add_argument("--method", choices=list(METHODS), default=MONTE_CARLO)
    p_int.add_argument("--workers", type=int, default=1)
    p_int.set_defaults(func=cmd_integrals)

    p_exp = sub.add_parser("experiment", help="run an experiment config")
    p_exp.add_argument("--config", required=True)
    p_exp.add_argument("--workers", type=int)
    p_exp.add_argument("--seed", type=int)
    p_exp.add_argument("--budget", type=int)
    p_exp.add_argument("--output")
    p_exp.add_argument("--db-url", dest="db_url")
    p_exp.set_defaults(func=cmd_experiment)
    return parser


def validation_message(e: ValidationError) -> str:
    """The first failure as one line: the raised message itself, else pydantic's text with its field."""
    first = e.errors()[0]
    error = first.get("ctx", {}).get("error")
    if error is not None:
        return str(error)
    where = ".".join(str(part) for part in first.get("loc", ()))
    return f"{where}: {first['msg']}" if where else first["msg"]


def run_cli(argv: List[str]) -> int:
    """Parse and dispatch; returns the process exit code."""
    setup_logging()
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        return args.func(args)
    except ValidationError as e:
        print(validation_message(e), file=sys.stderr)
        return 1
    except (DomainError, ResourceError, SieveLabError) as e:
        print(e, file=sys.stderr)
        return 1


def main():
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
