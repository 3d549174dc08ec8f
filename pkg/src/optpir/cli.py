"""Command-line entry point.

Exit codes: 0 success, 1 validation error, 2 runtime failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .dbfile import read_db, write_db
from .errors import FieldTooSmall, FormatError, InvalidConfig, PirError, RetrievalFailed, TooLargeForExhaustive
from .netsvc import client_retrieve, parse_address, serve
from .params import (
    DEFAULT_GRID,
    SchemeConfig,
    capacity,
    comparison_table,
    derive_params,
    format_machine,
    format_table,
)
from .scheme import Database, build_schedule, generate_queries, retrieve_local
from .verify import (
    EXHAUSTIVE_LIMIT,
    audit_ranks,
    check_scheme_codes,
    coalitions_up_to,
    measure_rate,
    privacy_exhaustive,
    privacy_statistical_many,
    randomness_space_size,
    trial_rng,
)

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _add_config(p: argparse.ArgumentParser, grid: bool = False) -> None:
    p.add_argument("--N", type=int, help="number of servers")
    p.add_argument("--T", type=int, help="collusion threshold")
    p.add_argument("--M", type=int, help="number of records")
    p.add_argument("--q", type=int, help="field size override (prime, at least the minimum)")
    if grid:
        p.add_argument("--grid", choices=["default"], help="run over the default config grid")


def _configs(args) -> list[SchemeConfig]:
    given = [args.N, args.T, args.M]
    grid_allowed = hasattr(args, "grid")
    if grid_allowed and args.grid and any(v is not None for v in given):
        raise InvalidConfig("use either --grid or --N/--T/--M, not both")
    if grid_allowed and (args.grid or all(v is None for v in given)):
        return [SchemeConfig(*c) for c in DEFAULT_GRID]
    if any(v is None for v in given):
        raise InvalidConfig("--N, --T and --M are all required")
    return [SchemeConfig(args.N, args.T, args.M)]


def _single(args):
    (config,) = _configs(args)
    return derive_params(config, args.q)


# ---------------------------------------------------------------- commands

def cmd_params(args) -> int:
    configs = _configs(args)
    rows = comparison_table(configs)
    if args.machine:
        print(format_machine(rows))
        return EXIT_OK
    print(format_table(rows))
    for cfg in configs:
        p = derive_params(cfg, args.q if len(configs) == 1 else None)
        print(
            f"{cfg}: d={p.d} n={p.n} t={p.t} alpha={list(p.alpha)} beta={list(p.beta)} "
            f"L={p.L} D={p.D} ell={p.ell} gamma=({p.gamma_a}, {p.gamma_b}) q={p.q} "
            f"rate={p.rate} capacity={capacity(cfg)}"
        )
    return EXIT_OK


def cmd_gendb(args) -> int:
    params = _single(args)
    rng = np.random.default_rng(args.seed)
    db = Database.random(params.field, params.M, params.L, args.stripes, rng)
    write_db(args.out, db)
    print(f"wrote {args.out}: M={db.M} L={db.L} b={db.stripes} q={params.q} "
          f"({Path(args.out).stat().st_size} bytes)")
    return EXIT_OK


def cmd_serve(args) -> int:
    db = read_db(args.db)
    config = SchemeConfig(args.N, args.T, args.M)
    params = derive_params(config, db.field.q)
    db.check_params(params)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    try:
        serve(args.db, params, parse_address(args.listen), args.server_index)
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def _addresses(values: Sequence[str]) -> list[tuple[str, int]]:
    out = []
    for v in values:
        out += [parse_address(x) for x in v.split(",") if x]
    return out


def cmd_retrieve(args) -> int:
    params = _single(args)
    result = client_retrieve(
        _addresses(args.connect), params, args.theta, np.random.default_rng(args.seed),
        stripes=args.stripes, timeout=args.timeout,
    )
    if args.out:
        Path(args.out).write_bytes(result.record.tobytes())
    print(f"retrieved record {args.theta}: {params.L * args.stripes} symbols, downloaded {result.downloaded_symbols} "
          f"symbols ({result.payload_bytes} payload bytes), rate {params.L}/{result.downloaded_symbols // args.stripes} "
          f"= {params.rate}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    params = _single(args)
    schedule = build_schedule(params)
    failures = 0
    for trial in range(args.trials):
        rng = trial_rng(args.seed, 0, trial)
        db = Database.random(params.field, params.M, params.L, args.stripes, rng)
        for theta in range(1, params.M + 1):
            if retrieve_local(db, params, theta, rng, schedule) != db.record(theta):
                failures += 1
    total = args.trials * params.M
    print(f"simulate {params.config} q={params.q}: {total - failures}/{total} retrievals correct, "
          f"rate {measure_rate(params, schedule)}")
    return EXIT_OK if failures == 0 else EXIT_VERIFY


def _emit(args, text: str, machine: str) -> None:
    print(machine if args.machine else text)


def verify_rate(args) -> bool:
    ok = True
    for cfg in _configs(args):
        params = derive_params(cfg, args.q)
        rate = measure_rate(params, build_schedule(params))
        passed = rate == capacity(cfg)
        ok &= passed
        _emit(args, f"rate {cfg}: measured {rate} capacity {capacity(cfg)} -> {'PASS' if passed else 'FAIL'}",
              f"rate,N={cfg.N},T={cfg.T},M={cfg.M},measured={rate},capacity={capacity(cfg)},"
              f"verdict={'pass' if passed else 'fail'}")
    return ok


def verify_ranks(args) -> bool:
    ok = True
    for cfg in _configs(args):
        params = derive_params(cfg, args.q)
        schedule = build_schedule(params)
        failed = 0
        for theta in range(1, params.M + 1):
            for trial in range(args.trials):
                audit = audit_ranks(generate_queries(params, schedule, theta, trial_rng(args.seed, theta, trial)), params)
                if not audit.passed:
                    failed += 1
                    _emit(args, audit.to_text(), audit.to_machine())
        ok &= failed == 0
        total = params.M * args.trials
        _emit(args, f"ranks {cfg}: {total - failed}/{total} query sets pass -> {'PASS' if not failed else 'FAIL'}",
              f"ranks,N={cfg.N},T={cfg.T},M={cfg.M},sets={total},failed={failed},"
              f"verdict={'pass' if not failed else 'fail'}")
    return ok


def verify_mds(args) -> bool:
    ok = True
    for cfg in _configs(args):
        params = derive_params(cfg, args.q)
        for check in check_scheme_codes(params, np.random.default_rng(args.seed)):
            ok &= check.passed
            _emit(args, f"{cfg} " + check.to_text(), check.to_machine())
    return ok


def verify_privacy(args) -> bool:
    ok = True
    for cfg in _configs(args):
        params = derive_params(cfg, args.q)
        if args.coalition is not None:
            coalitions = [tuple(int(x) for x in args.coalition.split(",") if x)]
        else:
            coalitions = coalitions_up_to(cfg.N, cfg.T)
        mode = args.mode
        if mode == "auto":
            mode = "exhaustive" if randomness_space_size(params) <= EXHAUSTIVE_LIMIT else "statistical"
        if mode == "exhaustive":
            if args.variant != "scheme":
                raise InvalidConfig("broken variants are only available in statistical mode")
            reports = [privacy_exhaustive(cfg, params.q, c) for c in coalitions]
        else:
            reports = privacy_statistical_many(cfg, params.q, coalitions, args.trials, args.seed, args.variant)
        for r in reports:
            ok &= r.passed
            _emit(args, r.to_text(), r.to_machine())
    return ok


SUITES = {"rate": verify_rate, "ranks": verify_ranks, "mds": verify_mds, "privacy": verify_privacy}


def cmd_verify(args) -> int:
    return EXIT_OK if SUITES[args.suite](args) else EXIT_VERIFY


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="optpir", description="Capacity-achieving T-private PIR with optimal sub-packetization.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("params", help="derived parameters and baseline comparison")
    _add_config(p, grid=True)
    p.add_argument("--machine", action="store_true", help="comma-separated output with header")
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("gendb", help="write a random database file")
    _add_config(p)
    p.add_argument("--stripes", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gendb)

    p = sub.add_parser("serve", help="run server j over a database file")
    _add_config(p)
    p.add_argument("--db", required=True)
    p.add_argument("--listen", required=True, help="host:port")
    p.add_argument("--server-index", type=int, required=True, help="1-based server index j")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("retrieve", help="privately fetch one record from N live servers")
    _add_config(p)
    p.add_argument("--connect", action="append", required=True,
                   help="host:port of servers 1..N in order (comma-separated or repeated)")
    p.add_argument("--theta", type=int, required=True, help="1-based record index")
    p.add_argument("--stripes", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="write the record as 8-byte little-endian elements, row-major L x b")
    p.add_argument("--timeout", type=float, default=10.0)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("simulate", help="in-process retrievals against random databases")
    _add_config(p)
    p.add_argument("--stripes", type=int, default=1)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("suite", choices=sorted(SUITES))
    _add_config(p, grid=True)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=["auto", "exhaustive", "statistical"], default="auto")
    p.add_argument("--coalition", help="comma-separated server indices (default: every coalition of size <= T)")
    p.add_argument("--variant", choices=["scheme", "unmixed"], default="scheme",
                   help="'unmixed' skips mixing of the desired record (negative control)")
    p.add_argument("--machine", action="store_true")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "trials", "") is None:
        args.trials = 1000 if getattr(args, "suite", "") == "privacy" else 10
    try:
        return args.func(args)
    except (InvalidConfig, FieldTooSmall, FormatError, TooLargeForExhaustive, ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (RetrievalFailed, OSError, PirError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
