"""Command-line front end: classify, graph, oracle, simulate.

Exit codes: 0 success, 1 membership-negative under --strict (or a failed
--verify), 2 parse/well-formedness error, 3 I/O error, 4 oracle
disagreement.
"""
from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from . import harness
from .conflicts import build_mvcg, export_dot
from .engine import EngineMode
from .membership import (
    TooLargeError,
    check_co_opacity,
    check_mvc_local_opacity,
    check_mvc_opacity,
    check_mvc_opacity_bruteforce,
    check_opacity_bruteforce,
)
from .model import History, WellFormednessError, build_history, is_sequential
from .semantics import is_legal, is_multiversioned, is_valid
from .trace import ParseError, parse_trace, serialize_trace

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_PARSE = 2
EXIT_IO = 3
EXIT_DISAGREE = 4


def _load_history(path: str) -> History:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise _IoFailure(str(exc)) from exc
    return build_history(parse_trace(text))


class _IoFailure(Exception):
    pass


def _yn(b: bool) -> str:
    return "yes" if b else "no"


def _txn_list(order) -> str:
    return ",".join(f"T{t}" for t in order)


def cmd_classify(args: argparse.Namespace) -> int:
    h = _load_history(args.file)
    out: list[tuple[str, str]] = []
    seq = is_sequential(h)
    out.append(("sequential", _yn(seq)))
    out.append(("valid", _yn(is_valid(h))))
    if seq:
        legal = is_legal(h)
        out.append(("legal", _yn(legal)))
        out.append(("multiversioned", _yn(is_multiversioned(h))))
    else:
        out.append(("legal", "n/a"))
        out.append(("multiversioned", "n/a"))
    try:
        co = check_co_opacity(h, bound=args.bound)
        out.append(("co-opaque", _yn(co.member)))
    except TooLargeError:
        out.append(("co-opaque", "skipped: size"))
    mvc = check_mvc_opacity(h)
    out.append(("mvc-opaque", _yn(mvc.member)))
    if mvc.member:
        out.append(("mvc-witness", _txn_list(mvc.witness_order)))
    elif mvc.cycle:
        out.append(("mvc-cycle", _txn_list(mvc.cycle)))
    try:
        op = check_opacity_bruteforce(h, bound=args.bound)
        out.append(("opaque", _yn(op.member)))
        if op.member:
            out.append(("opaque-witness", _txn_list(op.witness_order)))
    except TooLargeError:
        out.append(("opaque", "skipped: size"))
    local = check_mvc_local_opacity(h)
    out.append(("mvc-local-opaque", _yn(local.member)))
    for key, value in out:
        print(f"{key}: {value}")
    if args.strict and not mvc.member:
        return EXIT_NEGATIVE
    return EXIT_OK


def cmd_graph(args: argparse.Namespace) -> int:
    h = _load_history(args.file)
    g = build_mvcg(h)
    if args.ignore_t0:
        g = g.without_vertex(0)
    text = export_dot(g)
    if args.dot:
        try:
            with open(args.dot, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise _IoFailure(str(exc)) from exc
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    h = _load_history(args.file)
    graph_verdict = check_mvc_opacity(h)
    try:
        brute_verdict = check_mvc_opacity_bruteforce(h, bound=args.bound)
    except TooLargeError:
        print("brute-force: skipped (too many transactions)")
        return EXIT_OK
    print(f"graph: {'member' if graph_verdict.member else 'non-member'}")
    print(f"brute-force: {'member' if brute_verdict.member else 'non-member'}")
    if graph_verdict.member == brute_verdict.member:
        print("AGREE")
        return EXIT_OK
    print("DISAGREE")
    return EXIT_DISAGREE


def cmd_simulate(args: argparse.Namespace) -> int:
    lo, _, hi = args.ops.partition(":")
    cfg = harness.WorkloadConfig(
        txns=args.txns,
        objects=args.objects,
        ops_min=int(lo),
        ops_max=int(hi or lo),
        read_fraction=args.read_frac,
        seed=args.seed,
        threads=args.threads,
    )
    script = harness.generate_workload(cfg)
    history, metrics = harness.run_workload(
        script,
        mode=EngineMode(args.mode),
        gc_every=args.gc_every,
        threads=cfg.threads,
        interleave_seed=cfg.seed,
    )
    if args.emit:
        try:
            with open(args.emit, "w", encoding="utf-8") as fh:
                fh.write(serialize_trace(history))
        except OSError as exc:
            raise _IoFailure(str(exc)) from exc
    for key, value in metrics.as_dict().items():
        print(f"{key}: {value}")
    if args.verify:
        verdict = check_mvc_opacity(history)
        print(f"verified: {_yn(verdict.member)}")
        if not verdict.member:
            return EXIT_NEGATIVE
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mvstm", description="STM history checkers and engine simulator"
    )
    p.add_argument("--format", choices=("text", "kv"), default="text")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", help="membership report for a trace")
    c.add_argument("file")
    c.add_argument("--bound", type=int, default=8)
    c.add_argument("--strict", action="store_true")
    c.set_defaults(fn=cmd_classify)

    g = sub.add_parser("graph", help="export the conflict graph as DOT")
    g.add_argument("file")
    g.add_argument("--dot", default=None)
    g.add_argument("--ignore-t0", action="store_true")
    g.set_defaults(fn=cmd_graph)

    o = sub.add_parser("oracle", help="compare graph and brute-force checkers")
    o.add_argument("file")
    o.add_argument("--bound", type=int, default=8)
    o.set_defaults(fn=cmd_oracle)

    s = sub.add_parser("simulate", help="run a generated workload on the engine")
    s.add_argument("--txns", type=int, default=10)
    s.add_argument("--objects", type=int, default=4)
    s.add_argument("--ops", default="1:4", help="ops per transaction, min:max")
    s.add_argument("--read-frac", type=float, default=0.5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--mode", choices=("multi", "single"), default="multi")
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--gc-every", type=int, default=None)
    s.add_argument("--emit", default=None)
    s.add_argument("--verify", action="store_true")
    s.set_defaults(fn=cmd_simulate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ParseError, WellFormednessError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except _IoFailure as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
