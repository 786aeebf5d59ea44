"""Command-line front end: ``awditkit check|oracle|generate|stats``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import IO

from . import __version__
from .checkers import IsolationLevel, check
from .generators import (
    ANOMALIES,
    GenerationError,
    RandomSpec,
    UndirectedGraph,
    gen_ra_reduction,
    gen_random,
    gen_range_reduction,
    gen_rc_reduction,
    random_graph,
)
from .history_io import ParseError, history_stats, parse_history, serialize_history
from .model import History
from .oracle import BudgetExceeded, OracleBudget, oracle_check

EXIT_CONSISTENT = 0
EXIT_VIOLATION = 1
EXIT_INPUT = 2
EXIT_USAGE = 3
EXIT_BUDGET = 4

LEVELS = [lv.value for lv in IsolationLevel]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="awditkit", description="Check transactional histories against RC, RA and CC.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="run the saturation checker")
    c.add_argument("--level", choices=LEVELS, help="isolation level (default: all three)")
    c.add_argument("--continue-after-read-errors", action="store_true",
                   help="drop reads that break read consistency and keep checking")
    c.add_argument("--json", action="store_true", help="emit one JSON object per verdict")
    c.add_argument("file", help="history file, - for stdin")

    o = sub.add_parser("oracle", help="run the exhaustive reference checker")
    o.add_argument("--level", choices=LEVELS, help="isolation level (default: all three)")
    o.add_argument("--budget", type=int, default=OracleBudget().max_committed,
                   help="maximum committed transactions (default: %(default)s)")
    o.add_argument("--json", action="store_true")
    o.add_argument("file")

    g = sub.add_parser("generate", help="write a random or reduction history")
    g.add_argument("--mode", choices=["random", "tri-range", "tri-ra", "tri-rc"], default="random")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--sessions", type=int, default=3)
    g.add_argument("--txns", type=int, default=10)
    g.add_argument("--ops-min", type=int, default=1)
    g.add_argument("--ops-max", type=int, default=4)
    g.add_argument("--keys", type=int, default=4)
    g.add_argument("--read-fraction", type=float, default=0.5)
    g.add_argument("--graph-nodes", type=int, default=6)
    g.add_argument("--graph-edge-prob", type=float, default=0.5)
    g.add_argument("--inject", default="", help=f"comma-separated subset of {','.join(ANOMALIES)}")
    g.add_argument("-o", "--output", default="-")

    s = sub.add_parser("stats", help="print history size statistics")
    s.add_argument("file")
    return p


def _use_color(stdout: IO[str]) -> bool:
    env = os.environ.get("AWDITKIT_COLOR")
    if env is not None:
        return env == "1"
    return hasattr(stdout, "isatty") and stdout.isatty()


def _paint(line: str, color: bool) -> str:
    if not color:
        return line
    if line.startswith("CONSISTENT"):
        return f"\x1b[32m{line}\x1b[0m"
    if line.startswith("VIOLATION"):
        return f"\x1b[31m{line}\x1b[0m"
    return line


def _load(path: str, stdin: IO) -> History:
    if path == "-":
        data = stdin.buffer.read() if hasattr(stdin, "buffer") else stdin.read()
        return parse_history(data)
    with open(path, "rb") as f:
        return parse_history(f.read())


def _levels(arg: str | None) -> list[IsolationLevel]:
    return [IsolationLevel(arg)] if arg else list(IsolationLevel)


def _cmd_check(args, h: History, stdout) -> int:
    color = _use_color(stdout)
    worst = EXIT_CONSISTENT
    for level in _levels(args.level):
        v = check(h, level, continue_after_read_errors=args.continue_after_read_errors)
        if args.json:
            stdout.write(json.dumps(v.to_json(h), sort_keys=True) + "\n")
        else:
            for line in v.render(h):
                stdout.write(_paint(line, color) + "\n")
        if not v.consistent:
            worst = EXIT_VIOLATION
    return worst


def _cmd_oracle(args, h: History, stdout) -> int:
    color = _use_color(stdout)
    worst = EXIT_CONSISTENT
    budget = OracleBudget(args.budget)
    for level in _levels(args.level):
        r = oracle_check(h, level, budget)
        if r.consistent:
            lines = [f"CONSISTENT {r.level}"]
            kind = None
        else:
            kind = "ReadConsistency" if r.read_violations else "NoCommitOrder"
            lines = [f"VIOLATION {r.level} {kind}"] + [v.render(h) for v in r.read_violations]
            worst = EXIT_VIOLATION
        if args.json:
            stdout.write(json.dumps({
                "level": r.level,
                "outcome": "consistent" if r.consistent else "violation",
                "kind": kind,
                "commit_order": [h.txn_id(t) for t in r.commit_order] if r.commit_order else None,
                "read_violations": [v.render(h) for v in r.read_violations],
            }, sort_keys=True) + "\n")
        else:
            for line in lines:
                stdout.write(_paint(line, color) + "\n")
    return worst


def _cmd_generate(args, stdout, stderr) -> int:
    if args.mode == "random":
        inject = frozenset(x.strip() for x in args.inject.split(",") if x.strip())
        try:
            spec = RandomSpec(seed=args.seed, sessions=args.sessions, txns=args.txns,
                              ops_per_txn=(args.ops_min, args.ops_max), keys=args.keys,
                              read_fraction=args.read_fraction, inject=inject)
        except ValueError as e:
            raise UsageError(str(e)) from e
        h = gen_random(spec)
    else:
        if args.graph_nodes < 0 or not 0.0 <= args.graph_edge_prob <= 1.0:
            raise UsageError("graph nodes must be >= 0 and edge probability in [0, 1]")
        g: UndirectedGraph = random_graph(args.graph_nodes, args.graph_edge_prob, args.seed)
        make = {"tri-range": gen_range_reduction, "tri-ra": gen_ra_reduction, "tri-rc": gen_rc_reduction}
        h = make[args.mode](g)
    text = serialize_history(h)
    if args.output == "-":
        stdout.write(text)
    else:
        with open(args.output, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    return EXIT_CONSISTENT


def _cmd_stats(h: History, stdout) -> int:
    st = history_stats(h)
    for name in ("ops", "reads", "writes", "sessions", "committed", "aborted", "keys"):
        stdout.write(f"{name} {st[name]}\n")
    dist = " ".join(f"{size}:{count}" for size, count in st["ops_per_txn"].items())
    stdout.write(f"ops_per_txn {dist}\n")
    return EXIT_CONSISTENT


def run(argv: list[str] | None = None, stdin: IO | None = None,
        stdout: IO[str] | None = None, stderr: IO[str] | None = None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    stderr = stderr if stderr is not None else sys.stderr
    try:
        args = _parser().parse_args(argv)
    except UsageError as e:
        stderr.write(f"{e}\n")
        return EXIT_USAGE
    except SystemExit as e:  # --help / --version
        return EXIT_CONSISTENT if not e.code else EXIT_USAGE

    try:
        if args.command == "generate":
            return _cmd_generate(args, stdout, stderr)
        h = _load(args.file, stdin)
        if args.command == "check":
            return _cmd_check(args, h, stdout)
        if args.command == "oracle":
            return _cmd_oracle(args, h, stdout)
        return _cmd_stats(h, stdout)
    except UsageError as e:
        stderr.write(f"awditkit: {e}\n")
        return EXIT_USAGE
    except ParseError as e:
        stderr.write(f"awditkit: parse error: {e}\n")
        return EXIT_INPUT
    except OSError as e:
        stderr.write(f"awditkit: {e}\n")
        return EXIT_INPUT
    except GenerationError as e:
        stderr.write(f"awditkit: generation failed: {e}\n")
        return EXIT_INPUT
    except BudgetExceeded as e:
        stderr.write(f"awditkit: {e}\n")
        return EXIT_BUDGET


def main() -> None:
    logging.basicConfig(level=os.environ.get("AWDITKIT_LOG", "INFO").upper(),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    sys.exit(run())

