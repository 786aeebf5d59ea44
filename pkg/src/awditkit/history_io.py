"""Reading and writing the plain-text history format.

The format is line oriented::

    awdit-history v1
    session 0
    txn 1 c
    w x 1
    r y 3
    txn 2 a
    ...

``#`` starts a comment line and blank lines are ignored. Keys that are
decimal integers are used as-is; any other key token is interned to an
integer above the largest numeric key and its spelling is kept for output.
"""

from __future__ import annotations

import sys
from typing import IO

from .model import History, HistoryBuilder, OpKind, committed_txns

HEADER = "awdit-history v1"

REASONS = ("Syntax", "DuplicateWrite", "DuplicateTxnId", "DuplicateOpId", "EmptyTransaction")


class ParseError(ValueError):
    def __init__(self, line: int, reason: str, detail: str = ""):
        assert reason in REASONS, reason
        self.line = line
        self.reason = reason
        self.detail = detail
        super().__init__(f"line {line}: {reason}" + (f": {detail}" if detail else ""))


def _uint(tok: str, lineno: int, what: str) -> int:
    if not tok.isdigit() or not tok.isascii():
        raise ParseError(lineno, "Syntax", f"expected unsigned integer {what}, got {tok!r}")
    return int(tok)


def parse_history(text: str | bytes) -> History:
    """Parse a history from text, inferring write-read edges from unique values."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(1, "Syntax", "input is not UTF-8") from e

    lines = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        lines.append((lineno, line.split()))

    if not lines:
        return HistoryBuilder().build()
    first_no, first = lines[0]
    if " ".join(first) != HEADER:
        raise ParseError(first_no, "Syntax", f"expected header {HEADER!r}")

    # numeric keys are fixed first so that interned names never collide with them
    numeric_keys = [int(toks[1]) for _, toks in lines[1:]
                    if len(toks) == 3 and toks[0] in ("r", "w") and toks[1].isdigit() and toks[1].isascii()]
    next_key = max(numeric_keys, default=-1) + 1
    interned: dict[str, int] = {}

    b = HistoryBuilder()
    txn_lines: dict[int, int] = {}
    write_lines: dict[tuple[int, int], int] = {}
    pending: tuple[int, int, bool] | None = None  # txn id, line, committed
    ops: list[tuple[str, int, int]] = []

    def flush() -> None:
        if pending is None:
            return
        tid, lineno, committed = pending
        if not ops:
            raise ParseError(lineno, "EmptyTransaction", f"transaction {tid} has no operations")
        b.txn(tid, ops, committed=committed)

    for lineno, toks in lines[1:]:
        head = toks[0]
        if head == "session":
            if len(toks) != 2:
                raise ParseError(lineno, "Syntax", "expected 'session <sid>'")
            sid = _uint(toks[1], lineno, "session id")
            flush()
            pending, ops = None, []
            expected = b.session_count
            if sid != expected:
                raise ParseError(lineno, "Syntax", f"sessions must be numbered densely; expected {expected}")
            b.session()
        elif head == "txn":
            if len(toks) != 3 or toks[2] not in ("c", "a"):
                raise ParseError(lineno, "Syntax", "expected 'txn <tid> <c|a>'")
            if not b.session_count:
                raise ParseError(lineno, "Syntax", "transaction outside a session")
            tid = _uint(toks[1], lineno, "transaction id")
            if tid in txn_lines:
                raise ParseError(lineno, "DuplicateTxnId", f"transaction {tid} first declared on line {txn_lines[tid]}")
            txn_lines[tid] = lineno
            flush()
            pending, ops = (tid, lineno, toks[2] == "c"), []
        elif head in ("r", "w"):
            if len(toks) != 3:
                raise ParseError(lineno, "Syntax", f"expected '{head} <key> <value>'")
            if pending is None:
                raise ParseError(lineno, "Syntax", "operation outside a transaction")
            ktok = toks[1]
            if ktok.isdigit() and ktok.isascii():
                key = int(ktok)
            else:
                key = interned.get(ktok)
                if key is None:
                    key = interned[ktok] = next_key
                    next_key += 1
            value = _uint(toks[2], lineno, "value")
            if head == "w":
                prev = write_lines.get((key, value))
                if prev is not None:
                    raise ParseError(lineno, "DuplicateWrite",
                                     f"key {ktok} value {value} already written on line {prev}")
                write_lines[(key, value)] = lineno
            ops.append((head, key, value))
        else:
            raise ParseError(lineno, "Syntax", f"unknown directive {head!r}")
    flush()
    b.key_names = {v: k for k, v in interned.items()}
    return b.build()


def serialize_history(h: History) -> str:
    out = [HEADER]
    for s, sess in enumerate(h.sessions):
        out.append(f"session {s}")
        for t in sess:
            out.append(f"txn {t.txn_id} {'c' if t.committed else 'a'}")
            for op in t.ops:
                out.append(f"{op.kind.value} {h.key_name(op.key)} {op.value}")
    return "\n".join(out) + "\n"


def read_history(path: str) -> History:
    """Parse a history file; ``-`` reads standard input."""
    if path == "-":
        return parse_history(sys.stdin.buffer.read())
    with open(path, "rb") as f:
        return parse_history(f.read())


def write_history(h: History, path: str | IO[str]) -> None:
    text = serialize_history(h)
    if isinstance(path, str):
        if path == "-":
            sys.stdout.write(text)
            return
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    else:
        path.write(text)


def history_stats(h: History) -> dict:
    """Size summary used by the ``stats`` subcommand."""
    committed = sum(1 for _ in committed_txns(h))
    total = sum(len(sess) for sess in h.sessions)
    sizes: dict[int, int] = {}
    reads = writes = 0
    for sess in h.sessions:
        for t in sess:
            sizes[len(t.ops)] = sizes.get(len(t.ops), 0) + 1
            for op in t.ops:
                if op.kind is OpKind.READ:
                    reads += 1
                else:
                    writes += 1
    return {
        "ops": h.op_count,
        "reads": reads,
        "writes": writes,
        "sessions": h.session_count,
        "committed": committed,
        "aborted": total - committed,
        "keys": h.key_universe,
        "ops_per_txn": dict(sorted(sizes.items())),
    }
