"""Exhaustive reference checker for tiny histories.

It enumerates every total order of the committed transactions and tests the
isolation axiom literally, so it shares no logic with the saturation
checkers beyond read consistency. Cost is factorial; keep inputs small.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

from .model import History, OpKind, TxnRef
from .read_consistency import ReadViolation, check_read_consistency

DEFAULT_BUDGET = 8


class BudgetExceeded(RuntimeError):
    def __init__(self, committed: int, budget: int):
        super().__init__(f"{committed} committed transactions exceed the oracle budget of {budget}")
        self.committed = committed
        self.budget = budget


@dataclass(frozen=True)
class OracleBudget:
    max_committed: int = DEFAULT_BUDGET


@dataclass(frozen=True)
class OracleResult:
    level: str
    consistent: bool
    commit_order: tuple[TxnRef, ...] | None = None
    read_violations: tuple[ReadViolation, ...] = ()
    orders_tried: int = 0


def _level(level) -> str:
    value = getattr(level, "value", level)
    if value not in ("rc", "ra", "cc"):
        raise ValueError(f"unknown isolation level {level!r}")
    return value


def _external_reads(h: History, t: TxnRef) -> list[tuple[int, TxnRef]]:
    """(key, writer) for each read of ``t`` served by another transaction, in po."""
    out = []
    for op in h.txn(t).ops:
        if op.kind is OpKind.READ:
            src = h.wr.get(op.id)
            if src is not None and src.txn != t:
                out.append((op.key, src.txn))
    return out


def required_pairs(h: History, level) -> set[tuple[TxnRef, TxnRef]]:
    """Every (before, after) pair a valid commit order has to respect.

    Includes so and wr, plus the instances of the level's axiom: whenever
    t3 reads x from t1 and t2 ≠ t1 writes x with t2 related to t3 by the
    level's visibility relation, t2 must commit before t1.
    """
    level = _level(level)
    refs = list(h.committed_refs)
    committed = set(refs)
    writes = {t: {op.key for op in h.txn(t).ops if op.kind is OpKind.WRITE} for t in refs}
    reads = {t: _external_reads(h, t) for t in refs}

    base: set[tuple[TxnRef, TxnRef]] = set()
    for a in refs:
        for b in refs:
            if a.session == b.session and a.position < b.position:
                base.add((a, b))
    for t in refs:
        for _, w in reads[t]:
            if w in committed:
                base.add((w, t))

    pairs = set(base)
    if level == "rc":
        for t3 in refs:
            rs = reads[t3]
            for j, (x, t1) in enumerate(rs):
                for _, t2 in rs[:j]:
                    if t2 != t1 and x in writes.get(t2, ()):
                        pairs.add((t2, t1))
    elif level == "ra":
        for t3 in refs:
            visible = {a for a, b in base if b == t3}
            for x, t1 in reads[t3]:
                for t2 in visible:
                    if t2 != t1 and x in writes[t2]:
                        pairs.add((t2, t1))
    else:
        index = {t: i for i, t in enumerate(refs)}
        n = len(refs)
        reach = [[False] * n for _ in range(n)]
        for a, b in base:
            reach[index[a]][index[b]] = True
        for m in range(n):
            rm = reach[m]
            for i in range(n):
                if reach[i][m]:
                    ri = reach[i]
                    for j in range(n):
                        if rm[j]:
                            ri[j] = True
        for t3 in refs:
            i3 = index[t3]
            visible = [t for t in refs if reach[index[t]][i3]]
            for x, t1 in reads[t3]:
                for t2 in visible:
                    if t2 != t1 and x in writes[t2]:
                        pairs.add((t2, t1))
    return pairs


def axiom_holds(h: History, level, co: Sequence[TxnRef], pairs=None) -> tuple[bool, tuple | None]:
    """Test a candidate commit order against read consistency and the level's axiom.

    Returns ``(True, None)`` or ``(False, reason)`` where ``reason`` names the
    first failure: a read violation, a malformed order, or a violated pair.
    """
    violations = check_read_consistency(h)
    if violations:
        return False, ("ReadConsistency", violations[0])
    refs = set(h.committed_refs)
    if len(co) != len(refs) or set(co) != refs:
        return False, ("NotAPermutation", tuple(co))
    pos = {t: i for i, t in enumerate(co)}
    if pairs is None:
        pairs = required_pairs(h, level)
    for a, b in sorted(pairs):
        if pos[a] > pos[b]:
            return False, ("Order", a, b)
    return True, None


def oracle_check(h: History, level, budget: OracleBudget | None = None) -> OracleResult:
    """Decide consistency by trying every permutation of committed transactions."""
    level = _level(level)
    budget = budget or OracleBudget()
    refs = list(h.committed_refs)
    if len(refs) > budget.max_committed:
        raise BudgetExceeded(len(refs), budget.max_committed)
    violations = check_read_consistency(h)
    if violations:
        return OracleResult(level, False, read_violations=tuple(violations))
    pairs = required_pairs(h, level)
    # backtracking in lexicographic order; a transaction is only placed once
    # its so and wr predecessors are, and full orders face the axiom pairs
    preds: dict[TxnRef, set[TxnRef]] = {t: set() for t in refs}
    committed = set(refs)
    for t in refs:
        if t.position:
            prev = [u for u in refs if u.session == t.session and u.position < t.position]
            if prev:
                preds[t].add(prev[-1])
        for _, w in _external_reads(h, t):
            if w in committed:
                preds[t].add(w)
    tried = 0
    order: list[TxnRef] = []
    placed: set[TxnRef] = set()

    def extend() -> bool:
        nonlocal tried
        if len(order) == len(refs):
            tried += 1
            pos = {t: i for i, t in enumerate(order)}
            return all(pos[a] < pos[b] for a, b in pairs)
        for t in refs:
            if t not in placed and preds[t] <= placed:
                order.append(t)
                placed.add(t)
                if extend():
                    return True
                order.pop()
                placed.discard(t)
        return False

    if extend():
        return OracleResult(level, True, commit_order=tuple(order), orders_tried=tried)
    return OracleResult(level, False, orders_tried=tried)
