"""Saturation checkers for Read Committed, Read Atomic and Causal Consistency.

Each checker builds a partial commit relation (so ∪ wr plus the commit-order
edges its isolation axiom forces) and declares the history consistent iff the
relation is acyclic. A consistent verdict carries a linearization of that
relation as the witnessing commit order; a violation carries one cycle per
non-trivial strongly connected component.
"""

from __future__ import annotations

import enum
from collections.abc import Collection
from dataclasses import dataclass, field

from .graph import (
    BASE,
    CommitGraph,
    CycleWitness,
    EdgeLabel,
    _hb_ids,
    _topo_ids,
    extract_cycle,
    nontrivial_sccs,
    render_cycle,
    topo_sort,
)
from .model import History, OpKind, TxnRef
from .read_consistency import ReadViolation, check_read_consistency


class IsolationLevel(str, enum.Enum):
    RC = "rc"
    RA = "ra"
    CC = "cc"

    @property
    def strength(self) -> int:
        """Larger is stronger: CC ⊑ RA ⊑ RC."""
        return {"rc": 0, "ra": 1, "cc": 2}[self.value]


@dataclass(frozen=True)
class NonRepeatableRead:
    txn: TxnRef
    key: int
    first_writer: TxnRef
    second_writer: TxnRef
    read: int  # op id of the read that observed the second writer

    def render(self, h: History) -> str:
        return (
            f"NON-REPEATABLE-READ txn={h.txn_id(self.txn)} key={h.key_name(self.key)} "
            f"writers={h.txn_id(self.first_writer)},{h.txn_id(self.second_writer)}"
        )


@dataclass(frozen=True)
class Verdict:
    level: IsolationLevel
    commit_order: tuple[TxnRef, ...] | None = None
    read_violations: tuple[ReadViolation, ...] = ()
    non_repeatable: tuple[NonRepeatableRead, ...] = ()
    cycles: tuple[CycleWitness, ...] = ()
    graph: CommitGraph | None = field(default=None, compare=False, repr=False)

    @property
    def consistent(self) -> bool:
        return not (self.read_violations or self.non_repeatable or self.cycles)

    @property
    def kind(self) -> str | None:
        if self.read_violations:
            return "ReadConsistency"
        if self.non_repeatable:
            return "NonRepeatableRead"
        if self.cycles:
            return "CoCycle"
        return None

    def render(self, h: History) -> list[str]:
        lv = self.level.value
        if self.consistent:
            return [f"CONSISTENT {lv}"]
        lines = [f"VIOLATION {lv} {self.kind}"]
        lines += [v.render(h) for v in self.read_violations]
        lines += [n.render(h) for n in self.non_repeatable]
        for i, cyc in enumerate(self.cycles, start=1):
            lines.append(f"cycle {i}: {len(cyc)} edges, {cyc.non_sowr_edge_count} inferred")
            lines += render_cycle(h, cyc)
        return lines

    def to_json(self, h: History) -> dict:
        witness = [
            {"cycle": i, "from": h.txn_id(u), "to": h.txn_id(v), "label": lab.tag}
            for i, cyc in enumerate(self.cycles)
            for u, v, lab in cyc.edges()
        ]
        return {
            "level": self.level.value,
            "outcome": "consistent" if self.consistent else "violation",
            "kind": self.kind,
            "witness": witness,
            "read_violations": [
                {"read": v.read, "kind": v.kind.value, "txn": h.txn_id(v.txn),
                 "key": h.key_name(v.key), "value": v.value}
                for v in self.read_violations
            ],
            "non_repeatable_reads": [
                {"txn": h.txn_id(n.txn), "key": h.key_name(n.key),
                 "writers": [h.txn_id(n.first_writer), h.txn_id(n.second_writer)]}
                for n in self.non_repeatable
            ],
        }


class _Index:
    """External reads and written keys of each committed transaction, by graph id."""

    def __init__(self, h: History, g: CommitGraph, skip_reads: Collection[int] = ()):
        self.sessions: list[list[int]] = [[] for _ in h.sessions]
        self.reads: list[list[tuple[int, int]]] = []
        self.written: list[set[int]] = []
        wr = h.wr
        ids = g.ids
        READ = OpKind.READ
        for i, ref in enumerate(g.refs):
            self.sessions[ref.session].append(i)
            reads = []
            written = set()
            for op in h.sessions[ref.session][ref.position].ops:
                if op.kind is READ:
                    if op.id in skip_reads:
                        continue
                    src = wr.get(op.id)
                    if src is not None:
                        w = ids.get(src.txn)
                        if w is not None and w != i:
                            reads.append((w, op.key))
                else:
                    written.add(op.key)
            self.reads.append(reads)
            self.written.append(written)


def _read_phase(h: History, level: IsolationLevel, keep_going: bool):
    violations = check_read_consistency(h)
    if violations and not keep_going:
        return Verdict(level, read_violations=tuple(violations)), None
    return None, violations


def _finish(level: IsolationLevel, g: CommitGraph, violations=()) -> Verdict:
    order = topo_sort(g)
    if isinstance(order, list):
        return Verdict(level, commit_order=tuple(order), read_violations=tuple(violations), graph=g)
    cycles = tuple(extract_cycle(g, c) for c in nontrivial_sccs(g))
    return Verdict(level, read_violations=tuple(violations), cycles=cycles, graph=g)


def linearize(g: CommitGraph) -> list[TxnRef]:
    """Total order extending every edge of an acyclic graph, ties by (session, position)."""
    order = topo_sort(g)
    if isinstance(order, CycleWitness):
        raise ValueError("cannot linearize a cyclic commit relation")
    return order


def _iter_non_repeatable(h: History, skip_reads: Collection[int] = ()):
    wr = h.wr
    for s, sess in enumerate(h.sessions):
        for p, t in enumerate(sess):
            if not t.committed:
                continue
            ref = TxnRef(s, p)
            last_writer: dict[int, TxnRef] = {}
            for op in t.ops:
                if op.kind is not OpKind.READ or op.id in skip_reads:
                    continue
                src = wr.get(op.id)
                if src is None:
                    continue
                writer = src.txn
                prev = last_writer.get(op.key)
                if writer != ref and prev is not None and writer != prev:
                    yield NonRepeatableRead(ref, op.key, prev, writer, op.id)
                else:
                    last_writer[op.key] = writer


def check_repeatable_reads(h: History) -> NonRepeatableRead | None:
    """First committed transaction reading one key from two different transactions."""
    return next(_iter_non_repeatable(h), None)


def check_rc(h: History, continue_after_read_errors: bool = False) -> Verdict:
    level = IsolationLevel.RC
    early, violations = _read_phase(h, level, continue_after_read_errors)
    if early:
        return early
    skip = {v.read for v in violations}
    g = CommitGraph.from_history(h, skip)
    idx = _Index(h, g, skip)
    written = idx.written
    succ = g.adj
    CO = int(EdgeLabel.CO)

    for refs in idx.sessions:
        for t3 in refs:
            reads = idx.reads[t3]
            if not reads:
                continue
            seen = set()
            first = [False] * len(reads)
            for i, (t2, _) in enumerate(reads):
                if t2 not in seen:
                    seen.add(t2)
                    first[i] = True
            # per key: [older, newer] of the two po-earliest distinct writers read below
            earliest: dict[int, list] = {}
            read_keys: set[int] = set()
            for i in range(len(reads) - 1, -1, -1):
                t2, y = reads[i]
                if first[i] and read_keys:
                    wk = written[t2]
                    if len(wk) <= len(read_keys):
                        common = [x for x in wk if x in read_keys]
                    else:
                        common = [x for x in read_keys if x in wk]
                    for x in common:
                        pair = earliest[x]
                        t1 = pair[1]
                        if t1 == t2:
                            t1 = pair[0]
                        if t1 >= 0:
                            out = succ[t2]
                            out[t1] = out.get(t1, 0) | CO
                pair = earliest.get(y)
                if pair is None:
                    earliest[y] = [-1, t2]
                    read_keys.add(y)
                elif pair[1] != t2:
                    pair[0], pair[1] = pair[1], t2
    return _finish(level, g, violations)


def check_ra(h: History, continue_after_read_errors: bool = False) -> Verdict:
    level = IsolationLevel.RA
    early, violations = _read_phase(h, level, continue_after_read_errors)
    if early:
        return early
    skip = {v.read for v in violations}
    if continue_after_read_errors:
        nrr = tuple(_iter_non_repeatable(h, skip))
    else:
        first = next(_iter_non_repeatable(h, skip), None)
        nrr = () if first is None else (first,)
    if nrr:
        return Verdict(level, read_violations=tuple(violations), non_repeatable=nrr)

    g = CommitGraph.from_history(h, skip)
    idx = _Index(h, g, skip)
    written = idx.written
    succ = g.adj
    CO = int(EdgeLabel.CO)

    for refs in idx.sessions:
        last_write: dict[int, int] = {}
        for t3 in refs:
            reads = idx.reads[t3]
            # so case: the so-latest earlier writer of x in this session
            for t1, x in reads:
                t2 = last_write.get(x)
                if t2 is not None and t2 != t1:
                    out = succ[t2]
                    out[t1] = out.get(t1, 0) | CO
            # wr case; the writer per key is unique thanks to repeatable reads
            source = {x: t1 for t1, x in reads}
            for t2 in dict.fromkeys(t1 for t1, _ in reads):
                wk = written[t2]
                if len(wk) <= len(source):
                    common = [x for x in wk if x in source]
                else:
                    common = [x for x in source if x in wk]
                for x in common:
                    t1 = source[x]
                    if t1 != t2:
                        out = succ[t2]
                        out[t1] = out.get(t1, 0) | CO
            for x in written[t3]:
                last_write[x] = t3
    return _finish(level, g, violations)


def check_ra_one_session(h: History) -> Verdict:
    """Linear-time Read Atomic check for single-session histories.

    With one session the commit order must be the session order, so it is
    enough to scan it once, tracking the latest final write of every key:
    the history is consistent iff every external read observes exactly that
    write and every internal read the transaction's own latest write. The
    first mismatch hands over to :func:`_one_session_report`, which
    classifies it.
    """
    if h.session_count != 1:
        raise ValueError(f"expected a single-session history, got {h.session_count} sessions")
    wr = h.wr
    READ = OpKind.READ
    latest: dict[int, int] = {}  # key -> op id of the so-latest committed final write
    order: list[TxnRef] = []
    for p, t in enumerate(h.sessions[0]):
        if not t.committed:
            continue
        t3 = TxnRef(0, p)
        own: dict[int, int] = {}
        for op in t.ops:
            if op.kind is READ:
                src = wr.get(op.id)
                if src is None:
                    return _one_session_report(h)
                if src.txn == t3:
                    if own.get(op.key) != src.write:
                        return _one_session_report(h)
                elif op.key in own or latest.get(op.key) != src.write:
                    return _one_session_report(h)
            else:
                own[op.key] = op.id
        latest.update(own)
        order.append(t3)
    return Verdict(IsolationLevel.RA, commit_order=tuple(order))


def _one_session_report(h: History) -> Verdict:
    level = IsolationLevel.RA
    violations = check_read_consistency(h)
    if violations:
        return Verdict(level, read_violations=tuple(violations))
    nrr = check_repeatable_reads(h)
    if nrr is not None:
        return Verdict(level, non_repeatable=(nrr,))
    wr = h.wr
    last_write: dict[int, TxnRef] = {}
    for p, t in enumerate(h.sessions[0]):
        if not t.committed:
            continue
        t3 = TxnRef(0, p)
        for op in t.ops:
            if op.kind is not OpKind.READ:
                continue
            t1 = wr[op.id].txn
            if t1 == t3:
                continue
            if t1.position > p:
                return _one_session_cycle(h, t3, t1, EdgeLabel.WR, t3)
            t2 = last_write[op.key]
            if t2 != t1:
                return _one_session_cycle(h, t1, t2, EdgeLabel.CO, t1)
        for op in t.ops:
            if op.kind is OpKind.WRITE:
                last_write[op.key] = t3
    raise AssertionError("fast path flagged a consistent history")  # pragma: no cover


def _one_session_cycle(h: History, start: TxnRef, end: TxnRef, label: EdgeLabel, back: TxnRef) -> Verdict:
    # so-chain start .. end, closed by one edge end -> back
    chain = [TxnRef(0, p) for p in range(start.position, end.position + 1)
             if h.sessions[0][p].committed]
    labels = [EdgeLabel.SO] * (len(chain) - 1) + [label]
    cyc = CycleWitness(tuple(chain) + (back,), tuple(labels))
    g = CommitGraph.from_history(h)
    if label is EdgeLabel.CO:
        g.add_edge(end, back, EdgeLabel.CO)
    return Verdict(IsolationLevel.RA, cycles=(cyc,), graph=g)


def check_cc(h: History, continue_after_read_errors: bool = False) -> Verdict:
    level = IsolationLevel.CC
    early, violations = _read_phase(h, level, continue_after_read_errors)
    if early:
        return early
    skip = {v.read for v in violations}
    g = CommitGraph.from_history(h, skip)
    order = _topo_ids(g, int(BASE))
    if len(order) != len(g):
        # causality cycles; saturating on top of them would only add noise
        cycles = tuple(extract_cycle(g, c, BASE) for c in nontrivial_sccs(g, BASE))
        return Verdict(level, read_violations=tuple(violations), cycles=cycles, graph=g)
    idx = _Index(h, g, skip)
    hb = _hb_ids(g, h.session_count, order)
    k = h.session_count
    succ = g.adj
    CO = int(EdgeLabel.CO)

    # per key: so-sorted ids of the committed writers in each session that
    # writes it, and a length-k row mapping a session to its slot (-1: none)
    writers: dict[int, list[list[int]]] = {}
    slots: dict[int, list[int]] = {}
    for s2, ids in enumerate(idx.sessions):
        local: dict[int, list[int]] = {}
        for i in ids:
            for x in idx.written[i]:
                local.setdefault(x, []).append(i)
        for x, wl in local.items():
            per = writers.setdefault(x, [])
            row = slots.get(x)
            if row is None:
                row = slots[x] = [-1] * k
            row[s2] = len(per)
            per.append(wl)

    for ids in idx.sessions:
        # cursors[x][j]: writes in the j-th writer session of x already in HB
        cursors: dict[int, list[int]] = {}
        for t3 in ids:
            clock = hb[t3]
            for t1, x in idx.reads[t3]:
                per = writers[x]
                cur = cursors.get(x)
                if cur is None:
                    cur = cursors[x] = [0] * len(per)
                for s2, j in enumerate(slots[x]):
                    if j < 0:
                        continue
                    wl = per[j]
                    c = cur[j]
                    bound = clock[s2]
                    n = len(wl)
                    while c < n and wl[c] <= bound:
                        c += 1
                    cur[j] = c
                    if c:
                        t2 = wl[c - 1]
                        if t2 != t1:
                            out = succ[t2]
                            out[t1] = out.get(t1, 0) | CO
    return _finish(level, g, violations)


_CHECKERS = {IsolationLevel.RC: check_rc, IsolationLevel.RA: check_ra, IsolationLevel.CC: check_cc}


def check(h: History, level: IsolationLevel | str, continue_after_read_errors: bool = False) -> Verdict:
    """Check ``h`` against ``level``; one-session Read Atomic takes the linear fast path."""
    level = IsolationLevel(level)
    if level is IsolationLevel.RA and h.session_count == 1 and not continue_after_read_errors:
        return check_ra_one_session(h)
    return _CHECKERS[level](h, continue_after_read_errors)
