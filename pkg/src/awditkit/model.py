"""History data model: operations, transactions, sessions and the write-read relation."""

from __future__ import annotations

import enum
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple


class OpKind(str, enum.Enum):
    READ = "r"
    WRITE = "w"


class Operation(NamedTuple):
    id: int
    kind: OpKind
    key: int
    value: int

    @property
    def is_read(self) -> bool:
        return self.kind is OpKind.READ

    @property
    def is_write(self) -> bool:
        return self.kind is OpKind.WRITE


class TxnRef(NamedTuple):
    """Canonical transaction handle; refs in one session compare in session order."""

    session: int
    position: int


@dataclass(frozen=True)
class Transaction:
    txn_id: int
    ops: tuple[Operation, ...]
    committed: bool = True

    @property
    def aborted(self) -> bool:
        return not self.committed


class WrSource(NamedTuple):
    """Where a read gets its value from: the writing transaction and write operation."""

    txn: TxnRef
    write: int


class HistoryError(ValueError):
    """Structural problem found while assembling a history."""

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


@dataclass(frozen=True, eq=False)
class History:
    """Sessions of transactions plus the inferred write-read relation.

    ``wr`` maps a read operation id to the write it observes. It is derived
    from unique (key, value) pairs by :func:`build_history`; constructing a
    ``History`` directly is meant for code that already validated its input.
    """

    sessions: tuple[tuple[Transaction, ...], ...]
    wr: Mapping[int, WrSource]
    key_names: Mapping[int, str] = field(default_factory=dict)

    # -- basic accessors -------------------------------------------------

    @property
    def session_count(self) -> int:
        return len(self.sessions)

    def txn(self, ref: TxnRef) -> Transaction:
        return self.sessions[ref.session][ref.position]

    @cached_property
    def op_count(self) -> int:
        return sum(len(t.ops) for sess in self.sessions for t in sess)

    @cached_property
    def key_universe(self) -> int:
        return len({op.key for sess in self.sessions for t in sess for op in t.ops})

    @cached_property
    def committed_refs(self) -> tuple[TxnRef, ...]:
        return tuple(committed_txns(self))

    @cached_property
    def op_locations(self) -> dict[int, tuple[TxnRef, int]]:
        """Operation id -> (transaction, index in program order)."""
        out = {}
        for s, sess in enumerate(self.sessions):
            for p, t in enumerate(sess):
                ref = TxnRef(s, p)
                for i, op in enumerate(t.ops):
                    out[op.id] = (ref, i)
        return out

    def op(self, op_id: int) -> Operation:
        ref, i = self.op_locations[op_id]
        return self.txn(ref).ops[i]

    def key_name(self, key: int) -> str:
        return self.key_names.get(key, str(key))

    def txn_id(self, ref: TxnRef) -> int:
        return self.txn(ref).txn_id

    def structurally_equal(self, other: History) -> bool:
        return (
            self.sessions == other.sessions
            and dict(self.wr) == dict(other.wr)
            and dict(self.key_names) == dict(other.key_names)
        )


def committed_txns(h: History) -> Iterator[TxnRef]:
    """Yield every committed transaction, session by session, in session order."""
    for s, sess in enumerate(h.sessions):
        for p, t in enumerate(sess):
            if t.committed:
                yield TxnRef(s, p)


def keys_written(h: History, t: TxnRef) -> set[int]:
    return {op.key for op in h.txn(t).ops if op.kind is OpKind.WRITE}


def txn_wr_edges(h: History, t: TxnRef) -> list[tuple[TxnRef, int]]:
    """External write-read sources of ``t``'s reads, as (writer, key) in program order.

    Reads served by ``t`` itself and reads without a source are skipped.
    """
    out = []
    wr = h.wr
    for op in h.txn(t).ops:
        if op.kind is OpKind.READ:
            src = wr.get(op.id)
            if src is not None and src.txn != t:
                out.append((src.txn, op.key))
    return out


class HistoryBuilder:
    """Incremental constructor that assigns op ids in insertion order.

    >>> b = HistoryBuilder()
    >>> b.session()
    0
    >>> b.txn(1, [("w", 0, 1)])
    TxnRef(session=0, position=0)
    >>> b.build().op_count
    1
    """

    def __init__(self) -> None:
        self._sessions: list[list[Transaction]] = []
        self._next_op = 0
        self._txn_ids: set[int] = set()
        self.key_names: dict[int, str] = {}

    @property
    def session_count(self) -> int:
        return len(self._sessions)

    def session(self) -> int:
        self._sessions.append([])
        return len(self._sessions) - 1

    def txn(
        self,
        txn_id: int | None,
        ops: Iterable[tuple[str, int, int]],
        committed: bool = True,
        session: int = -1,
    ) -> TxnRef:
        if not self._sessions:
            self.session()
        if session < 0:
            session = len(self._sessions) - 1
        if txn_id is None:
            txn_id = len(self._txn_ids)
            while txn_id in self._txn_ids:
                txn_id += 1
        if txn_id in self._txn_ids:
            raise HistoryError("DuplicateTxnId", f"transaction id {txn_id} used twice")
        self._txn_ids.add(txn_id)
        built = []
        for kind, key, value in ops:
            built.append(Operation(self._next_op, OpKind(kind), key, value))
            self._next_op += 1
        if not built:
            raise HistoryError("EmptyTransaction", f"transaction {txn_id} has no operations")
        sess = self._sessions[session]
        sess.append(Transaction(txn_id, tuple(built), committed))
        return TxnRef(session, len(sess) - 1)

    def build(self) -> History:
        return build_history(
            [tuple(s) for s in self._sessions], key_names=dict(self.key_names)
        )


def build_history(
    sessions: Sequence[Sequence[Transaction]],
    key_names: Mapping[int, str] | None = None,
) -> History:
    """Assemble a history and infer ``wr`` from unique written values.

    Raises :class:`HistoryError` on duplicate writes, transaction ids or op ids.
    """
    writes: dict[tuple[int, int], WrSource] = {}
    txn_ids: set[int] = set()
    op_ids: set[int] = set()
    frozen = tuple(tuple(sess) for sess in sessions)
    for s, sess in enumerate(frozen):
        for p, t in enumerate(sess):
            if t.txn_id in txn_ids:
                raise HistoryError("DuplicateTxnId", f"transaction id {t.txn_id} used twice")
            txn_ids.add(t.txn_id)
            if not t.ops:
                raise HistoryError("EmptyTransaction", f"transaction {t.txn_id} has no operations")
            ref = TxnRef(s, p)
            for op in t.ops:
                if op.id in op_ids:
                    raise HistoryError("DuplicateOpId", f"operation id {op.id} used twice")
                op_ids.add(op.id)
                if op.kind is OpKind.WRITE:
                    kv = (op.key, op.value)
                    if kv in writes:
                        raise HistoryError(
                            "DuplicateWrite",
                            f"value {op.value} written to key {op.key} more than once",
                        )
                    writes[kv] = WrSource(ref, op.id)
    wr = {}
    for sess in frozen:
        for t in sess:
            for op in t.ops:
                if op.kind is OpKind.READ:
                    src = writes.get((op.key, op.value))
                    if src is not None:
                        wr[op.id] = src
    return History(frozen, wr, dict(key_names or {}))
