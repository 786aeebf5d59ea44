"""Per-read checks every isolation level requires (thin-air, aborted, future,
own-write and latest-write reads)."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .model import History, OpKind, TxnRef


class ReadViolationKind(enum.Enum):
    THIN_AIR = "ThinAir"
    ABORTED_READ = "AbortedRead"
    FUTURE_READ = "FutureRead"
    NOT_OWN_WRITE = "NotOwnWrite"
    NOT_LATEST_WRITE = "NotLatestWrite"


@dataclass(frozen=True)
class ReadViolation:
    read: int
    kind: ReadViolationKind
    culprit: int | None  # the write the read observed, when there is one
    txn: TxnRef
    key: int
    value: int

    def render(self, h: History) -> str:
        return (
            f"READ-CONSISTENCY {self.kind.value} read={self.read} txn={h.txn_id(self.txn)} "
            f"key={h.key_name(self.key)} value={self.value}"
        )


def check_read_consistency(h: History) -> list[ReadViolation]:
    """All reads of committed transactions that break one of the five axioms.

    A read failing several axioms is reported once, under the first failing
    kind in the order thin-air, aborted, future, own-write, latest-write.
    """
    wr = h.wr
    violations = []

    # final write per (transaction, key) of committed transactions
    last_writes: set[int] = set()
    for sess in h.sessions:
        for t in sess:
            if not t.committed:
                continue
            latest: dict[int, int] = {}
            for op in t.ops:
                if op.kind is OpKind.WRITE:
                    latest[op.key] = op.id
            last_writes.update(latest.values())

    for s, sess in enumerate(h.sessions):
        for p, t in enumerate(sess):
            if not t.committed:
                continue
            ref = TxnRef(s, p)
            latest_write: dict[int, int] = {}
            seen: set[int] = set()
            for op in t.ops:
                if op.kind is OpKind.WRITE:
                    latest_write[op.key] = op.id
                    seen.add(op.id)
                    continue
                kind = None
                src = wr.get(op.id)
                if src is None:
                    kind = ReadViolationKind.THIN_AIR
                elif not h.txn(src.txn).committed:
                    kind = ReadViolationKind.ABORTED_READ
                elif src.txn == ref:
                    if src.write not in seen:
                        kind = ReadViolationKind.FUTURE_READ
                    elif latest_write.get(op.key) != src.write:
                        kind = ReadViolationKind.NOT_LATEST_WRITE
                elif op.key in latest_write:
                    kind = ReadViolationKind.NOT_OWN_WRITE
                elif src.write not in last_writes:
                    kind = ReadViolationKind.NOT_LATEST_WRITE
                if kind is not None:
                    violations.append(ReadViolation(
                        op.id, kind, None if src is None else src.write, ref, op.key, op.value))
    return violations
