"""Weak-isolation checking for transactional key-value histories."""

__version__ = "0.1.0"

from .checkers import (  # noqa: E402
    IsolationLevel,
    NonRepeatableRead,
    Verdict,
    check,
    check_cc,
    check_ra,
    check_ra_one_session,
    check_rc,
    check_repeatable_reads,
    linearize,
)
from .graph import CommitGraph, CycleWitness, EdgeLabel, compute_hb  # noqa: E402
from .history_io import ParseError, parse_history, read_history, serialize_history, write_history  # noqa: E402
from .model import History, HistoryBuilder, HistoryError, Operation, Transaction, TxnRef  # noqa: E402
from .oracle import BudgetExceeded, OracleBudget, axiom_holds, oracle_check  # noqa: E402
from .read_consistency import ReadViolation, ReadViolationKind, check_read_consistency  # noqa: E402

__all__ = [
    "BudgetExceeded", "CommitGraph", "CycleWitness", "EdgeLabel", "History", "HistoryBuilder",
    "HistoryError", "IsolationLevel", "NonRepeatableRead", "Operation", "OracleBudget", "ParseError",
    "ReadViolation", "ReadViolationKind", "Transaction", "TxnRef", "Verdict", "axiom_holds", "check",
    "check_cc", "check_ra", "check_ra_one_session", "check_rc", "check_read_consistency",
    "check_repeatable_reads", "compute_hb", "linearize", "oracle_check", "parse_history",
    "read_history", "serialize_history", "write_history",
]
