import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from awditkit.generators import RandomSpec, gen_random
from awditkit.history_io import ParseError, history_stats, parse_history, serialize_history, write_history
from awditkit.model import HistoryBuilder, HistoryError, OpKind, TxnRef
from figures import FIGURE_TEXT, figure

HDR = "awdit-history v1\n"


def test_parse_infers_wr_from_unique_values():
    h = figure("rc_only")
    t3 = h.txn(TxnRef(1, 0))
    assert [op.kind for op in t3.ops] == [OpKind.READ, OpKind.READ]
    srcs = [h.wr[op.id].txn for op in t3.ops]
    assert srcs == [TxnRef(0, 0), TxnRef(0, 1)]


def test_symbolic_keys_are_interned_above_numeric_ones():
    h = parse_history(HDR + "session 0\ntxn 1 c\nw 7 1\nw acct 2\nr acct 2\n")
    keys = [op.key for op in h.txn(TxnRef(0, 0)).ops]
    assert keys[0] == 7 and keys[1] == keys[2] == 8
    assert h.key_name(8) == "acct"
    assert "w acct 2" in serialize_history(h)


def test_empty_input_is_empty_history():
    for text in ("", "\n\n", "# nothing\n"):
        h = parse_history(text)
        assert h.session_count == 0 and h.op_count == 0
    assert parse_history(HDR).session_count == 0


def test_comments_blank_lines_and_crlf():
    text = HDR + "# c\n\nsession 0\r\ntxn 1 c\r\nw x 1\r\n"
    assert parse_history(text).op_count == 1


@pytest.mark.parametrize("body, reason, line", [
    ("session 0\ntxn 1 c\nw x 1\ntxn 2 c\nw x 1\n", "DuplicateWrite", 6),
    ("session 0\ntxn 1 c\nw x 1\ntxn 1 c\nw y 1\n", "DuplicateTxnId", 5),
    ("session 0\ntxn 1 c\ntxn 2 c\nw x 1\n", "EmptyTransaction", 3),
    ("session 0\ntxn 1 c\n", "EmptyTransaction", 3),
    ("session 0\ntxn 1 q\n", "Syntax", 3),
    ("session 1\n", "Syntax", 2),
    ("session 0\ntxn 1 c\nw x -1\n", "Syntax", 4),
    ("session 0\ntxn 1 c\nu x 1\n", "Syntax", 4),
    ("session 0\nw x 1\n", "Syntax", 3),
    ("txn 1 c\n", "Syntax", 2),
])
def test_parse_errors_carry_line_and_reason(body, reason, line):
    with pytest.raises(ParseError) as e:
        parse_history(HDR + body)
    assert e.value.reason == reason
    assert e.value.line == line


def test_missing_header():
    with pytest.raises(ParseError) as e:
        parse_history("session 0\n")
    assert e.value.reason == "Syntax" and e.value.line == 1


def test_non_utf8_bytes():
    with pytest.raises(ParseError):
        parse_history(b"\xff\xfe")


@pytest.mark.parametrize("name", sorted(FIGURE_TEXT))
def test_roundtrip_figures(name):
    h = figure(name)
    again = parse_history(serialize_history(h))
    assert again.structurally_equal(h)
    assert serialize_history(again) == serialize_history(h)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32), k=st.integers(1, 5), causal=st.booleans())
def test_roundtrip_random(seed, k, causal):
    h = gen_random(RandomSpec(seed=seed, sessions=k, txns=12, keys=5, causal=causal, abort_rate=0.2))
    text = serialize_history(h)
    assert parse_history(text).structurally_equal(h)
    assert serialize_history(parse_history(text)) == text


def test_write_history_to_stream():
    buf = io.StringIO()
    write_history(figure("rc_fails"), buf)
    assert buf.getvalue() == FIGURE_TEXT["rc_fails"]


def test_stats_counts():
    st_ = history_stats(figure("cc_cycle"))
    assert st_["ops"] == 11
    assert st_["reads"] + st_["writes"] == 11
    assert st_["sessions"] == 4
    assert st_["committed"] == 7 and st_["aborted"] == 0
    assert st_["keys"] == 3
    assert sum(st_["ops_per_txn"].values()) == 7


def test_builder_rejects_bad_input():
    b = HistoryBuilder()
    b.txn(1, [("w", 0, 1)])
    with pytest.raises(HistoryError) as e:
        b.txn(1, [("w", 0, 2)])
    assert e.value.reason == "DuplicateTxnId"
    with pytest.raises(HistoryError) as e:
        b.txn(2, [])
    assert e.value.reason == "EmptyTransaction"
    b.txn(3, [("w", 0, 1)])
    with pytest.raises(HistoryError) as e:
        b.build()
    assert e.value.reason == "DuplicateWrite"


def test_aborted_transactions_keep_their_session_slot():
    h = figure("aborted_read")
    assert h.txn(TxnRef(0, 0)).aborted
    assert h.committed_refs == (TxnRef(1, 0),)
