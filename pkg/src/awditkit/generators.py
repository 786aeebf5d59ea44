"""Test corpora: seeded random histories and triangle-freeness reductions."""

from __future__ import annotations

import itertools
import logging
import random
from collections.abc import Iterable
from dataclasses import dataclass, field

from .model import History, HistoryBuilder, TxnRef

log = logging.getLogger(__name__)

ANOMALIES = ("ThinAir", "AbortedRead", "FutureRead", "FracturedRead", "CausalityViolation")


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class UndirectedGraph:
    node_count: int
    edges: frozenset[tuple[int, int]]

    def __init__(self, node_count: int, edges: Iterable[tuple[int, int]] = ()):
        canon = set()
        for a, b in edges:
            if a == b:
                raise ValueError(f"self-loop on node {a}")
            if not (0 <= a < node_count and 0 <= b < node_count):
                raise ValueError(f"edge ({a}, {b}) outside 0..{node_count - 1}")
            canon.add((min(a, b), max(a, b)))
        object.__setattr__(self, "node_count", node_count)
        object.__setattr__(self, "edges", frozenset(canon))

    def neighbors(self, a: int) -> list[int]:
        return sorted([v for u, v in self.edges if u == a] + [u for u, v in self.edges if v == a])

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.node_count)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        for row in adj:
            row.sort()
        return adj


def random_graph(n: int, p: float, rng: random.Random | int | None = None) -> UndirectedGraph:
    """Erdős–Rényi G(n, p)."""
    if not isinstance(rng, random.Random):
        rng = random.Random(rng)
    return UndirectedGraph(n, [(a, b) for a, b in itertools.combinations(range(n), 2) if rng.random() < p])


def has_triangle(g: UndirectedGraph) -> bool:
    """Brute force over all node triples."""
    e = g.edges
    for a, b, c in itertools.combinations(range(g.node_count), 3):
        if (a, b) in e and (b, c) in e and (a, c) in e:
            return True
    return False


# -- reductions ------------------------------------------------------------

def _pair_key(n: int, a: int, b: int) -> int:
    # x_a^b; x_a itself is key a
    return n + a * n + b


def _write_ops(g: UndirectedGraph, adj, a: int, with_pairs: bool):
    n = g.node_count
    ops = []
    for b in adj[a]:
        ops.append(("w", b, a))
        if with_pairs:
            ops.append(("w", _pair_key(n, a, b), a))
    ops.append(("w", a, a))
    return ops


def _read_ops(g: UndirectedGraph, adj, a: int, with_pairs: bool):
    n = g.node_count
    ops = []
    if with_pairs:
        ops += [("r", _pair_key(n, b, a), b) for b in adj[a]]
    ops += [("r", b, b) for b in adj[a]]
    return ops


def _reduction(g: UndirectedGraph, with_pairs: bool, layout: str) -> History:
    # write transaction of node a has id a, its read transaction id n + a;
    # isolated nodes get no read transaction since it would be empty
    n = g.node_count
    adj = g.adjacency()
    b = HistoryBuilder()
    if layout == "one":
        b.session()
    elif layout == "two":
        b.session()
        b.session()
    for a in range(n):
        if layout == "own":
            b.session()
        b.txn(a, _write_ops(g, adj, a, with_pairs), session=0 if layout != "own" else -1)
    for a in range(n):
        ops = _read_ops(g, adj, a, with_pairs)
        if not ops:
            continue
        if layout == "own":
            b.session()
        b.txn(n + a, ops, session={"one": 0, "two": 1}.get(layout, -1))
    return b.build()


def gen_range_reduction(g: UndirectedGraph) -> History:
    """One transaction per session; violates RC iff triangle, else satisfies CC."""
    return _reduction(g, with_pairs=True, layout="own")


def gen_ra_reduction(g: UndirectedGraph) -> History:
    """Write transactions on session 0, read transactions on session 1."""
    return _reduction(g, with_pairs=False, layout="two")


def gen_rc_reduction(g: UndirectedGraph) -> History:
    """The range-reduction transactions on a single session."""
    return _reduction(g, with_pairs=True, layout="one")


# -- random histories --------------------------------------------------------

@dataclass(frozen=True)
class RandomSpec:
    seed: int = 0
    sessions: int = 3
    txns: int = 10
    ops_per_txn: tuple[int, int] = (1, 4)
    keys: int = 4
    read_fraction: float = 0.5
    inject: frozenset[str] = field(default_factory=frozenset)
    # causal=False drops the construction guarantee so that every verdict shows up
    causal: bool = True
    abort_rate: float = 0.0
    # start with one transaction on session 0 writing every key, visible to all
    initial_writes: bool = False

    def __post_init__(self):
        object.__setattr__(self, "inject", frozenset(self.inject))
        unknown = self.inject - set(ANOMALIES)
        if unknown:
            raise ValueError(f"unknown anomalies: {', '.join(sorted(unknown))}")
        lo, hi = self.ops_per_txn
        if self.sessions < 1 or self.keys < 1 or lo < 1 or hi < lo or self.txns < 0:
            raise ValueError("sessions, keys and ops per transaction must be positive")
        if not 0.0 <= self.read_fraction <= 1.0 or not 0.0 <= self.abort_rate <= 1.0:
            raise ValueError("fractions must lie in [0, 1]")


class _Values:
    def __init__(self):
        self.next = 1

    def __call__(self) -> int:
        v = self.next
        self.next += 1
        return v


def gen_random(spec: RandomSpec) -> History:
    """Deterministic random history for ``spec``.

    In causal mode every read observes the latest (in generation order) write
    visible to its session under a vector-clock simulation of causal delivery,
    so the result satisfies CC unless anomalies are injected.
    """
    rng = random.Random(spec.seed)
    fresh = _Values()
    if spec.causal:
        sessions = _causal_body(spec, rng, fresh)
    else:
        sessions = _free_body(spec, rng, fresh)
    _inject(spec, rng, fresh, sessions)

    b = HistoryBuilder()
    for _ in range(spec.sessions):
        b.session()
    # built session by session, as a parser would, so that each session's
    # objects sit together in memory; txn ids keep the generation order
    for s, sess in enumerate(sessions):
        for gen, ops, committed in sess:
            b.txn(gen, ops, committed=committed, session=s)
    return b.build()


def _txn_shape(spec: RandomSpec, rng: random.Random):
    lo, hi = spec.ops_per_txn
    return [("r" if rng.random() < spec.read_fraction else "w", rng.randrange(spec.keys))
            for _ in range(rng.randint(lo, hi))]


def _causal_body(spec, rng, fresh):
    k = spec.sessions
    clocks = [[-1] * k for _ in range(k)]
    sessions: list[list] = [[] for _ in range(k)]
    # per key: committed final writes as (session, position, value), generation order
    writers: dict[int, list[tuple[int, int, int]]] = {}
    first = 0
    if spec.initial_writes:
        init = [("w", key, fresh()) for key in range(spec.keys)]
        sessions[0].append((0, init, True))
        for _, key, value in init:
            writers[key] = [(0, 0, value)]
        for clock in clocks:
            clock[0] = 0
        first = 1
    for gen in range(first, first + spec.txns):
        s = rng.randrange(k)
        clock = clocks[s]
        if k > 1 and rng.random() < 0.5:
            other = clocks[rng.choice([o for o in range(k) if o != s])]
            for i in range(k):
                if other[i] > clock[i]:
                    clock[i] = other[i]
        pos = len(sessions[s])
        committed = rng.random() >= spec.abort_rate
        ops = []
        own: dict[int, int] = {}
        observed: dict[int, int] = {}
        for kind, key in _txn_shape(spec, rng):
            if kind == "r":
                if key in own:
                    value = own[key]
                elif key in observed:
                    value = observed[key]
                else:
                    value = None
                    for ws, wp, wv in reversed(writers.get(key, ())):
                        if wp <= clock[ws]:
                            value = wv
                            break
                    if value is None:
                        if spec.read_fraction >= 1.0:
                            raise GenerationError(f"no visible write to read for key {key}")
                        kind = "w"
                    else:
                        observed[key] = value
            if kind == "w":
                value = fresh()
                own[key] = value
            ops.append((kind, key, value))
        if committed:
            for key, value in own.items():
                writers.setdefault(key, []).append((s, pos, value))
            clock[s] = pos
        sessions[s].append((gen, ops, committed))
    return sessions


def _free_body(spec, rng, fresh):
    k = spec.sessions
    sessions: list[list] = [[] for _ in range(k)]
    shapes = []
    first = 0
    if spec.initial_writes:
        init = (0, [["w", key, fresh()] for key in range(spec.keys)], True)
        sessions[0].append(init)
        shapes.append(init)
        first = 1
    for gen in range(first, first + spec.txns):
        s = rng.randrange(k)
        committed = rng.random() >= spec.abort_rate
        ops = []
        for kind, key in _txn_shape(spec, rng):
            ops.append([kind, key, fresh() if kind == "w" else None])
        sessions[s].append((gen, ops, committed))
        shapes.append((gen, ops, committed))
    finals: dict[int, list[tuple[int, int]]] = {}  # key -> [(gen, value)] committed final writes
    every: dict[int, list[int]] = {}
    for gen, ops, committed in shapes:
        last = {}
        for kind, key, value in ops:
            if kind == "w":
                last[key] = value
                every.setdefault(key, []).append(value)
        if committed:
            for key, value in last.items():
                finals.setdefault(key, []).append((gen, value))
    for gen, ops, _ in shapes:
        own: dict[int, int] = {}
        for op in ops:
            kind, key, value = op
            if kind == "w":
                own[key] = value
                continue
            if rng.random() < 0.9:
                if key in own:
                    op[2] = own[key]
                    continue
                pool = [v for g, v in finals.get(key, ()) if g != gen]
            else:
                pool = every.get(key, [])
            op[2] = rng.choice(pool) if pool else fresh()
    return [[(gen, [tuple(op) for op in ops], committed) for gen, ops, committed in sess]
            for sess in sessions]


def _inject(spec, rng, fresh, sessions):
    if not spec.inject:
        return
    k = spec.sessions
    gen = itertools.count(max((g for sess in sessions for g, _, _ in sess), default=-1) + 1)
    next_key = itertools.count(spec.keys)  # planted patterns use private keys

    def add(s, ops, committed=True):
        g = next(gen)
        sessions[s].append((g, ops, committed))
        return g

    def pick(n):
        # n session indices, distinct while the history has enough sessions
        order = list(range(k))
        rng.shuffle(order)
        return [order[i % k] for i in range(n)]

    for name in ANOMALIES:
        if name not in spec.inject:
            continue
        if name == "ThinAir":
            (a,) = pick(1)
            key, v = rng.randrange(spec.keys), fresh()
            t = add(a, [("r", key, v)])
            log.info("planted ThinAir: txn %d reads key %d value %d that nobody wrote", t, key, v)
        elif name == "AbortedRead":
            a, b = pick(2)
            key, v = next(next_key), fresh()
            w = add(a, [("w", key, v)], committed=False)
            t = add(b, [("r", key, v)])
            log.info("planted AbortedRead: txn %d reads key %d from aborted txn %d", t, key, w)
        elif name == "FutureRead":
            (a,) = pick(1)
            key, v = next(next_key), fresh()
            t = add(a, [("r", key, v), ("w", key, v)])
            log.info("planted FutureRead: txn %d reads key %d before writing it", t, key)
        elif name == "FracturedRead":
            a, b = pick(2)
            x, y = next(next_key), next(next_key)
            old, vx, vy = fresh(), fresh(), fresh()
            t_old = add(a, [("w", y, old)])
            t2 = add(a, [("w", x, vx), ("w", y, vy)])
            t = add(b, [("r", y, old), ("r", x, vx)])
            log.info("planted FracturedRead: txn %d sees txn %d's write to key %d but txn %d's older key %d",
                     t, t2, x, t_old, y)
        elif name == "CausalityViolation":
            a, b, c = pick(3)
            x, y = next(next_key), next(next_key)
            v1, v2, v3 = fresh(), fresh(), fresh()
            t1 = add(a, [("w", x, v1)])
            t2 = add(a, [("w", x, v2)])
            t3 = add(b, [("r", x, v2), ("w", y, v3)])
            t4 = add(c, [("r", y, v3), ("r", x, v1)])
            log.info("planted CausalityViolation: txn %d reads key %d from txn %d although txn %d "
                     "(seen through txn %d) overwrote it", t4, x, t1, t2, t3)
