"""Commit-relation graph over committed transactions, plus the graph algorithms
the checkers need: topological sort, SCCs, witness cycles and vector clocks.

Nodes are stored under dense integer ids (session-major, so id order equals
``(session, position)`` order); the public methods speak ``TxnRef``.
"""

from __future__ import annotations

import enum
import heapq
from collections.abc import Collection, Iterable, Iterator, Sequence
from dataclasses import dataclass

from .model import History, OpKind, TxnRef


class EdgeLabel(enum.IntFlag):
    SO = 1
    WR = 2
    CO = 4  # inferred commit-order edge

    @property
    def tag(self) -> str:
        return {EdgeLabel.SO: "so", EdgeLabel.WR: "wr", EdgeLabel.CO: "co"}[self]


BASE = EdgeLabel.SO | EdgeLabel.WR
ALL = EdgeLabel.SO | EdgeLabel.WR | EdgeLabel.CO

# plain-int masks for hot loops; IntFlag arithmetic is slow
_SO, _WR, _CO, _BASE, _ALL = 1, 2, 4, 3, 7


def _best_label(mask: int) -> EdgeLabel:
    if mask & _SO:
        return EdgeLabel.SO
    if mask & _WR:
        return EdgeLabel.WR
    return EdgeLabel.CO


class CommitGraph:
    """Directed graph on transactions; parallel edges are kept as a label mask.

    ``adj[i]`` maps successor id to label mask, ``refs[i]`` is the transaction
    behind id ``i``.
    """

    def __init__(self, nodes: Iterable[TxnRef] = ()):
        self.refs: list[TxnRef] = []
        self.ids: dict[TxnRef, int] = {}
        self.adj: list[dict[int, int]] = []
        for n in nodes:
            self.add_node(n)

    @property
    def nodes(self) -> list[TxnRef]:
        return list(self.refs)

    def __len__(self) -> int:
        return len(self.refs)

    def __contains__(self, node: object) -> bool:
        return node in self.ids

    def add_node(self, node: TxnRef) -> int:
        i = self.ids.get(node)
        if i is None:
            i = self.ids[node] = len(self.refs)
            self.refs.append(node)
            self.adj.append({})
        return i

    def add_edge(self, u: TxnRef, v: TxnRef, label: EdgeLabel) -> None:
        out = self.adj[self.add_node(u)]
        j = self.add_node(v)
        out[j] = out.get(j, 0) | int(label)

    def _mask(self, u: TxnRef, v: TxnRef) -> int:
        i, j = self.ids.get(u), self.ids.get(v)
        if i is None or j is None:
            return 0
        return self.adj[i].get(j, 0)

    def labels(self, u: TxnRef, v: TxnRef) -> EdgeLabel:
        return EdgeLabel(self._mask(u, v))

    def has_edge(self, u: TxnRef, v: TxnRef, label: EdgeLabel = ALL) -> bool:
        return bool(self._mask(u, v) & label)

    def edges(self, label: EdgeLabel = ALL) -> Iterator[tuple[TxnRef, TxnRef, EdgeLabel]]:
        """Yield ``(u, v, label)`` once per label present on each pair."""
        refs = self.refs
        for i, out in enumerate(self.adj):
            for j, mask in out.items():
                for lab in (EdgeLabel.SO, EdgeLabel.WR, EdgeLabel.CO):
                    if mask & lab & label:
                        yield refs[i], refs[j], lab

    def edge_count(self, label: EdgeLabel = ALL) -> int:
        return sum(1 for _ in self.edges(label))

    def successors(self, u: TxnRef, label: EdgeLabel = ALL) -> Iterator[TxnRef]:
        label = int(label)
        for j, mask in self.adj[self.ids[u]].items():
            if mask & label:
                yield self.refs[j]

    @classmethod
    def from_history(cls, h: History, skip_reads: Collection[int] = ()) -> CommitGraph:
        """so ∪ wr over committed transactions; reads in ``skip_reads`` contribute no edge."""
        g = cls()
        refs, ids, adj = g.refs, g.ids, g.adj
        committed = []
        for s, sess in enumerate(h.sessions):
            prev = -1
            for p, t in enumerate(sess):
                if not t.committed:
                    continue
                i = len(refs)
                ref = TxnRef(s, p)
                refs.append(ref)
                ids[ref] = i
                adj.append({})
                committed.append(t)
                if prev >= 0:
                    adj[prev][i] = _SO
                prev = i
        wr = h.wr
        READ = OpKind.READ
        for i, t in enumerate(committed):
            for op in t.ops:
                if op.kind is READ and op.id not in skip_reads:
                    src = wr.get(op.id)
                    if src is None:
                        continue
                    w = ids.get(src.txn)
                    if w is not None and w != i:
                        out = adj[w]
                        out[i] = out.get(i, 0) | _WR
        return g


@dataclass(frozen=True)
class CycleWitness:
    """A closed walk ``nodes[0] -> nodes[1] -> ... -> nodes[-1] == nodes[0]``."""

    nodes: tuple[TxnRef, ...]
    labels: tuple[EdgeLabel, ...]

    def __post_init__(self) -> None:
        if len(self.nodes) < 2 or self.nodes[0] != self.nodes[-1]:
            raise ValueError("cycle must close on its first node")
        if len(self.labels) != len(self.nodes) - 1:
            raise ValueError("one label per edge")

    def __len__(self) -> int:
        return len(self.labels)

    def edges(self) -> Iterator[tuple[TxnRef, TxnRef, EdgeLabel]]:
        for i, lab in enumerate(self.labels):
            yield self.nodes[i], self.nodes[i + 1], lab

    @property
    def non_sowr_edge_count(self) -> int:
        return sum(1 for lab in self.labels if lab is EdgeLabel.CO)

    def is_valid_in(self, g: CommitGraph) -> bool:
        """Every edge exists with its label and no node repeats except the closing one."""
        inner = self.nodes[:-1]
        if len(set(inner)) != len(inner):
            return False
        return all(g.has_edge(u, v, lab) for u, v, lab in self.edges())


def _topo_ids(g: CommitGraph, label: int) -> list[int]:
    # Kahn's algorithm with ties broken by (session, position); returns a
    # prefix when the graph is cyclic
    refs = g.refs
    if any(refs[i] > refs[i + 1] for i in range(len(refs) - 1)):
        # ids were not handed out in session order: relabel, sort, map back
        perm = sorted(range(len(refs)), key=refs.__getitem__)
        return [perm[i] for i in _topo_ids(_relabel(g, perm), label)]
    adj = g.adj
    n = len(adj)
    indeg = [0] * n
    for out in adj:
        for j, mask in out.items():
            if mask & label:
                indeg[j] += 1
    ready = [i for i in range(n) if indeg[i] == 0]
    heapq.heapify(ready)
    order = []
    push, pop = heapq.heappush, heapq.heappop
    while ready:
        i = pop(ready)
        order.append(i)
        for j, mask in adj[i].items():
            if mask & label:
                indeg[j] -= 1
                if indeg[j] == 0:
                    push(ready, j)
    return order


def _relabel(g: CommitGraph, perm: list[int]) -> CommitGraph:
    # copy of g whose node i is g's node perm[i]
    inv = [0] * len(perm)
    for i, old in enumerate(perm):
        inv[old] = i
    h = CommitGraph()
    h.refs = [g.refs[old] for old in perm]
    h.ids = {r: i for i, r in enumerate(h.refs)}
    h.adj = [{inv[j]: m for j, m in g.adj[old].items()} for old in perm]
    return h


def topo_sort(g: CommitGraph, label: EdgeLabel = ALL) -> list[TxnRef] | CycleWitness:
    """Kahn's algorithm restricted to edges carrying ``label``.

    Ties are broken by ``(session, position)``, so the result is deterministic.
    On a cycle, a witness inside the remaining (cyclic) part is returned.
    """
    label = int(label)
    order = _topo_ids(g, label)
    if len(order) == len(g.adj):
        refs = g.refs
        return [refs[i] for i in order]
    placed = set(order)
    rest = [i for i in range(len(g.adj)) if i not in placed]
    for comp in _scc_ids(g, label, rest):
        if len(comp) > 1 or g.adj[comp[0]].get(comp[0], 0) & label:
            return _extract_ids(g, comp, label)
    raise AssertionError("unsorted nodes but no cycle")  # pragma: no cover


def _scc_ids(g: CommitGraph, label: int, roots: Iterable[int] | None = None) -> list[list[int]]:
    """Iterative Tarjan; components come out in reverse topological order."""
    adj = g.adj
    n = len(adj)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in (range(n) if roots is None else roots):
        if index[root] >= 0:
            continue
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        work = [(root, iter(adj[root].items()))]
        while work:
            node, it = work[-1]
            advanced = False
            for v, mask in it:
                if not mask & label:
                    continue
                if index[v] < 0:
                    index[v] = low[v] = counter
                    counter += 1
                    stack.append(v)
                    on_stack[v] = True
                    work.append((v, iter(adj[v].items())))
                    advanced = True
                    break
                if on_stack[v] and index[v] < low[node]:
                    low[node] = index[v]
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                if low[node] < low[parent]:
                    low[parent] = low[node]
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == node:
                        break
                comp.sort()
                comps.append(comp)
    return comps


def find_sccs(g: CommitGraph, label: EdgeLabel = ALL) -> list[list[TxnRef]]:
    """Strongly connected components in reverse topological order (sinks first)."""
    refs = g.refs
    return [[refs[i] for i in c] for c in _scc_ids(g, int(label))]


def _nontrivial_ids(g: CommitGraph, label: int) -> list[list[int]]:
    return [c for c in _scc_ids(g, label) if len(c) > 1 or g.adj[c[0]].get(c[0], 0) & label]


def nontrivial_sccs(g: CommitGraph, label: EdgeLabel = ALL) -> list[list[TxnRef]]:
    refs = g.refs
    return [[refs[i] for i in c] for c in _nontrivial_ids(g, int(label))]


# Upper bound on search roots tried per component when looking for a witness.
MAX_WITNESS_ROOTS = 32


def _cheapest_cycle_through(
    g: CommitGraph, members: set[int], root: int, label: int
) -> tuple[int, int, list[int]] | None:
    # Dijkstra on (inferred edges, hops): so/wr edges are free, co edges cost 1
    adj = g.adj
    dist = {root: (0, 0)}
    parent: dict[int, int] = {}
    heap = [(0, 0, root)]
    best: tuple[int, int, int] | None = None
    done = set()
    while heap:
        cost, hops, u = heapq.heappop(heap)
        if u in done:
            continue
        if best is not None and (cost, hops) >= best[:2]:
            break
        done.add(u)
        for v, mask in adj[u].items():
            mask &= label
            if not mask or v not in members:
                continue
            cand = (cost + (0 if mask & _BASE else 1), hops + 1)
            if v == root:
                if best is None or cand < best[:2]:
                    best = (cand[0], cand[1], u)
            elif v not in done and (v not in dist or cand < dist[v]):
                dist[v] = cand
                parent[v] = u
                heapq.heappush(heap, (cand[0], cand[1], v))
    if best is None:
        return None
    path = [best[2]]
    while path[-1] != root:
        path.append(parent[path[-1]])
    path.reverse()
    return best[0], best[1], path


def _extract_ids(g: CommitGraph, scc: Sequence[int], label: int) -> CycleWitness:
    adj, refs = g.adj, g.refs
    members = set(scc)
    for n in scc:
        mask = adj[n].get(n, 0) & label
        if mask:
            return CycleWitness((refs[n], refs[n]), (_best_label(mask),))
    roots: list[int] = []
    seen = set()
    for u in sorted(members):
        for v, mask in adj[u].items():
            if v in members and mask & label and not mask & _BASE:
                for r in (u, v):
                    if r not in seen:
                        seen.add(r)
                        roots.append(r)
        if len(roots) >= MAX_WITNESS_ROOTS:
            break
    if not roots:
        roots = [min(members)]
    best = None
    for root in roots[:MAX_WITNESS_ROOTS]:
        found = _cheapest_cycle_through(g, members, root, label)
        if found is not None and (best is None or found[:2] < best[:2]):
            best = found
            if best[0] == 0:
                break
    if best is None:
        raise ValueError("component has no cycle")
    path = best[2]
    ids = path + [path[0]]
    labels = tuple(_best_label(adj[a][b] & label) for a, b in zip(ids, ids[1:]))
    return CycleWitness(tuple(refs[i] for i in ids), labels)


def extract_cycle(g: CommitGraph, scc: Sequence[TxnRef], label: EdgeLabel = ALL) -> CycleWitness:
    """A simple cycle inside ``scc`` with few inferred (co) edges.

    Each candidate root gets a shortest-path search that prefers so/wr edges
    over inferred ones; the cheapest closed path over the tried roots wins.
    Roots are the endpoints of inferred edges inside the component, capped
    at ``MAX_WITNESS_ROOTS``, so the result is not guaranteed globally minimal.
    """
    return _extract_ids(g, [g.ids[r] for r in scc], int(label))


def render_cycle(h: History, cyc: CycleWitness) -> list[str]:
    return [f"{h.txn_id(u)} -[{lab.tag}]-> {h.txn_id(v)}" for u, v, lab in cyc.edges()]


# -- vector clocks --------------------------------------------------------

BOTTOM = -1
VectorClock = tuple[int, ...]


def vc_join(a: Sequence[int], b: Sequence[int]) -> VectorClock:
    """Pointwise so-maximum; entries are session positions, ``BOTTOM`` when absent."""
    if len(a) != len(b):
        raise ValueError("vector clocks of different length")
    return tuple(x if x >= y else y for x, y in zip(a, b))


def compute_hb(h: History, skip_reads: Collection[int] = ()) -> dict[TxnRef, VectorClock] | CycleWitness:
    """Happens-before as one vector clock per committed transaction.

    ``hb[t][s]`` is the position of the so-latest transaction of session ``s``
    that reaches ``t`` through so ∪ wr, or ``BOTTOM``. Fails with a witness
    when so ∪ wr is cyclic.
    """
    g = CommitGraph.from_history(h, skip_reads)
    order = _topo_ids(g, _BASE)
    if len(order) != len(g.adj):
        return topo_sort(g, BASE)
    clocks = _hb_ids(g, h.session_count, order)
    refs = g.refs
    out = {}
    for i, clock in enumerate(clocks):
        out[refs[i]] = tuple(BOTTOM if c < 0 else refs[c].position for c in clock)
    return out


def _hb_ids(g: CommitGraph, k: int, order: list[int]) -> list[list[int]]:
    """Exclusive happens-before clocks whose entries are node ids, -1 for none.

    Ids grow along each session, so comparing ids within one session
    compares session positions.
    """
    adj, refs = g.adj, g.refs
    session = [r.session for r in refs]
    preds: list[list[int]] = [[] for _ in adj]
    for u, out in enumerate(adj):
        for v, mask in out.items():
            if mask & _WR:
                preds[v].append(u)
    latest = [[-1] * k for _ in range(k)]  # inclusive clock of each session's latest placed txn
    hb: list[list[int] | None] = [None] * len(adj)
    for t in order:
        s = session[t]
        cur = latest[s]
        for p in preds[t]:
            # inclusive clock of p: its exclusive clock plus p itself
            cur = list(map(max, cur, hb[p]))
            sp = session[p]
            if p > cur[sp]:
                cur[sp] = p
        hb[t] = cur
        nxt = cur[:]
        nxt[s] = t
        latest[s] = nxt
    return hb
