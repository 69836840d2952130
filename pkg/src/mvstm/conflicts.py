"""Conflict relations and the multi-version conflict graph.

Two relations are computed over operation pairs: the classic conflict order
of sequential histories (commit/commit, commit/read, read/commit clauses on
successful operations) and the multi-version variant defined over the
deterministic completion, which tolerates reads of old versions and is also
defined for non-sequential histories.  The graph built from the latter plus
real-time edges decides mvc-opacity by acyclicity.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .model import (
    History,
    InvalidHistoryError,
    NotSequentialError,
    OpKind,
    Operation,
    T0,
    TxnId,
    Value,
    equivalent,
    is_sequential,
    mvc_completion,
    real_time_order,
)
from .semantics import valid_write_of


C0_POS = -1  # T0's commit response precedes every materialized event


class PairKind(Enum):
    CC = "cc"
    CR = "cr"
    RC = "rc"


class EdgeKind(Enum):
    RT = "rt"
    CC = "cc"
    CR = "cr"
    RC = "rc"


@dataclass(frozen=True)
class OpRef:
    """Position-independent operation identity, stable across reorderings."""

    op: OpKind
    txn: TxnId
    obj: Optional[str] = None
    value: Optional[Value] = None

    def __repr__(self) -> str:
        if self.op is OpKind.TRY_COMMIT:
            return f"c{self.txn}"
        return f"r{self.txn}({self.obj},{self.value})"


def commit_ref(t: TxnId) -> OpRef:
    return OpRef(OpKind.TRY_COMMIT, t)


def read_ref(t: TxnId, x: str, v: Value) -> OpRef:
    return OpRef(OpKind.READ, t, x, v)


def ref_of(op: Operation) -> OpRef:
    if op.op is OpKind.TRY_COMMIT:
        return commit_ref(op.txn)
    if op.op is OpKind.READ:
        return read_ref(op.txn, op.obj, op.value)
    raise ValueError(f"no conflict identity for {op!r}")


@dataclass(frozen=True)
class ConflictPair:
    kind: PairKind
    src: OpRef
    dst: OpRef

    def __repr__(self) -> str:
        return f"{self.kind.value}:({self.src!r},{self.dst!r})"


@dataclass(frozen=True)
class ConflictOrder:
    pairs: frozenset[ConflictPair]

    def without_initial(self) -> frozenset[ConflictPair]:
        return frozenset(
            p for p in self.pairs if p.src.txn != T0 and p.dst.txn != T0
        )


@dataclass(frozen=True)
class MvcOrder:
    pairs: frozenset[ConflictPair]
    completion: History
    # committed writer transaction backing each successful read
    read_writers: dict = field(compare=False, default_factory=dict)

    def without_initial(self) -> frozenset[ConflictPair]:
        """Drop pairs involving T0's commit or generated by reads from it."""
        out = set()
        for p in self.pairs:
            if p.src.txn == T0 or p.dst.txn == T0:
                continue
            read = p.dst if p.kind is PairKind.CR else p.src
            if p.kind is not PairKind.CC and self.read_writers.get(read) == T0:
                continue
            out.add(p)
        return frozenset(out)


def conflict_order(h: History) -> ConflictOrder:
    """The three-clause conflict relation of a sequential history."""
    if not is_sequential(h):
        raise NotSequentialError("conflict order is defined on sequential histories")
    pairs: set[ConflictPair] = set()
    commits = [(h.commit_of(t).inv, t) for t in h.committed]
    commits.append((C0_POS, T0))
    reads = [r for r in h.successful_reads()]

    def wset(t: TxnId) -> frozenset:
        return h.objects if t == T0 else h.write_set(t)

    for pi, ti in commits:
        for pj, tj in commits:
            if ti != tj and pi < pj and wset(ti) & wset(tj):
                pairs.add(ConflictPair(PairKind.CC, commit_ref(ti), commit_ref(tj)))
    for r in reads:
        for pc, tc in commits:
            if tc == r.txn or r.obj not in wset(tc):
                continue
            if pc < r.inv:
                pairs.add(ConflictPair(PairKind.CR, commit_ref(tc), ref_of(r)))
            else:
                pairs.add(ConflictPair(PairKind.RC, ref_of(r), commit_ref(tc)))
    return ConflictOrder(frozenset(pairs))


def mvc_order(h: History) -> MvcOrder:
    """Definition of the multi-version conflict relation over the completion.

    Same-transaction pairs are excluded: the order between a transaction's
    own operations is implicit.  Raises InvalidHistoryError when a successful
    read has no validWrite.
    """
    comp = mvc_completion(h)
    pairs: set[ConflictPair] = set()
    read_writers: dict[OpRef, TxnId] = {}

    commit_pos: dict[TxnId, int] = {T0: C0_POS}
    for t in comp.committed:
        commit_pos[t] = comp.commit_of(t).rsp

    # committed writers per object, T0 writes every object
    writers: dict[str, list[TxnId]] = {x: [T0] for x in comp.objects}
    for x in comp.objects:
        for w in comp.writes_to(x):
            if w.txn in commit_pos and w.txn not in writers[x]:
                writers[x].append(w.txn)

    for x, ws in sorted(writers.items()):
        ordered = sorted(ws, key=commit_pos.__getitem__)
        for i, ti in enumerate(ordered):
            for tj in ordered[i + 1 :]:
                pairs.add(ConflictPair(PairKind.CC, commit_ref(ti), commit_ref(tj)))

    for r in comp.successful_reads():
        vw = valid_write_of(comp, r)
        if vw is None:
            raise InvalidHistoryError(
                f"read {r!r} has no validWrite; the history is not valid"
            )
        rref = ref_of(r)
        read_writers[rref] = vw.txn
        k_pos = commit_pos[vw.txn]
        for tj in writers.get(r.obj, ()):
            if tj == r.txn:
                continue
            if tj == vw.txn or commit_pos[tj] < k_pos:
                pairs.add(ConflictPair(PairKind.CR, commit_ref(tj), rref))
            else:
                pairs.add(ConflictPair(PairKind.RC, rref, commit_ref(tj)))
    return MvcOrder(frozenset(pairs), comp, read_writers)


def _response_positions(s: History) -> dict[OpRef, int]:
    pos: dict[OpRef, int] = {commit_ref(T0): C0_POS}
    for op in s.ops:
        if op.is_commit or op.is_successful_read:
            pos[ref_of(op)] = op.rsp
    return pos


def pairs_ordered_in(s: History, pairs) -> bool:
    """True iff every pair's response events appear in order within s."""
    pos = _response_positions(s)
    for p in pairs:
        a, b = pos.get(p.src), pos.get(p.dst)
        if a is None or b is None or a >= b:
            return False
    return True


def satisfies(s: History, m: MvcOrder) -> bool:
    """True iff s is equivalent to the completion and orders every pair."""
    if not is_sequential(s):
        raise NotSequentialError("satisfaction is checked on sequential histories")
    if not equivalent(s, m.completion):
        return False
    return pairs_ordered_in(s, m.pairs)


@dataclass(frozen=True)
class MvcGraph:
    vertices: frozenset[TxnId]
    edges: frozenset[tuple[TxnId, TxnId, EdgeKind]]

    def successors(self, t: TxnId) -> set[TxnId]:
        return {v for (u, v, _k) in self.edges if u == t}

    def adjacency(self) -> dict[TxnId, set[TxnId]]:
        adj: dict[TxnId, set[TxnId]] = {v: set() for v in self.vertices}
        for u, v, _k in self.edges:
            adj[u].add(v)
        return adj

    def without_vertex(self, t: TxnId) -> "MvcGraph":
        return MvcGraph(
            frozenset(v for v in self.vertices if v != t),
            frozenset(e for e in self.edges if t not in (e[0], e[1])),
        )


def build_mvcg(h: History) -> MvcGraph:
    """Transaction graph: real-time edges plus one edge per cross-txn pair."""
    m = mvc_order(h)
    vertices = set(m.completion.txns) | {T0}
    edges: set[tuple[TxnId, TxnId, EdgeKind]] = set()
    for a, b in real_time_order(h):
        edges.add((a, b, EdgeKind.RT))
    for p in m.pairs:
        edges.add((p.src.txn, p.dst.txn, EdgeKind(p.kind.value)))
    return MvcGraph(frozenset(vertices), frozenset(edges))


@dataclass(frozen=True)
class TopoOrder:
    order: tuple[TxnId, ...]


@dataclass(frozen=True)
class Cycle:
    vertices: tuple[TxnId, ...]


def acyclic_witness(g: MvcGraph) -> Union[TopoOrder, Cycle]:
    """Topological order (ties by ascending id) or a concrete cycle."""
    adj = g.adjacency()
    indeg = {v: 0 for v in g.vertices}
    for u, vs in adj.items():
        for v in vs:
            indeg[v] += 1
    heap = [v for v, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order: list[TxnId] = []
    while heap:
        u = heapq.heappop(heap)
        order.append(u)
        for v in sorted(adj[u]):
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(heap, v)
    if len(order) == len(g.vertices):
        return TopoOrder(tuple(order))

    remaining = {v for v in g.vertices if v not in set(order)}
    stack: list[TxnId] = []
    on_stack: set[TxnId] = set()
    seen: set[TxnId] = set()

    def dfs(u: TxnId) -> Optional[list[TxnId]]:
        stack.append(u)
        on_stack.add(u)
        seen.add(u)
        for v in sorted(adj[u] & remaining):
            if v in on_stack:
                return stack[stack.index(v) :]
            if v not in seen:
                found = dfs(v)
                if found is not None:
                    return found
        stack.pop()
        on_stack.discard(u)
        return None

    for s in sorted(remaining):
        if s in seen:
            continue
        cyc = dfs(s)
        if cyc is not None:
            k = cyc.index(min(cyc))
            return Cycle(tuple(cyc[k:] + cyc[:k]))
    raise AssertionError("vertices left over without a reachable cycle")


def export_dot(g: MvcGraph) -> str:
    """Graphviz text for the conflict graph; deterministic for fixed input."""
    lines = ["digraph mvcg {"]
    for v in sorted(g.vertices):
        lines.append(f"  T{v};")
    for u, v, k in sorted(g.edges, key=lambda e: (e[0], e[1], e[2].value)):
        lines.append(f'  T{u} -> T{v} [label="{k.value}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
