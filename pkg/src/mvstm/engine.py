"""Multi-version STM engine scheduled by serialization graph testing.

The engine keeps every committed version of each object, buffers writes
until commit, and maintains a transaction conflict graph incrementally.  An
operation whose induced edges would close a cycle is refused: reads fall
back to older versions and abort only when no version is safe; commits
abort the committing transaction.  All exported operations run inside one
engine-wide lock, so the recorded event sequence is a linearization.

Aborted transactions keep their read edges in the graph: a later commit of
a newer version must still be checked against reads of old versions, even
when the reader has aborted, or the recorded history can lose membership.
Garbage collection removes a vertex only once it provably can never lie on
a cycle again.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .model import (
    ABORT,
    Event,
    EventKind,
    History,
    OK,
    OpKind,
    T0,
    TxnId,
    Value,
    build_history,
)


class ProtocolViolation(RuntimeError):
    pass


class EngineMode(Enum):
    MULTI = "multi"
    SINGLE = "single"


@dataclass
class GcStats:
    vertices_pruned: int = 0
    versions_reclaimed: int = 0


@dataclass
class _Version:
    obj: str
    value: Optional[int]
    writer: TxnId
    commit_seq: int
    reclaimed: bool = False


@dataclass
class _Txn:
    id: TxnId
    status: str = "live"  # live | committed | aborted
    read_set: dict = field(default_factory=dict)  # obj -> _Version
    write_buffer: dict = field(default_factory=dict)  # obj -> value
    begin_seq: int = 0
    wrote: bool = False


class SgtEngine:
    """Shareable across threads; each thread drives one live transaction."""

    def __init__(
        self,
        mode: EngineMode | str = EngineMode.MULTI,
        gc_every: Optional[int] = None,
        namespace_values: bool = False,
        first_txn_id: int = 1,
    ):
        self.mode = EngineMode(mode)
        self.gc_every = gc_every
        self.namespace_values = namespace_values
        self._lock = threading.RLock()
        self._next_id = first_txn_id
        self._commit_seq = 0
        self._commit_count = 0
        self._events: list[Event] = []
        self._versions: dict[str, list[_Version]] = {}
        self._txns: dict[TxnId, _Txn] = {}
        self._readers: dict[str, list[tuple[TxnId, int]]] = {}  # obj -> (txn, vw seq)
        self._succ: dict[TxnId, set[TxnId]] = {}
        self._pred: dict[TxnId, set[TxnId]] = {}
        self._used_values: dict[str, set[int]] = {}
        self._write_counter = 0
        # metrics
        self.commits = 0
        self.aborts = 0
        self.read_fallback_aborts = 0
        self.versions_reclaimed = 0
        self.versions_peak = 0

    # -- internals ----------------------------------------------------------

    def _record(self, *events: Event) -> None:
        self._events.extend(events)

    def _txn(self, t: TxnId, expect: str = "live") -> _Txn:
        rec = self._txns.get(t)
        if rec is None:
            raise ProtocolViolation(f"unknown transaction T{t}")
        if rec.status != expect:
            raise ProtocolViolation(f"T{t} is {rec.status}, not {expect}")
        return rec

    def _ensure_object(self, x: str) -> list[_Version]:
        if x not in self._versions:
            self._versions[x] = [_Version(x, 0, T0, 0)]
            self._readers.setdefault(x, [])
            self._used_values.setdefault(x, set())
        return self._versions[x]

    def _add_edges(self, edges: set[tuple[TxnId, TxnId]]) -> None:
        for u, v in edges:
            self._succ.setdefault(u, set()).add(v)
            self._pred.setdefault(v, set()).add(u)

    def _would_cycle(self, t: TxnId, extra: set[tuple[TxnId, TxnId]]) -> bool:
        """Any new cycle must pass through t: check t ->* t in the overlay."""
        adj: dict[TxnId, set[TxnId]] = {}
        for u, v in extra:
            adj.setdefault(u, set()).add(v)
        stack = list(adj.get(t, set()) | self._succ.get(t, set()))
        seen: set[TxnId] = set()
        while stack:
            u = stack.pop()
            if u == t:
                return True
            if u in seen:
                continue
            seen.add(u)
            stack.extend(self._succ.get(u, ()))
            stack.extend(adj.get(u, ()))
        return False

    def _version_edges(self, t: TxnId, x: str, candidate: _Version) -> set:
        """Edges induced by reading the candidate version of x.

        Committed writers of older versions (and the candidate's writer)
        precede the read; writers of newer versions follow it.
        """
        edges: set[tuple[TxnId, TxnId]] = set()
        for v in self._versions[x]:
            if v.writer in (T0, t):
                continue
            if v.commit_seq <= candidate.commit_seq:
                edges.add((v.writer, t))
            else:
                edges.add((t, v.writer))
        return edges

    def _abort_locked(self, rec: _Txn) -> None:
        rec.status = "aborted"
        rec.write_buffer.clear()
        self.aborts += 1

    def _maybe_gc(self) -> None:
        if self.gc_every and self._commit_count and self._commit_count % self.gc_every == 0:
            self._collect_locked()

    # -- exported operations --------------------------------------------------

    def begin(self) -> TxnId:
        with self._lock:
            t = self._next_id
            self._next_id += 1
            rec = _Txn(id=t, begin_seq=self._commit_seq)
            self._txns[t] = rec
            self._succ.setdefault(t, set())
            self._pred.setdefault(t, set())
            rt_edges = {
                (u, t)
                for u, other in self._txns.items()
                if u != t and other.status in ("committed", "aborted")
            }
            self._add_edges(rt_edges)
            self._record(
                Event(EventKind.INV, OpKind.BEGIN, t),
                Event(EventKind.RSP, OpKind.BEGIN, t),
            )
            return t

    def read(self, t: TxnId, x: str) -> Value:
        with self._lock:
            rec = self._txn(t)
            if rec.wrote:
                raise ProtocolViolation(f"T{t} reads {x} after writing")
            if x in rec.read_set:
                raise ProtocolViolation(f"T{t} reads {x} twice")
            self._record(Event(EventKind.INV, OpKind.READ, t, x))
            versions = self._ensure_object(x)
            candidates = [v for v in versions if not v.reclaimed]
            candidates.sort(key=lambda v: v.commit_seq, reverse=True)
            if self.mode is EngineMode.SINGLE:
                candidates = candidates[:1]
            for cand in candidates:
                edges = self._version_edges(t, x, cand)
                if not self._would_cycle(t, edges):
                    self._add_edges(edges)
                    rec.read_set[x] = cand
                    self._readers[x].append((t, cand.commit_seq))
                    self._record(Event(EventKind.RSP, OpKind.READ, t, x, cand.value))
                    return cand.value
            self._record(Event(EventKind.RSP, OpKind.READ, t, x, ABORT))
            self.read_fallback_aborts += 1
            self._abort_locked(rec)
            return ABORT

    def write(self, t: TxnId, x: str, v: int) -> Value:
        with self._lock:
            rec = self._txn(t)
            self._ensure_object(x)
            if self.namespace_values:
                self._write_counter += 1
                v = v * 1_000_000 + self._write_counter
            if v in self._used_values[x]:
                raise ProtocolViolation(
                    f"value {v} already written to {x} in this run"
                )
            self._used_values[x].add(v)
            rec.write_buffer[x] = v
            rec.wrote = True
            self._record(
                Event(EventKind.INV, OpKind.WRITE, t, x, v),
                Event(EventKind.RSP, OpKind.WRITE, t, None, OK),
            )
            return OK

    def try_commit(self, t: TxnId) -> Value:
        with self._lock:
            rec = self._txn(t)
            self._record(Event(EventKind.INV, OpKind.TRY_COMMIT, t))
            if rec.write_buffer:
                edges: set[tuple[TxnId, TxnId]] = set()
                for x in rec.write_buffer:
                    for v in self._versions[x]:
                        if v.writer not in (T0, t):
                            edges.add((v.writer, t))
                    for reader, _vw in self._readers.get(x, ()):
                        if reader != t and reader in self._txns:
                            edges.add((reader, t))
                if self._would_cycle(t, edges):
                    self._record(
                        Event(EventKind.RSP, OpKind.TRY_COMMIT, t, None, ABORT)
                    )
                    self._abort_locked(rec)
                    return ABORT
                self._add_edges(edges)
                self._commit_seq += 1
                for x, val in rec.write_buffer.items():
                    self._versions[x].append(_Version(x, val, t, self._commit_seq))
                live = sum(
                    1 for vs in self._versions.values() for v in vs if not v.reclaimed
                )
                self.versions_peak = max(self.versions_peak, live)
            rec.status = "committed"
            self.commits += 1
            self._commit_count += 1
            self._record(Event(EventKind.RSP, OpKind.TRY_COMMIT, t, None, OK))
            self._maybe_gc()
            return OK

    def try_abort(self, t: TxnId) -> Value:
        with self._lock:
            rec = self._txn(t)
            self._record(
                Event(EventKind.INV, OpKind.TRY_ABORT, t),
                Event(EventKind.RSP, OpKind.TRY_ABORT, t, None, ABORT),
            )
            self._abort_locked(rec)
            return ABORT

    def collect_garbage(self) -> GcStats:
        with self._lock:
            return self._collect_locked()

    def _collect_locked(self) -> GcStats:
        stats = GcStats()
        pinned = {
            id(v)
            for rec in self._txns.values()
            if rec.status == "live"
            for v in rec.read_set.values()
        }
        # (b) reclaim version values superseded for every live transaction
        for x, versions in self._versions.items():
            ordered = sorted(versions, key=lambda v: v.commit_seq)
            for i, v in enumerate(ordered[:-1]):
                if v.reclaimed:
                    continue
                newer = next((n for n in ordered[i + 1 :] if not n.reclaimed), None)
                if newer is None:
                    continue
                live_ok = all(
                    rec.begin_seq >= newer.commit_seq
                    for rec in self._txns.values()
                    if rec.status == "live"
                )
                if live_ok and id(v) not in pinned:
                    v.reclaimed = True
                    v.value = None
                    stats.versions_reclaimed += 1
        # (a) prune vertices that can never again lie on a cycle
        pinned_writers = {
            v.writer
            for rec in self._txns.values()
            if rec.status == "live"
            for v in rec.read_set.values()
        }
        changed = True
        while changed:
            changed = False
            for t, rec in list(self._txns.items()):
                if rec.status == "live" or self._pred.get(t):
                    continue
                if t in pinned_writers:
                    continue
                if rec.status == "committed" and not self._prunable_committed(t):
                    continue
                self._drop_vertex(t)
                stats.vertices_pruned += 1
                changed = True
        self.versions_reclaimed += stats.versions_reclaimed
        return stats

    def _prunable_committed(self, t: TxnId) -> bool:
        """Every version it wrote is reclaimed and is the oldest one offered.

        A retained older version could still be chosen by a future read,
        which would order that read before this writer: an in-edge.
        """
        for versions in self._versions.values():
            mine = [v for v in versions if v.writer == t]
            if not mine:
                continue
            if any(not v.reclaimed for v in mine):
                return False
            oldest_mine = min(v.commit_seq for v in mine)
            for v in versions:
                if v.commit_seq < oldest_mine and not v.reclaimed:
                    return False
        return True

    def _drop_vertex(self, t: TxnId) -> None:
        for u in self._succ.pop(t, set()):
            self._pred.get(u, set()).discard(t)
        for u in self._pred.pop(t, set()):
            self._succ.get(u, set()).discard(t)
        for versions in self._versions.values():
            versions[:] = [v for v in versions if v.writer != t]
        for readers in self._readers.values():
            readers[:] = [(r, s) for (r, s) in readers if r != t]
        del self._txns[t]

    def recorded_history(self) -> History:
        with self._lock:
            return build_history(list(self._events))

    def graph_is_acyclic(self) -> bool:
        """Diagnostic: the maintained graph must stay acyclic at all times."""
        with self._lock:
            color: dict[TxnId, int] = {}

            def dfs(u: TxnId) -> bool:
                color[u] = 1
                for v in self._succ.get(u, ()):
                    if color.get(v) == 1:
                        return False
                    if color.get(v) is None and not dfs(v):
                        return False
                color[u] = 2
                return True

            return all(color.get(u) == 2 or dfs(u) for u in list(self._succ))
