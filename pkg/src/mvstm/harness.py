"""Workload generation, scripted adversary replays, and mode comparison.

Scripts drive the engine (seeded deterministic interleaving or real
threads) or are replayed through the checkers alone.  A choice point marks
a read that could return several committed versions; replaying evaluates
every branch and reports which transactions a permissive scheduler is
forced to abort, demonstrating that no version choice is always safe.
"""
from __future__ import annotations

import random
import threading
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from .model import (
    ABORT,
    Event,
    History,
    OK,
    OpKind,
    TxnId,
    TxnStatus,
    abort_op,
    begin_op,
    build_history,
    commit_op,
    flatten,
    read_op,
    try_commit_op,
    write_op,
)
from .engine import EngineMode, SgtEngine
from .membership import Verdict, check_mvc_opacity


class UnknownVersionError(ValueError):
    pass


@dataclass(frozen=True)
class WorkloadConfig:
    txns: int
    objects: int
    ops_min: int = 1
    ops_max: int = 4
    read_fraction: float = 0.5
    seed: int = 0
    threads: int = 1

    def __post_init__(self) -> None:
        if self.txns < 0 or self.objects < 1 or self.threads < 1:
            raise ValueError("counts must be positive")
        if not (0 <= self.ops_min <= self.ops_max):
            raise ValueError("bad ops range")
        if not (0.0 <= self.read_fraction <= 1.0):
            raise ValueError("read_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class Begin:
    txn: TxnId


@dataclass(frozen=True)
class Read:
    txn: TxnId
    obj: str
    value: Optional[int] = None  # required for checker-only replays


@dataclass(frozen=True)
class Write:
    txn: TxnId
    obj: str
    value: int


@dataclass(frozen=True)
class Commit:
    txn: TxnId


@dataclass(frozen=True)
class Abort:
    txn: TxnId


@dataclass(frozen=True)
class Branch:
    value: int
    continuation: tuple = ()


@dataclass(frozen=True)
class ChoiceRead:
    """A read annotated with the admissible version values, one per branch."""

    txn: TxnId
    obj: str
    branches: tuple[Branch, ...] = ()


ScriptOp = Union[Begin, Read, Write, Commit, Abort, ChoiceRead]


@dataclass(frozen=True)
class AdversaryScript:
    ops: tuple = ()

    def __post_init__(self) -> None:
        for op in _walk_ops(self.ops):
            if isinstance(op, ChoiceRead):
                values = {b.value for b in op.branches}
                if len(values) < 2:
                    raise ValueError(
                        "a choice point must list at least two distinct values"
                    )


def _walk_ops(ops: Iterable) -> Iterable:
    for op in ops:
        yield op
        if isinstance(op, ChoiceRead):
            for b in op.branches:
                yield from _walk_ops(b.continuation)


@dataclass
class RunMetrics:
    commits: int = 0
    aborts: int = 0
    read_fallback_aborts: int = 0
    versions_peak: int = 0
    versions_reclaimed: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def generate_workload(cfg: WorkloadConfig) -> AdversaryScript:
    """Deterministic script for a seed: read prefix, write suffix, commit."""
    rng = random.Random(cfg.seed)
    objects = [f"o{i}" for i in range(cfg.objects)]
    counter = 0
    per_txn: list[list[ScriptOp]] = []
    for t in range(1, cfg.txns + 1):
        k = rng.randint(cfg.ops_min, cfg.ops_max)
        n_reads = sum(1 for _ in range(k) if rng.random() < cfg.read_fraction)
        n_writes = k - n_reads
        reads = rng.sample(objects, min(n_reads, len(objects)))
        writes = rng.sample(objects, min(n_writes, len(objects)))
        ops: list[ScriptOp] = [Begin(t)]
        ops.extend(Read(t, x) for x in reads)
        for x in writes:
            counter += 1
            ops.append(Write(t, x, counter))
        ops.append(Commit(t))
        per_txn.append(ops)
    merged: list[ScriptOp] = []
    queues = [list(ops) for ops in per_txn]
    while any(queues):
        q = rng.choice([q for q in queues if q])
        merged.append(q.pop(0))
    return AdversaryScript(tuple(merged))


def _make_engine(mode: EngineMode | str, gc_every: Optional[int]) -> SgtEngine:
    return SgtEngine(mode=mode, gc_every=gc_every)


def _apply_engine_op(engine: SgtEngine, ids: dict[TxnId, TxnId], op: ScriptOp):
    """Run one script op; returns the continuation to splice, if any."""
    def eid(t: TxnId) -> TxnId:
        if t not in ids:
            ids[t] = engine.begin()
        return ids[t]

    if isinstance(op, Begin):
        eid(op.txn)
    elif isinstance(op, Read):
        if engine._txns[eid(op.txn)].status == "live":
            engine.read(eid(op.txn), op.obj)
    elif isinstance(op, Write):
        if engine._txns[eid(op.txn)].status == "live":
            engine.write(eid(op.txn), op.obj, op.value)
    elif isinstance(op, Commit):
        if engine._txns[eid(op.txn)].status == "live":
            engine.try_commit(eid(op.txn))
    elif isinstance(op, Abort):
        if engine._txns[eid(op.txn)].status == "live":
            engine.try_abort(eid(op.txn))
    elif isinstance(op, ChoiceRead):
        t = eid(op.txn)
        if engine._txns[t].status != "live":
            return None
        got = engine.read(t, op.obj)
        for b in op.branches:
            if b.value == got:
                return list(b.continuation)
        return []
    return None


def run_workload(
    script: AdversaryScript,
    mode: EngineMode | str = EngineMode.MULTI,
    gc_every: Optional[int] = None,
    threads: int = 1,
    interleave_seed: Optional[int] = None,
    real_threads: bool = False,
) -> tuple[History, RunMetrics]:
    """Drive the engine with the script and return the recorded history.

    With ``threads > 1`` the script's transactions are partitioned across
    workers; a seeded scheduler interleaves their steps reproducibly unless
    ``real_threads`` is set, in which case actual threads race on the
    engine lock.
    """
    engine = _make_engine(mode, gc_every)
    ids: dict[TxnId, TxnId] = {}
    if threads <= 1:
        queue = list(script.ops)
        while queue:
            cont = _apply_engine_op(engine, ids, queue.pop(0))
            if cont:
                queue = cont + queue
    else:
        by_txn: dict[TxnId, list[ScriptOp]] = {}
        order: list[TxnId] = []
        for op in script.ops:
            if isinstance(op, ChoiceRead):
                raise ValueError("choice points cannot be partitioned across threads")
            if op.txn not in by_txn:
                by_txn[op.txn] = []
                order.append(op.txn)
            by_txn[op.txn].append(op)
        lanes: list[list[ScriptOp]] = [[] for _ in range(threads)]
        for i, t in enumerate(order):
            lanes[i % threads].extend(by_txn[t])
        if real_threads:
            errors: list[BaseException] = []

            def worker(lane: list[ScriptOp]) -> None:
                try:
                    for op in lane:
                        _apply_engine_op(engine, ids, op)
                except BaseException as exc:  # propagate harness bugs
                    errors.append(exc)

            ts = [threading.Thread(target=worker, args=(lane,)) for lane in lanes]
            for th in ts:
                th.start()
            for th in ts:
                th.join()
            if errors:
                raise errors[0]
        else:
            rng = random.Random(interleave_seed if interleave_seed is not None else 0)
            pending = [list(lane) for lane in lanes if lane]
            while pending:
                lane = rng.choice(pending)
                _apply_engine_op(engine, ids, lane.pop(0))
                pending = [l for l in pending if l]
    metrics = RunMetrics(
        commits=engine.commits,
        aborts=engine.aborts,
        read_fallback_aborts=engine.read_fallback_aborts,
        versions_peak=engine.versions_peak,
        versions_reclaimed=engine.versions_reclaimed,
    )
    return engine.recorded_history(), metrics


# -- checker-only replays ----------------------------------------------------


@dataclass(frozen=True)
class BranchReport:
    path: tuple[tuple[TxnId, str, int], ...]
    verdict: Verdict
    must_abort: tuple[TxnId, ...]
    history: History


def _script_events(op: ScriptOp) -> list[Event]:
    if isinstance(op, Begin):
        return begin_op(op.txn)
    if isinstance(op, Read):
        if op.value is None:
            raise ValueError(f"checker replay needs a value for {op!r}")
        return read_op(op.txn, op.obj, op.value)
    if isinstance(op, Write):
        return write_op(op.txn, op.obj, op.value)
    if isinstance(op, Commit):
        return commit_op(op.txn)
    if isinstance(op, Abort):
        return abort_op(op.txn)
    raise TypeError(f"unexpected op {op!r}")


def _committed_values_at(events: list[Event], obj: str) -> set[int]:
    h = build_history(events)
    vals = {0}
    for w in h.writes_to(obj):
        if h.status(w.txn) is TxnStatus.COMMITTED:
            vals.add(w.value)
    return vals


def _finish_order(h: History) -> list[TxnId]:
    live = [(h.last_event(t), t) for t in h.live]
    return [t for _pos, t in sorted(live)]


def replay_adversary(script: AdversaryScript) -> list[BranchReport]:
    """Classify every branch of every choice point through the checker.

    Each leaf history is extended with a commit for every still-live
    transaction (in finish order): the classification says whether the full
    optimistic execution stays mvc-opaque.  When it does not, a permissive
    greedy scheduler is simulated over the same commit order and the
    transactions it is forced to abort are reported.
    """
    reports: list[BranchReport] = []

    def walk(prefix: list[Event], ops: Sequence[ScriptOp], path: tuple) -> None:
        events = list(prefix)
        for i, op in enumerate(ops):
            if isinstance(op, ChoiceRead):
                available = _committed_values_at(events, op.obj)
                for b in op.branches:
                    if b.value not in available:
                        raise UnknownVersionError(
                            f"no committed version of {op.obj} holds {b.value}"
                        )
                    walk(
                        events + read_op(op.txn, op.obj, b.value),
                        tuple(b.continuation) + tuple(ops[i + 1 :]),
                        path + ((op.txn, op.obj, b.value),),
                    )
                return
            events.extend(_script_events(op))
        _evaluate_leaf(events, path)

    def _evaluate_leaf(events: list[Event], path: tuple) -> None:
        h = build_history(events)
        order = _finish_order(h)
        hypothetical = build_history(
            events + flatten(commit_op(t) for t in order)
        )
        verdict = check_mvc_opacity(hypothetical)
        must_abort: list[TxnId] = []
        if not verdict.member:
            evts = list(events)
            for t in order:
                trial = evts + commit_op(t)
                if check_mvc_opacity(build_history(trial)).member:
                    evts = trial
                else:
                    evts = evts + try_commit_op(t, ABORT)
                    must_abort.append(t)
        reports.append(
            BranchReport(path, verdict, tuple(must_abort), hypothetical)
        )

    walk([], script.ops, ())
    return reports


def compare_modes(
    cfg: WorkloadConfig, gc_every: Optional[int] = None
) -> tuple[RunMetrics, RunMetrics]:
    """Run the identical script in multi- and single-version modes."""
    script = generate_workload(cfg)
    kwargs = dict(
        gc_every=gc_every,
        threads=cfg.threads,
        interleave_seed=cfg.seed,
    )
    _h1, multi = run_workload(script, EngineMode.MULTI, **kwargs)
    _h2, single = run_workload(script, EngineMode.SINGLE, **kwargs)
    return multi, single


# -- the fixed online-scheduling dilemma -------------------------------------

V1, V2, V3, VK, VJ = 101, 102, 103, 104, 105


def version_choice_dilemma_script(k: TxnId = 4, j: TxnId = 5) -> AdversaryScript:
    """Two updaters publish versions of x; a later read must pick one.

    Whatever the reader returns, one continuation forces a permissive
    scheduler to abort a transaction while the other choice would have
    avoided it.  The reader's transaction begins between the two commits so
    that neither updater precedes it in real time.
    """
    tail_a = (Write(3, "b", V3), Write(k, "b", VK), Write(j, "d", VJ))
    tail_b = (
        Write(3, "b", V3),
        Write(k, "d", VK),
        Write(j, "z", VJ),
        Commit(j),
        Commit(k),
    )
    prefix = (
        Write(1, "x", 1),
        Write(1, "y", V1),
        Write(2, "x", 2),
        Read(k, "z", 0),
        Commit(1),
        Write(2, "z", V2),
        Begin(3),
        Read(j, "b", 0),
        Commit(2),
        ChoiceRead(
            3,
            "x",
            branches=(
                Branch(2, tail_a),
                Branch(1, tail_a + (Commit(j), Commit(k))),
                Branch(1, tail_b),
                Branch(2, tail_b),
            ),
        ),
    )
    return AdversaryScript(prefix)
