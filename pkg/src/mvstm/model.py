"""Event/operation/history model for software-transactional-memory executions.

A history is a totally ordered sequence of invocation/response events of
transactional operations (optional begin, read, write, tryC, tryA).  The
initializing transaction T0 never appears in event lists: every object is
implicitly initialized to 0 by a commit that precedes all other events.
"""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Optional, Sequence, Union

ABORT = "A"
OK = "ok"
T0 = 0

Value = Union[int, str]
TxnId = int
ObjectId = str


class EventKind(Enum):
    INV = "inv"
    RSP = "rsp"


class OpKind(Enum):
    BEGIN = "begin"
    READ = "read"
    WRITE = "write"
    TRY_COMMIT = "tryC"
    TRY_ABORT = "tryA"


class TxnStatus(Enum):
    COMMITTED = "committed"
    ABORTED = "aborted"
    LIVE = "live"


@dataclass(frozen=True)
class Event:
    kind: EventKind
    op: OpKind
    txn: TxnId
    obj: Optional[ObjectId] = None
    value: Optional[Value] = None

    def __repr__(self) -> str:
        parts = [str(self.txn)]
        if self.obj is not None:
            parts.append(self.obj)
        if self.value is not None:
            parts.append(str(self.value))
        return f"{self.kind.value}.{self.op.value}({','.join(parts)})"


@dataclass(frozen=True)
class Operation:
    """One transactional operation, pairing an invocation with its response.

    ``value`` is the payload: the response value for reads, the written value
    for writes, and the outcome (ok/A) for tryC/tryA.  ``result`` is the
    response outcome for writes, which carry both a payload and an outcome.
    ``inv``/``rsp`` are event indices in the owning history (rsp is None for
    a pending operation).
    """

    txn: TxnId
    op: OpKind
    obj: Optional[ObjectId]
    value: Optional[Value]
    inv: int
    rsp: Optional[int]
    result: Optional[Value] = None

    @property
    def complete(self) -> bool:
        return self.rsp is not None

    @property
    def is_commit(self) -> bool:
        return self.op is OpKind.TRY_COMMIT and self.value == OK

    @property
    def is_successful_read(self) -> bool:
        return (
            self.op is OpKind.READ
            and self.complete
            and self.value != ABORT
        )

    @property
    def returned_abort(self) -> bool:
        if not self.complete:
            return False
        if self.op is OpKind.WRITE:
            return self.result == ABORT
        return self.value == ABORT

    def __repr__(self) -> str:
        t = self.txn
        if self.op is OpKind.BEGIN:
            return f"b{t}"
        if self.op is OpKind.READ:
            v = "?" if not self.complete else self.value
            return f"r{t}({self.obj},{v})"
        if self.op is OpKind.WRITE:
            return f"w{t}({self.obj},{self.value})"
        if self.op is OpKind.TRY_COMMIT:
            if not self.complete:
                return f"tryC{t}(?)"
            return f"c{t}" if self.value == OK else f"a{t}"
        return f"a{t}" if self.complete else f"tryA{t}(?)"


# T0's commit: logically precedes every event of every history.
C0 = Operation(txn=T0, op=OpKind.TRY_COMMIT, obj=None, value=OK, inv=-2, rsp=-1)


@dataclass(frozen=True)
class Violation:
    reason: str
    index: int

    def __repr__(self) -> str:
        return f"event {self.index}: {self.reason}"


class WellFormednessError(ValueError):
    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(map(repr, self.violations)))


class NotSequentialError(ValueError):
    pass


class NotAbortedError(ValueError):
    pass


class InvalidHistoryError(ValueError):
    pass


# --------------------------------------------------------------------------
# Event construction shorthands (atomic operations expand to inv+rsp pairs).

def begin_op(t: TxnId) -> list[Event]:
    return [Event(EventKind.INV, OpKind.BEGIN, t), Event(EventKind.RSP, OpKind.BEGIN, t)]


def read_op(t: TxnId, x: ObjectId, v: Value) -> list[Event]:
    return [
        Event(EventKind.INV, OpKind.READ, t, x),
        Event(EventKind.RSP, OpKind.READ, t, x, v),
    ]


def write_op(t: TxnId, x: ObjectId, v: int, result: Value = OK) -> list[Event]:
    return [
        Event(EventKind.INV, OpKind.WRITE, t, x, v),
        Event(EventKind.RSP, OpKind.WRITE, t, None, result),
    ]


def commit_op(t: TxnId) -> list[Event]:
    return try_commit_op(t, OK)


def try_commit_op(t: TxnId, outcome: Value) -> list[Event]:
    return [
        Event(EventKind.INV, OpKind.TRY_COMMIT, t),
        Event(EventKind.RSP, OpKind.TRY_COMMIT, t, None, outcome),
    ]


def abort_op(t: TxnId) -> list[Event]:
    return [
        Event(EventKind.INV, OpKind.TRY_ABORT, t),
        Event(EventKind.RSP, OpKind.TRY_ABORT, t, None, ABORT),
    ]


def flatten(op_lists: Iterable[Iterable[Event]]) -> list[Event]:
    return [e for ops in op_lists for e in ops]


# --------------------------------------------------------------------------


class History:
    """Immutable, indexed view over a well-formed event sequence.

    Construct through :func:`build_history`; direct mutation after
    construction is not supported and the instance is safe to share across
    threads.
    """

    def __init__(self, events: Sequence[Event], ops: Sequence[Operation]):
        self.events: tuple[Event, ...] = tuple(events)
        self.ops: tuple[Operation, ...] = tuple(ops)
        self._index()

    def _index(self) -> None:
        txn_ops: dict[TxnId, list[Operation]] = {}
        txn_events: dict[TxnId, list[int]] = {}
        for i, e in enumerate(self.events):
            txn_events.setdefault(e.txn, []).append(i)
        for op in self.ops:
            txn_ops.setdefault(op.txn, []).append(op)

        status: dict[TxnId, TxnStatus] = {}
        commit_ops: dict[TxnId, Operation] = {}
        for t, ops in txn_ops.items():
            st = TxnStatus.LIVE
            for op in ops:
                if op.is_commit:
                    st = TxnStatus.COMMITTED
                    commit_ops[t] = op
                elif op.returned_abort:
                    st = TxnStatus.ABORTED
            status[t] = st

        self._txn_ops = {t: tuple(v) for t, v in txn_ops.items()}
        self._txn_events = {t: tuple(v) for t, v in txn_events.items()}
        self._status = status
        self._commit_ops = commit_ops
        self.txns: tuple[TxnId, ...] = tuple(sorted(txn_ops))
        self.objects: frozenset[ObjectId] = frozenset(
            op.obj for op in self.ops if op.obj is not None
        )
        rsets: dict[TxnId, set[ObjectId]] = {t: set() for t in self.txns}
        wsets: dict[TxnId, set[ObjectId]] = {t: set() for t in self.txns}
        writes_to: dict[ObjectId, list[Operation]] = {}
        for op in self.ops:
            if op.op is OpKind.READ:
                rsets[op.txn].add(op.obj)
            elif op.op is OpKind.WRITE:
                wsets[op.txn].add(op.obj)
                writes_to.setdefault(op.obj, []).append(op)
        self._rsets = {t: frozenset(v) for t, v in rsets.items()}
        self._wsets = {t: frozenset(v) for t, v in wsets.items()}
        self._writes_to = {x: tuple(v) for x, v in writes_to.items()}
        self.sequential: bool = self._compute_sequential()

    def _compute_sequential(self) -> bool:
        n = len(self.events)
        for op in self.ops:
            if op.rsp is None or op.rsp != op.inv + 1:
                return False
        return True

    # -- structure accessors ------------------------------------------------

    def ops_of(self, t: TxnId) -> tuple[Operation, ...]:
        return self._txn_ops.get(t, ())

    def event_indices_of(self, t: TxnId) -> tuple[int, ...]:
        return self._txn_events.get(t, ())

    def status(self, t: TxnId) -> TxnStatus:
        return self._status[t]

    def read_set(self, t: TxnId) -> frozenset[ObjectId]:
        return self._rsets.get(t, frozenset())

    def write_set(self, t: TxnId) -> frozenset[ObjectId]:
        return self._wsets.get(t, frozenset())

    def writes_to(self, x: ObjectId) -> tuple[Operation, ...]:
        return self._writes_to.get(x, ())

    def commit_of(self, t: TxnId) -> Optional[Operation]:
        if t == T0:
            return C0
        return self._commit_ops.get(t)

    @property
    def committed(self) -> tuple[TxnId, ...]:
        return tuple(t for t in self.txns if self._status[t] is TxnStatus.COMMITTED)

    @property
    def aborted(self) -> tuple[TxnId, ...]:
        return tuple(t for t in self.txns if self._status[t] is TxnStatus.ABORTED)

    @property
    def live(self) -> tuple[TxnId, ...]:
        return tuple(t for t in self.txns if self._status[t] is TxnStatus.LIVE)

    def t_complete(self, t: TxnId) -> bool:
        return self._status[t] in (TxnStatus.COMMITTED, TxnStatus.ABORTED)

    def is_t_complete(self) -> bool:
        return all(self.t_complete(t) for t in self.txns)

    def complete(self, t: TxnId) -> bool:
        ops = self.ops_of(t)
        return bool(ops) and ops[-1].complete

    def successful_reads(self) -> Iterator[Operation]:
        for op in self.ops:
            if op.is_successful_read:
                yield op

    def abort_response_index(self, t: TxnId) -> Optional[int]:
        for op in self.ops_of(t):
            if op.returned_abort:
                return op.rsp
        return None

    def first_event(self, t: TxnId) -> int:
        return self._txn_events[t][0]

    def last_event(self, t: TxnId) -> int:
        return self._txn_events[t][-1]

    def __len__(self) -> int:
        return len(self.events)

    def __repr__(self) -> str:
        ops = " ".join(repr(op) for op in self.ops)
        return f"<History {ops}>" if ops else "<History (empty)>"


# --------------------------------------------------------------------------


def validate_events(events: Sequence[Event]) -> tuple[list[Operation], list[Violation]]:
    """Check well-formedness and pair events into operations.

    Returns the operation list (in invocation order) plus every violation
    found; callers wanting an exception use :func:`build_history`.
    """
    violations: list[Violation] = []
    ops: list[Operation] = []
    # per-txn: pending inv (op, obj, value, index), phase, read objects, seen-any
    pending: dict[TxnId, tuple] = {}
    phase: dict[TxnId, str] = {}
    read_objs: dict[TxnId, set[ObjectId]] = {}
    seen: dict[TxnId, bool] = {}
    written: dict[ObjectId, dict[Value, int]] = {}

    def bad(reason: str, i: int) -> None:
        violations.append(Violation(reason, i))

    for i, e in enumerate(events):
        t = e.txn
        if not isinstance(t, int) or t < 1:
            bad(f"transaction id must be a positive integer, got {t!r}", i)
            continue
        ph = phase.get(t, "start")
        if ph == "done":
            bad(f"T{t} issues an event after its final response", i)
            continue
        if e.kind is EventKind.INV:
            if t in pending:
                bad(f"T{t} invokes {e.op.value} while another operation is pending", i)
                continue
            if e.op is OpKind.BEGIN:
                if seen.get(t):
                    bad(f"T{t} begin is not its first event", i)
                    continue
            elif e.op is OpKind.READ:
                if e.obj is None:
                    bad("read invocation without an object", i)
                    continue
                if ph == "writes":
                    bad(f"T{t} reads {e.obj} after writing (read prefix violated)", i)
                    continue
                if e.obj in read_objs.get(t, set()):
                    bad(f"T{t} reads object {e.obj} twice", i)
                    continue
                read_objs.setdefault(t, set()).add(e.obj)
            elif e.op is OpKind.WRITE:
                if e.obj is None or not isinstance(e.value, int):
                    bad("write invocation needs an object and an integer value", i)
                    continue
                prev = written.setdefault(e.obj, {})
                if e.value in prev:
                    bad(
                        f"value {e.value} written to {e.obj} twice "
                        f"(events {prev[e.value]} and {i})",
                        i,
                    )
                    continue
                prev[e.value] = i
                phase[t] = "writes"
            pending[t] = (e.op, e.obj, e.value, i)
            seen[t] = True
            if e.op not in (OpKind.WRITE,):
                phase.setdefault(t, ph if ph != "start" else "reads")
        else:  # response
            if t not in pending or pending[t][0] is not e.op:
                bad(f"response {e.op.value} for T{t} has no matching invocation", i)
                continue
            p_op, p_obj, p_val, p_idx = pending.pop(t)
            if e.op is OpKind.READ:
                if e.obj != p_obj:
                    bad(f"read response object {e.obj} does not match invocation", i)
                    continue
                if not (isinstance(e.value, int) or e.value == ABORT):
                    bad(f"read response value must be an int or A, got {e.value!r}", i)
                    continue
                ops.append(Operation(t, e.op, p_obj, e.value, p_idx, i))
            elif e.op is OpKind.WRITE:
                if e.value not in (OK, ABORT):
                    bad(f"write response must be ok or A, got {e.value!r}", i)
                    continue
                ops.append(Operation(t, e.op, p_obj, p_val, p_idx, i, result=e.value))
            elif e.op is OpKind.TRY_COMMIT:
                if e.value not in (OK, ABORT):
                    bad(f"tryC response must be ok or A, got {e.value!r}", i)
                    continue
                ops.append(Operation(t, e.op, None, e.value, p_idx, i))
            elif e.op is OpKind.TRY_ABORT:
                if e.value != ABORT:
                    bad(f"tryA response must be A, got {e.value!r}", i)
                    continue
                ops.append(Operation(t, e.op, None, ABORT, p_idx, i))
            else:  # begin
                ops.append(Operation(t, e.op, None, None, p_idx, i))
            last = ops[-1] if ops else None
            if last is not None and last.inv == p_idx:
                if last.returned_abort or last.is_commit:
                    phase[t] = "done"

    # Unanswered invocations become pending (incomplete) operations.
    for t, (p_op, p_obj, p_val, p_idx) in sorted(pending.items(), key=lambda kv: kv[1][3]):
        if p_op is OpKind.WRITE:
            ops.append(Operation(t, p_op, p_obj, p_val, p_idx, None))
        elif p_op is OpKind.READ:
            ops.append(Operation(t, p_op, p_obj, None, p_idx, None))
        else:
            ops.append(Operation(t, p_op, None, None, p_idx, None))
    ops.sort(key=lambda op: op.inv)
    return ops, violations


def build_history(events: Sequence[Event]) -> History:
    """Validate an event sequence and return the indexed History.

    Raises WellFormednessError listing every violated invariant.
    """
    ops, violations = validate_events(events)
    if violations:
        raise WellFormednessError(violations)
    return History(events, ops)


def ops_history(op_lists: Iterable[Iterable[Event]]) -> History:
    return build_history(flatten(op_lists))


def is_sequential(h: History) -> bool:
    """True iff every invocation is immediately followed by its response."""
    return h.sequential


def real_time_order(h: History) -> frozenset[tuple[TxnId, TxnId]]:
    """Pairs (a, b) where a is t-complete and ends before b's first event.

    T0 precedes every other transaction.
    """
    pairs = {(T0, t) for t in h.txns}
    for a in h.txns:
        if not h.t_complete(a):
            continue
        last = h.last_event(a)
        for b in h.txns:
            if b != a and last < h.first_event(b):
                pairs.add((a, b))
    return frozenset(pairs)


def _rsp_for_pending(op: Operation, forced: Value) -> Event:
    if op.op is OpKind.READ:
        return Event(EventKind.RSP, OpKind.READ, op.txn, op.obj, ABORT)
    if op.op is OpKind.WRITE:
        return Event(EventKind.RSP, OpKind.WRITE, op.txn, None, ABORT)
    if op.op is OpKind.TRY_COMMIT:
        return Event(EventKind.RSP, OpKind.TRY_COMMIT, op.txn, None, forced)
    if op.op is OpKind.TRY_ABORT:
        return Event(EventKind.RSP, OpKind.TRY_ABORT, op.txn, None, ABORT)
    return Event(EventKind.RSP, OpKind.BEGIN, op.txn)


def _complete_events(
    h: History, trycommit_outcomes: dict[TxnId, Value]
) -> Optional[list[Event]]:
    """Shared completion skeleton; returns None when already t-complete.

    Pending operations get their response inserted immediately after the
    invocation (reads/writes/tryA are forced to A, pending tryC takes the
    outcome from ``trycommit_outcomes``).  Transactions that are complete but
    not t-complete get a tryA pair appended after their last event.
    """
    insertions: dict[int, list[Event]] = {}
    changed = False
    for t in h.txns:
        if h.t_complete(t):
            continue
        changed = True
        ops = h.ops_of(t)
        last_op = ops[-1]
        if not last_op.complete:
            outcome = trycommit_outcomes.get(t, ABORT)
            insertions.setdefault(last_op.inv, []).append(
                _rsp_for_pending(last_op, outcome)
            )
            if last_op.op is OpKind.BEGIN:
                # a begin response alone leaves the txn live: abort it too
                insertions[last_op.inv].extend(abort_op(t))
        else:
            insertions.setdefault(h.last_event(t), []).extend(abort_op(t))
    if not changed:
        return None
    out: list[Event] = []
    for i, e in enumerate(h.events):
        out.append(e)
        if i in insertions:
            out.extend(insertions[i])
    return out


def mvc_completion(h: History) -> History:
    """Deterministic completion treating every unanswered tryC as aborted."""
    events = _complete_events(h, {})
    if events is None:
        return h
    return build_history(events)


def opq_completions(h: History) -> list[History]:
    """All completions: each pending tryC branches to ok or A."""
    pending_trycs = sorted(
        t
        for t in h.txns
        if not h.t_complete(t)
        and not h.ops_of(t)[-1].complete
        and h.ops_of(t)[-1].op is OpKind.TRY_COMMIT
    )
    results = []
    for outcomes in itertools.product((OK, ABORT), repeat=len(pending_trycs)):
        events = _complete_events(h, dict(zip(pending_trycs, outcomes)))
        results.append(h if events is None else build_history(events))
    return results


def subhistory_committed(h: History) -> History:
    """Events of committed transactions only, original order preserved."""
    keep = set(h.committed)
    return build_history([e for e in h.events if e.txn in keep])


def subhistory_until_abort(h: History, a: TxnId) -> History:
    """Events of T_a plus every transaction whose commit precedes T_a's abort."""
    if a not in h.txns or h.status(a) is not TxnStatus.ABORTED:
        raise NotAbortedError(f"T{a} is not aborted in this history")
    abort_idx = h.abort_response_index(a)
    keep = {a}
    for t in h.committed:
        if h.commit_of(t).rsp < abort_idx:
            keep.add(t)
    return build_history([e for e in h.events if e.txn in keep])


def equivalent(h1: History, h2: History) -> bool:
    """True iff the two histories contain the same event multiset."""
    return Counter(h1.events) == Counter(h2.events)
