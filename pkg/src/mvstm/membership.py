"""Class-membership verdicts for STM histories.

The graph checker decides mvc-opacity in polynomial time; the brute-force
checkers enumerate t-sequential transaction arrangements and serve as
independent oracles (mvc-opacity) or as the only decision procedure
(opacity, co-opacity).  Permissiveness and version-choice audits replay
modified histories through the chosen checker.
"""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .model import (
    ABORT,
    Event,
    EventKind,
    History,
    OK,
    OpKind,
    Operation,
    T0,
    TxnId,
    TxnStatus,
    Value,
    build_history,
    is_sequential,
    mvc_completion,
    opq_completions,
    real_time_order,
    subhistory_committed,
    subhistory_until_abort,
)
from .conflicts import (
    Cycle,
    MvcGraph,
    OpRef,
    TopoOrder,
    acyclic_witness,
    build_mvcg,
    conflict_order,
    mvc_order,
    pairs_ordered_in,
    read_ref,
    ref_of,
    satisfies,
)
from .semantics import first_invalid_read, is_legal, is_valid


class TooLargeError(ValueError):
    def __init__(self, count: int, bound: int):
        super().__init__(f"{count} transactions exceed the brute-force bound {bound}")
        self.count = count
        self.bound = bound


class NotPermissiveError(ValueError):
    pass


class CancelledError(RuntimeError):
    pass


class CancelToken:
    """Cooperative cancellation flag for long-running enumerations."""

    def __init__(self) -> None:
        self._flag = threading.Event()

    def cancel(self) -> None:
        self._flag.set()

    @property
    def cancelled(self) -> bool:
        return self._flag.is_set()

    def raise_if_cancelled(self) -> None:
        if self.cancelled:
            raise CancelledError("enumeration cancelled")


DEFAULT_BOUND = 8


@dataclass(frozen=True)
class Verdict:
    member: bool
    criterion: str
    witness_order: Optional[tuple[TxnId, ...]] = None
    witness: Optional[History] = None
    cycle: Optional[tuple[TxnId, ...]] = None
    evidence: Optional[str] = None

    def __bool__(self) -> bool:
        return self.member


def serialize_transactions(h: History, order: Iterable[TxnId]) -> History:
    """Arrange h's transactions back to back in the given order."""
    events: list[Event] = []
    for t in order:
        if t == T0:
            continue
        events.extend(h.events[i] for i in h.event_indices_of(t))
    return build_history(events)


def _check_bound(h: History, bound: int) -> None:
    if len(h.txns) > bound:
        raise TooLargeError(len(h.txns), bound)


def _rt_consistent_permutations(
    txns: tuple[TxnId, ...],
    rt: frozenset,
    token: Optional[CancelToken],
):
    constraints = [(a, b) for (a, b) in rt if a != T0]
    for perm in itertools.permutations(txns):
        if token is not None:
            token.raise_if_cancelled()
        pos = {t: i for i, t in enumerate(perm)}
        if all(pos[a] < pos[b] for a, b in constraints):
            yield perm


def check_mvc_opacity(h: History) -> Verdict:
    """Graph-based decision: valid and the conflict graph is acyclic."""
    bad = first_invalid_read(h)
    if bad is not None:
        return Verdict(False, "mvc-opacity", evidence=f"invalid read {bad!r}")
    g = build_mvcg(h)
    res = acyclic_witness(g)
    if isinstance(res, Cycle):
        return Verdict(
            False, "mvc-opacity", cycle=res.vertices,
            evidence="cycle " + ",".join(f"T{t}" for t in res.vertices),
        )
    comp = mvc_completion(h)
    order = tuple(t for t in res.order if t != T0)
    return Verdict(
        True,
        "mvc-opacity",
        witness_order=order,
        witness=serialize_transactions(comp, order),
    )


def check_mvc_opacity_bruteforce(
    h: History,
    bound: int = DEFAULT_BOUND,
    token: Optional[CancelToken] = None,
) -> Verdict:
    """Oracle by definition: search t-sequential arrangements directly."""
    _check_bound(h, bound)
    if not is_valid(h):
        return Verdict(
            False, "mvc-opacity", evidence=f"invalid read {first_invalid_read(h)!r}"
        )
    m = mvc_order(h)
    comp = m.completion
    rt = real_time_order(h)
    for perm in _rt_consistent_permutations(comp.txns, rt, token):
        s = serialize_transactions(comp, perm)
        if satisfies(s, m):
            return Verdict(
                True, "mvc-opacity", witness_order=tuple(perm), witness=s
            )
    return Verdict(
        False,
        "mvc-opacity",
        evidence="no equivalent t-sequential arrangement satisfies the conflict order",
    )


def check_opacity_bruteforce(
    h: History,
    bound: int = DEFAULT_BOUND,
    token: Optional[CancelToken] = None,
) -> Verdict:
    """Search all completions for a legal, real-time-respecting witness."""
    _check_bound(h, bound)
    if not is_valid(h):
        return Verdict(
            False, "opacity", evidence=f"invalid read {first_invalid_read(h)!r}"
        )
    rt = real_time_order(h)
    for comp in opq_completions(h):
        for perm in _rt_consistent_permutations(comp.txns, rt, token):
            s = serialize_transactions(comp, perm)
            if is_legal(s):
                return Verdict(
                    True, "opacity", witness_order=tuple(perm), witness=s
                )
    return Verdict(
        False,
        "opacity",
        evidence="no completion has a legal t-sequential arrangement",
    )


def check_co_opacity(
    h: History,
    bound: int = DEFAULT_BOUND,
    token: Optional[CancelToken] = None,
) -> Verdict:
    """Conflict-order-preserving opacity; sequential histories only."""
    if not is_sequential(h):
        return Verdict(
            False, "co-opacity", evidence="defined for sequential histories only"
        )
    _check_bound(h, bound)
    if not is_valid(h):
        return Verdict(
            False, "co-opacity", evidence=f"invalid read {first_invalid_read(h)!r}"
        )
    co = conflict_order(h)
    comp = mvc_completion(h)
    rt = real_time_order(h)
    for perm in _rt_consistent_permutations(comp.txns, rt, token):
        s = serialize_transactions(comp, perm)
        if is_legal(s) and pairs_ordered_in(s, co.pairs):
            return Verdict(True, "co-opacity", witness_order=tuple(perm), witness=s)
    return Verdict(
        False,
        "co-opacity",
        evidence="no legal t-sequential arrangement preserves the conflict order",
    )


def check_mvc_local_opacity(h: History) -> Verdict:
    """Committed projection plus every abort-closed prefix must pass."""
    v = check_mvc_opacity(subhistory_committed(h))
    if not v.member:
        return Verdict(
            False,
            "mvc-local-opacity",
            cycle=v.cycle,
            evidence=f"committed projection fails: {v.evidence}",
        )
    for a in h.aborted:
        va = check_mvc_opacity(subhistory_until_abort(h, a))
        if not va.member:
            return Verdict(
                False,
                "mvc-local-opacity",
                cycle=va.cycle,
                evidence=f"projection up to T{a}'s abort fails: {va.evidence}",
            )
    return Verdict(True, "mvc-local-opacity")


CRITERIA: dict[str, Callable[..., Verdict]] = {
    "mvc": lambda h, bound, token: check_mvc_opacity(h),
    "mvc-local": lambda h, bound, token: check_mvc_local_opacity(h),
    "opacity": lambda h, bound, token: check_opacity_bruteforce(h, bound, token),
    "co": lambda h, bound, token: check_co_opacity(h, bound, token),
}


def _checker(criterion: str) -> Callable[..., Verdict]:
    try:
        return CRITERIA[criterion]
    except KeyError:
        raise ValueError(f"unknown criterion {criterion!r}") from None


def _abort_operation(h: History, t: TxnId) -> Operation:
    for op in h.ops_of(t):
        if op.returned_abort:
            return op
    raise ValueError(f"T{t} has no abort response")


def available_version_values(h: History, x: str, before_index: int) -> list[int]:
    """Values of x readable at an event position: committed versions plus 0.

    A committed writer's version is available when its tryC invocation
    precedes the position.
    """
    vals = [0]
    for w in h.writes_to(x):
        if h.status(w.txn) is not TxnStatus.COMMITTED:
            continue
        if h.commit_of(w.txn).inv < before_index and w.value not in vals:
            vals.append(w.value)
    return vals


def _flip_abort_candidates(h: History, t: TxnId) -> list[list[Event]]:
    """Event lists with T_t's abort response replaced by a non-abort one.

    tryC and write aborts flip to ok; an aborted read is retried with every
    version value available at its position.  A tryA abort is voluntary and
    has no non-abort response, so no candidate exists.
    """
    op = _abort_operation(h, t)
    idx = op.rsp
    base = list(h.events)
    out: list[list[Event]] = []
    if op.op is OpKind.TRY_COMMIT:
        ev = Event(EventKind.RSP, OpKind.TRY_COMMIT, t, None, OK)
        out.append(base[:idx] + [ev] + base[idx + 1 :])
    elif op.op is OpKind.WRITE:
        ev = Event(EventKind.RSP, OpKind.WRITE, t, None, OK)
        out.append(base[:idx] + [ev] + base[idx + 1 :])
    elif op.op is OpKind.READ:
        for u in available_version_values(h, op.obj, idx):
            ev = Event(EventKind.RSP, OpKind.READ, t, op.obj, u)
            out.append(base[:idx] + [ev] + base[idx + 1 :])
    return out


def audit_permissiveness(
    h: History,
    criterion: str = "mvc",
    bound: int = DEFAULT_BOUND,
    token: Optional[CancelToken] = None,
) -> list[TxnId]:
    """Aborted transactions whose abort was unnecessary under the criterion.

    An abort is unnecessary when some non-abort response at the aborting
    operation keeps the history inside the class.  An empty result means the
    history is permissive.
    """
    checker = _checker(criterion)
    unnecessary: list[TxnId] = []
    for t in h.aborted:
        if token is not None:
            token.raise_if_cancelled()
        for events in _flip_abort_candidates(h, t):
            if checker(build_history(events), bound, token).member:
                unnecessary.append(t)
                break
    return unnecessary


def audit_olsness(
    h: History,
    criterion: str = "mvc",
    bound: int = DEFAULT_BOUND,
    token: Optional[CancelToken] = None,
) -> list[tuple[TxnId, OpRef, int]]:
    """Aborts avoidable by an earlier read choosing a different version.

    For each transaction aborted at tryC and each successful read completing
    before that abort, every alternative committed version value is tried;
    a triple (aborted txn, read, value) is reported when rewriting the read
    and committing the transaction lands back inside the criterion.  An
    empty result means no abort was caused by version choice.
    """
    if audit_permissiveness(h, criterion, bound, token):
        raise NotPermissiveError(
            "history is not permissive w.r.t. the criterion; audit undefined"
        )
    checker = _checker(criterion)
    out: list[tuple[TxnId, OpRef, int]] = []
    for t in h.aborted:
        op = _abort_operation(h, t)
        if op.op is not OpKind.TRY_COMMIT:
            continue  # committing requires a recorded tryC to flip
        abort_idx = op.rsp
        commit_ev = Event(EventKind.RSP, OpKind.TRY_COMMIT, t, None, OK)
        for r in h.successful_reads():
            if r.rsp >= abort_idx:
                continue
            for u in available_version_values(h, r.obj, r.rsp):
                if token is not None:
                    token.raise_if_cancelled()
                if u == r.value:
                    continue
                events = list(h.events)
                events[r.rsp] = Event(EventKind.RSP, OpKind.READ, r.txn, r.obj, u)
                events[abort_idx] = commit_ev
                if checker(build_history(events), bound, token).member:
                    out.append((t, ref_of(r), u))
    return out
