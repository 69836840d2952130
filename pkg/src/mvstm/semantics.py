"""Read semantics: validWrite, lastWrite, validity, legality, multi-versioned."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .model import (
    ABORT,
    C0,
    History,
    NotSequentialError,
    OpKind,
    Operation,
    T0,
    TxnStatus,
    is_sequential,
)


@dataclass(frozen=True)
class ReadResolution:
    read: Operation
    valid_write: Optional[Operation]
    last_write: Optional[Operation] = None


def valid_write_of(h: History, r: Operation) -> Optional[Operation]:
    """The commit of the committed transaction that wrote r's value.

    The writer qualifies only when the read's response does not precede the
    invocation of its tryC.  Reads of 0 resolve to T0's commit unless some
    committed transaction explicitly wrote 0 to the object.  Returns None
    when no writer qualifies (the read is invalid).
    """
    if not r.is_successful_read:
        raise ValueError(f"{r!r} is not a successful read")
    x, v = r.obj, r.value
    for w in h.writes_to(x):
        if w.value != v or w.txn == r.txn:
            continue
        if h.status(w.txn) is not TxnStatus.COMMITTED:
            continue
        commit = h.commit_of(w.txn)
        if commit.inv < r.rsp:  # response of r does not precede inv of tryC
            return commit
    if v == 0:
        return C0
    return None


def last_write_of(h: History, r: Operation) -> Operation:
    """Latest commit preceding r whose transaction wrote the read object.

    Sequential histories only; T0 is the fallback writer of every object.
    """
    if not is_sequential(h):
        raise NotSequentialError("lastWrite is defined on sequential histories only")
    if not r.is_successful_read:
        raise ValueError(f"{r!r} is not a successful read")
    best = C0
    for t in h.committed:
        commit = h.commit_of(t)
        if r.obj in h.write_set(t) and commit.inv < r.inv and commit.inv > best.inv:
            best = commit
    return best


def resolve_read(h: History, r: Operation) -> ReadResolution:
    lw = last_write_of(h, r) if is_sequential(h) else None
    return ReadResolution(r, valid_write_of(h, r), lw)


def is_valid(h: History) -> bool:
    """True iff every successful read has a validWrite."""
    return all(valid_write_of(h, r) is not None for r in h.successful_reads())


def first_invalid_read(h: History) -> Optional[Operation]:
    for r in h.successful_reads():
        if valid_write_of(h, r) is None:
            return r
    return None


def _wrote_value(h: History, t: int, x, v) -> bool:
    if t == T0:
        return v == 0
    return any(w.txn == t and w.value == v for w in h.writes_to(x))


def is_legal(h: History) -> bool:
    """True iff every successful read returns its lastWrite's value."""
    if not is_sequential(h):
        raise NotSequentialError("legality is defined on sequential histories only")
    for r in h.successful_reads():
        lw = last_write_of(h, r)
        if not _wrote_value(h, lw.txn, r.obj, r.value):
            return False
    return True


def is_multiversioned(h: History) -> bool:
    """True iff h is sequential, valid, and not legal."""
    if not is_sequential(h):
        raise NotSequentialError(
            "multi-versioned is defined on sequential histories only"
        )
    return is_valid(h) and not is_legal(h)
