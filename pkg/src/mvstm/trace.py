"""Line-oriented trace format: one event (or atomic operation) per line.

Grammar (``#`` starts a comment, blank lines are ignored)::

    r <txn> <obj> <int|A>      atomic read
    w <txn> <obj> <int>        atomic write (ok response)
    c <txn>                    atomic tryC returning ok
    tc <txn> <ok|A>            atomic tryC with an explicit outcome
    ta <txn>                   atomic tryA
    b <txn>                    optional begin
    inv r <txn> <obj>          split events
    rsp r <txn> <obj> <int|A>
    inv w <txn> <obj> <int>
    rsp w <txn> <ok|A>
    inv tc <txn>
    rsp tc <txn> <ok|A>
    inv ta <txn>
    rsp ta <txn>
    r? <txn> <obj> <v1>|<v2>[|...]   choice point (scripts only)

Objects match ``[a-z][a-z0-9_]*``; transaction ids are positive integers.
A ``rsp tc`` with no pending invocation gets the invocation inserted
immediately before it (traces in circulation elide those), any other
orphaned response is an error.
"""
from __future__ import annotations

import re
from typing import Iterable, Optional, Sequence

from .model import (
    ABORT,
    Event,
    EventKind,
    History,
    OK,
    OpKind,
    Value,
)

_OBJECT_RE = re.compile(r"^[a-z][a-z0-9_]*$")

_OP_CODES = {
    "r": OpKind.READ,
    "w": OpKind.WRITE,
    "tc": OpKind.TRY_COMMIT,
    "ta": OpKind.TRY_ABORT,
    "b": OpKind.BEGIN,
}


class ParseError(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


def _parse_txn(tok: str, line: int) -> int:
    if not tok.isdigit() or int(tok) < 1:
        raise ParseError(line, f"transaction id must be a positive integer, got {tok!r}")
    return int(tok)


def _parse_obj(tok: str, line: int) -> str:
    if not _OBJECT_RE.match(tok):
        raise ParseError(line, f"bad object name {tok!r}")
    return tok


def _parse_value(tok: str, line: int, allow_abort: bool = True) -> Value:
    if allow_abort and tok == "A":
        return ABORT
    try:
        return int(tok)
    except ValueError:
        raise ParseError(line, f"expected an integer value, got {tok!r}") from None


def parse_trace(text: str) -> list[Event]:
    """Parse trace text into an event list (shorthand expands to inv+rsp)."""
    events: list[Event] = []
    pending: dict[int, OpKind] = {}

    def push_inv(t: int, op: OpKind, line: int, obj=None, value=None) -> None:
        if t in pending:
            raise ParseError(
                line, f"T{t} invokes {op.value} while {pending[t].value} is pending"
            )
        pending[t] = op
        events.append(Event(EventKind.INV, op, t, obj, value))

    def push_rsp(t: int, op: OpKind, line: int, obj=None, value=None) -> None:
        if pending.get(t) is not op:
            if op is OpKind.TRY_COMMIT and t not in pending:
                # elided tryC invocation: insert it just before the response
                events.append(Event(EventKind.INV, op, t))
            else:
                raise ParseError(
                    line, f"response {op.value} for T{t} has no matching invocation"
                )
        pending.pop(t, None)
        events.append(Event(EventKind.RSP, op, t, obj, value))

    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        toks = body.split()
        head = toks[0]
        try:
            if head in ("r", "w", "c", "tc", "ta", "b"):
                _parse_shorthand(toks, lineno, push_inv, push_rsp)
            elif head in ("inv", "rsp"):
                _parse_split(toks, lineno, push_inv, push_rsp)
            elif head == "r?":
                raise ParseError(
                    lineno, "choice points are script syntax, not history events"
                )
            else:
                raise ParseError(lineno, f"unknown directive {head!r}")
        except IndexError:
            raise ParseError(lineno, "truncated line") from None
    return events


def _parse_shorthand(toks: Sequence[str], line: int, push_inv, push_rsp) -> None:
    head = toks[0]
    t = _parse_txn(toks[1], line)
    if head == "r":
        x = _parse_obj(toks[2], line)
        v = _parse_value(toks[3], line)
        push_inv(t, OpKind.READ, line, obj=x)
        push_rsp(t, OpKind.READ, line, obj=x, value=v)
    elif head == "w":
        x = _parse_obj(toks[2], line)
        v = _parse_value(toks[3], line, allow_abort=False)
        push_inv(t, OpKind.WRITE, line, obj=x, value=v)
        push_rsp(t, OpKind.WRITE, line, value=OK)
    elif head == "c":
        push_inv(t, OpKind.TRY_COMMIT, line)
        push_rsp(t, OpKind.TRY_COMMIT, line, value=OK)
    elif head == "tc":
        v = toks[2]
        if v not in (OK, "A"):
            raise ParseError(line, f"tc outcome must be ok or A, got {v!r}")
        push_inv(t, OpKind.TRY_COMMIT, line)
        push_rsp(t, OpKind.TRY_COMMIT, line, value=ABORT if v == "A" else OK)
    elif head == "ta":
        push_inv(t, OpKind.TRY_ABORT, line)
        push_rsp(t, OpKind.TRY_ABORT, line, value=ABORT)
    else:  # b
        push_inv(t, OpKind.BEGIN, line)
        push_rsp(t, OpKind.BEGIN, line)


def _parse_split(toks: Sequence[str], line: int, push_inv, push_rsp) -> None:
    kind, code = toks[0], toks[1]
    if code not in _OP_CODES:
        raise ParseError(line, f"unknown operation code {code!r}")
    op = _OP_CODES[code]
    t = _parse_txn(toks[2], line)
    if kind == "inv":
        if op is OpKind.READ:
            push_inv(t, op, line, obj=_parse_obj(toks[3], line))
        elif op is OpKind.WRITE:
            x = _parse_obj(toks[3], line)
            v = _parse_value(toks[4], line, allow_abort=False)
            push_inv(t, op, line, obj=x, value=v)
        else:
            push_inv(t, op, line)
    else:
        if op is OpKind.READ:
            x = _parse_obj(toks[3], line)
            v = _parse_value(toks[4], line)
            push_rsp(t, op, line, obj=x, value=v)
        elif op is OpKind.WRITE:
            v = toks[3]
            if v not in (OK, "A"):
                raise ParseError(line, f"write outcome must be ok or A, got {v!r}")
            push_rsp(t, op, line, value=ABORT if v == "A" else OK)
        elif op is OpKind.TRY_COMMIT:
            v = toks[3]
            if v not in (OK, "A"):
                raise ParseError(line, f"tc outcome must be ok or A, got {v!r}")
            push_rsp(t, op, line, value=ABORT if v == "A" else OK)
        elif op is OpKind.TRY_ABORT:
            push_rsp(t, op, line, value=ABORT)
        else:
            push_rsp(t, op, line)


_CODES = {
    OpKind.READ: "r",
    OpKind.WRITE: "w",
    OpKind.TRY_COMMIT: "tc",
    OpKind.TRY_ABORT: "ta",
    OpKind.BEGIN: "b",
}


def _shorthand(inv: Event, rsp: Event) -> str:
    t = inv.txn
    if inv.op is OpKind.READ:
        return f"r {t} {inv.obj} {rsp.value}"
    if inv.op is OpKind.WRITE and rsp.value == OK:
        return f"w {t} {inv.obj} {inv.value}"
    if inv.op is OpKind.TRY_COMMIT:
        return f"c {t}" if rsp.value == OK else f"tc {t} A"
    if inv.op is OpKind.TRY_ABORT:
        return f"ta {t}"
    if inv.op is OpKind.BEGIN:
        return f"b {t}"
    return ""  # A-write pairs fall back to split lines


def _split_lines(e: Event) -> str:
    code = _CODES[e.op]
    if e.kind is EventKind.INV:
        if e.op is OpKind.READ:
            return f"inv {code} {e.txn} {e.obj}"
        if e.op is OpKind.WRITE:
            return f"inv {code} {e.txn} {e.obj} {e.value}"
        return f"inv {code} {e.txn}"
    if e.op is OpKind.READ:
        return f"rsp {code} {e.txn} {e.obj} {e.value}"
    if e.op in (OpKind.WRITE, OpKind.TRY_COMMIT):
        return f"rsp {code} {e.txn} {e.value}"
    return f"rsp {code} {e.txn}"


def serialize_trace(events_or_history) -> str:
    """Render events back to trace text; inverse of :func:`parse_trace`."""
    events = (
        list(events_or_history.events)
        if isinstance(events_or_history, History)
        else list(events_or_history)
    )
    lines: list[str] = []
    i = 0
    while i < len(events):
        e = events[i]
        if (
            e.kind is EventKind.INV
            and i + 1 < len(events)
            and events[i + 1].kind is EventKind.RSP
            and events[i + 1].txn == e.txn
            and events[i + 1].op is e.op
        ):
            short = _shorthand(e, events[i + 1])
            if short:
                lines.append(short)
                i += 2
                continue
        lines.append(_split_lines(e))
        i += 1
    return "\n".join(lines) + ("\n" if lines else "")
