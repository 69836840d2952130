"""History corpora for cross-checking the membership checkers.

`enumerate_histories` exhaustively produces small well-formed sequential
histories: every transaction-shape combination, every interleaving of the
transactions' operation sequences, and every read-value assignment drawn
from the initial value plus everything written to the object anywhere in
the history (so invalid histories are produced on purpose).

`random_histories` samples larger histories, mixing commits, voluntary
aborts, live transactions, and occasional reads of values nobody wrote.
"""
from __future__ import annotations

import itertools
import random
from typing import Iterator, Sequence

from mvstm.model import (
    Event,
    EventKind,
    OpKind,
    abort_op,
    commit_op,
    read_op,
    write_op,
)

OBJECTS = ("x", "y")


def _txn_shapes(objects: Sequence[str], max_body_ops: int, terminals: Sequence[str]):
    """(reads, writes, terminal) triples with |reads|+|writes| bounded."""
    shapes = []
    subsets = []
    for k in range(len(objects) + 1):
        subsets.extend(itertools.combinations(objects, k))
    for rs in subsets:
        for ws in subsets:
            if len(rs) + len(ws) == 0 or len(rs) + len(ws) > max_body_ops:
                continue
            for term in terminals:
                shapes.append((rs, ws, term))
    return shapes


def _interleavings(seqs: list[list]) -> Iterator[list]:
    if all(not s for s in seqs):
        yield []
        return
    for i, s in enumerate(seqs):
        if not s:
            continue
        head, rest = s[0], s[1:]
        for tail in _interleavings(seqs[:i] + [rest] + seqs[i + 1 :]):
            yield [head] + tail


def _materialize(slots: list, write_values: dict) -> Iterator[list[Event]]:
    """Expand symbolic op slots, branching over read-value choices."""
    read_slots = [i for i, (kind, _t, _x) in enumerate(slots) if kind == "r"]

    def choices(x: str):
        return [0] + sorted(v for (obj, _t), v in write_values.items() if obj == x)

    value_sets = [choices(slots[i][2]) for i in read_slots]
    for assignment in itertools.product(*value_sets):
        picked = dict(zip(read_slots, assignment))
        events: list[Event] = []
        for i, (kind, t, x) in enumerate(slots):
            if kind == "r":
                events.extend(read_op(t, x, picked[i]))
            elif kind == "w":
                events.extend(write_op(t, x, write_values[(x, t)]))
            elif kind == "c":
                events.extend(commit_op(t))
            else:
                events.extend(abort_op(t))
        yield events


def enumerate_histories(
    txn_counts: Sequence[int] = (1, 2, 3),
    objects: Sequence[str] = OBJECTS,
) -> Iterator[list[Event]]:
    """Exhaustive small corpus; see module docstring for the family."""
    for n in txn_counts:
        if n <= 2:
            max_body, terminals = 2, ("c", "a")
        else:
            max_body, terminals = 1, ("c",)
        shapes = _txn_shapes(objects, max_body, terminals)
        for combo in itertools.product(shapes, repeat=n):
            seqs = []
            write_values: dict = {}
            for t, (rs, ws, term) in enumerate(combo, start=1):
                ops = [("r", t, x) for x in rs] + [("w", t, x) for x in ws]
                ops.append((term, t, None))
                seqs.append(ops)
                for x in ws:
                    write_values[(x, t)] = 10 * t + (1 if x == objects[0] else 2)
            for slots in _interleavings(seqs):
                yield from _materialize(slots, write_values)


def random_histories(
    count: int,
    seed: int,
    max_txns: int = 5,
    objects: Sequence[str] = ("x", "y", "z"),
) -> Iterator[list[Event]]:
    rng = random.Random(seed)
    produced = 0
    while produced < count:
        n = rng.randint(1, max_txns)
        seqs = []
        write_values: dict = {}
        counter = 0
        for t in range(1, n + 1):
            n_reads = rng.randint(0, min(3, len(objects)))
            n_writes = rng.randint(0, 2)
            rs = rng.sample(objects, n_reads)
            ws = rng.sample(objects, min(n_writes, len(objects)))
            ops = [("r", t, x) for x in rs] + [("w", t, x) for x in ws]
            term = rng.choices(("c", "a", None), weights=(70, 15, 15))[0]
            if term:
                ops.append((term, t, None))
            if not ops:
                ops = [("c", t, None)]
            seqs.append(ops)
            for x in ws:
                counter += 1
                write_values[(x, t)] = 100 * t + counter
        slots = []
        pending = [list(s) for s in seqs]
        while any(pending):
            lane = rng.choice([p for p in pending if p])
            slots.append(lane.pop(0))
        events: list[Event] = []
        for kind, t, x in slots:
            if kind == "r":
                opts = [0] + [v for (obj, _t), v in write_values.items() if obj == x]
                if rng.random() < 0.15:
                    value = 9_000_000 + rng.randint(0, 5)  # written by nobody
                else:
                    value = rng.choice(opts)
                events.extend(read_op(t, x, value))
            elif kind == "w":
                events.extend(write_op(t, x, write_values[(x, t)]))
            elif kind == "c":
                events.extend(commit_op(t))
            else:
                events.extend(abort_op(t))
        produced += 1
        yield events
