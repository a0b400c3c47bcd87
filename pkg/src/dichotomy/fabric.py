"""In-process message passing between logical ranks.

A rank program is a generator. It yields operation objects built by
:func:`send`, :func:`recv` and :func:`reduce_sum`, and receives each
operation's result back from the executor::

    def program(rank):
        total = yield reduce_sum(Group(0, 3, 0), [1.0])
        return total

    Fabric(4).run(program)   # -> [array([4.]), None, None, None]

The same program runs under both executors:

``deterministic``
    every rank is stepped round-robin on the calling thread; reductions
    combine in a fixed order, so results are bit-reproducible.
``concurrent``
    one thread per rank; a reduction combines contributions in arrival
    order, so partial sums form before stragglers arrive.
"""
from __future__ import annotations

import csv
import io
import threading
from collections import defaultdict, deque
from dataclasses import dataclass

import numpy as np

from .errors import Deadlock, FabricError, MismatchedWidth, UnknownRank

MODES = ("deterministic", "concurrent")
TREES = ("chain", "binomial")
TRACE_FIELDS = ("event", "kind", "level", "group_lo", "group_hi", "src", "dst", "width")


@dataclass(frozen=True)
class Group:
    """Contiguous rank range ``lo..hi`` (inclusive); empty when ``lo > hi``."""

    lo: int
    hi: int
    root: int | None = None

    def __post_init__(self):
        if self.empty:
            object.__setattr__(self, "root", None)
            return
        root = self.lo if self.root is None else self.root
        if not self.lo <= root <= self.hi:
            raise ValueError(f"root {root} outside group [{self.lo}, {self.hi}]")
        object.__setattr__(self, "root", root)

    @property
    def empty(self):
        return self.lo > self.hi

    @property
    def size(self):
        return max(self.hi - self.lo + 1, 0)

    def __contains__(self, rank):
        return self.lo <= rank <= self.hi

    def ranks(self):
        return range(self.lo, self.hi + 1)


def split_around(g, m):
    """Sub-groups left and right of rank ``m``; each rooted at the rank adjacent to ``m``."""
    if not (g.lo <= m <= g.hi):
        raise ValueError(f"rank {m} not in group [{g.lo}, {g.hi}]")
    return Group(g.lo, m - 1, m - 1), Group(m + 1, g.hi, m + 1)


@dataclass(frozen=True)
class Send:
    to: int
    payload: np.ndarray
    level: int = 0


@dataclass(frozen=True)
class Recv:
    frm: int
    level: int = 0


@dataclass(frozen=True)
class Reduce:
    group: Group
    contribution: np.ndarray
    level: int = 0


def send(to, payload, level=0):
    return Send(int(to), np.atleast_1d(np.asarray(payload, dtype=float)).copy(), level)


def recv(frm, level=0):
    return Recv(int(frm), level)


def reduce_sum(group, contribution, level=0):
    return Reduce(group, np.atleast_1d(np.asarray(contribution, dtype=float)).copy(), level)


def tree_sum(values, tree="chain"):
    """Sum ``values`` (ordered by rank) in a fixed order.

    Returns ``(total, additions)`` where ``additions[i]`` is the number of
    elementwise additions done by the i-th participant.
    """
    k = len(values)
    adds = [0] * k
    if tree == "chain":
        acc = values[0]
        for i in range(1, k):
            acc = acc + values[i]
            adds[i] += 1
        return acc, adds
    if tree == "binomial":
        vals = list(values)
        mask = 1
        while mask < k:
            for i in range(0, k, 2 * mask):
                if i + mask < k:
                    vals[i] = vals[i] + vals[i + mask]
                    adds[i] += 1
            mask *= 2
        return vals[0], adds
    raise ValueError(f"unknown tree {tree!r}")


class _Slot:
    __slots__ = ("group", "parts", "acc", "count", "width")

    def __init__(self, group):
        self.group = group
        self.parts = {}
        self.acc = None
        self.count = 0
        self.width = None


class Fabric:
    """Logical ranks ``0..p-1`` with mailboxes and rooted sum reductions."""

    def __init__(self, p, mode="deterministic", tree="chain", timeout=10.0, trace=False):
        if p < 1:
            raise ValueError("need at least one rank")
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if tree not in TREES:
            raise ValueError(f"tree must be one of {TREES}")
        self.p = p
        self.mode = mode
        self.tree = tree
        self.timeout = timeout
        self.tracing = trace
        self.trace = []
        self.additions = [0] * p
        self._reset()

    def _reset(self):
        self._mail = defaultdict(deque)
        self._slots = {}
        self._done_keys = set()
        self._cond = threading.Condition()
        self._abort = False

    # -- bookkeeping ----------------------------------------------------------

    def _log(self, kind, level, group_lo, group_hi, src, dst, width):
        if self.tracing:
            self.trace.append((len(self.trace), kind, level, group_lo, group_hi, src, dst, width))

    def trace_csv(self, out=None):
        """Write the event log as CSV to ``out`` (path or file); return the text if ``out`` is None."""
        buf = io.StringIO() if out is None else None
        fh = buf if out is None else (open(out, "w", newline="") if isinstance(out, str) else out)
        try:
            writer = csv.writer(fh)
            writer.writerow(TRACE_FIELDS)
            for row in self.trace:
                writer.writerow(["" if v is None else v for v in row])
        finally:
            if isinstance(out, str):
                fh.close()
        return buf.getvalue() if buf is not None else None

    def _check_peer(self, rank, peer):
        if not (0 <= peer < self.p) or peer == rank:
            raise UnknownRank(f"rank {rank} cannot address rank {peer}")

    def _post(self, rank, op):
        """Deposit a reduction contribution; return the slot."""
        g = op.group
        if g.empty or rank not in g:
            raise FabricError(f"rank {rank} not a member of group [{g.lo}, {g.hi}]")
        key = (g.lo, g.hi, g.root, op.level)
        if key in self._done_keys:
            raise FabricError(f"reduction {key} already completed")
        slot = self._slots.get(key)
        if slot is None:
            slot = self._slots[key] = _Slot(g)
        if rank in slot.parts:
            raise FabricError(f"rank {rank} contributed twice to reduction {key}")
        width = op.contribution.shape[0]
        if slot.width is None:
            slot.width = width
        elif slot.width != width:
            raise MismatchedWidth(f"rank {rank} sent width {width}, group expects {slot.width}")
        slot.parts[rank] = op.contribution
        slot.count += 1
        if self.mode == "concurrent":
            if slot.acc is None:
                slot.acc = op.contribution.copy()
            else:
                slot.acc = slot.acc + op.contribution
                self.additions[rank] += width
        self._log("reduce", op.level, g.lo, g.hi, rank, g.root, width)
        return key, slot

    def _finish(self, key, slot):
        g = slot.group
        if self.mode == "deterministic":
            values = [slot.parts[r] for r in g.ranks()]
            total, adds = tree_sum(values, self.tree)
            for r, a in zip(g.ranks(), adds):
                self.additions[r] += a * slot.width
        else:
            total = slot.acc
        del self._slots[key]
        self._done_keys.add(key)
        self._log("reduce_done", key[3], g.lo, g.hi, None, g.root, slot.width)
        return total

    # -- executors ------------------------------------------------------------

    def run(self, program):
        """Run ``program(rank)`` on every rank; return the per-rank return values."""
        self._reset()
        if self.mode == "deterministic":
            return self._run_deterministic(program)
        return self._run_concurrent(program)

    def _run_deterministic(self, program):
        p = self.p
        gens = [program(r) for r in range(p)]
        pending = [None] * p
        value = [None] * p
        done = [False] * p
        results = [None] * p
        posted = [None] * p

        while not all(done):
            progress = False
            for r in range(p):
                if done[r]:
                    continue
                if pending[r] is None:
                    try:
                        pending[r] = gens[r].send(value[r])
                    except StopIteration as stop:
                        done[r] = True
                        results[r] = stop.value
                        progress = True
                        continue
                    value[r] = None
                    progress = True
                if self._try_complete(r, pending, value, posted):
                    progress = True
            if not progress:
                blocked = {r: pending[r] for r in range(p) if not done[r]}
                raise Deadlock(f"no rank can progress; blocked: {_describe(blocked)}")
        leftover = [k for k, q in self._mail.items() if q]
        if leftover or self._slots:
            raise FabricError(f"unconsumed messages {leftover} or reductions {list(self._slots)}")
        return results

    def _try_complete(self, r, pending, value, posted):
        op = pending[r]
        if isinstance(op, Send):
            self._check_peer(r, op.to)
            self._mail[(r, op.to)].append(op.payload)
            self._log("send", op.level, None, None, r, op.to, op.payload.shape[0])
            pending[r] = None
            return True
        if isinstance(op, Recv):
            self._check_peer(r, op.frm)
            q = self._mail[(op.frm, r)]
            if not q:
                return False
            value[r] = q.popleft()
            self._log("recv", op.level, None, None, op.frm, r, value[r].shape[0])
            pending[r] = None
            return True
        if isinstance(op, Reduce):
            if posted[r] is None:
                posted[r] = self._post(r, op)
            key, slot = posted[r]
            if r != op.group.root:
                posted[r] = None
                pending[r] = None
                return True
            if slot.count < slot.group.size:
                return False
            value[r] = self._finish(key, slot)
            posted[r] = None
            pending[r] = None
            return True
        raise FabricError(f"rank {r} yielded unsupported operation {op!r}")

    def _wait(self, predicate, what):
        ok = self._cond.wait_for(lambda: self._abort or predicate(), timeout=self.timeout)
        if self._abort:
            raise FabricError("aborted: another rank failed")
        if not ok:
            raise Deadlock(f"timed out after {self.timeout}s waiting for {what}")

    def _perform(self, r, op):
        with self._cond:
            if isinstance(op, Send):
                self._check_peer(r, op.to)
                self._mail[(r, op.to)].append(op.payload)
                self._log("send", op.level, None, None, r, op.to, op.payload.shape[0])
                self._cond.notify_all()
                return None
            if isinstance(op, Recv):
                self._check_peer(r, op.frm)
                q = self._mail[(op.frm, r)]
                self._wait(lambda: bool(q), f"message {op.frm}->{r}")
                out = q.popleft()
                self._log("recv", op.level, None, None, op.frm, r, out.shape[0])
                return out
            if isinstance(op, Reduce):
                key, slot = self._post(r, op)
                self._cond.notify_all()
                if r != op.group.root:
                    return None
                self._wait(lambda: slot.count == slot.group.size, f"reduction {key}")
                return self._finish(key, slot)
            raise FabricError(f"rank {r} yielded unsupported operation {op!r}")

    def _run_concurrent(self, program):
        p = self.p
        results = [None] * p
        errors = [None] * p

        def drive(r):
            try:
                gen = program(r)
                val = None
                while True:
                    try:
                        op = gen.send(val)
                    except StopIteration as stop:
                        results[r] = stop.value
                        return
                    val = self._perform(r, op)
            except BaseException as exc:  # re-raised on the calling thread
                errors[r] = exc
                with self._cond:
                    self._abort = True
                    self._cond.notify_all()

        threads = [threading.Thread(target=drive, args=(r,), name=f"rank-{r}", daemon=True)
                   for r in range(p)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        primary = [e for e in errors if e is not None and not _is_abort(e)]
        if primary:
            raise primary[0]
        if any(e is not None for e in errors):
            raise next(e for e in errors if e is not None)
        return results


def _is_abort(exc):
    return type(exc) is FabricError and str(exc).startswith("aborted")


def _describe(blocked):
    parts = []
    for r, op in blocked.items():
        if isinstance(op, Recv):
            parts.append(f"{r}:recv<-{op.frm}")
        elif isinstance(op, Reduce):
            parts.append(f"{r}:reduce[{op.group.lo},{op.group.hi}]@{op.group.root}")
        else:
            parts.append(f"{r}:{type(op).__name__}")
    return ", ".join(parts)
