import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dichotomy.errors import Deadlock, FabricError, MismatchedWidth, UnknownRank
from dichotomy.fabric import Fabric, Group, recv, reduce_sum, send, split_around, tree_sum

MODES = ("deterministic", "concurrent")


def reduce_program(values, group, width=1):
    def program(rank):
        return (yield reduce_sum(group, np.full(width, values[rank])))
    return program


@pytest.mark.parametrize("mode", MODES)
def test_reduce_delivers_to_root_only(mode):
    out = Fabric(4, mode).run(reduce_program([1.0, 2.0, 3.0, 4.0], Group(0, 3, 2)))
    assert out[2][0] == 10.0
    assert out[0] is None and out[1] is None and out[3] is None


def test_chain_order_is_fixed():
    vals = [1e16, 1.0, -1e16, 1.0]
    out = Fabric(4).run(reduce_program(vals, Group(0, 3, 0)))
    assert out[0][0] == 1.0  # ((1e16 + 1) - 1e16) + 1


def test_binomial_tree_order():
    total, adds = tree_sum([np.array([v]) for v in (1e16, 1.0, -1e16, 1.0)], "binomial")
    # (1e16 + 1) + (-1e16 + 1)
    assert total[0] == 0.0
    assert adds == [2, 0, 1, 0]
    out = Fabric(4, tree="binomial").run(reduce_program([1.0, 2.0, 3.0, 4.0], Group(0, 3, 1)))
    assert out[1][0] == 10.0


def test_single_member_reduce_is_identity():
    out = Fabric(1).run(reduce_program([5.0], Group(0, 0)))
    assert out[0][0] == 5.0


@pytest.mark.parametrize("mode", MODES)
def test_send_recv_ring(mode):
    p = 5

    def program(rank):
        yield send((rank + 1) % p, [rank, rank * 10])
        got = yield recv((rank - 1) % p)
        return got.tolist()

    out = Fabric(p, mode).run(program)
    assert out == [[(r - 1) % p, ((r - 1) % p) * 10] for r in range(p)]


@pytest.mark.parametrize("mode", MODES)
def test_messages_are_fifo_per_pair(mode):
    def program(rank):
        if rank == 0:
            for k in range(5):
                yield send(1, k)
            return None
        got = []
        for _ in range(5):
            got.append(float((yield recv(0))[0]))
        return got

    assert Fabric(2, mode).run(program)[1] == [0.0, 1.0, 2.0, 3.0, 4.0]


@pytest.mark.parametrize("mode", MODES)
def test_deadlock_detected(mode):
    def program(rank):
        yield recv(1 - rank)

    with pytest.raises(Deadlock):
        Fabric(2, mode, timeout=0.5).run(program)


@pytest.mark.parametrize("mode", MODES)
def test_mismatched_width(mode):
    def program(rank):
        return (yield reduce_sum(Group(0, 2, 0), np.ones(1 + rank)))

    with pytest.raises(MismatchedWidth):
        Fabric(3, mode, timeout=1.0).run(program)


@pytest.mark.parametrize("mode", MODES)
@pytest.mark.parametrize("target", [0, 7, -1])
def test_unknown_rank(mode, target):
    def program(rank):
        if rank == 0:
            yield send(target, 1.0)

    with pytest.raises(UnknownRank):
        Fabric(3, mode, timeout=1.0).run(program)


def test_non_member_contribution():
    def program(rank):
        yield reduce_sum(Group(1, 2, 1), [1.0])

    with pytest.raises(FabricError):
        Fabric(3).run(program)


def test_unconsumed_message_is_an_error():
    def program(rank):
        if rank == 0:
            yield send(1, 1.0)

    with pytest.raises(FabricError):
        Fabric(2).run(program)


def test_rank_exception_propagates_from_threads():
    def program(rank):
        if rank == 1:
            raise KeyError("boom")
        yield recv(1)

    with pytest.raises(KeyError):
        Fabric(2, "concurrent", timeout=2.0).run(program)


def test_group_and_split():
    g = Group(0, 6, 3)
    left, right = split_around(g, 3)
    assert (left.lo, left.hi, left.root) == (0, 2, 2)
    assert (right.lo, right.hi, right.root) == (4, 6, 4)
    empty_left, _ = split_around(Group(0, 1, 0), 0)
    assert empty_left.empty and empty_left.size == 0 and empty_left.root is None
    assert Group(2, 5).root == 2
    with pytest.raises(ValueError):
        Group(0, 3, 9)
    with pytest.raises(ValueError):
        split_around(g, 9)


def test_invalid_construction():
    with pytest.raises(ValueError):
        Fabric(0)
    with pytest.raises(ValueError):
        Fabric(2, mode="async")
    with pytest.raises(ValueError):
        Fabric(2, tree="ring")


def test_trace_and_counters(tmp_path):
    fab = Fabric(3, trace=True)

    def program(rank):
        total = yield reduce_sum(Group(0, 2, 2), [1.0, 1.0], level=1)
        if rank == 2:
            yield send(0, total, level=1)
        if rank == 0:
            yield recv(2, level=1)

    fab.run(program)
    rows = list(csv.DictReader(io.StringIO(fab.trace_csv())))
    assert list(rows[0]) == ["event", "kind", "level", "group_lo", "group_hi", "src", "dst", "width"]
    kinds = [r["kind"] for r in rows]
    assert kinds.count("reduce") == 3 and kinds.count("reduce_done") == 1
    assert kinds[-2:] == ["send", "recv"]
    assert fab.additions == [0, 2, 2]
    path = tmp_path / "trace.csv"
    fab.trace_csv(str(path))
    assert path.read_text().splitlines()[0].startswith("event,kind")


@settings(max_examples=30, deadline=None)
@given(p=st.integers(1, 12), seed=st.integers(0, 1000))
def test_property_modes_agree_on_sums(p, seed):
    vals = np.random.default_rng(seed).standard_normal(p)
    det = Fabric(p).run(reduce_program(vals, Group(0, p - 1, p // 2)))
    con = Fabric(p, "concurrent").run(reduce_program(vals, Group(0, p - 1, p // 2)))
    assert abs(det[p // 2][0] - con[p // 2][0]) <= 1e-12 * np.abs(vals).sum()
    again = Fabric(p).run(reduce_program(vals, Group(0, p - 1, p // 2)))
    assert det[p // 2][0] == again[p // 2][0]
