import random

import pytest

from ecrmac.csma import Medium
from ecrmac.events import EventQueue


def test_event_order_and_ties():
    eq = EventQueue()
    seen = []
    eq.push(5, seen.append, "b")
    eq.push(3, seen.append, "a")
    eq.push(5, seen.append, "c")
    eq.run_until(4)
    assert seen == ["a"] and eq.now == 4
    eq.run_until(10)
    assert seen == ["a", "b", "c"] and eq.now == 10
    with pytest.raises(ValueError):
        eq.push(9, seen.append, "late")


class FixedRng(random.Random):
    """Every backoff draw returns the same value."""

    def __init__(self, value):
        super().__init__(0)
        self.value = value

    def randint(self, a, b):
        return min(max(self.value, a), b)


class Recorder:
    def __init__(self, medium_ref):
        self.m = medium_ref
        self.ends = []
        self.attempts = {}

    def on_access(self, node):
        self.attempts[node] = self.attempts.get(node, 0) + 1
        self.m[0].start_tx(node, f"atim{node}", 160)

    def on_tx_end(self, tx):
        self.ends.append((tx.src, tx.end, sorted(tx.bad)))


def _medium(rng, n=3):
    # 0 and 1 both reach 2; they also sense each other
    decode = [[2], [2], [0, 1]]
    sense = [[1, 2], [0, 2], [0, 1]]
    eq = EventQueue()
    ref = []
    user = Recorder(ref)
    m = Medium(eq, decode, sense, decode, 20, 50, rng, None, user)
    ref.append(m)
    return eq, m, user


def test_equal_backoff_collides_then_retry():
    eq, m, user = _medium(FixedRng(4))
    m.contend(0, 15)
    m.contend(1, 15)
    eq.run_until(1000)
    # both expire at DIFS + 4 slots and transmit in the same instant
    assert [e[1] for e in user.ends] == [50 + 80 + 160] * 2
    assert all(e[2] == [2] for e in user.ends)
    # retry with a larger window; a distinct draw separates them
    m.rng = random.Random(1)
    m.contend(0, 31)
    m.contend(1, 31)
    eq.run_until(10_000)
    assert user.attempts == {0: 2, 1: 2}
    assert [e[2] for e in user.ends[2:]] == [[], []]


def test_backoff_freezes_while_busy():
    eq, m, user = _medium(FixedRng(3))
    m.contend(0, 15)
    eq.run_until(60)  # 0 is 10 us into its backoff countdown
    m.start_tx(2, "other", 1000)  # 2 is sensed by 0
    eq.run_until(5000)
    # 0 resumes after the busy period: DIFS then the 3 remaining slots
    assert user.ends[-1][0] == 0
    assert user.ends[-1][1] == 1060 + 50 + 3 * 20 + 160


def test_nav_defers():
    eq, m, user = _medium(FixedRng(0))
    m.set_nav(0, 500)
    m.contend(0, 15)
    eq.run_until(2000)
    assert user.ends[0][1] == 500 + 50 + 160
