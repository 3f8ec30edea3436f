import numpy as np
from hypothesis import given, settings, strategies as st

from ecrmac.scenario import FlowSpec
from ecrmac.traffic import Traffic, arrival_schedule, arrival_times, routes


def test_arrivals_cbr():
    f = FlowSpec(0, 1, 1e5, 4.0, 0.1)
    assert arrival_times(f, 1_100_000) == [100_000, 350_000, 600_000, 850_000]
    assert arrival_times(f, 100_000) == []


def test_schedule_merged_by_time_then_flow():
    fs = [FlowSpec(0, 1, 1e5, 2.0, 0.0), FlowSpec(2, 3, 1e5, 2.0, 0.0)]
    assert arrival_schedule(fs, 1_000_000) == [(0, 0), (0, 1), (500_000, 0), (500_000, 1)]


def test_routes_shortest_hop():
    pos = np.array([[0, 0], [100, 0], [200, 0], [300, 0], [2000, 0]], dtype=float)
    r = routes(pos, [FlowSpec(0, 3, 1), FlowSpec(0, 4, 1)], 150.0)
    assert r == [[0, 1, 2, 3], None]


def test_forward_and_conservation():
    fs = [FlowSpec(0, 2, 1e5, 10.0, 0.0)]
    tr = Traffic(fs, [[0, 1, 2]], 3, queue_limit=2, horizon_us=1_000_000, packet_bits=8000)
    tr.admit_until(250_000, lambda n: True)
    assert len(tr.queues[0]) == 2  # third packet hits the queue limit
    assert tr.stats[0].drops_by_reason == {"queue": 1}
    p = tr.queues[0].popleft()
    tr.forward(p, 300_000)
    assert p.holder == 1 and tr.queues[1][0] is p
    tr.queues[1].popleft()
    tr.forward(p, 400_000)
    assert tr.stats[0].delivered == 1 and tr.stats[0].delay_sum_us == 400_000
    assert tr.conservation_problems() == []


@settings(max_examples=50, deadline=None)
@given(st.floats(0.5, 50.0), st.floats(0.0, 2.0), st.integers(1, 5_000_000))
def test_arrival_spacing(rate, start, horizon):
    f = FlowSpec(0, 1, 1e5, rate, start)
    ts = arrival_times(f, horizon)
    assert all(0 <= t < horizon for t in ts)
    assert all(b > a for a, b in zip(ts, ts[1:]))
    period = 1e6 / rate
    assert all(abs((b - a) - period) <= 1 for a, b in zip(ts, ts[1:]))
