import pytest
from hypothesis import given, settings, strategies as st

from ecrmac.energy import PJ_PER_J
from ecrmac.metrics import (CSV_COLUMNS, MetricsReport, aggregate, avg_end_to_end_delay, emit,
                            normalized_throughput, parse_csv, parse_jsonl, per_packet_energy,
                            report_from_trace, with_aggregates)
from ecrmac.trace import Trace


def rep(protocol="ecr", seed=1, bits=0, delay=None, energy=1.0, delivered=0, flows=2):
    return MetricsReport(protocol, seed, flows, 10.0, delivered, delivered, bits, 0, 0, bits / 10.0,
                         delay, energy, energy / delivered if delivered else None)


def trace_with(delivers, energy_j=(), summaries=None):
    tr = Trace()
    tr.add(0, None, "run_start", protocol="ecr", seed=1, duration=1.0, packet_bits=8000,
           full_trace=True)
    for gen, t in delivers:
        tr.add(t, 1, "deliver", flow=0, gen=gen)
    for node, j in enumerate(energy_j):
        tr.add(1_000_000, node, "energy", consumed_pj=int(j * PJ_PER_J))
    for d in summaries or ():
        tr.add(1_000_000, None, "flow_summary", **d)
    return tr


def test_normalized_throughput():
    assert normalized_throughput(rep(bits=74), rep("dcf", bits=10)) == pytest.approx(7.4)
    assert normalized_throughput(rep(bits=10), rep("dcf", bits=10)) == 1.0
    assert normalized_throughput(rep(bits=0), rep("dcf", bits=10)) == 0.0
    assert normalized_throughput(rep(bits=10), rep("dcf", bits=0)) is None


def test_delay_examples():
    assert avg_end_to_end_delay(trace_with([(1_000_000, 1_150_000)])) == pytest.approx(0.150)
    assert avg_end_to_end_delay(trace_with([(0, 100_000), (0, 300_000)])) == pytest.approx(0.2)
    assert avg_end_to_end_delay(trace_with([])) is None


def test_delay_ignores_drops():
    tr = trace_with([(0, 100_000)])
    tr.add(500_000, 0, "drop", flow=0, gen=0, reason="queue")
    assert avg_end_to_end_delay(tr) == pytest.approx(0.1)


def test_per_packet_energy():
    tr = trace_with([(0, 10)] * 1000, energy_j=[40.0, 40.0])
    assert per_packet_energy(tr) == pytest.approx(0.08)
    assert per_packet_energy(trace_with([], energy_j=[1.0])) is None


def test_report_from_synthetic_trace():
    summ = [dict(flow=0, source=0, destination=1, generated=3, delivered=2, dropped=1, queued=0,
                 delay_sum_us=400_000, drops={"queue": 1})]
    r = report_from_trace(trace_with([(0, 100_000), (0, 300_000)], [2.0], summ))
    assert r.delivered_packets == 2 and r.delivered_bits == 16000
    assert r.throughput == 16000.0
    assert r.avg_end_to_end_delay == pytest.approx(0.2)
    assert r.per_packet_energy == pytest.approx(1.0)


def test_aggregate_means():
    a = aggregate([rep(bits=10, delay=0.1, delivered=1), rep(seed=2, bits=30, delay=None, delivered=3)])
    assert a.throughput == 2.0
    assert a.avg_end_to_end_delay == pytest.approx(0.1)
    assert a.seeds_aggregated == 2 and a.seed == -1
    with pytest.raises(ValueError):
        aggregate([])


def test_csv_round_trip(tmp_path):
    rs = [rep(seed=2, bits=20, delay=0.5, delivered=2), rep(seed=1, bits=10, delay=0.2, delivered=1),
          rep("dcf", seed=1, bits=5, delivered=1)]
    rs[0].normalized_throughput = 1.25
    path = tmp_path / "r.csv"
    emit(rs, "csv", path)
    header = path.read_text().splitlines()[0]
    assert header == ("protocol,flows,seed,throughput,normalized_throughput,delay,"
                      "energy_per_packet,delivered_packets,generated,dropped,total_energy")
    rows = parse_csv(path)
    assert [(r["protocol"], r["seed"]) for r in rows] == [
        ("dcf", 1), ("dcf", "mean"), ("ecr", 1), ("ecr", 2), ("ecr", "mean")]
    assert rows[3]["normalized_throughput"] == 1.25 and rows[2]["normalized_throughput"] is None
    assert rows[4]["throughput"] == pytest.approx(1.5)
    assert rows[0]["delay"] is None


def test_jsonl_round_trip(tmp_path):
    r = rep(bits=80, delay=0.3, delivered=4)
    path = tmp_path / "r.jsonl"
    emit([r], "jsonl", path, include_aggregate=False)
    assert parse_jsonl(path) == [r]
    with pytest.raises(ValueError):
        emit([r], "xml", tmp_path / "x")


def test_unwritable_report(tmp_path):
    with pytest.raises(OSError):
        emit([rep()], "csv", tmp_path / "missing" / "r.csv")


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 10**7), st.integers(0, 10**7)), min_size=1, max_size=40))
def test_delay_is_mean_of_differences(pairs):
    delivers = [(g, g + d) for g, d in pairs]
    expect = sum(d for _, d in pairs) / len(pairs) / 1e6
    assert avg_end_to_end_delay(trace_with(delivers)) == pytest.approx(expect)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["ecr", "dcf"]), st.sampled_from([2, 10]),
                          st.integers(1, 5)), min_size=1, max_size=12, unique=True))
def test_every_group_gets_one_mean_row(keys):
    rs = [rep(p, seed=s, flows=f, bits=s) for p, f, s in keys]
    out = with_aggregates(rs)
    groups = {(p, f) for p, f, _ in keys}
    assert len(out) == len(rs) + len(groups)
    assert sum(1 for r in out if r.seed == -1) == len(groups)
