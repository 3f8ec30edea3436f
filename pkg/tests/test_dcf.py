from collections import Counter

import pytest

from ecrmac.audit import verify
from ecrmac.dcf import Dcf, run_dcf
from ecrmac.scenario import DcfParams, FlowSpec
from ecrmac.trace import records

from conftest import pair_config, replace, small_config


def hidden_config(rts_cts=True, **kw):
    # 0 and 2 both reach 1 but cannot hear each other
    cfg = pair_config(duration=3.0, interference_range=150.0,
                      dcf=DcfParams(use_rts_cts=rts_cts), **kw)
    return replace(cfg, num_nodes=3, node_positions=((0.0, 0.0), (140.0, 0.0), (280.0, 0.0)),
                   flows=(FlowSpec(0, 1, 1e6, 400.0, 0.0), FlowSpec(2, 1, 1e6, 400.0, 0.0003)))


def lost_types(recs):
    return Counter(r["data"]["type"] for r in recs if r["kind"] == "frame_lost")


def test_isolated_flow_delivers_everything():
    rep, tr = run_dcf(pair_config(duration=10.0, cbr=4.0), 1)
    assert rep.generated == 40
    assert rep.delivered_packets == 40
    assert rep.dropped == 0
    assert verify(records(tr)).ok


def test_handshake_sequence():
    _, tr = run_dcf(pair_config(duration=0.3, cbr=4.0), 1)
    kinds = [r["data"]["type"] for r in records(tr) if r["kind"] == "frame_tx"]
    assert kinds[:4] == ["RTS", "CTS", "DATA", "ACK"]


def test_hidden_terminals_collide_on_rts():
    _, tr = run_dcf(hidden_config(), 1)
    lost = lost_types(records(tr))
    assert lost["RTS"] > 0
    # the CTS silences the hidden sender, so data losses are rare
    assert lost["DATA"] <= 0.1 * lost["RTS"]


def test_without_rts_cts_data_collides():
    _, tr = run_dcf(hidden_config(rts_cts=False), 1)
    lost = lost_types(records(tr))
    assert lost["DATA"] > 0 and lost["RTS"] == 0


def test_throughput_bounded_by_channel_rate():
    rep, _ = run_dcf(replace(pair_config(duration=2.0, cbr=1000.0)), 1)
    assert 0 < rep.throughput <= 2e6


def test_contention_window_bounds():
    sim = Dcf(hidden_config(), seed=2)
    seen = set()
    orig = sim._timeout

    def spy(u, token):
        orig(u, token)
        seen.add(sim.state[u].cw)

    sim._timeout = spy
    sim.run()
    assert seen
    assert all(31 <= cw <= 1023 for cw in seen)
    assert all(31 <= s.cw <= 1023 for s in sim.state)


def test_deterministic_and_audited():
    cfg = small_config(sim_duration=2.0)
    a = list(run_dcf(cfg, 4)[1].lines())
    b = list(run_dcf(cfg, 4)[1].lines())
    assert a == b
    rep = verify(records(run_dcf(cfg, 4)[1]))
    assert rep.ok
    assert any("DCF" in n for n in rep.notes)
