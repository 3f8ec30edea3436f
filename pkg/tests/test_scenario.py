import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ecrmac.scenario import (ChannelSpec, FlowSpec, PuSpec, ScenarioConfig, ScenarioError,
                             config_from_dict, config_to_dict, dbm_to_watts, default_scenario,
                             generate_topology, load_scenario, rng_for, sample_demand,
                             save_scenario, validate)


def test_evaluation_defaults():
    c = default_scenario()
    assert c.num_nodes == 80
    assert (c.area_width, c.area_height) == (1000.0, 1000.0)
    assert c.num_timeslots == 20
    assert c.atim_window == pytest.approx(0.020)
    assert len(c.channels) == 12 and len(c.data_channels) == 11
    assert c.channel(c.control_channel_id).bandwidth == 2e6
    groups = sorted((ch.bandwidth, ch.packets_per_slot) for ch in c.data_channels)
    assert groups == [(2e6, 1)] * 3 + [(5.5e6, 3)] * 4 + [(11e6, 5)] * 4
    assert (c.tx_range, c.interference_range, c.control_range) == (150.0, 300.0, 200.0)
    assert c.initial_energy == 60.0
    assert c.switching_delay == pytest.approx(40e-6)
    assert c.num_pus == 5 and c.pu_coverage == 300.0
    assert c.max_tx_power == 0.3
    assert c.beta == 10.0
    assert c.noise_power == pytest.approx(1e-12, rel=1e-12)
    assert c.packet_size == 1000 and c.cbr_rate == 4.0 and c.sim_duration == 500.0
    validate(c)


def test_dbm_conversion():
    # -90 dBm = 10^-9 mW = 10^-12 W
    assert dbm_to_watts(-90.0) == pytest.approx(1e-12, rel=1e-12)
    assert dbm_to_watts(30.0) == pytest.approx(1.0)


def test_beacon_interval_tiles_windows():
    c = default_scenario()
    # D_data = (1000 + 24) bytes at 2 Mbps = 4.096 ms; slot = 4.096 + 0.2 + 2 * 0.06 ms
    assert c.data_slot_time == pytest.approx(4.096e-3)
    assert c.slot_time == pytest.approx(4.416e-3)
    assert c.beacon_interval == pytest.approx(0.020 + 0.002 + 20 * 4.416e-3)


def test_topology_deterministic():
    c = default_scenario(10)
    a = generate_topology(c, 1)
    b = generate_topology(c, 1)
    assert a == b
    assert not np.array_equal(a.positions, generate_topology(c, 2).positions)


def test_fixed_positions_pass_through():
    pts = ((0.0, 0.0), (50.0, 0.0), (100.0, 0.0))
    c = ScenarioConfig(num_nodes=3, node_positions=pts, num_flows=1, num_pus=0)
    for seed in (1, 7):
        topo = generate_topology(c, seed)
        assert topo.positions.tolist() == [list(p) for p in pts]


def test_random_flows_nested_and_disjoint():
    big = generate_topology(default_scenario(30), 4).flows
    small = generate_topology(default_scenario(10), 4).flows
    assert big[:10] == small
    ends = [n for f in big for n in (f.source, f.destination)]
    assert len(ends) == len(set(ends))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_demand_within_bounds(seed):
    c = default_scenario()
    r = sample_demand(c, rng_for(seed, 0))
    assert 0.1 * 2e6 <= r <= 0.6 * 2e6


def test_save_load_round_trip(tmp_path):
    c = default_scenario()
    save_scenario(c, tmp_path / "s.yaml")
    assert load_scenario(tmp_path / "s.yaml") == c
    fixed = ScenarioConfig(num_nodes=2, node_positions=((0.0, 0.0), (10.0, 5.0)),
                           pu_list=(PuSpec((3.0, 4.0), 2, 100.0, 1.0, math.inf),),
                           flows=(FlowSpec(0, 1, 2e5, 4.0, 0.5),), control_sense_range=250.0)
    save_scenario(fixed, tmp_path / "f.yaml")
    assert load_scenario(tmp_path / "f.yaml") == fixed


def test_zero_timeslots_names_field(tmp_path):
    d = config_to_dict(default_scenario())
    d["num_timeslots"] = 0
    with pytest.raises(ScenarioError) as e:
        config_from_dict(d)
    assert "num_timeslots" in e.value.fields


def test_missing_control_channel():
    with pytest.raises(ScenarioError) as e:
        validate(ScenarioConfig(channels=(ChannelSpec(1, 2e6), ChannelSpec(2, 2e6))))
    assert "control_channel_id" in e.value.fields


def test_parse_error_reports_line(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("format_version: 1\nnum_nodes: [1,\n")
    with pytest.raises(ScenarioError) as e:
        load_scenario(p)
    assert "line" in str(e.value)


def test_type_errors_are_field_level():
    d = config_to_dict(default_scenario())
    d["num_nodes"] = "eighty"
    d["bogus"] = 1
    with pytest.raises(ScenarioError) as e:
        config_from_dict(d)
    assert set(e.value.fields) >= {"num_nodes", "bogus"}


@pytest.mark.parametrize("kw, field", [
    (dict(flows=(FlowSpec(1, 1, 1e5),)), "flows"),
    (dict(flows=(FlowSpec(0, 99, 1e5),)), "flows"),
    (dict(pu_list=(PuSpec((0.0, 0.0), 0),)), "pu_list"),
    (dict(tx_range=0.0), "tx_range"),
    (dict(sensing_error_rate=1.5), "sensing_error_rate"),
    (dict(area_width=0.0), "area_width"),
])
def test_invariant_violations(kw, field):
    with pytest.raises(ScenarioError) as e:
        validate(ScenarioConfig(**kw))
    assert field in e.value.fields


def test_too_many_flows_for_topology():
    c = ScenarioConfig(num_nodes=4, area_width=5000, area_height=5000, num_flows=2, num_pus=0)
    with pytest.raises(ScenarioError):
        generate_topology(c, 1)
