import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ecrmac.pu import PuTimeline, Spectrum, available_channels, generate_timeline, pu_active
from ecrmac.scenario import PuSpec, ScenarioConfig, Topology

SPEC = PuSpec((0.0, 0.0), 3, 300.0, 2.0, 2.0)


def test_timeline_half_open():
    tl = PuTimeline(SPEC, False, (100, 250))
    assert not pu_active(tl, 3, 99)
    assert pu_active(tl, 3, 100)
    assert pu_active(tl, 3, 249)
    assert not pu_active(tl, 3, 250)
    assert not pu_active(tl, 4, 150)
    assert tl.states() == [(0, False), (100, True), (250, False)]


def test_always_on_degenerate():
    spec = PuSpec((0.0, 0.0), 3, 300.0, math.inf, 1.0)
    tl = generate_timeline(spec, 10**9, np.random.default_rng(1))
    assert all(pu_active(tl, 3, t) for t in (0, 10**6, 10**9))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_generated_timeline_ascending(seed):
    tl = generate_timeline(SPEC, 60 * 10**6, np.random.default_rng(seed))
    ts = tl.switch_times
    assert all(a < b for a, b in zip(ts, ts[1:]))
    assert all(0 < t <= 60 * 10**6 for t in ts)


def _topo(positions, pus):
    return Topology(np.asarray(positions, dtype=float), tuple(pus), (), 1)


def test_available_channels_coverage():
    cfg = ScenarioConfig(num_nodes=2)
    topo = _topo([(100.0, 0.0), (400.0, 0.0)], [SPEC])
    tl = (PuTimeline(SPEC, True, ()),)
    assert 3 not in available_channels(0, 0, topo, cfg, tl)
    assert 3 in available_channels(1, 0, topo, cfg, tl)
    assert available_channels(1, 0, topo, cfg, tl) == frozenset(range(1, 12))


def test_no_pus_all_data_channels():
    cfg = ScenarioConfig(num_nodes=1)
    spec = Spectrum(cfg, _topo([(0.0, 0.0)], []), ())
    assert spec.available_channels(0, 0) == frozenset(range(1, 12))
    snap = spec.snapshot(0)
    assert cfg.control_channel_id in snap.usable(0)


def test_sense():
    cfg = ScenarioConfig(num_nodes=1)
    spec = Spectrum(cfg, _topo([(0.0, 0.0)], [SPEC]), (PuTimeline(SPEC, True, ()),))
    assert spec.sense(0, 3, 0) == "busy"
    assert spec.sense(0, 4, 0) == "idle"
    assert spec.sense(0, 4, 0, su_busy=True) == "busy"
    assert spec.sense(0, 4, 0, error_rate=1.0) == "busy"
    assert spec.sense(0, 3, 0, error_rate=1.0) == "idle"


@settings(max_examples=100, deadline=None)
@given(st.floats(1, 500), st.floats(0, 500), st.floats(0, 600))
def test_coverage_monotone(small, extra, x):
    cfg = ScenarioConfig(num_nodes=1)
    topo = _topo([(x, 0.0)], [])
    a = PuTimeline(PuSpec((0.0, 0.0), 3, small), True, ())
    b = PuTimeline(PuSpec((0.0, 0.0), 3, small + extra), True, ())
    assert available_channels(0, 0, topo, cfg, (b,)) <= available_channels(0, 0, topo, cfg, (a,))
