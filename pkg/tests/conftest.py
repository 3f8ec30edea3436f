import dataclasses

import pytest

from ecrmac.scenario import ChannelSpec, FlowSpec, ScenarioConfig, dbm_to_watts

EQUAL_CHANNELS = tuple(ChannelSpec(i, 2e6, 1) for i in range(4))

# The four-node hidden-terminal line: A - B - C - D, 100 m apart.
LINE_POSITIONS = ((0.0, 0.0), (100.0, 0.0), (200.0, 0.0), (300.0, 0.0))


def small_config(**kw) -> ScenarioConfig:
    """20 random nodes in a 400 m square, a few flows and PUs, short run."""
    base = dict(area_width=400.0, area_height=400.0, num_nodes=20, num_flows=4, num_pus=3,
                sim_duration=3.0, noise_power=dbm_to_watts(-90.0))
    base.update(kw)
    return ScenarioConfig(**base)


def line_config(**kw) -> ScenarioConfig:
    """A->B and D->C with saturating CBR on three equal data channels, no PUs."""
    base = dict(num_nodes=4, node_positions=LINE_POSITIONS, area_width=400.0, area_height=100.0,
                channels=EQUAL_CHANNELS, pu_list=(),
                flows=(FlowSpec(0, 1, 2e6, 400.0, 0.0), FlowSpec(3, 2, 2e6, 400.0, 0.0)),
                tie_break="lowest", sim_duration=0.5)
    base.update(kw)
    return ScenarioConfig(**base)


def pair_config(distance=100.0, cbr=4.0, rate=2e5, duration=5.0, **kw) -> ScenarioConfig:
    """Two nodes, one flow 0 -> 1."""
    base = dict(num_nodes=2, node_positions=((0.0, 0.0), (distance, 0.0)), area_width=400.0,
                area_height=100.0, pu_list=(), flows=(FlowSpec(0, 1, rate, cbr, 0.0),),
                sim_duration=duration)
    base.update(kw)
    return ScenarioConfig(**base)


@pytest.fixture
def small():
    return small_config()


def replace(cfg, **kw):
    return dataclasses.replace(cfg, **kw)


# One verdict line per acceptance criterion, printed after the run.
ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> bool:
    ACCEPTANCE[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
