import pytest
from hypothesis import given, settings, strategies as st

from ecrmac.energy import (DOZE, IDLE, PJ_PER_J, RX, TX, EnergyLedger, ModeClock, NodeEnergy,
                           charge_energy, power_uw)
from ecrmac.scenario import PowerTable

POWERS = power_uw(PowerTable())


def fresh(j=60.0):
    pj = int(j * PJ_PER_J)
    return NodeEnergy(pj, pj, [0, 0, 0, 0])


def test_power_table_microwatts():
    assert POWERS == (300_000, 250_000, 200_000, 10_000)


def test_doze_one_second():
    s = charge_energy(fresh(), "doze", 1_000_000, POWERS)
    assert s.consumed_pj / PJ_PER_J == pytest.approx(0.01)
    assert s.durations[DOZE] == 1_000_000


def test_zero_duration_unchanged():
    s = charge_energy(fresh(), "tx", 0, POWERS)
    assert s.consumed_pj == 0 and s.durations == [0, 0, 0, 0]
    with pytest.raises(ValueError):
        charge_energy(fresh(), "tx", -1, POWERS)


def test_death_clamps_at_zero():
    s = fresh(0.001)
    charge_energy(s, "tx", 13_334, POWERS, now_us=42)  # 0.004 J at 300 mW
    assert s.remaining_pj == 0 and not s.alive and s.dead_at == 42
    assert s.overdraft_pj > 0
    before = list(s.durations)
    charge_energy(s, "rx", 5, POWERS)
    assert s.durations == before  # dead nodes are not billed


def test_ledger_audit_exact():
    led = EnergyLedger(3, PowerTable(), 0.05)
    for node, mode, dur in [(0, TX, 7), (0, RX, 100_000), (1, IDLE, 300_000), (2, DOZE, 3)]:
        led.charge(node, mode, dur, 1)
    assert not led.charge(1, TX, 10**9, 2)
    assert led.audit() == []
    led.nodes[0].remaining_pj -= 1
    assert led.audit()


def test_mode_clock():
    led = EnergyLedger(2, PowerTable(), 60.0)
    clk = ModeClock(led, 0, IDLE)
    clk.tx_on[0] = True
    clk.touch(0, 100)
    clk.tx_on[0] = False
    clk.rx_count[1] = 1
    clk.touch(1, 50)
    clk.rx_count[1] = 0
    clk.flush(200)
    assert led.nodes[0].durations == [100, 0, 100, 0]
    assert led.nodes[1].durations == [0, 50, 150, 0]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([TX, RX, IDLE, DOZE]), st.integers(0, 50_000_000)),
                max_size=30),
       st.floats(0.001, 60.0))
def test_audit_identity(charges, joules):
    led = EnergyLedger(1, PowerTable(), joules)
    for t, (mode, dur) in enumerate(charges):
        led.charge(0, mode, dur, t)
    assert led.audit() == []
    s = led.nodes[0]
    assert s.remaining_pj >= 0
    assert s.consumed_pj <= s.initial_pj
