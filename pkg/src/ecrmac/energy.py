"""Exact per-node energy bookkeeping.

Durations are integer microseconds and powers integer microwatts, so every
charge is an integer number of picojoules and the audit identity

    initial - remaining == sum(duration[mode] * power[mode]) - overdraft

holds exactly.  ``overdraft`` is the unpaid part of the charge that took a
node to zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .scenario import PowerTable

TX, RX, IDLE, DOZE = 0, 1, 2, 3
MODES = ("tx", "rx", "idle", "doze")
MODE_INDEX = {m: i for i, m in enumerate(MODES)}
PJ_PER_J = 10 ** 12


def power_uw(table: PowerTable) -> tuple[int, int, int, int]:
    return tuple(int(round(p * 1e6)) for p in (table.p_tx, table.p_rx, table.p_idle, table.p_doze))


@dataclass
class NodeEnergy:
    initial_pj: int
    remaining_pj: int
    durations: list[int]
    overdraft_pj: int = 0
    dead_at: Optional[int] = None

    @property
    def alive(self) -> bool:
        return self.dead_at is None

    @property
    def consumed_pj(self) -> int:
        return self.initial_pj - self.remaining_pj

    @property
    def remaining_j(self) -> float:
        return self.remaining_pj / PJ_PER_J


def charge_energy(state: NodeEnergy, mode: str | int, duration_us: int, powers,
                  now_us: int = 0) -> NodeEnergy:
    """Debit ``power(mode) * duration`` from ``state``; the node dies at zero."""
    if duration_us < 0:
        raise ValueError("duration must be >= 0")
    if not state.alive or duration_us == 0:
        return state
    m = MODE_INDEX[mode] if isinstance(mode, str) else mode
    cost = powers[m] * duration_us
    state.durations[m] += duration_us
    if cost >= state.remaining_pj:
        state.overdraft_pj += cost - state.remaining_pj
        state.remaining_pj = 0
        state.dead_at = now_us
    else:
        state.remaining_pj -= cost
    return state


class EnergyLedger:
    def __init__(self, num_nodes: int, table: PowerTable, initial_j: float):
        self.powers = power_uw(table)
        init = int(round(initial_j * PJ_PER_J))
        self.nodes = [NodeEnergy(init, init, [0, 0, 0, 0]) for _ in range(num_nodes)]

    def alive(self, node: int) -> bool:
        return self.nodes[node].dead_at is None

    def charge(self, node: int, mode: int, duration_us: int, now_us: int = 0) -> bool:
        """Charge and report whether the node is still alive afterwards."""
        st = self.nodes[node]
        if st.dead_at is not None:
            return False
        if duration_us <= 0:
            return True
        cost = self.powers[mode] * duration_us
        st.durations[mode] += duration_us
        if cost >= st.remaining_pj:
            st.overdraft_pj += cost - st.remaining_pj
            st.remaining_pj = 0
            st.dead_at = now_us
            return False
        st.remaining_pj -= cost
        return True

    def total_consumed_j(self) -> float:
        return sum(s.consumed_pj for s in self.nodes) / PJ_PER_J

    def audit(self) -> list[str]:
        problems = []
        for i, s in enumerate(self.nodes):
            billed = sum(d * p for d, p in zip(s.durations, self.powers)) - s.overdraft_pj
            if billed != s.consumed_pj:
                problems.append(f"node {i}: consumed {s.consumed_pj} pJ but modes bill {billed} pJ")
            if s.remaining_pj < 0:
                problems.append(f"node {i}: negative energy")
        return problems


class ModeClock:
    """Tracks tx/rx/base modes of nodes on a shared medium.

    Elapsed time is accumulated per mode and billed to the ledger on
    :meth:`flush`, so a node can only die at a flush.
    """

    def __init__(self, ledger: EnergyLedger, now: int, base_mode: int = IDLE):
        n = len(ledger.nodes)
        self.ledger = ledger
        self.last = [now] * n
        self.tx_on = [False] * n
        self.rx_count = [0] * n
        self.base = base_mode
        self.acc = [[0] * n for _ in MODES]

    def touch(self, node: int, now: int) -> None:
        dt = now - self.last[node]
        if dt:
            if self.tx_on[node]:
                self.acc[TX][node] += dt
            elif self.rx_count[node]:
                self.acc[RX][node] += dt
            else:
                self.acc[self.base][node] += dt
            self.last[node] = now

    def flush(self, now: int) -> None:
        ledger = self.ledger
        acc = self.acc
        for node in range(len(self.last)):
            self.touch(node, now)
            for mode in (TX, RX, IDLE, DOZE):
                if acc[mode][node]:
                    ledger.charge(node, mode, acc[mode][node], now)
                    acc[mode][node] = 0
