"""Single-channel 802.11 DCF baseline (RTS/CTS/DATA/ACK, binary exponential backoff)."""

from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .clock import to_us
from .conflict import neighbor_sets
from .csma import Medium, Tx
from .energy import IDLE, PJ_PER_J, EnergyLedger, ModeClock
from .engine import rng_seed_int
from .events import EventQueue
from .metrics import FlowReport, MetricsReport, energy_per_packet, mean_delay
from .scenario import STREAM_DCF, ScenarioConfig, Topology, generate_topology, validate
from .trace import Trace
from .traffic import Packet, Traffic, routes

DEATH_CHECK_US = 1_000_000


@dataclass
class DcfState:
    """Per-node contention state; NAV lives in the shared medium."""

    cw: int
    retries: int = 0
    pkt: Optional[Packet] = None  # packet of the exchange in progress
    dst: int = -1
    token: int = 0
    awaiting: Optional[str] = None  # "CTS" or "ACK"


class _F:
    __slots__ = ("kind", "src", "dst", "pkt", "fid", "nav_end")

    def __init__(self, kind, src, dst, pkt, fid, nav_end):
        self.kind = kind
        self.src = src
        self.dst = dst
        self.pkt = pkt
        self.fid = fid
        self.nav_end = nav_end


class Dcf:
    protocol = "dcf"

    def __init__(self, config: ScenarioConfig, topology: Optional[Topology] = None,
                 seed: Optional[int] = None, *, full_trace: bool = True):
        validate(config)
        c = config
        self.config = c
        self.seed = c.rng_seed if seed is None else seed
        self.topology = topology if topology is not None else generate_topology(c, self.seed)
        pos = np.asarray(self.topology.positions, dtype=float)
        self.pos = pos
        self.n = n = len(pos)
        decode = [sorted(s) for s in neighbor_sets(pos, c.tx_range)]
        sense = [sorted(s) for s in neighbor_sets(pos, max(c.interference_range, c.tx_range))]
        p = c.dcf
        self.p = p
        self.sifs = to_us(p.sifs)
        self.slot = to_us(p.slot_time)
        self.t_rts = to_us(p.rts_bytes * 8 / p.rate)
        self.t_cts = to_us(p.cts_bytes * 8 / p.rate)
        self.t_ack = to_us(p.ack_bytes * 8 / p.rate)
        self.t_data = to_us((c.packet_size + c.mac_header_bytes) * 8 / p.rate)
        self.horizon = to_us(c.sim_duration)
        self.eq = EventQueue(0)
        self.ledger = EnergyLedger(n, c.energy_model, c.initial_energy)
        self.clock = ModeClock(self.ledger, 0, IDLE)
        self.rng = random.Random(rng_seed_int(self.seed, STREAM_DCF))
        self.medium = Medium(self.eq, decode, sense, sense, self.slot, to_us(p.difs), self.rng,
                             self.clock, self)
        self.decode = decode
        self.paths = routes(pos, self.topology.flows, c.tx_range)
        self.traffic = Traffic(self.topology.flows, self.paths, n, c.queue_limit,
                               self.horizon, c.packet_size * 8)
        self.state = [DcfState(p.cw_min) for _ in range(n)]
        self.trace = Trace(full=full_trace)
        self.full = full_trace
        self.fid = 0
        self.diag: dict[str, int] = defaultdict(int)

    def _next_fid(self) -> int:
        self.fid += 1
        return self.fid

    def _event(self, kind: str, t: int, node: int, pkt, reason: Optional[str] = None) -> None:
        if not self.full:
            return
        if kind == "gen":
            self.trace.add(t, node, "gen", frame=pkt.id, flow=pkt.flow)
        elif kind == "deliver":
            self.trace.add(t, node, "deliver", frame=pkt.id, flow=pkt.flow, gen=pkt.gen)
        else:
            self.trace.add(t, node, "drop", frame=pkt.id, flow=pkt.flow, reason=reason)

    # -- run ---------------------------------------------------------------

    def run(self) -> tuple[MetricsReport, Trace]:
        c = self.config
        self.trace.add(0, None, "run_start", protocol=self.protocol, seed=self.seed,
                       duration=c.sim_duration, packet_bits=c.packet_size * 8,
                       full_trace=self.full, num_nodes=self.n, positions=self.pos.tolist(),
                       tx_range=c.tx_range, interference_range=c.interference_range,
                       powers_uw=list(self.ledger.powers),
                       initial_pj=self.ledger.nodes[0].initial_pj,
                       flows=[[f.source, f.destination] for f in self.topology.flows], pus=[])
        first = self.traffic.next_arrival()
        if first is not None:
            self.eq.push(first, self._arrivals)
        self.eq.push(min(DEATH_CHECK_US, self.horizon), self._death_check)
        # events at the horizon itself are outside the run
        self.eq.run_until(self.horizon - 1)
        self.eq.now = self.horizon
        self.clock.flush(self.horizon)
        return self._finish(), self.trace

    def _arrivals(self) -> None:
        now = self.eq.now
        before = [len(q) for q in self.traffic.queues]
        self.traffic.admit_until(now, self.ledger.alive, self._event)
        for u, q in enumerate(self.traffic.queues):
            if len(q) > before[u]:
                self._kick(u)
        nxt = self.traffic.next_arrival()
        if nxt is not None and nxt < self.horizon:
            self.eq.push(nxt, self._arrivals)

    def _death_check(self) -> None:
        now = self.eq.now
        self.clock.flush(now)
        for i in range(self.n):
            if self.medium.alive[i] and not self.ledger.alive(i):
                self.medium.kill(i)
                self.state[i].awaiting = None
                self.state[i].token += 1
        if now + DEATH_CHECK_US < self.horizon:
            self.eq.push(now + DEATH_CHECK_US, self._death_check)

    def _kick(self, u: int) -> None:
        st = self.state[u]
        if st.awaiting is None and st.pkt is None and self.traffic.queues[u] \
                and not self.medium.contending(u):
            self.medium.contend(u, st.cw)

    # -- medium callbacks --------------------------------------------------

    def on_access(self, u: int) -> None:
        st = self.state[u]
        q = self.traffic.queues[u]
        if st.awaiting is not None:
            return
        if st.pkt is None:
            while q and q[0].holder != u:
                q.popleft()  # already forwarded; the ACK went missing
            if not q:
                return
            st.pkt = q[0]
            st.dst = self.traffic.next_hop(st.pkt)
        now = self.eq.now
        if self.p.use_rts_cts:
            nav_end = now + self.t_rts + 3 * self.sifs + self.t_cts + self.t_data + self.t_ack
            self._send(u, _F("RTS", u, st.dst, st.pkt, self._next_fid(), nav_end), self.t_rts)
            self._await(u, "CTS", now + self.t_rts + self.sifs + self.t_cts + self.slot)
        else:
            self._send_data(u)

    def _await(self, u: int, what: str, deadline: int) -> None:
        st = self.state[u]
        st.awaiting = what
        st.token += 1
        self.eq.push(deadline, self._timeout, u, st.token)

    def _send(self, src: int, f: _F, dur: int) -> None:
        if not self.medium.alive[src]:
            return
        if self.full:
            self.trace.add(self.eq.now, src, "frame_tx", ch=0, frame=f.fid, type=f.kind,
                           dst=f.dst, packet=f.pkt.id if f.pkt is not None else None)
        self.medium.start_tx(src, f, dur)

    def _send_data(self, u: int) -> None:
        st = self.state[u]
        now = self.eq.now
        f = _F("DATA", u, st.dst, st.pkt, self._next_fid(), now + self.t_data + self.sifs + self.t_ack)
        self._send(u, f, self.t_data)
        self._await(u, "ACK", now + self.t_data + self.sifs + self.t_ack + self.slot)

    def on_tx_end(self, tx: Tx) -> None:
        f: _F = tx.frame
        now = self.eq.now
        medium = self.medium
        if f.dst in tx.bad and medium.alive[f.dst]:
            self.diag["lost_" + f.kind] += 1
            if self.full:
                self.trace.add(now, f.dst, "frame_lost", ch=0, frame=f.fid, type=f.kind, src=f.src)
        for r in self.decode[f.src]:
            if r in tx.bad or not medium.alive[r]:
                continue
            if r != f.dst:
                if f.kind in ("RTS", "CTS"):
                    medium.set_nav(r, f.nav_end)
                continue
            if f.kind == "RTS":
                if medium.nav[r] <= now and self.state[r].awaiting is None:
                    cts = _F("CTS", r, f.src, f.pkt, self._next_fid(),
                             f.nav_end)
                    self.eq.push(now + self.sifs, self._respond, r, cts, self.t_cts)
            elif f.kind == "CTS":
                st = self.state[r]
                if st.awaiting == "CTS" and st.pkt is f.pkt:
                    st.awaiting = None
                    st.token += 1
                    self.eq.push(now + self.sifs, self._data_after_cts, r, st.token)
            elif f.kind == "DATA":
                pkt = f.pkt
                if pkt.holder == f.src:
                    self.traffic.forward(pkt, now, self._event)
                    if pkt.hop < len(self.paths[pkt.flow]) - 1:
                        self._kick(r)
                else:
                    self.diag["duplicate_data"] += 1
                ack = _F("ACK", r, f.src, pkt, self._next_fid(), now + self.sifs + self.t_ack)
                self.eq.push(now + self.sifs, self._respond, r, ack, self.t_ack)
            elif f.kind == "ACK":
                st = self.state[r]
                if st.awaiting == "ACK" and st.pkt is f.pkt:
                    st.awaiting = None
                    st.token += 1
                    self._done(r)

    def _respond(self, src: int, f: _F, dur: int) -> None:
        if self.medium.tx_cur[src] is None:
            self._send(src, f, dur)

    def _data_after_cts(self, u: int, token: int) -> None:
        st = self.state[u]
        if st.token == token and st.pkt is not None and self.medium.alive[u]:
            self._send_data(u)

    def _done(self, u: int) -> None:
        st = self.state[u]
        q = self.traffic.queues[u]
        if q and q[0] is st.pkt:
            q.popleft()
        elif st.pkt in q:
            q.remove(st.pkt)
        st.pkt = None
        st.retries = 0
        st.cw = self.p.cw_min
        self.diag["exchanges_ok"] += 1
        self._post_backoff(u)

    def _post_backoff(self, u: int) -> None:
        if self.traffic.queues[u]:
            self.medium.contend(u, self.state[u].cw)

    def _timeout(self, u: int, token: int) -> None:
        st = self.state[u]
        if st.token != token or st.awaiting is None:
            return
        self.diag["timeout_" + st.awaiting] += 1
        st.awaiting = None
        st.retries += 1
        if st.retries >= self.config.retry_limit:
            pkt = st.pkt
            q = self.traffic.queues[u]
            if pkt in q:
                q.remove(pkt)
            if pkt.holder == u:
                self.traffic.drop(pkt, "retry_limit", self.eq.now, self._event)
            st.pkt = None
            st.retries = 0
            st.cw = self.p.cw_min
        else:
            st.cw = min(2 * st.cw + 1, self.p.cw_max)
        self._post_backoff(u)

    # -- report --------------------------------------------------------------

    def _finish(self) -> MetricsReport:
        c = self.config
        tr = self.trace
        end = self.horizon
        for i, st in enumerate(self.ledger.nodes):
            tr.add(end, i, "energy", energy=st.remaining_j, durations=list(st.durations),
                   consumed_pj=st.consumed_pj, overdraft_pj=st.overdraft_pj, dead_at=st.dead_at)
        per_flow = []
        for i, f in enumerate(self.topology.flows):
            st = self.traffic.stats[i]
            q = self.traffic.queued(i)
            tr.add(end, None, "flow_summary", flow=i, source=f.source, destination=f.destination,
                   generated=st.generated, delivered=st.delivered, dropped=st.dropped, queued=q,
                   delay_sum_us=st.delay_sum_us, drops=dict(sorted(st.drops_by_reason.items())))
            per_flow.append(FlowReport(i, f.source, f.destination, st.generated, st.delivered,
                                       st.dropped, q, mean_delay(st.delay_sum_us, st.delivered)))
        delivered = sum(f.delivered for f in per_flow)
        bits = delivered * c.packet_size * 8
        energy = sum(s.consumed_pj for s in self.ledger.nodes) / PJ_PER_J
        self.diag["dead_nodes"] = sum(1 for s in self.ledger.nodes if s.dead_at is not None)
        diag = dict(sorted(self.diag.items()))
        report = MetricsReport(
            protocol=self.protocol, seed=self.seed, flows=len(per_flow), duration=c.sim_duration,
            generated=sum(f.generated for f in per_flow), delivered_packets=delivered,
            delivered_bits=bits, dropped=sum(f.dropped for f in per_flow),
            queued=sum(f.queued for f in per_flow), throughput=bits / c.sim_duration,
            avg_end_to_end_delay=mean_delay(sum(s.delay_sum_us for s in self.traffic.stats), delivered),
            total_energy=energy, per_packet_energy=energy_per_packet(energy, delivered),
            per_flow=tuple(per_flow), diagnostics=diag)
        tr.add(end, None, "run_end", delivered=delivered,
               energy_pj=sum(s.consumed_pj for s in self.ledger.nodes), diagnostics=diag)
        return report


def run_dcf(config: ScenarioConfig, seed: Optional[int] = None, *,
            topology: Optional[Topology] = None, full_trace: bool = True) -> tuple[MetricsReport, Trace]:
    """Simulate the single-channel DCF baseline on the same scenario."""
    return Dcf(config, topology, seed, full_trace=full_trace).run()
