"""ECR-MAC simulation: beacon intervals of ATIM negotiation, sensing and TDMA slots.

Each beacon interval runs three phases on one synchronised clock:

1. ATIM window on the control channel.  Senders contend with CSMA/CA and
   run the ATIM / ATIM-ACK / ATIM-RES handshake; the receiver picks the
   segments greedily, the sender confirms or stays silent, and every node
   that decodes an ATIM-ACK or ATIM-RES marks the announced segments as
   occupied in its own table.
2. Sensing window.  Both endpoints sense each negotiated data channel; a
   busy channel cancels that node's entries for the interval.
3. Communication window of ``num_timeslots`` slots.  A scheduled sender
   switches channel, sends up to ``packets_per_slot`` packets and the
   receiver ACKs in the same slot.  Everybody else dozes.
"""

from __future__ import annotations

import enum
import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from .clock import to_us
from .conflict import neighbor_sets
from .csma import Medium, Tx
from .energy import DOZE, IDLE, RX, TX, EnergyLedger, ModeClock, PJ_PER_J
from .events import EventQueue
from .metrics import FlowReport, MetricsReport, energy_per_packet, mean_delay
from .pu import PuTimeline, Spectrum
from .radio import reception_ok_from_distances
from .scenario import (STREAM_MAC, STREAM_SENSING, ScenarioConfig, Topology,
                       generate_topology, rng_for, validate)
from .segments import CommSegment, ScheduleTable, capacity_blocks, greedy_pick, rotated, sort_key
from .trace import Trace
from .traffic import Traffic, routes


@dataclass(frozen=True)
class SlotTiming:
    d_data: int  # microseconds
    d_ack: int
    d_guard: int

    @property
    def d_slot(self) -> int:
        return self.d_data + self.d_ack + 2 * self.d_guard

    @classmethod
    def from_config(cls, config: ScenarioConfig) -> "SlotTiming":
        return cls(to_us(config.data_slot_time), to_us(config.ack_time), to_us(config.guard_time))


class FrameKind(str, enum.Enum):
    BEACON = "Beacon"
    ATIM = "ATIM"
    ATIM_ACK = "AtimAck"
    ATIM_RES = "AtimRes"
    DATA = "Data"
    ACK = "Ack"


CONTROL_KINDS = frozenset({FrameKind.BEACON, FrameKind.ATIM, FrameKind.ATIM_ACK, FrameKind.ATIM_RES})


@dataclass(eq=False)
class Frame:
    kind: FrameKind
    src: int
    dst: int
    channel: int
    fid: int
    payload: Any = None


class Mode(enum.Enum):
    ATIM_LISTEN = "atim_listen"
    SENSING = "sensing"
    SLOT_TX = "slot_tx"
    SLOT_RX = "slot_rx"
    DOZE = "doze"
    DEAD = "dead"


@dataclass(frozen=True)
class NegotiationResult:
    link: tuple[int, int]
    segments: tuple[tuple[int, int], ...]  # (channel, timeslot)
    sender_committed: bool
    receiver_committed: bool


def rng_seed_int(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])


class _Snapshot:
    """The free-segment list carried by an ATIM frame."""

    __slots__ = ("caps", "busy", "occupied")

    def __init__(self, table: ScheduleTable):
        self.caps = table.capacities
        self.busy = frozenset(table.busy_slots)
        self.occupied = frozenset(table.occupied)

    def is_free(self, c: int, t: int) -> bool:
        return c in self.caps and t not in self.busy and (c, t) not in self.occupied


class _Handshake:
    __slots__ = ("u", "v", "demand", "attempts", "cw", "token", "awaiting", "done", "result")

    def __init__(self, u: int, v: int, demand: float, cw: int):
        self.u = u
        self.v = v
        self.demand = demand
        self.attempts = 0
        self.cw = cw
        self.token = 0
        self.awaiting = False
        self.done = False
        self.result: Optional[tuple] = None


class EcrMac:
    """One ECR-MAC run over a fixed topology and seed."""

    protocol = "ecr"

    def __init__(self, config: ScenarioConfig, topology: Optional[Topology] = None,
                 seed: Optional[int] = None, *, full_trace: bool = True,
                 doze: Optional[bool] = None, timelines: Optional[Sequence[PuTimeline]] = None):
        validate(config)
        self.config = config
        self.seed = config.rng_seed if seed is None else seed
        self.topology = topology if topology is not None else generate_topology(config, self.seed)
        self.doze = config.doze_enabled if doze is None else doze
        c = config
        pos = np.asarray(self.topology.positions, dtype=float)
        self.pos = pos
        self.n = n = len(pos)
        d = pos[:, None, :] - pos[None, :, :]
        self.dist = np.hypot(d[..., 0], d[..., 1]).tolist()
        self.nb = neighbor_sets(pos, c.tx_range)
        self.ctrl = [sorted(s) for s in neighbor_sets(pos, c.control_range)]
        self.ctrl_sense = [sorted(s) for s in neighbor_sets(pos, c.control_sense)]
        self.spectrum = Spectrum(c, self.topology, timelines)

        self.timing = SlotTiming.from_config(c)
        self.atim_us = to_us(c.atim_window)
        self.beacon_us = to_us(c.beacon_window)
        self.sense_us = to_us(c.sensing_window)
        self.slot_us = self.timing.d_slot
        self.comm_us = c.num_timeslots * self.slot_us
        self.bi_us = self.atim_us + self.sense_us + self.comm_us
        self.horizon = to_us(c.sim_duration)

        self.ctrl_id = c.control_channel_id
        self.cap = {ch.id: ch.bandwidth / c.num_timeslots for ch in c.channels}
        self.pps = {ch.id: ch.packets_per_slot for ch in c.channels}
        usable_ids = [ch.id for ch in c.data_channels]
        if c.control_data_allowed:
            usable_ids.append(self.ctrl_id)
        self.order = sorted((CommSegment(cid, t, self.cap[cid]) for cid in usable_ids
                             for t in range(c.num_timeslots)), key=sort_key(self.ctrl_id))
        self.blocks = capacity_blocks(self.order, self.ctrl_id)
        self._caps_cache: dict[frozenset, dict[int, float]] = {}

        dcf = c.dcf
        self.sifs = to_us(dcf.sifs)
        self.difs = to_us(dcf.difs)
        self.cslot = to_us(dcf.slot_time)
        self.t_atim = to_us(c.atim_bytes * 8 / c.base_rate)
        self.t_ack = to_us(c.atim_ack_bytes * 8 / c.base_rate)
        self.t_res = to_us(c.atim_res_bytes * 8 / c.base_rate)
        self.hs_total = self.t_atim + self.sifs + self.t_ack + self.sifs + self.t_res

        self.ledger = EnergyLedger(n, c.energy_model, c.initial_energy)
        self.paths = routes(pos, self.topology.flows, c.tx_range)
        self.traffic = Traffic(self.topology.flows, self.paths, n, c.queue_limit,
                               self.horizon, c.packet_size * 8)
        self.rng = random.Random(rng_seed_int(self.seed, STREAM_MAC))
        self.sense_rng = rng_for(self.seed, STREAM_SENSING)
        self.trace = Trace(full=full_trace)
        self.full = full_trace
        self.fid = 0
        self.diag: dict[str, int] = defaultdict(int)
        self.negotiations: list[list[NegotiationResult]] = []
        self._slot_skip: dict[int, int] = {}

    # -- helpers ---------------------------------------------------------

    def _next_fid(self) -> int:
        self.fid += 1
        return self.fid

    def _caps(self, chans: frozenset) -> dict[int, float]:
        caps = self._caps_cache.get(chans)
        if caps is None:
            caps = {cid: self.cap[cid] for cid in sorted(chans)}
            self._caps_cache[chans] = caps
        return caps

    def _event(self, kind: str, t: int, node: int, pkt, reason: Optional[str] = None) -> None:
        if not self.full:
            return
        if kind == "gen":
            self.trace.add(t, node, "gen", frame=pkt.id, flow=pkt.flow)
        elif kind == "deliver":
            self.trace.add(t, node, "deliver", frame=pkt.id, flow=pkt.flow, gen=pkt.gen)
        else:
            self.trace.add(t, node, "drop", frame=pkt.id, flow=pkt.flow, reason=reason)

    # -- run -------------------------------------------------------------

    def run(self) -> tuple[MetricsReport, Trace]:
        c = self.config
        tr = self.trace
        tr.add(0, None, "run_start", protocol=self.protocol, seed=self.seed,
               duration=c.sim_duration, packet_bits=c.packet_size * 8, full_trace=self.full,
               doze=self.doze, num_nodes=self.n, positions=self.pos.tolist(),
               tx_range=c.tx_range, interference_range=c.interference_range,
               control_channel=self.ctrl_id, num_timeslots=c.num_timeslots,
               beacon_interval_us=self.bi_us, atim_us=self.atim_us, slot_us=self.slot_us,
               powers_uw=list(self.ledger.powers), initial_pj=self.ledger.nodes[0].initial_pj,
               flows=[[f.source, f.destination] for f in self.topology.flows],
               pus=[{"position": list(p.position), "channel": p.channel, "coverage": p.coverage}
                    for p in self.topology.pus])
        if self.full:
            for k, tl in enumerate(self.spectrum.timelines):
                for t, on in tl.states():
                    tr.add(t, None, "pu_switch", ch=tl.spec.channel, pu=k, on=on)
        k = 0
        while (k + 1) * self.bi_us <= self.horizon:
            self._interval(k)
            k += 1
        t = k * self.bi_us
        self.traffic.admit_until(self.horizon - 1, self.ledger.alive, self._event)
        for node in range(self.n):
            self.ledger.charge(node, IDLE, self.horizon - t, self.horizon)
        self.diag["intervals"] = k
        return self._finish(), tr

    def _finish(self) -> MetricsReport:
        c = self.config
        tr = self.trace
        end = self.horizon
        for i, st in enumerate(self.ledger.nodes):
            tr.add(end, i, "energy", energy=st.remaining_j,
                   durations=list(st.durations), consumed_pj=st.consumed_pj,
                   overdraft_pj=st.overdraft_pj, dead_at=st.dead_at)
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
        delay_sum = sum(s.delay_sum_us for s in self.traffic.stats)
        self.diag["dead_nodes"] = sum(1 for s in self.ledger.nodes if s.dead_at is not None)
        diag = dict(sorted(self.diag.items()))
        report = MetricsReport(
            protocol=self.protocol, seed=self.seed, flows=len(per_flow), duration=c.sim_duration,
            generated=sum(f.generated for f in per_flow), delivered_packets=delivered,
            delivered_bits=bits, dropped=sum(f.dropped for f in per_flow),
            queued=sum(f.queued for f in per_flow), throughput=bits / c.sim_duration,
            avg_end_to_end_delay=mean_delay(delay_sum, delivered), total_energy=energy,
            per_packet_energy=energy_per_packet(energy, delivered), per_flow=tuple(per_flow),
            diagnostics=diag)
        tr.add(end, None, "run_end", delivered=delivered, energy_pj=sum(
            s.consumed_pj for s in self.ledger.nodes), diagnostics=diag)
        return report

    # -- one beacon interval -----------------------------------------------

    def _interval(self, k: int) -> None:
        t0 = k * self.bi_us
        alive = [self.ledger.alive(i) for i in range(self.n)]
        self.traffic.admit_until(t0, self.ledger.alive, self._event)
        avail = self.spectrum.snapshot(t0)
        allowed_ctrl = self.config.control_data_allowed
        tables: list[Optional[ScheduleTable]] = []
        for i in range(self.n):
            if not alive[i]:
                tables.append(None)
                continue
            chans = avail.usable(i) if allowed_ctrl else avail.available(i)
            tables.append(ScheduleTable(i, k, self.config.num_timeslots, self._caps(chans)))

        atim = _AtimWindow(self, k, t0, alive, tables)
        plan_tx, plan_rx = atim.run()
        self.negotiations.append(atim.results)
        if self.full:
            self.trace.add(t0 + self.atim_us, None, "atim_end", interval=k, clean=atim.clean,
                           negotiations=len(atim.results))
        self.diag["clean_intervals"] += atim.clean
        self._sensing_and_slots(k, t0, plan_tx, plan_rx)

    def _sensing_and_slots(self, k: int, t0: int, plan_tx: dict, plan_rx: dict) -> None:
        c = self.config
        ledger = self.ledger
        tr = self.trace
        full = self.full
        timing = self.timing
        t_sense = t0 + self.atim_us
        comm0 = t_sense + self.sense_us
        n = self.n
        tx_us = [0] * n
        rx_us = [0] * n
        idle_us = [0] * n

        # sensing: every node with entries senses each data channel it will use
        busy_nodes: dict[int, set[int]] = {}
        for node in sorted(set(plan_tx) | set(plan_rx)):
            if not ledger.alive(node):
                continue
            chans = {ch for (_, ch) in plan_tx.get(node, {}).values()}
            chans |= {ch for (_, ch) in plan_rx.get(node, {}).values()}
            rx_us[node] += self.sense_us
            busy = set()
            for ch in sorted(chans):
                if ch == self.ctrl_id:
                    continue
                res = self.spectrum.sense(node, ch, t_sense, rng=self.sense_rng)
                if full:
                    tr.add(t_sense, node, "sense", ch=ch, interval=k, result=res)
                if res == "busy":
                    busy.add(ch)
            if busy:
                busy_nodes[node] = busy
                self.diag["sense_busy"] += len(busy)
        for node, busy in busy_nodes.items():
            for table in (plan_tx, plan_rx):
                entries = table.get(node)
                if entries:
                    for t in [t for t, (_, ch) in entries.items() if ch in busy]:
                        del entries[t]

        by_slot: dict[int, list[tuple[int, int, int]]] = defaultdict(list)
        for u in sorted(plan_tx):
            for t, (v, ch) in plan_tx[u].items():
                by_slot[t].append((u, v, ch))

        traffic = self.traffic
        dist = self.dist
        nb = self.nb
        skip = self._slot_skip = {}
        g = timing.d_guard
        for s in range(c.num_timeslots):
            ts = comm0 + s * self.slot_us
            entries = by_slot.get(s)
            if not entries:
                continue
            traffic.admit_until(ts, ledger.alive, self._event)
            sending = []  # (u, v, ch, packets)
            for u, v, ch in sorted(entries):
                if not ledger.alive(u):
                    continue
                if skip.get(u, 0) > 0:
                    skip[u] -= 1
                    continue
                cap = self.pps[ch]
                pkts = []
                for p in traffic.queues[u]:
                    if traffic.next_hop(p) == v:
                        pkts.append(p)
                        if len(pkts) == cap:
                            break
                if pkts:
                    sending.append((u, v, ch, pkts))
            # receivers listening this slot (not necessarily addressed)
            for v, entries_rx in plan_rx.items():
                e = entries_rx.get(s)
                if e is not None and ledger.alive(v) and not any(x[1] == v for x in sending):
                    idle_us[v] += timing.d_data + timing.d_ack + 2 * g  # idle listening
            if not sending:
                continue
            on_ch: dict[int, list[int]] = defaultdict(list)
            for u, v, ch, _ in sending:
                on_ch[ch].append(u)
            t_data_end = ts + g + timing.d_data
            acks: list[tuple[int, int, int, list]] = []
            for u, v, ch, pkts in sending:
                tx_us[u] += timing.d_data
                rx_us[u] += timing.d_ack
                idle_us[u] += 2 * g
                listening = ledger.alive(v) and plan_rx.get(v, {}).get(s) == (u, ch)
                others = [x for x in on_ch[ch] if x != u]
                ok = False
                cause = None
                if not listening:
                    cause = "no_receiver"
                else:
                    rx_us[v] += timing.d_data
                    idle_us[v] += 2 * g
                    ok = reception_ok_from_distances(dist[u][v], [dist[x][v] for x in others], c)
                    if not ok:
                        cause = self._cause(u, v, others)
                        idle_us[v] += timing.d_ack
                if ok:
                    tx_us[v] += timing.d_ack
                    acks.append((u, v, ch, pkts))
                else:
                    self.diag["data_fail_" + cause] += 1
                    self._failed(u, pkts, t_data_end, s, ch, v, cause)
                if self.full:
                    pu_hit = self._pu_active_at(u, ch, ts)
                    tr.add(ts, u, "data_tx", ch=ch, slot=s, frame=self._next_fid(), dst=v,
                           interval=k, packets=[p.id for p in pkts], ok=ok, cause=cause,
                           sense_t=t_sense)
                    if pu_hit:
                        tr.add(ts, u, "pu_interference", ch=ch, slot=s, interval=k)
            ack_by_ch: dict[int, list[int]] = defaultdict(list)
            for u, v, ch, _ in acks:
                ack_by_ch[ch].append(v)
            for u, v, ch, pkts in acks:
                others = [y for y in ack_by_ch[ch] if y != v]
                ack_ok = reception_ok_from_distances(dist[v][u], [dist[y][u] for y in others], c)
                self.diag["data_ok"] += 1
                if ack_ok:
                    q = traffic.queues[u]
                    for p in pkts:
                        q.remove(p)
                        traffic.forward(p, t_data_end, self._event)
                    self.diag["packets_hop_ok"] += len(pkts)
                else:
                    self.diag["ack_lost"] += 1
                    self._failed(u, pkts, t_data_end, s, ch, v, "ack_lost")

        # fill: sensing window and unscheduled slots doze (or idle without doze)
        fill_mode = DOZE if self.doze else IDLE
        span = self.sense_us + self.comm_us
        t_end = t0 + self.bi_us
        for node in range(n):
            if not ledger.alive(node):
                continue
            rest = span - tx_us[node] - rx_us[node] - idle_us[node]
            ledger.charge(node, TX, tx_us[node], t_end)
            ledger.charge(node, RX, rx_us[node], t_end)
            ledger.charge(node, IDLE, idle_us[node], t_end)
            ledger.charge(node, fill_mode, rest, t_end)

    def _cause(self, u: int, v: int, others: list[int]) -> str:
        c = self.config
        if c.sinr_mode == "sinr":
            return "sinr"
        if self.dist[u][v] > c.tx_range:
            return "range"
        if any(x in self.nb[v] for x in others):
            return "collision"
        return "far_interference"

    def _failed(self, u: int, pkts, t: int, s: int, ch: int, v: int, cause: str) -> None:
        traffic = self.traffic
        limit = self.config.retry_limit
        q = traffic.queues[u]
        worst = 0
        for p in pkts:
            p.retries += 1
            worst = max(worst, p.retries)
            if p.retries >= limit:
                q.remove(p)
                traffic.drop(p, "retry_limit", t, self._event)
        self._skip_after_failure(u, worst)

    def _skip_after_failure(self, u: int, retries: int) -> None:
        # random backoff counted in the sender's remaining reserved slots
        b = self.rng.randrange(1 << min(retries, 3))
        if b:
            self._slot_skip[u] = self._slot_skip.get(u, 0) + b

    def _pu_active_at(self, node: int, ch: int, t: int) -> bool:
        for kk in self.spectrum.covering[node]:
            tl = self.spectrum.timelines[kk]
            if tl.spec.channel == ch and tl.state_at(t):
                return True
        return False


class _AtimWindow:
    """Contention and three-way handshakes of one ATIM window."""

    def __init__(self, sim: EcrMac, k: int, t0: int, alive: list[bool], tables):
        self.sim = sim
        self.k = k
        self.t0 = t0
        self.end = t0 + sim.atim_us
        self.alive = alive
        self.tables = tables
        self.eq = EventQueue(t0)
        self.clock = ModeClock(sim.ledger, t0, IDLE)
        ctrl = sim.ctrl
        self.medium = Medium(self.eq, ctrl, sim.ctrl_sense, ctrl, sim.cslot, sim.difs, sim.rng,
                             self.clock, self)
        for i, a in enumerate(alive):
            if not a:
                self.medium.alive[i] = False
        self.hs: dict[int, _Handshake] = {}
        self.pending_rx: dict[int, tuple] = {}
        self.plan_tx: dict[int, dict[int, tuple[int, int]]] = {}
        self.plan_rx: dict[int, dict[int, tuple[int, int]]] = {}
        self.results: list[NegotiationResult] = []
        self.clean = True
        self.rx_committed: dict[tuple, bool] = {}

    def run(self):
        sim = self.sim
        c = sim.config
        traffic = sim.traffic
        start = self.t0 + sim.beacon_us
        for u in range(sim.n):
            if not self.alive[u] or not traffic.queues[u]:
                continue
            head = traffic.queues[u][0]
            v = traffic.next_hop(head)
            backlog = sum(1 for p in traffic.queues[u] if traffic.next_hop(p) == v)
            demand = min(traffic.flows[head.flow].rate_requirement,
                         backlog * traffic.packet_bits * 1e6 / sim.comm_us)
            self.hs[u] = _Handshake(u, v, demand, c.atim_cw_min)
        self.eq.now = start
        for u in sorted(self.hs):
            self.medium.contend(u, c.atim_cw_min)
        self.eq.run_until(self.end)
        self.clock.flush(self.end)
        for v, pend in self.pending_rx.items():
            u, keys, _ = pend
            for ch, t in keys:
                self.tables[v].release(ch, t)
        for hs in self.hs.values():
            if hs.result is not None:
                link, keys = hs.result
                rx_ok = self.rx_committed.get(link, False)
                self.results.append(NegotiationResult(link, keys, True, rx_ok))
            elif not hs.done:
                sim.diag["atim_unfinished"] += 1
        return self.plan_tx, self.plan_rx

    # -- medium callbacks -------------------------------------------------

    def on_access(self, u: int) -> None:
        hs = self.hs.get(u)
        if hs is None or hs.done or hs.awaiting:
            return
        sim = self.sim
        now = self.eq.now
        if now + sim.hs_total > self.end:
            hs.done = True
            sim.diag["atim_deferred"] += 1
            return
        if u in self.pending_rx:
            # a response to u's own handshake as receiver is still due
            self.medium.contend(u, hs.cw)
            return
        snap = _Snapshot(self.tables[u])
        frame = Frame(FrameKind.ATIM, u, hs.v, sim.ctrl_id, sim._next_fid(), (hs.demand, snap))
        self._send(u, frame, sim.t_atim)
        hs.awaiting = True
        hs.token += 1
        self.eq.push(now + sim.t_atim + sim.sifs + sim.t_ack + sim.cslot,
                     self._ack_timeout, u, hs.token)

    def _send(self, src: int, frame: Frame, dur: int) -> Tx:
        if self.sim.full:
            self.sim.trace.add(self.eq.now, src, "ctrl_tx", ch=frame.channel, frame=frame.fid,
                               type=frame.kind.value, dst=frame.dst, interval=self.k,
                               segments=[list(x) for x in frame.payload[1]]
                               if frame.kind != FrameKind.ATIM else None)
        return self.medium.start_tx(src, frame, dur)

    def on_tx_end(self, tx: Tx) -> None:
        frame: Frame = tx.frame
        sim = self.sim
        now = self.eq.now
        alive = self.alive
        src = frame.src
        for r in sim.nb[src]:
            if alive[r] and r in tx.bad:
                self.clean = False
                break
        if frame.kind == FrameKind.ATIM:
            nav_until = now + sim.sifs + sim.t_ack + sim.sifs + sim.t_res
            for r in sim.ctrl[src]:
                if not alive[r] or r in tx.bad:
                    continue
                if r == frame.dst:
                    self._on_atim(r, frame)
                else:
                    self.medium.set_nav(r, nav_until)
        elif frame.kind == FrameKind.ATIM_ACK:
            link, keys = frame.payload
            nav_until = now + sim.sifs + sim.t_res
            for r in sim.ctrl[src]:
                if not alive[r] or r in tx.bad:
                    continue
                if r == frame.dst:
                    self._on_ack(r, frame)
                else:
                    self.tables[r].observe(link, keys)
                    self.medium.set_nav(r, nav_until)
        elif frame.kind == FrameKind.ATIM_RES:
            link, keys = frame.payload
            for r in sim.ctrl[src]:
                if not alive[r] or r in tx.bad:
                    continue
                if r == frame.dst:
                    self._on_res(r, frame)
                else:
                    self.tables[r].observe(link, keys)

    # -- handshake steps --------------------------------------------------

    def _on_atim(self, v: int, frame: Frame) -> None:
        sim = self.sim
        u = frame.src
        mine = self.hs.get(v)
        if v in self.pending_rx or (mine is not None and mine.awaiting):
            return
        if self.medium.nav[v] > self.eq.now:
            return
        demand, snap = frame.payload
        table = self.tables[v]
        link = (u, v)

        def accept(seg: CommSegment, _used) -> bool:
            ch, t = seg.channel, seg.timeslot
            return snap.is_free(ch, t) and table.is_free(ch, t)

        if sim.config.tie_break == "random":
            order = rotated(sim.blocks, sim.rng)
        else:
            order = sim.order
        picked = greedy_pick(order, demand, accept)
        if not picked:
            picked = list(getattr(picked, "partial", ()))
            if picked:
                sim.diag["atim_partial"] += 1
        if not picked:
            sim.diag["atim_no_segments"] += 1
            return
        keys = tuple(s.key for s in picked)
        for ch, t in keys:
            table.assign(link, ch, t)
        ack = Frame(FrameKind.ATIM_ACK, v, u, sim.ctrl_id, sim._next_fid(), (link, keys))
        token = sim._next_fid()
        self.pending_rx[v] = (u, keys, token)
        self.eq.push(self.eq.now + sim.sifs, self._send_response, v, ack, sim.t_ack)
        self.eq.push(self.eq.now + sim.sifs + sim.t_ack + sim.sifs + sim.t_res + sim.cslot,
                     self._res_timeout, v, token)

    def _send_response(self, src: int, frame: Frame, dur: int) -> None:
        if self.alive[src]:
            self._send(src, frame, dur)

    def _on_ack(self, u: int, frame: Frame) -> None:
        sim = self.sim
        hs = self.hs.get(u)
        link, keys = frame.payload
        if hs is None or not hs.awaiting or link != (u, hs.v):
            return
        hs.awaiting = False
        hs.token += 1
        table = self.tables[u]
        if not all(table.is_free(ch, t) for ch, t in keys):
            sim.diag["atim_rejected"] += 1
            self._retry(hs)
            return
        for ch, t in keys:
            table.assign(link, ch, t)
        hs.done = True
        hs.result = (link, keys)
        plan = self.plan_tx.setdefault(u, {})
        for ch, t in keys:
            plan[t] = (hs.v, ch)
        now = self.eq.now
        if sim.full:
            for ch, t in keys:
                sim.trace.add(now, u, "assign", ch=ch, slot=t, interval=self.k, link=list(link))
        res = Frame(FrameKind.ATIM_RES, u, hs.v, sim.ctrl_id, sim._next_fid(), (link, keys))
        self.eq.push(now + sim.sifs, self._send_response, u, res, sim.t_res)
        sim.diag["atim_success"] += 1

    def _on_res(self, v: int, frame: Frame) -> None:
        pend = self.pending_rx.get(v)
        link, keys = frame.payload
        if pend is None or pend[0] != link[0] or tuple(pend[1]) != tuple(keys):
            return
        del self.pending_rx[v]
        plan = self.plan_rx.setdefault(v, {})
        for ch, t in keys:
            plan[t] = (link[0], ch)
        self.rx_committed[link] = True

    def _ack_timeout(self, u: int, token: int) -> None:
        hs = self.hs.get(u)
        if hs is None or hs.token != token or not hs.awaiting:
            return
        hs.awaiting = False
        self.sim.diag["atim_timeout"] += 1
        self._retry(hs)

    def _res_timeout(self, v: int, token: int) -> None:
        pend = self.pending_rx.get(v)
        if pend is None or pend[2] != token:
            return
        del self.pending_rx[v]
        for ch, t in pend[1]:
            self.tables[v].release(ch, t)
        self.sim.diag["atim_res_lost"] += 1

    def _retry(self, hs: _Handshake) -> None:
        c = self.sim.config
        hs.attempts += 1
        if hs.attempts >= c.atim_max_attempts:
            hs.done = True
            self.sim.diag["atim_gave_up"] += 1
            return
        hs.cw = min(2 * hs.cw + 1, c.atim_cw_max)
        self.medium.contend(hs.u, hs.cw)


def run(config: ScenarioConfig, seed: Optional[int] = None, *, topology: Optional[Topology] = None,
        full_trace: bool = True, doze: Optional[bool] = None,
        timelines: Optional[Sequence[PuTimeline]] = None) -> tuple[MetricsReport, Trace]:
    """Simulate ECR-MAC for ``config.sim_duration`` seconds."""
    sim = EcrMac(config, topology, seed, full_trace=full_trace, doze=doze, timelines=timelines)
    return sim.run()
