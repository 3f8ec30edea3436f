"""CBR sources, static shortest-hop routes and packet queues."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from heapq import merge
from typing import Optional, Sequence

import networkx as nx
import numpy as np

from .clock import US_PER_S, to_us
from .conflict import neighbor_sets
from .scenario import FlowSpec


class Packet:
    __slots__ = ("id", "flow", "gen", "hop", "retries", "holder")

    def __init__(self, pid: int, flow: int, gen: int, holder: int):
        self.id = pid
        self.flow = flow
        self.gen = gen
        self.hop = 0  # index of holder on the route
        self.retries = 0
        self.holder = holder


def routes(positions: np.ndarray, flows: Sequence[FlowSpec], tx_range: float) -> list[Optional[list[int]]]:
    """Shortest hop-count path per flow over the tx-range graph, or None."""
    nb = neighbor_sets(np.asarray(positions, dtype=float), tx_range)
    g = nx.Graph()
    g.add_nodes_from(range(len(nb)))
    for u, ns in enumerate(nb):
        g.add_edges_from((u, v) for v in sorted(ns) if v > u)
    out = []
    for f in flows:
        try:
            out.append(nx.shortest_path(g, f.source, f.destination))
        except nx.NetworkXNoPath:
            out.append(None)
    return out


def arrival_times(flow: FlowSpec, horizon_us: int) -> list[int]:
    """CBR generation instants (microseconds) strictly before the horizon."""
    if flow.cbr_rate <= 0:
        return []
    start = to_us(flow.start_time)
    period = US_PER_S / flow.cbr_rate
    n = int(np.ceil((horizon_us - start) / period)) if horizon_us > start else 0
    times = [start + int(round(k * period)) for k in range(max(n, 0))]
    return [t for t in times if t < horizon_us]


def arrival_schedule(flows: Sequence[FlowSpec], horizon_us: int) -> list[tuple[int, int]]:
    """All (time, flow index) arrivals merged in time order, ties by flow index."""
    return list(merge(*([(t, i) for t in arrival_times(f, horizon_us)]
                        for i, f in enumerate(flows))))


@dataclass
class FlowStats:
    generated: int = 0
    delivered: int = 0
    dropped: int = 0
    delay_sum_us: int = 0
    drops_by_reason: dict[str, int] = field(default_factory=dict)


class Traffic:
    """Queues, routes and per-flow accounting shared by both MACs."""

    def __init__(self, flows: Sequence[FlowSpec], paths: Sequence[Optional[list[int]]],
                 num_nodes: int, queue_limit: int, horizon_us: int, packet_bits: int):
        self.flows = list(flows)
        self.paths = list(paths)
        self.queue_limit = queue_limit
        self.packet_bits = packet_bits
        self.queues: list[deque[Packet]] = [deque() for _ in range(num_nodes)]
        self.stats = [FlowStats() for _ in flows]
        self.arrivals = arrival_schedule(flows, horizon_us)
        self._next = 0
        self._pid = 0
        self.delivered_log: list[tuple[int, int, int, int]] = []  # (pid, flow, gen, delivered)

    def next_arrival(self) -> Optional[int]:
        return self.arrivals[self._next][0] if self._next < len(self.arrivals) else None

    def admit_until(self, t_us: int, alive, on_event=None) -> None:
        """Generate every packet with generation time <= t_us."""
        arr = self.arrivals
        while self._next < len(arr) and arr[self._next][0] <= t_us:
            gen, fi = arr[self._next]
            self._next += 1
            self._pid += 1
            src = self.flows[fi].source
            pkt = Packet(self._pid, fi, gen, src)
            st = self.stats[fi]
            st.generated += 1
            if on_event is not None:
                on_event("gen", gen, src, pkt)
            if self.paths[fi] is None:
                self.drop(pkt, "no_route", gen, on_event)
            elif not alive(src):
                self.drop(pkt, "node_dead", gen, on_event)
            elif len(self.queues[src]) >= self.queue_limit:
                self.drop(pkt, "queue", gen, on_event)
            else:
                self.queues[src].append(pkt)

    def next_hop(self, pkt: Packet) -> int:
        return self.paths[pkt.flow][pkt.hop + 1]

    def drop(self, pkt: Packet, reason: str, t_us: int, on_event=None) -> None:
        st = self.stats[pkt.flow]
        st.dropped += 1
        st.drops_by_reason[reason] = st.drops_by_reason.get(reason, 0) + 1
        if on_event is not None:
            on_event("drop", t_us, pkt.holder, pkt, reason)

    def forward(self, pkt: Packet, t_us: int, on_event=None) -> None:
        """Hand ``pkt`` (already removed from its holder's queue) to the next hop."""
        nxt = self.next_hop(pkt)
        pkt.hop += 1
        pkt.holder = nxt
        pkt.retries = 0
        if nxt == self.paths[pkt.flow][-1]:
            st = self.stats[pkt.flow]
            st.delivered += 1
            st.delay_sum_us += t_us - pkt.gen
            self.delivered_log.append((pkt.id, pkt.flow, pkt.gen, t_us))
            if on_event is not None:
                on_event("deliver", t_us, nxt, pkt)
        elif len(self.queues[nxt]) >= self.queue_limit:
            self.drop(pkt, "queue", t_us, on_event)
        else:
            self.queues[nxt].append(pkt)

    def queued(self, flow: int) -> int:
        # a forwarded packet can linger at the previous hop until its ACK arrives
        return sum(1 for node, q in enumerate(self.queues) for p in q
                   if p.flow == flow and p.holder == node)

    def conservation_problems(self) -> list[str]:
        out = []
        for i, st in enumerate(self.stats):
            q = self.queued(i)
            if st.generated != st.delivered + st.dropped + q:
                out.append(f"flow {i}: generated {st.generated} != delivered {st.delivered}"
                           f" + dropped {st.dropped} + queued {q}")
        return out
