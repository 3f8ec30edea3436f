"""Primary-user ON/OFF activity and per-node channel availability."""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .clock import to_us
from .scenario import PuSpec, ScenarioConfig, Topology, rng_for

STREAM_PU_TIMELINE = 100


@dataclass(frozen=True)
class PuTimeline:
    """Pre-generated ON/OFF history of one PU.

    The state is ``initial_on`` on ``[0, switch_times[0])`` and toggles at
    every switch time.  Intervals are half-open, so at a switch instant the
    new state applies.
    """

    spec: PuSpec
    initial_on: bool
    switch_times: tuple[int, ...]  # microseconds, strictly ascending

    def state_at(self, t_us: int) -> bool:
        k = bisect_right(self.switch_times, t_us)
        return self.initial_on ^ bool(k & 1)

    def states(self) -> list[tuple[int, bool]]:
        """(time, state-from-then-on) pairs, starting at t=0."""
        out = [(0, self.initial_on)]
        on = self.initial_on
        for t in self.switch_times:
            on = not on
            out.append((t, on))
        return out


def generate_timeline(spec: PuSpec, horizon_us: int, rng: np.random.Generator) -> PuTimeline:
    """Exponential ON and OFF dwell times; initial state drawn from the stationary mix."""
    if math.isinf(spec.on_mean) and math.isinf(spec.off_mean):
        raise ValueError("on_mean and off_mean cannot both be infinite")
    if math.isinf(spec.on_mean):
        return PuTimeline(spec, True, ())
    if math.isinf(spec.off_mean):
        return PuTimeline(spec, False, ())
    on = bool(rng.random() < spec.on_mean / (spec.on_mean + spec.off_mean))
    initial = on
    t = 0
    times = []
    while True:
        mean = spec.on_mean if on else spec.off_mean
        t += max(1, to_us(float(rng.exponential(mean))))
        if t > horizon_us:
            break
        times.append(t)
        on = not on
    return PuTimeline(spec, initial, tuple(times))


def generate_timelines(pus: Sequence[PuSpec], horizon_us: int, seed: int) -> tuple[PuTimeline, ...]:
    return tuple(generate_timeline(pu, horizon_us, rng_for(seed, STREAM_PU_TIMELINE + i))
                 for i, pu in enumerate(pus))


def pu_active(timeline: PuTimeline, channel: int, t_us: int) -> bool:
    return timeline.spec.channel == channel and timeline.state_at(t_us)


@dataclass(frozen=True)
class AvailabilityMap:
    """C_u for every node at one instant, plus the always-usable control channel."""

    channels: tuple[frozenset[int], ...]
    control_channel_id: int
    t_us: int = 0

    def available(self, node: int) -> frozenset[int]:
        return self.channels[node]

    def usable(self, node: int) -> frozenset[int]:
        return self.channels[node] | {self.control_channel_id}


class Spectrum:
    """Channel availability and sensing over a fixed topology."""

    def __init__(self, config: ScenarioConfig, topology: Topology,
                 timelines: Optional[Sequence[PuTimeline]] = None):
        self.config = config
        self.positions = topology.positions
        if timelines is None:
            timelines = generate_timelines(topology.pus, to_us(config.sim_duration), topology.seed)
        self.timelines = tuple(timelines)
        self.data_ids = frozenset(ch.id for ch in config.data_channels)
        n = len(self.positions)
        self.covering: list[list[int]] = [[] for _ in range(n)]
        for k, tl in enumerate(self.timelines):
            px, py = tl.spec.position
            d = np.hypot(self.positions[:, 0] - px, self.positions[:, 1] - py)
            for node in np.nonzero(d <= tl.spec.coverage)[0].tolist():
                self.covering[node].append(k)

    def available_channels(self, node: int, t_us: int) -> frozenset[int]:
        blocked = {self.timelines[k].spec.channel for k in self.covering[node]
                   if self.timelines[k].state_at(t_us)}
        return self.data_ids - blocked

    def snapshot(self, t_us: int) -> AvailabilityMap:
        active = [tl.state_at(t_us) for tl in self.timelines]
        chans = []
        for node in range(len(self.positions)):
            blocked = {self.timelines[k].spec.channel for k in self.covering[node] if active[k]}
            chans.append(self.data_ids - blocked if blocked else self.data_ids)
        return AvailabilityMap(tuple(chans), self.config.control_channel_id, t_us)

    def sense(self, node: int, channel: int, t_us: int, su_busy: bool = False,
              rng: Optional[np.random.Generator] = None, error_rate: Optional[float] = None) -> str:
        """'busy' or 'idle'; with an error rate the perfect outcome flips with that probability."""
        busy = su_busy or channel not in self.available_channels(node, t_us)
        eps = self.config.sensing_error_rate if error_rate is None else error_rate
        if eps > 0:
            if eps >= 1 or (rng is not None and rng.random() < eps):
                busy = not busy
        return "busy" if busy else "idle"


def available_channels(node: int, t_us: int, topology: Topology, config: ScenarioConfig,
                       timelines: Sequence[PuTimeline]) -> frozenset[int]:
    return Spectrum(config, topology, timelines).available_channels(node, t_us)
