"""Propagation, SINR and reception tests, segment capacity.

All math is in linear units; dB appears only in ``ScenarioConfig.beta``.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

from .scenario import ChannelSpec, Point, ScenarioConfig

# (transmitter position, transmit power in W)
Transmission = tuple[Point, float]


def distance(a: Sequence[float], b: Sequence[float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def channel_gain(distance: float, gain_constant: float = 1.0) -> float:
    """Path gain K / d^4."""
    if distance <= 0:
        raise ValueError("distance must be > 0 (colocated nodes are invalid)")
    return gain_constant / distance ** 4


def sinr_from_distances(d_signal: float, d_interferers: Iterable[float], config: ScenarioConfig,
                        tx_power: float | None = None,
                        interferer_powers: Iterable[float] | None = None) -> float:
    p = config.max_tx_power if tx_power is None else tx_power
    k = config.gain_constant
    signal = channel_gain(d_signal, k) * p
    d_interferers = list(d_interferers)
    if interferer_powers is None:
        powers = [config.max_tx_power] * len(d_interferers)
    else:
        powers = list(interferer_powers)
    interference = sum(channel_gain(d, k) * pw for d, pw in zip(d_interferers, powers))
    return signal / (config.noise_power + interference)


def sinr(receiver: Point, transmitter: Point, concurrent: Iterable[Transmission],
         config: ScenarioConfig, tx_power: float | None = None) -> float:
    """G_uv P_uv / (N_o + sum of G_xv P_xy over the concurrent set)."""
    concurrent = list(concurrent)
    return sinr_from_distances(
        distance(transmitter, receiver),
        [distance(pos, receiver) for pos, _ in concurrent],
        config,
        tx_power=tx_power,
        interferer_powers=[pw for _, pw in concurrent],
    )


def reception_ok_from_distances(d_signal: float, d_interferers: Sequence[float],
                                config: ScenarioConfig) -> bool:
    if config.sinr_mode == "sinr":
        return sinr_from_distances(d_signal, d_interferers, config) >= config.beta_linear
    if d_signal > config.tx_range:
        return False
    return all(d > config.interference_range for d in d_interferers)


def reception_ok(receiver: Point, transmitter: Point, concurrent: Iterable[Transmission],
                 config: ScenarioConfig) -> bool:
    """Whether ``receiver`` decodes ``transmitter`` given same-channel ``concurrent`` senders."""
    concurrent = list(concurrent)
    if config.sinr_mode == "sinr":
        return sinr(receiver, transmitter, concurrent, config) >= config.beta_linear
    return reception_ok_from_distances(
        distance(transmitter, receiver),
        [distance(pos, receiver) for pos, _ in concurrent],
        config,
    )


def segment_capacity(channel: ChannelSpec | float, num_timeslots: int) -> float:
    """alpha(c, t) = B_c / |T|."""
    if num_timeslots < 1:
        raise ValueError("num_timeslots must be >= 1")
    bw = channel.bandwidth if isinstance(channel, ChannelSpec) else float(channel)
    return bw / num_timeslots
