"""Scenario definition, validation, random generation and file I/O.

All randomness in a run flows from ``ScenarioConfig.rng_seed`` (or the seed
passed explicitly to :func:`generate_topology`).  Every random stream is a
separate ``numpy.random.Generator`` keyed by ``(seed, stream_id)`` so adding
draws to one stream never perturbs another.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import networkx as nx
import numpy as np
import yaml

FORMAT_VERSION = 1

# Independent RNG stream ids.
STREAM_TOPOLOGY = 1
STREAM_PU = 2
STREAM_TRAFFIC = 3
STREAM_MAC = 4
STREAM_SENSING = 5
STREAM_DCF = 6

Point = tuple[float, float]


class ScenarioError(ValueError):
    """Invalid or unreadable scenario.

    ``problems`` is a list of ``(field, message)`` pairs.
    """

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = list(problems)
        text = "; ".join(f"{f}: {m}" for f, m in self.problems)
        super().__init__(text)

    @property
    def fields(self) -> list[str]:
        return [f for f, _ in self.problems]


@dataclass(frozen=True)
class ChannelSpec:
    id: int
    bandwidth: float  # bits/s
    packets_per_slot: int = 1


@dataclass(frozen=True)
class FlowSpec:
    source: int
    destination: int
    rate_requirement: float  # bits/s, r(z)
    cbr_rate: float = 4.0  # packets/s
    start_time: float = 0.0  # s


@dataclass(frozen=True)
class PuSpec:
    position: Point
    channel: int
    coverage: float = 300.0
    on_mean: float = 2.0
    off_mean: float = 2.0


@dataclass(frozen=True)
class PowerTable:
    """Radio power draw per mode, in watts."""

    p_tx: float = 0.300
    p_rx: float = 0.250
    p_idle: float = 0.200
    p_doze: float = 0.010


@dataclass(frozen=True)
class DcfParams:
    """802.11 DCF timing used by the baseline and by ATIM-window contention."""

    slot_time: float = 20e-6
    sifs: float = 10e-6
    difs: float = 50e-6
    cw_min: int = 31
    cw_max: int = 1023
    rts_bytes: int = 20
    cts_bytes: int = 14
    ack_bytes: int = 14
    rate: float = 2e6
    use_rts_cts: bool = True


def _default_channels() -> tuple[ChannelSpec, ...]:
    chans = [ChannelSpec(0, 2e6, 1)]
    groups = [(3, 2e6, 1), (4, 5.5e6, 3), (4, 11e6, 5)]
    cid = 1
    for count, bw, pps in groups:
        for _ in range(count):
            chans.append(ChannelSpec(cid, bw, pps))
            cid += 1
    return tuple(chans)


@dataclass(frozen=True)
class ScenarioConfig:
    # topology
    area_width: float = 1000.0
    area_height: float = 1000.0
    num_nodes: int = 80
    node_positions: Optional[tuple[Point, ...]] = None  # None -> random
    # spectrum
    channels: tuple[ChannelSpec, ...] = field(default_factory=_default_channels)
    control_channel_id: int = 0
    control_data_allowed: bool = True
    # beacon interval structure (seconds)
    num_timeslots: int = 20
    atim_window: float = 0.020
    beacon_window: float = 0.001
    sensing_window: float = 0.002
    guard_time: float = 60e-6
    ack_time: float = 200e-6
    switching_delay: float = 40e-6
    base_rate: float = 2e6
    mac_header_bytes: int = 24
    # ranges (m)
    tx_range: float = 150.0
    interference_range: float = 300.0
    control_range: float = 200.0
    control_sense_range: Optional[float] = None  # None -> max(control, interference range)
    # primary users
    pu_list: Optional[tuple[PuSpec, ...]] = None  # None -> random
    num_pus: int = 5
    pu_coverage: float = 300.0
    pu_on_mean: float = 2.0
    pu_off_mean: float = 2.0
    # traffic
    flows: Optional[tuple[FlowSpec, ...]] = None  # None -> random
    num_flows: int = 10
    cbr_rate: float = 4.0
    flow_start_window: float = 1.0
    demand_bandwidth: float = 2e6
    demand_low: float = 0.1
    demand_high: float = 0.6
    packet_size: int = 1000
    queue_limit: int = 50
    sim_duration: float = 500.0
    retry_limit: int = 7
    # ATIM contention
    atim_bytes: int = 40
    atim_ack_bytes: int = 40
    atim_res_bytes: int = 32
    atim_cw_min: int = 15
    atim_cw_max: int = 255
    atim_max_attempts: int = 7
    tie_break: str = "random"  # "random" | "lowest" among equal-capacity segments
    # energy
    energy_model: PowerTable = field(default_factory=PowerTable)
    initial_energy: float = 60.0
    doze_enabled: bool = True
    # physical layer
    sinr_mode: str = "protocol"  # "protocol" | "sinr"
    beta: float = 10.0  # dB
    noise_power: float = 1e-12  # W
    max_tx_power: float = 0.3  # W
    gain_constant: float = 1.0
    sensing_error_rate: float = 0.0
    dcf: DcfParams = field(default_factory=DcfParams)
    rng_seed: int = 1

    # -- derived quantities -------------------------------------------------
    @property
    def data_slot_time(self) -> float:
        """D_data: one packet plus MAC header at the base rate."""
        return (self.packet_size + self.mac_header_bytes) * 8 / self.base_rate

    @property
    def slot_time(self) -> float:
        return self.data_slot_time + self.ack_time + 2 * self.guard_time

    @property
    def communication_window(self) -> float:
        return self.num_timeslots * self.slot_time

    @property
    def beacon_interval(self) -> float:
        return self.atim_window + self.sensing_window + self.communication_window

    @property
    def control_sense(self) -> float:
        if self.control_sense_range is not None:
            return self.control_sense_range
        return max(self.control_range, self.interference_range)

    @property
    def beta_linear(self) -> float:
        return 10 ** (self.beta / 10)

    @property
    def data_channels(self) -> tuple[ChannelSpec, ...]:
        return tuple(c for c in self.channels if c.id != self.control_channel_id)

    def channel(self, cid: int) -> ChannelSpec:
        for c in self.channels:
            if c.id == cid:
                return c
        raise KeyError(cid)


def dbm_to_watts(dbm: float) -> float:
    return 10 ** (dbm / 10) / 1000.0


def db_to_linear(db: float) -> float:
    return 10 ** (db / 10)


def linear_to_db(x: float) -> float:
    return 10 * math.log10(x)


def default_scenario(num_flows: int = 30) -> ScenarioConfig:
    """The evaluation setup: 80 nodes, 12 channels, 5 PUs, 500 s."""
    return ScenarioConfig(num_flows=num_flows, noise_power=dbm_to_watts(-90.0))


# -- validation -------------------------------------------------------------

def validate(config: ScenarioConfig) -> ScenarioConfig:
    """Return ``config`` unchanged or raise :class:`ScenarioError`."""
    p: list[tuple[str, str]] = []
    c = config
    if not (c.area_width > 0 and c.area_height > 0):
        p.append(("area_width", "area must have positive width and height"))
    if c.num_nodes < 1:
        p.append(("num_nodes", "must be >= 1"))
    if c.node_positions is not None:
        if len(c.node_positions) != c.num_nodes:
            p.append(("node_positions", f"expected {c.num_nodes} positions, got {len(c.node_positions)}"))
    ids = [ch.id for ch in c.channels]
    if len(set(ids)) != len(ids):
        p.append(("channels", "duplicate channel ids"))
    if ids.count(c.control_channel_id) != 1:
        p.append(("control_channel_id", "exactly one channel must be the control channel"))
    for ch in c.channels:
        if not ch.bandwidth > 0:
            p.append(("channels", f"channel {ch.id}: bandwidth must be > 0"))
        if ch.packets_per_slot < 1:
            p.append(("channels", f"channel {ch.id}: packets_per_slot must be >= 1"))
    if c.num_timeslots < 1:
        p.append(("num_timeslots", "must be >= 1"))
    for name in ("tx_range", "interference_range", "control_range"):
        if not getattr(c, name) > 0:
            p.append((name, "must be > 0"))
    if c.interference_range < c.tx_range:
        p.append(("interference_range", "must be >= tx_range"))
    for name in ("atim_window", "sensing_window", "guard_time", "ack_time",
                 "sim_duration", "base_rate", "initial_energy"):
        if not getattr(c, name) > 0:
            p.append((name, "must be > 0"))
    if not 0 <= c.beacon_window < c.atim_window:
        p.append(("beacon_window", "must lie inside the ATIM window"))
    if c.switching_delay < 0 or c.switching_delay > c.guard_time:
        p.append(("switching_delay", "must fit inside guard_time"))
    if c.packet_size < 1:
        p.append(("packet_size", "must be >= 1"))
    if c.retry_limit < 0:
        p.append(("retry_limit", "must be >= 0"))
    if c.queue_limit < 1:
        p.append(("queue_limit", "must be >= 1"))
    e = c.energy_model
    if not (0 <= e.p_doze < e.p_idle <= e.p_rx <= e.p_tx):
        p.append(("energy_model", "need p_doze < p_idle <= p_rx <= p_tx"))
    if c.tie_break not in ("random", "lowest"):
        p.append(("tie_break", "must be 'random' or 'lowest'"))
    if c.control_sense_range is not None and c.control_sense_range < c.control_range:
        p.append(("control_sense_range", "must be >= control_range"))
    if c.sinr_mode not in ("protocol", "sinr"):
        p.append(("sinr_mode", "must be 'protocol' or 'sinr'"))
    for name in ("noise_power", "max_tx_power", "gain_constant"):
        if not getattr(c, name) > 0:
            p.append((name, "must be > 0"))
    if not 0 <= c.sensing_error_rate <= 1:
        p.append(("sensing_error_rate", "must be in [0, 1]"))
    if not 0 < c.demand_low <= c.demand_high:
        p.append(("demand_low", "need 0 < demand_low <= demand_high"))
    data_ids = {ch.id for ch in c.data_channels}
    if c.pu_list is not None:
        for i, pu in enumerate(c.pu_list):
            if pu.channel not in data_ids:
                p.append(("pu_list", f"PU {i}: channel {pu.channel} is not a data channel"))
            if not pu.coverage > 0:
                p.append(("pu_list", f"PU {i}: coverage must be > 0"))
            if not (pu.on_mean > 0 and pu.off_mean > 0):
                p.append(("pu_list", f"PU {i}: on_mean and off_mean must be > 0"))
    else:
        if c.num_pus < 0:
            p.append(("num_pus", "must be >= 0"))
        if c.num_pus and not data_ids:
            p.append(("num_pus", "PUs need at least one data channel"))
        if not (c.pu_coverage > 0 and c.pu_on_mean > 0 and c.pu_off_mean > 0):
            p.append(("pu_coverage", "PU coverage and ON/OFF means must be > 0"))
    if c.flows is not None:
        for i, f in enumerate(c.flows):
            if f.source == f.destination:
                p.append(("flows", f"flow {i}: source equals destination"))
            for end in (f.source, f.destination):
                if not 0 <= end < c.num_nodes:
                    p.append(("flows", f"flow {i}: node {end} out of range"))
            if not f.rate_requirement > 0:
                p.append(("flows", f"flow {i}: rate_requirement must be > 0"))
            if not f.cbr_rate > 0:
                p.append(("flows", f"flow {i}: cbr_rate must be > 0"))
            if f.start_time < 0:
                p.append(("flows", f"flow {i}: start_time must be >= 0"))
    else:
        if c.num_flows < 0:
            p.append(("num_flows", "must be >= 0"))
        if not c.cbr_rate > 0:
            p.append(("cbr_rate", "must be > 0"))
    if p:
        raise ScenarioError(p)
    return config


# -- random topology ----------------------------------------------------------

def rng_for(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(stream)])


@dataclass(frozen=True)
class Topology:
    positions: np.ndarray  # (n, 2)
    pus: tuple[PuSpec, ...]
    flows: tuple[FlowSpec, ...]
    seed: int

    @property
    def num_nodes(self) -> int:
        return len(self.positions)

    def distance(self, a: int, b: int) -> float:
        return float(np.hypot(*(self.positions[a] - self.positions[b])))

    def distance_matrix(self) -> np.ndarray:
        d = self.positions[:, None, :] - self.positions[None, :, :]
        return np.hypot(d[..., 0], d[..., 1])

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return (np.array_equal(self.positions, other.positions) and self.pus == other.pus
                and self.flows == other.flows and self.seed == other.seed)

    __hash__ = None


def sample_demand(config: ScenarioConfig, rng: np.random.Generator) -> float:
    lo = config.demand_low * config.demand_bandwidth
    hi = config.demand_high * config.demand_bandwidth
    return float(rng.uniform(lo, hi))


def _random_flows(config: ScenarioConfig, positions: np.ndarray, seed: int) -> tuple[FlowSpec, ...]:
    """Disjoint source/destination pairs drawn inside connected components.

    Pairs are formed from one seeded shuffle, so the first ``k`` flows of a
    larger request are exactly the flows of a request for ``k``.
    """
    rng = rng_for(seed, STREAM_TRAFFIC)
    n = len(positions)
    g = nx.Graph()
    g.add_nodes_from(range(n))
    d = positions[:, None, :] - positions[None, :, :]
    dist = np.hypot(d[..., 0], d[..., 1])
    ii, jj = np.nonzero(np.triu(dist <= config.tx_range, k=1))
    g.add_edges_from(zip(ii.tolist(), jj.tolist()))
    comps = sorted((sorted(c) for c in nx.connected_components(g)), key=lambda c: (-len(c), c[0]))
    order = []
    for comp in comps:
        if len(comp) < 2:
            continue
        perm = rng.permutation(len(comp))
        members = [comp[k] for k in perm]
        order.extend(zip(members[0::2], members[1::2]))
    if len(order) < config.num_flows:
        raise ScenarioError([("num_flows", f"topology supports only {len(order)} disjoint connected pairs")])
    flows = []
    for src, dst in order[: config.num_flows]:
        if rng.random() < 0.5:
            src, dst = dst, src
        flows.append(FlowSpec(
            source=int(src), destination=int(dst),
            rate_requirement=sample_demand(config, rng),
            cbr_rate=config.cbr_rate,
            start_time=float(rng.uniform(0.0, config.flow_start_window)),
        ))
    return tuple(flows)


def generate_topology(config: ScenarioConfig, seed: Optional[int] = None) -> Topology:
    """Resolve random node/PU placement and random flows for one seed."""
    validate(config)
    seed = config.rng_seed if seed is None else seed
    if config.node_positions is not None:
        positions = np.array(config.node_positions, dtype=float).reshape(-1, 2)
    else:
        rng = rng_for(seed, STREAM_TOPOLOGY)
        positions = np.column_stack([
            rng.uniform(0.0, config.area_width, config.num_nodes),
            rng.uniform(0.0, config.area_height, config.num_nodes),
        ])
    if config.pu_list is not None:
        pus = tuple(config.pu_list)
    else:
        rng = rng_for(seed, STREAM_PU)
        data_ids = [ch.id for ch in config.data_channels]
        pus = []
        for _ in range(config.num_pus):
            x = float(rng.uniform(0.0, config.area_width))
            y = float(rng.uniform(0.0, config.area_height))
            ch = int(data_ids[rng.integers(len(data_ids))])
            pus.append(PuSpec((x, y), ch, config.pu_coverage, config.pu_on_mean, config.pu_off_mean))
        pus = tuple(pus)
    if config.flows is not None:
        flows = tuple(config.flows)
    else:
        flows = _random_flows(config, positions, seed)
    return Topology(positions, pus, flows, seed)


# -- file format ------------------------------------------------------------

_NESTED = {
    "channels": ChannelSpec,
    "pu_list": PuSpec,
    "flows": FlowSpec,
}


def config_to_dict(config: ScenarioConfig) -> dict[str, Any]:
    out: dict[str, Any] = {"format_version": FORMAT_VERSION}
    for f in dataclasses.fields(config):
        v = getattr(config, f.name)
        if f.name == "node_positions":
            v = "random" if v is None else [list(map(float, pt)) for pt in v]
        elif f.name in ("pu_list", "flows"):
            if v is None:
                v = "random"
            else:
                v = [_plain(dataclasses.asdict(x)) for x in v]
        elif f.name == "channels":
            v = [dataclasses.asdict(x) for x in v]
        elif dataclasses.is_dataclass(v):
            v = dataclasses.asdict(v)
        out[f.name] = v
    return out


def _plain(d: dict) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}


def _build(cls, raw: Any, where: str, problems: list):
    if not isinstance(raw, dict):
        problems.append((where, f"expected a mapping, got {type(raw).__name__}"))
        return None
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(raw) - set(names)
    if unknown:
        problems.append((where, f"unknown keys {sorted(unknown)}"))
        return None
    kwargs = {}
    for k, v in raw.items():
        if k == "position":
            if not (isinstance(v, (list, tuple)) and len(v) == 2):
                problems.append((f"{where}.position", "expected [x, y]"))
                return None
            v = (float(v[0]), float(v[1]))
        kwargs[k] = v
    try:
        return cls(**kwargs)
    except TypeError as exc:
        problems.append((where, str(exc)))
        return None


def config_from_dict(raw: Any) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ScenarioError([("<root>", "scenario file must contain a mapping")])
    raw = dict(raw)
    version = raw.pop("format_version", None)
    if version != FORMAT_VERSION:
        raise ScenarioError([("format_version", f"expected {FORMAT_VERSION}, got {version!r}")])
    names = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
    problems: list[tuple[str, str]] = []
    unknown = sorted(set(raw) - set(names))
    for k in unknown:
        problems.append((k, "unknown field"))
    defaults = ScenarioConfig()
    kwargs: dict[str, Any] = {}
    for k, v in raw.items():
        if k not in names:
            continue
        if k == "node_positions":
            if v == "random" or v is None:
                v = None
            elif isinstance(v, list) and all(isinstance(pt, (list, tuple)) and len(pt) == 2 for pt in v):
                v = tuple((float(a), float(b)) for a, b in v)
            else:
                problems.append((k, "expected 'random' or a list of [x, y]"))
                continue
        elif k in _NESTED:
            if v == "random" or (v is None and k != "channels"):
                if k == "channels":
                    problems.append((k, "channels cannot be random"))
                    continue
                v = None
            elif isinstance(v, list):
                items = [_build(_NESTED[k], item, f"{k}[{i}]", problems) for i, item in enumerate(v)]
                if any(x is None for x in items):
                    continue
                v = tuple(items)
            else:
                problems.append((k, "expected a list"))
                continue
        elif k in ("energy_model", "dcf"):
            cls = PowerTable if k == "energy_model" else DcfParams
            v = _build(cls, v, k, problems)
            if v is None:
                continue
        elif k == "control_sense_range":
            if v is not None and (isinstance(v, bool) or not isinstance(v, (int, float))):
                problems.append((k, f"expected a number or null, got {v!r}"))
                continue
            v = None if v is None else float(v)
        else:
            ref = getattr(defaults, k)
            if isinstance(ref, bool):
                if not isinstance(v, bool):
                    problems.append((k, f"expected a boolean, got {v!r}"))
                    continue
            elif isinstance(ref, int):
                if isinstance(v, bool) or not isinstance(v, int):
                    problems.append((k, f"expected an integer, got {v!r}"))
                    continue
            elif isinstance(ref, float):
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    problems.append((k, f"expected a number, got {v!r}"))
                    continue
                v = float(v)
            elif isinstance(ref, str) and not isinstance(v, str):
                problems.append((k, f"expected a string, got {v!r}"))
                continue
        kwargs[k] = v
    if problems:
        raise ScenarioError(problems)
    return validate(ScenarioConfig(**kwargs))


def save_scenario(config: ScenarioConfig, path) -> None:
    validate(config)
    text = yaml.safe_dump(config_to_dict(config), sort_keys=False, default_flow_style=None)
    Path(path).write_text(text)


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError([("<file>", f"{path}: {exc.strerror}")]) from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ScenarioError([("<parse>", f"{path}: {where}: {getattr(exc, 'problem', exc)}")]) from exc
    return config_from_dict(raw)
