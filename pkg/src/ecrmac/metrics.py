"""Throughput, delay and energy metrics plus CSV / JSON-lines reports."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from statistics import fmean
from typing import Iterable, Optional, Sequence

from .energy import PJ_PER_J
from .trace import Trace, records


@dataclass(frozen=True)
class FlowReport:
    flow: int
    source: int
    destination: int
    generated: int
    delivered: int
    dropped: int
    queued: int
    avg_delay: Optional[float]


@dataclass
class MetricsReport:
    protocol: str
    seed: int
    flows: int
    duration: float  # s
    generated: int
    delivered_packets: int
    delivered_bits: int
    dropped: int
    queued: int
    throughput: float  # bits/s
    avg_end_to_end_delay: Optional[float]  # s
    total_energy: float  # J
    per_packet_energy: Optional[float]  # J/packet
    normalized_throughput: Optional[float] = None
    seeds_aggregated: int = 1
    per_flow: tuple[FlowReport, ...] = ()
    diagnostics: dict = field(default_factory=dict)

    def with_normalized(self, dcf: "MetricsReport") -> "MetricsReport":
        self.normalized_throughput = normalized_throughput(self, dcf)
        return self


def normalized_throughput(ecr: MetricsReport, dcf: MetricsReport) -> Optional[float]:
    """ECR delivered bits over DCF delivered bits; None when DCF delivered nothing."""
    if dcf.delivered_bits == 0:
        return None
    return ecr.delivered_bits / dcf.delivered_bits


def avg_end_to_end_delay(trace) -> Optional[float]:
    """Mean (delivery - generation) over ``deliver`` records, in seconds."""
    total = n = 0
    for r in records(trace):
        if r["kind"] == "deliver":
            total += r["t"] - r["data"]["gen"]
            n += 1
    return mean_delay(total, n)


def mean_delay(total_us: int, count: int) -> Optional[float]:
    return None if count == 0 else total_us / count / 1e6


def total_energy(trace) -> float:
    """Network energy consumed, from the per-node ``energy`` records."""
    return sum(r["data"]["consumed_pj"] for r in records(trace) if r["kind"] == "energy") / PJ_PER_J


def per_packet_energy(trace) -> Optional[float]:
    recs = records(trace)
    summaries = [r for r in recs if r["kind"] == "flow_summary"]
    if summaries:
        delivered = sum(r["data"]["delivered"] for r in summaries)
    else:
        delivered = sum(1 for r in recs if r["kind"] == "deliver")
    if delivered == 0:
        return None
    return total_energy(recs) / delivered


def energy_per_packet(total_j: float, delivered: int) -> Optional[float]:
    return None if delivered == 0 else total_j / delivered


def report_from_trace(trace) -> MetricsReport:
    """Recompute a report from a trace.

    Full traces are folded over their ``deliver`` records; summary traces
    fall back to the per-flow totals in ``flow_summary``.
    """
    recs = records(trace)
    start = next(r for r in recs if r["kind"] == "run_start")["data"]
    flows = sorted((r for r in recs if r["kind"] == "flow_summary"), key=lambda r: r["data"]["flow"])
    full = start.get("full_trace", True)
    delays: dict[int, list[int]] = {}
    if full:
        for r in recs:
            if r["kind"] == "deliver":
                delays.setdefault(r["data"]["flow"], []).append(r["t"] - r["data"]["gen"])
    per_flow = []
    total_delay = 0
    for r in flows:
        d = r["data"]
        if full:
            ds = delays.get(d["flow"], [])
            n, dsum = len(ds), sum(ds)
        else:
            n, dsum = d["delivered"], d["delay_sum_us"]
        total_delay += dsum
        per_flow.append(FlowReport(d["flow"], d["source"], d["destination"], d["generated"],
                                   n, d["dropped"], d["queued"], mean_delay(dsum, n)))
    delivered = sum(f.delivered for f in per_flow)
    bits = delivered * start["packet_bits"]
    energy = total_energy(recs)
    end = next((r for r in recs if r["kind"] == "run_end"), None)
    return MetricsReport(
        protocol=start["protocol"], seed=start["seed"], flows=len(per_flow),
        duration=start["duration"],
        generated=sum(f.generated for f in per_flow),
        delivered_packets=delivered, delivered_bits=bits,
        dropped=sum(f.dropped for f in per_flow),
        queued=sum(f.queued for f in per_flow),
        throughput=bits / start["duration"],
        avg_end_to_end_delay=mean_delay(total_delay, delivered),
        total_energy=energy,
        per_packet_energy=energy_per_packet(energy, delivered),
        per_flow=tuple(per_flow),
        diagnostics=dict(end["data"]["diagnostics"]) if end else {},
    )


# -- aggregation and files --------------------------------------------------

CSV_COLUMNS = ("protocol", "flows", "seed", "throughput", "normalized_throughput", "delay",
               "energy_per_packet", "delivered_packets", "generated", "dropped", "total_energy")


def aggregate(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Arithmetic mean over seeds; absent values are skipped in their mean."""
    if not reports:
        raise ValueError("nothing to aggregate")
    protos = {r.protocol for r in reports}
    flows = {r.flows for r in reports}

    def mean_opt(vals):
        vals = [v for v in vals if v is not None]
        return fmean(vals) if vals else None

    return MetricsReport(
        protocol=protos.pop() if len(protos) == 1 else "mixed",
        seed=-1,
        flows=flows.pop() if len(flows) == 1 else -1,
        duration=fmean(r.duration for r in reports),
        generated=round(fmean(r.generated for r in reports)),
        delivered_packets=round(fmean(r.delivered_packets for r in reports)),
        delivered_bits=round(fmean(r.delivered_bits for r in reports)),
        dropped=round(fmean(r.dropped for r in reports)),
        queued=round(fmean(r.queued for r in reports)),
        throughput=fmean(r.throughput for r in reports),
        avg_end_to_end_delay=mean_opt(r.avg_end_to_end_delay for r in reports),
        total_energy=fmean(r.total_energy for r in reports),
        per_packet_energy=mean_opt(r.per_packet_energy for r in reports),
        normalized_throughput=mean_opt(r.normalized_throughput for r in reports),
        seeds_aggregated=sum(r.seeds_aggregated for r in reports),
    )


def row(report: MetricsReport) -> dict:
    return {
        "protocol": report.protocol,
        "flows": report.flows,
        "seed": "mean" if report.seed == -1 else report.seed,
        "throughput": report.throughput,
        "normalized_throughput": report.normalized_throughput,
        "delay": report.avg_end_to_end_delay,
        "energy_per_packet": report.per_packet_energy,
        "delivered_packets": report.delivered_packets,
        "generated": report.generated,
        "dropped": report.dropped,
        "total_energy": report.total_energy,
    }


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def with_aggregates(reports: Sequence[MetricsReport]) -> list[MetricsReport]:
    """Seed rows sorted by (protocol, flows, seed), each group followed by its mean row."""
    groups: dict[tuple[str, int], list[MetricsReport]] = {}
    for r in reports:
        groups.setdefault((r.protocol, r.flows), []).append(r)
    out = []
    for key in sorted(groups):
        rs = sorted(groups[key], key=lambda r: r.seed)
        out.extend(rs)
        out.append(aggregate(rs))
    return out


def emit(reports: MetricsReport | Sequence[MetricsReport], fmt: str, path,
         include_aggregate: bool = True) -> None:
    """Write ``csv`` or ``jsonl`` rows, seed rows first then a mean row per group."""
    if isinstance(reports, MetricsReport):
        reports = [reports]
    rows = with_aggregates(reports) if include_aggregate else list(reports)
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            if fmt == "csv":
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(CSV_COLUMNS)
                for r in rows:
                    d = row(r)
                    w.writerow([_fmt(d[c]) for c in CSV_COLUMNS])
            elif fmt in ("jsonl", "json-lines"):
                for r in rows:
                    fh.write(json.dumps(_jsonable(r), separators=(",", ":")) + "\n")
            else:
                raise ValueError(f"unknown report format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror}") from exc


def _jsonable(r: MetricsReport) -> dict:
    d = asdict(r)
    d["per_flow"] = [asdict(f) for f in r.per_flow]
    return d


def parse_csv(path) -> list[dict]:
    """Rows of a report CSV with numbers converted back; empty cells become None."""
    ints = {"flows", "delivered_packets", "generated", "dropped"}
    out = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for raw in reader:
            d = {}
            for k, v in raw.items():
                if v == "":
                    d[k] = None
                elif k == "protocol":
                    d[k] = v
                elif k == "seed":
                    d[k] = v if v == "mean" else int(v)
                elif k in ints:
                    d[k] = int(v)
                else:
                    d[k] = float(v)
            out.append(d)
    return out


def parse_jsonl(path) -> list[MetricsReport]:
    out = []
    names = {f.name for f in fields(MetricsReport)}
    with Path(path).open() as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            d = {k: v for k, v in d.items() if k in names}
            d["per_flow"] = tuple(FlowReport(**f) for f in d.get("per_flow", ()))
            out.append(MetricsReport(**d))
    return out


def finite(x: Optional[float]) -> bool:
    return x is not None and math.isfinite(x)
