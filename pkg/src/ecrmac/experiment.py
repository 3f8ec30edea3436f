"""Paired ECR-MAC / DCF runs and flow-count sweeps."""

from __future__ import annotations

import dataclasses
import traceback
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from .dcf import run_dcf
from .engine import run as run_ecr
from .metrics import MetricsReport, normalized_throughput
from .scenario import ScenarioConfig, generate_topology
from .trace import Trace

PROTOCOLS = ("ecr", "dcf")


@dataclass
class RunResult:
    protocol: str
    flows: int
    seed: int
    report: MetricsReport
    trace: Trace


@dataclass
class SweepResult:
    results: list[RunResult] = field(default_factory=list)
    failures: list[tuple[str, int, int, str]] = field(default_factory=list)  # protocol, flows, seed, error

    @property
    def reports(self) -> list[MetricsReport]:
        return [r.report for r in self.results]

    def get(self, protocol: str, flows: int, seed: int) -> Optional[RunResult]:
        for r in self.results:
            if (r.protocol, r.flows, r.seed) == (protocol, flows, seed):
                return r
        return None


def label(protocol: str, doze: bool) -> str:
    return protocol if protocol != "ecr" or doze else "ecr-nodoze"


def run_pair(config: ScenarioConfig, seed: int, protocols: Sequence[str] = PROTOCOLS, *,
             doze: Optional[bool] = None, full_trace: bool = True) -> list[RunResult]:
    """Run the requested protocols on one shared topology.

    Normalized throughput is filled in on every report once the DCF run
    is available (DCF itself gets 1.0, or nothing if it delivered nothing).
    """
    topo = generate_topology(config, seed)
    doze = config.doze_enabled if doze is None else doze
    out = []
    for proto in protocols:
        if proto == "ecr":
            rep, tr = run_ecr(config, seed, topology=topo, full_trace=full_trace, doze=doze)
        elif proto == "dcf":
            rep, tr = run_dcf(config, seed, topology=topo, full_trace=full_trace)
        else:
            raise ValueError(f"unknown protocol {proto!r}")
        rep.protocol = label(proto, doze)
        out.append(RunResult(rep.protocol, config.num_flows, seed, rep, tr))
    fill_normalized([r.report for r in out])
    return out


def fill_normalized(reports: Iterable[MetricsReport]) -> None:
    reports = list(reports)
    base = next((r for r in reports if r.protocol == "dcf"), None)
    if base is None:
        return
    for r in reports:
        r.normalized_throughput = normalized_throughput(r, base)


def sweep(config: ScenarioConfig, flows: Sequence[int], seeds: Sequence[int],
          protocols: Sequence[str] = PROTOCOLS, *, doze: Optional[bool] = None,
          full_trace: bool = False,
          progress: Optional[Callable[[str], None]] = None) -> SweepResult:
    """Every flow count x seed; a failing run is recorded and the sweep goes on."""
    res = SweepResult()
    for f in flows:
        cfg = dataclasses.replace(config, num_flows=f, flows=None)
        for s in seeds:
            try:
                pair = run_pair(cfg, s, protocols, doze=doze, full_trace=full_trace)
            except Exception as exc:  # noqa: BLE001 - reported per run
                msg = f"{type(exc).__name__}: {exc}"
                for p in protocols:
                    res.failures.append((p, f, s, msg))
                if progress:
                    progress(f"flows={f} seed={s} FAILED {msg}")
                    progress(traceback.format_exc().rstrip())
                continue
            res.results.extend(pair)
            if progress:
                progress(f"flows={f} seed={s} " + " ".join(
                    f"{r.protocol}:{r.report.delivered_packets}" for r in pair))
    return res
