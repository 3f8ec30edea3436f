"""Offline audits over an event trace.

Each audit takes the list of trace records (as produced by
:func:`ecrmac.trace.records` or :func:`ecrmac.trace.read_trace`) and returns
a list of human-readable violation strings; empty means clean.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .conflict import neighbor_sets
from .segments import verify_collision_free


@dataclass
class AuditReport:
    violations: dict[str, list[str]] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    stats: dict[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not any(self.violations.values())

    def lines(self) -> list[str]:
        out = []
        for name, vs in self.violations.items():
            out.append(f"{name}: {'ok' if not vs else f'{len(vs)} violation(s)'}")
            out.extend(f"  {v}" for v in vs)
        out.extend(f"note: {n}" for n in self.notes)
        return out


def _start(recs: list[dict]) -> dict:
    for r in recs:
        if r["kind"] == "run_start":
            return r["data"]
    raise ValueError("trace has no run_start record")


def _full(recs: list[dict]) -> bool:
    return bool(_start(recs).get("full_trace", True))


def clean_interval_assignments(recs: list[dict]) -> dict[int, dict[tuple, list[tuple]]]:
    """interval -> {link: [(channel, slot), ...]} for intervals marked clean."""
    clean = {r["data"]["interval"] for r in recs
             if r["kind"] == "atim_end" and r["data"]["clean"]}
    out: dict[int, dict[tuple, list[tuple]]] = {k: {} for k in sorted(clean)}
    for r in recs:
        if r["kind"] == "assign":
            k = r["data"]["interval"]
            if k in out:
                out[k].setdefault(tuple(r["data"]["link"]), []).append((r["ch"], r["slot"]))
    return out


def audit_collisions(recs: list[dict]) -> list[str]:
    """Global collision-freedom of every clean interval's assignment.

    Also flags DATA frames in clean intervals lost to a same-channel sender
    inside the receiver's transmission neighbourhood.
    """
    start = _start(recs)
    if start["protocol"] != "ecr":
        return []
    nb = neighbor_sets(np.asarray(start["positions"], dtype=float).reshape(-1, 2), start["tx_range"])
    out = []
    per_interval = clean_interval_assignments(recs)
    for k, assign in per_interval.items():
        ok, vs = verify_collision_free(assign, nb)
        out.extend(f"interval {k}: {v}" for v in vs)
    for r in recs:
        if (r["kind"] == "data_tx" and r["data"].get("cause") == "collision"
                and r["data"]["interval"] in per_interval):
            out.append(f"interval {r['data']['interval']}: DATA frame {r['frame']} from node "
                       f"{r['node']} lost to an SU collision in a clean interval")
    return out


def audit_pu(recs: list[dict]) -> list[str]:
    """No DATA frame on a channel held by a PU covering its sender at the sensing instant."""
    start = _start(recs)
    pus = start.get("pus", [])
    pos = start["positions"]
    switches: dict[int, list[tuple[int, bool]]] = defaultdict(list)
    for r in recs:
        if r["kind"] == "pu_switch":
            switches[r["data"]["pu"]].append((r["t"], r["data"]["on"]))
    times = {k: [t for t, _ in v] for k, v in switches.items()}
    out = []
    for r in recs:
        if r["kind"] != "data_tx":
            continue
        t = r["data"]["sense_t"]
        x, y = pos[r["node"]]
        for k, pu in enumerate(pus):
            if pu["channel"] != r["ch"] or not switches.get(k):
                continue
            px, py = pu["position"]
            if math.hypot(x - px, y - py) > pu["coverage"]:
                continue
            i = bisect_right(times[k], t) - 1
            if i >= 0 and switches[k][i][1]:
                out.append(f"DATA frame {r['frame']} from node {r['node']} on channel {r['ch']}"
                           f" slot {r['slot']} while PU {k} was active at t={t}")
    return out


def audit_energy(recs: list[dict]) -> list[str]:
    """Per node: sum of mode durations times power, less overdraft, equals consumption."""
    start = _start(recs)
    powers = start["powers_uw"]
    initial = start["initial_pj"]
    out = []
    seen = 0
    for r in recs:
        if r["kind"] != "energy":
            continue
        seen += 1
        d = r["data"]
        billed = sum(a * b for a, b in zip(d["durations"], powers)) - d["overdraft_pj"]
        if billed != d["consumed_pj"]:
            out.append(f"node {r['node']}: consumed {d['consumed_pj']} pJ, modes bill {billed} pJ")
        if d["consumed_pj"] > initial:
            out.append(f"node {r['node']}: consumed more than its initial energy")
        if d["overdraft_pj"] and d["dead_at"] is None:
            out.append(f"node {r['node']}: overdraft without death")
        total_us = sum(d["durations"])
        horizon = round(start["duration"] * 1_000_000)
        if d["dead_at"] is None and total_us != horizon:
            out.append(f"node {r['node']}: billed {total_us} us of a {horizon} us run")
    if seen != start["num_nodes"]:
        out.append(f"{seen} energy records for {start['num_nodes']} nodes")
    return out


def audit_conservation(recs: list[dict]) -> list[str]:
    """generated == delivered + dropped + queued per flow, and trace events agree."""
    out = []
    full = _full(recs)
    gen = defaultdict(int)
    dlv = defaultdict(int)
    drp = defaultdict(int)
    if full:
        for r in recs:
            kind = r["kind"]
            if kind == "gen":
                gen[r["data"]["flow"]] += 1
            elif kind == "deliver":
                dlv[r["data"]["flow"]] += 1
            elif kind == "drop":
                drp[r["data"]["flow"]] += 1
    for r in recs:
        if r["kind"] != "flow_summary":
            continue
        d = r["data"]
        f = d["flow"]
        if d["generated"] != d["delivered"] + d["dropped"] + d["queued"]:
            out.append(f"flow {f}: generated {d['generated']} != delivered {d['delivered']}"
                       f" + dropped {d['dropped']} + queued {d['queued']}")
        if sum(d["drops"].values()) != d["dropped"]:
            out.append(f"flow {f}: drop reasons do not add up")
        if full:
            for name, got, want in (("gen", gen[f], d["generated"]),
                                    ("deliver", dlv[f], d["delivered"]),
                                    ("drop", drp[f], d["dropped"])):
                if got != want:
                    out.append(f"flow {f}: {got} {name} records but summary says {want}")
    return out


def verify(recs: list[dict]) -> AuditReport:
    """All audits that apply to the trace."""
    start = _start(recs)
    rep = AuditReport()
    full = _full(recs)
    if start["protocol"] == "ecr" and full:
        rep.violations["collision_free"] = audit_collisions(recs)
        rep.violations["pu_protection"] = audit_pu(recs)
        rep.stats["clean_intervals"] = len(clean_interval_assignments(recs))
        rep.stats["far_interference"] = sum(
            1 for r in recs if r["kind"] == "data_tx" and r["data"].get("cause") == "far_interference")
    elif start["protocol"] != "ecr":
        rep.notes.append("PU audit skipped: DCF baseline ignores primary users")
        rep.notes.append("collision audit skipped: DCF has no slot assignment")
    else:
        rep.notes.append("collision and PU audits skipped: summary-only trace")
    rep.violations["energy"] = audit_energy(recs)
    rep.violations["conservation"] = audit_conservation(recs)
    return rep
