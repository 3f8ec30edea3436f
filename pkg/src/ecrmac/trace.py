"""Event trace: append-only records serialised as JSON lines.

Every line is an object with the keys, in this order::

    t       int    event time in microseconds
    node    int    node id, or null
    kind    str    event kind (see below)
    ch      int    channel id, or null
    slot    int    timeslot index, or null
    frame   int    frame id, or null
    energy  float  remaining energy of ``node`` in joules, or null
    data    object kind-specific payload

Kinds: ``run_start``, ``pu_switch``, ``gen``, ``ctrl_tx``, ``atim_end``,
``assign``, ``sense``, ``data_tx``, ``frame_tx``, ``frame_lost``,
``pu_interference``, ``deliver``, ``drop``, ``energy``, ``flow_summary``,
``run_end``.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator, Optional

FIELDS = ("t", "node", "kind", "ch", "slot", "frame", "energy", "data")

SUMMARY_KINDS = frozenset({"run_start", "energy", "flow_summary", "run_end"})


class Trace:
    """In-memory trace.  ``full=False`` keeps only the summary kinds."""

    def __init__(self, full: bool = True):
        self.full = full
        self.records: list[tuple] = []

    def add(self, t: int, node: Optional[int], kind: str, ch: Optional[int] = None,
            slot: Optional[int] = None, frame: Optional[int] = None,
            energy: Optional[float] = None, **data: Any) -> None:
        if not self.full and kind not in SUMMARY_KINDS:
            return
        self.records.append((t, node, kind, ch, slot, frame, energy, data))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[dict]:
        for rec in self.records:
            yield dict(zip(FIELDS, rec))

    def of_kind(self, kind: str) -> list[dict]:
        return [r for r in self if r["kind"] == kind]

    def lines(self) -> Iterator[str]:
        for rec in self.records:
            yield json.dumps(dict(zip(FIELDS, rec)), separators=(",", ":"))

    def write(self, path) -> None:
        path = Path(path)
        try:
            with path.open("w") as fh:
                for line in self.lines():
                    fh.write(line)
                    fh.write("\n")
        except OSError as exc:
            raise OSError(f"cannot write trace to {path}: {exc.strerror}") from exc


def read_trace(path) -> list[dict]:
    path = Path(path)
    out = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: not valid JSON ({exc.msg})") from exc
            if not isinstance(rec, dict) or "kind" not in rec:
                raise ValueError(f"{path}:{lineno}: not a trace record")
            out.append(rec)
    return out


def records(trace: Trace | Iterable[dict]) -> list[dict]:
    """Normalise an in-memory trace or parsed records to a list of dicts.

    In-memory payloads may hold tuples; they are round-tripped through JSON
    so both sources compare equal.
    """
    if isinstance(trace, Trace):
        return [json.loads(line) for line in trace.lines()]
    return list(trace)
