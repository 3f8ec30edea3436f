"""Communication-segment bookkeeping and capacity-sorted greedy selection.

A segment is a (channel, timeslot) pair.  Each node keeps a
:class:`ScheduleTable` with its own assignments and the reservations it has
overheard; the free set of a link is the intersection of both endpoints'
free sets, and :func:`select_segments` picks from it greedily by capacity.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Iterator, Mapping, Optional, Sequence

from .conflict import ConflictGraph, Link, links_conflict

Key = tuple[int, int]  # (channel, timeslot)


@dataclass(frozen=True)
class CommSegment:
    channel: int
    timeslot: int
    capacity: float

    @property
    def key(self) -> Key:
        return (self.channel, self.timeslot)


class Status(enum.Enum):
    OCCUPIED = "occupied"
    FREE = "free"


@dataclass(frozen=True)
class Assigned:
    link: Link


SegmentStatus = Status | Assigned


class ScheduleError(ValueError):
    pass


@dataclass
class ScheduleTable:
    """One node's view of the segments in one beacon interval.

    ``capacities`` maps each channel the owner may use this interval to its
    per-segment capacity.  ``assigned`` holds the owner's own reservations
    and ``occupied`` the overheard reservations of other links.
    """

    owner: int
    interval: int
    num_timeslots: int
    capacities: dict[int, float]
    neighbors: frozenset[int] = frozenset()
    two_hop: frozenset[int] = frozenset()
    two_hop_channels: dict[int, frozenset[int]] = field(default_factory=dict)
    assigned: dict[Key, Link] = field(default_factory=dict)
    busy_slots: dict[int, Key] = field(default_factory=dict)
    occupied: dict[Key, set[Link]] = field(default_factory=dict)

    def status(self, channel: int, timeslot: int) -> SegmentStatus:
        key = (channel, timeslot)
        if key in self.assigned:
            return Assigned(self.assigned[key])
        if channel not in self.capacities or timeslot in self.busy_slots or key in self.occupied:
            return Status.OCCUPIED
        return Status.FREE

    def is_free(self, channel: int, timeslot: int) -> bool:
        return (channel in self.capacities and timeslot not in self.busy_slots
                and (channel, timeslot) not in self.occupied)

    def assign(self, link: Link, channel: int, timeslot: int) -> None:
        if self.owner not in link:
            raise ScheduleError(f"node {self.owner} is not an endpoint of {link}")
        if timeslot in self.busy_slots:
            raise ScheduleError(f"node {self.owner} already busy in slot {timeslot}")
        if channel not in self.capacities:
            raise ScheduleError(f"channel {channel} not usable by node {self.owner}")
        self.assigned[(channel, timeslot)] = link
        self.busy_slots[timeslot] = (channel, timeslot)

    def release(self, channel: int, timeslot: int) -> None:
        link = self.assigned.pop((channel, timeslot), None)
        if link is not None:
            del self.busy_slots[timeslot]

    def observe(self, link: Link, keys: Iterable[Key]) -> None:
        """Record an overheard reservation of ``link`` on ``keys``."""
        if self.owner in link:
            return
        for key in keys:
            self.occupied.setdefault(tuple(key), set()).add(link)

    def segment(self, key: Key) -> CommSegment:
        return CommSegment(key[0], key[1], self.capacities[key[0]])

    def links(self) -> dict[Link, list[Key]]:
        out: dict[Link, list[Key]] = defaultdict(list)
        for key, link in sorted(self.assigned.items(), key=lambda kv: (kv[0][1], kv[0][0])):
            out[link].append(key)
        return dict(out)


def free_segments(table: ScheduleTable) -> set[CommSegment]:
    """free_segment(v): usable-channel segments neither used by nor interfered at the owner."""
    return {CommSegment(c, t, cap)
            for c, cap in table.capacities.items()
            for t in range(table.num_timeslots)
            if table.is_free(c, t)}


def link_bandwidth(u_table: ScheduleTable, v_table: ScheduleTable) -> set[CommSegment]:
    """B(u, v) = free_segment(u) & free_segment(v)."""
    if u_table.interval != v_table.interval:
        raise ScheduleError("tables belong to different beacon intervals")
    return free_segments(u_table) & free_segments(v_table)


# -- neighbourhood view and the four selection conditions ------------------

class Neighborhood:
    """Known assignments around a link plus the neighbour relation.

    ``assignments`` maps each link to the (channel, timeslot) keys it holds.
    """

    def __init__(self, nb, assignments: Mapping[Link, Iterable[Key]] | Iterable[tuple[Link, Key]] = ()):
        self.nb = nb
        self.by_slot: dict[int, set[Link]] = defaultdict(set)
        self.by_key: dict[Key, set[Link]] = defaultdict(set)
        if not isinstance(assignments, Mapping):
            assignments = _group(assignments)
        items = assignments.items()
        for link, keys in items:
            if len(link) != 2 or link[0] == link[1]:
                raise ScheduleError(f"malformed link {link!r}")
            for key in keys:
                c, t = key
                self.by_slot[t].add(tuple(link))
                self.by_key[(c, t)].add(tuple(link))

    def add(self, link: Link, key: Key) -> None:
        self.by_slot[key[1]].add(link)
        self.by_key[key].add(link)

    def slot_busy(self, node: int, timeslot: int, exclude: Optional[Link] = None) -> bool:
        return any(node in l and l != exclude for l in self.by_slot.get(timeslot, ()))

    def allows(self, link: Link, key: Key) -> bool:
        """The four collision-free conditions for placing ``link`` on ``key``.

        (1) slot not used by any link incident on the transmitter;
        (2) slot not used by any link incident on the receiver;
        (3) segment not used by a link whose transmitter neighbours the receiver;
        (4) segment not used by a link whose receiver neighbours the transmitter.
        """
        u, v = link
        c, t = key
        for other in self.by_slot.get(t, ()):
            if other != link and (u in other or v in other):
                return False
        nb_u, nb_v = self.nb[u], self.nb[v]
        for x, y in self.by_key.get(key, ()):
            if (x, y) == link:
                continue
            if x in nb_v or y in nb_u:
                return False
        return True


def _group(pairs: Iterable[tuple[Link, Key]]) -> dict[Link, list[Key]]:
    out: dict[Link, list[Key]] = defaultdict(list)
    for link, key in pairs:
        out[tuple(link)].append(tuple(key))
    return out


# -- greedy selection ------------------------------------------------------

@dataclass(frozen=True)
class Infeasible:
    """Candidates ran out before the rate requirement was met."""

    partial: tuple[CommSegment, ...] = ()
    remaining: float = 0.0

    def __bool__(self) -> bool:
        return False


def sort_key(control_channel: Optional[int] = None) -> Callable[[CommSegment], tuple]:
    """Capacity descending, then channel id, then timeslot.

    The control channel, when given, sorts after data channels of equal
    capacity so it is only used when needed.
    """
    def key(s: CommSegment):
        return (-s.capacity, s.channel == control_channel, s.channel, s.timeslot)
    return key


def capacity_blocks(segments: Iterable[CommSegment],
                    control_channel: Optional[int] = None) -> list[list[CommSegment]]:
    """Segments in :func:`sort_key` order, grouped into equal-capacity runs."""
    blocks: list[list[CommSegment]] = []
    for seg in sorted(segments, key=sort_key(control_channel)):
        if blocks and blocks[-1][0].capacity == seg.capacity and \
                (blocks[-1][0].channel == control_channel) == (seg.channel == control_channel):
            blocks[-1].append(seg)
        else:
            blocks.append([seg])
    return blocks


def rotated(blocks: Sequence[Sequence[CommSegment]], rng) -> Iterator[CommSegment]:
    """Walk each block from a random starting point, wrapping around.

    Breaks capacity ties at random while keeping capacity-descending order,
    so independent links do not all start on the same segment.
    """
    for block in blocks:
        k = rng.randrange(len(block))
        yield from block[k:]
        yield from block[:k]


def greedy_pick(ordered: Iterable[CommSegment], rate: float,
                accept: Callable[[CommSegment, set[int]], bool]) -> list[CommSegment] | Infeasible:
    """Walk ``ordered`` accepting segments until ``rate`` is covered.

    ``accept(seg, used_slots)`` decides each candidate; selected segments
    always occupy distinct timeslots.
    """
    if rate <= 0:
        return []
    chosen: list[CommSegment] = []
    used: set[int] = set()
    remaining = rate
    for seg in ordered:
        if seg.timeslot in used or not accept(seg, used):
            continue
        chosen.append(seg)
        used.add(seg.timeslot)
        remaining -= seg.capacity
        if remaining <= 0:
            return chosen
    return Infeasible(tuple(chosen), remaining)


def select_segments(link: Link, rate_requirement: float, candidates: Iterable[CommSegment],
                    neighborhood: Neighborhood, control_channel: Optional[int] = None,
                    rng=None) -> list[CommSegment] | Infeasible:
    """Greedy segment choice for ``link`` meeting ``rate_requirement`` (bits/s).

    Ties between equal-capacity segments go to the lower channel, then the
    lower timeslot; with ``rng`` (a ``random.Random``) they are broken by a
    random rotation instead.
    """
    if len(link) != 2 or link[0] == link[1]:
        raise ScheduleError(f"malformed link {link!r}")
    if rng is None:
        ordered = sorted(candidates, key=sort_key(control_channel))
    else:
        ordered = rotated(capacity_blocks(candidates, control_channel), rng)
    return greedy_pick(ordered, rate_requirement,
                       lambda seg, _used: neighborhood.allows(link, seg.key))


def brute_force_feasible(link: Link, rate_requirement: float, candidates: Sequence[CommSegment],
                         neighborhood: Neighborhood, max_candidates: int = 20) -> bool:
    """Exhaustive subset search; true iff some valid subset covers the rate."""
    candidates = list(candidates)
    if len(candidates) > max_candidates:
        raise ValueError(f"instance too large for exhaustive search ({len(candidates)} > {max_candidates})")
    if rate_requirement <= 0:
        return True
    for k in range(1, len(candidates) + 1):
        for subset in combinations(candidates, k):
            if sum(s.capacity for s in subset) < rate_requirement:
                continue
            slots = [s.timeslot for s in subset]
            if len(set(slots)) != len(slots):
                continue
            if all(neighborhood.allows(link, s.key) for s in subset):
                return True
    return False


# -- global verification ---------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str
    links: tuple[Link, ...]
    channel: int
    timeslot: int
    node: Optional[int] = None

    def __str__(self) -> str:
        where = f"node {self.node} " if self.node is not None else ""
        ls = " & ".join(f"{a}->{b}" for a, b in self.links)
        return f"{self.kind}: {where}{ls} on channel {self.channel} slot {self.timeslot}"


def verify_collision_free(assignment: Mapping[Link, Iterable[Key]] | Iterable[tuple[Link, Key]],
                          conflict: ConflictGraph | Sequence[frozenset[int]],
                          interference: Optional[tuple[Sequence, float]] = None,
                          ) -> tuple[bool, list[Violation]]:
    """Check a global (link -> segments) assignment.

    Flags half-duplex violations (a node in two links in one slot, including
    the same link holding a slot twice) and conflicting links sharing a
    segment.  ``conflict`` is a :class:`ConflictGraph` or neighbour sets.
    With ``interference=(positions, radius)`` a transmitter within
    ``radius`` of another same-segment link's receiver is also flagged.
    """
    items = assignment.items() if isinstance(assignment, Mapping) else _group(assignment).items()
    entries = [(tuple(link), tuple(key)) for link, keys in items for key in keys]
    violations: list[Violation] = []
    per_slot: dict[int, list[tuple[Link, Key]]] = defaultdict(list)
    for link, key in entries:
        per_slot[key[1]].append((link, key))
    for t in sorted(per_slot):
        seen: dict[int, tuple[Link, Key]] = {}
        for link, key in sorted(per_slot[t]):
            for node in link:
                if node in seen:
                    other, okey = seen[node]
                    violations.append(Violation("half-duplex", (other, link), key[0], t, node))
                else:
                    seen[node] = (link, key)
    per_key: dict[Key, list[Link]] = defaultdict(list)
    for link, key in entries:
        per_key[key].append(link)
    if isinstance(conflict, ConflictGraph):
        def conflicting(a, b):
            return conflict.has_edge(a, b)
    else:
        def conflicting(a, b):
            return links_conflict(a, b, conflict)
    for key in sorted(per_key):
        links = sorted(set(per_key[key]))
        for a, b in combinations(links, 2):
            if set(a) & set(b):
                continue  # already reported as half-duplex
            if conflicting(a, b):
                violations.append(Violation("conflict", (a, b), key[0], key[1]))
            elif interference is not None:
                pos, radius = interference
                if _near(pos, a[0], b[1], radius) or _near(pos, b[0], a[1], radius):
                    violations.append(Violation("interference", (a, b), key[0], key[1]))
    return (not violations, violations)


def _near(pos, a: int, b: int, radius: float) -> bool:
    dx = pos[a][0] - pos[b][0]
    dy = pos[a][1] - pos[b][1]
    return dx * dx + dy * dy <= radius * radius
