"""Shared spatial CSMA/CA medium.

Used for the ATIM-window contention on the control channel and for the
single-channel DCF baseline.  Nodes hear each other through three
neighbour lists:

* ``decode``: receivers that can decode a frame from the sender,
* ``sense``: nodes whose carrier sense goes busy while the sender transmits,
* ``interfere``: receivers at which the frame corrupts concurrent frames.

A frame is lost at a receiver when another frame from within the
receiver's interference neighbourhood overlaps it, or when the receiver
itself transmits during it (half duplex).  ``decode`` must be a subset of
``interfere``.

Backoff counts idle slots after DIFS and freezes while the medium is busy
(physical or virtual).  A node whose counter expires in the very instant
another transmission starts still transmits, which is how same-slot
collisions arise.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Optional, Protocol, Sequence

from .energy import ModeClock
from .events import EventQueue


@dataclass(eq=False)
class Tx:
    src: int
    frame: Any
    start: int
    end: int
    bad: set = field(default_factory=set)

    def received_by(self, node: int) -> bool:
        return node not in self.bad


class MediumUser(Protocol):
    def on_access(self, node: int) -> None: ...
    def on_tx_end(self, tx: Tx) -> None: ...


class Medium:
    def __init__(self, eq: EventQueue, decode: Sequence[Sequence[int]],
                 sense: Sequence[Sequence[int]], interfere: Sequence[Sequence[int]],
                 slot_us: int, difs_us: int, rng: random.Random,
                 clock: Optional[ModeClock] = None, user: Optional[MediumUser] = None):
        n = len(decode)
        self.eq = eq
        self.decode = decode
        self.sense = sense
        self.interfere = interfere
        self.slot = slot_us
        self.difs = difs_us
        self.rng = rng
        self.clock = clock
        self.user = user
        self.cs = [0] * n
        self.tx_cur: list[Optional[Tx]] = [None] * n
        self.active: list[set] = [set() for _ in range(n)]  # frames each node is decoding
        self.nint = [0] * n  # frames on air within interference range
        self.nav = [0] * n
        self.alive = [True] * n
        # backoff state
        self.bo: list[Optional[int]] = [None] * n
        self.count_start: list[Optional[int]] = [None] * n
        self.expiry: list[int] = [0] * n
        self.token = [0] * n
        self.wake = [-1] * n  # pending NAV-expiry wake-up time

    # -- carrier state --------------------------------------------------

    def idle(self, node: int) -> bool:
        return (self.cs[node] == 0 and self.tx_cur[node] is None
                and self.nav[node] <= self.eq.now)

    def set_nav(self, node: int, until: int) -> None:
        if until > self.nav[node]:
            self.nav[node] = until
            if self.bo[node] is not None:
                self._freeze(node)
                self._resume(node)

    # -- transmissions --------------------------------------------------

    def start_tx(self, src: int, frame: Any, duration: int) -> Tx:
        now = self.eq.now
        tx = Tx(src, frame, now, now + duration)
        clock = self.clock
        if clock is not None:
            clock.touch(src, now)
            clock.tx_on[src] = True
        tx_cur = self.tx_cur
        active = self.active
        for other in active[src]:
            other.bad.add(src)  # half duplex
        nint = self.nint
        for r in self.interfere[src]:
            nint[r] += 1
            if active[r]:
                for other in active[r]:
                    other.bad.add(r)
        for r in self.decode[src]:
            if nint[r] > 1 or tx_cur[r] is not None:
                tx.bad.add(r)
            active[r].add(tx)
        cs = self.cs
        bo = self.bo
        for r in self.sense[src]:
            cs[r] += 1
            if cs[r] == 1 and bo[r] is not None:
                self._freeze(r)
        self._freeze(src)
        if clock is not None:
            last = clock.last
            rxc = clock.rx_count
            txon = clock.tx_on
            acc_tx, acc_rx, acc_base = clock.acc[0], clock.acc[1], clock.acc[clock.base]
            for r in self.decode[src]:
                dt = now - last[r]
                if dt:
                    if txon[r]:
                        acc_tx[r] += dt
                    elif rxc[r]:
                        acc_rx[r] += dt
                    else:
                        acc_base[r] += dt
                    last[r] = now
                rxc[r] += 1
        tx_cur[src] = tx
        self.eq.push(tx.end, self._end_tx, tx)
        return tx

    def _end_tx(self, tx: Tx) -> None:
        now = self.eq.now
        src = tx.src
        clock = self.clock
        self.tx_cur[src] = None
        if clock is not None:
            clock.touch(src, now)
            clock.tx_on[src] = False
            last = clock.last
            rxc = clock.rx_count
            txon = clock.tx_on
            acc_tx, acc_rx = clock.acc[0], clock.acc[1]
            for r in self.decode[src]:
                dt = now - last[r]
                if dt:
                    if txon[r]:
                        acc_tx[r] += dt
                    else:
                        acc_rx[r] += dt  # rx_count >= 1 here
                    last[r] = now
                rxc[r] -= 1
        nint = self.nint
        for r in self.interfere[src]:
            nint[r] -= 1
        active = self.active
        for r in self.decode[src]:
            active[r].discard(tx)
        if self.user is not None:
            self.user.on_tx_end(tx)
        cs = self.cs
        bo = self.bo
        for r in self.sense[src]:
            cs[r] -= 1
            if cs[r] == 0 and bo[r] is not None:
                self._resume(r)
        self._resume(src)

    # -- backoff ----------------------------------------------------------

    def contend(self, node: int, cw: int) -> None:
        """Request channel access after a backoff drawn from [0, cw]."""
        if not self.alive[node]:
            return
        if self.bo[node] is None:
            self.bo[node] = self.rng.randint(0, cw)
        self._resume(node)

    def contending(self, node: int) -> bool:
        return self.bo[node] is not None

    def withdraw(self, node: int) -> None:
        self.bo[node] = None
        self.count_start[node] = None
        self.token[node] += 1

    def _freeze(self, node: int) -> None:
        start = self.count_start[node]
        if start is None:
            return
        now = self.eq.now
        if self.expiry[node] <= now:
            return  # fires in this instant regardless
        if now > start:
            self.bo[node] -= (now - start) // self.slot
        self.count_start[node] = None
        self.token[node] += 1

    def _resume(self, node: int) -> None:
        if self.bo[node] is None or self.count_start[node] is not None:
            return
        if not self.alive[node] or self.cs[node] or self.tx_cur[node] is not None:
            return  # the end of the busy period resumes us
        now = self.eq.now
        if self.nav[node] > now:
            if self.wake[node] != self.nav[node]:
                self.wake[node] = self.nav[node]
                self.eq.push(self.nav[node], self._resume, node)
            return
        start = now + self.difs
        self.count_start[node] = start
        self.expiry[node] = start + self.bo[node] * self.slot
        self.token[node] += 1
        self.eq.push(self.expiry[node], self._expire, node, self.token[node])

    def _expire(self, node: int, token: int) -> None:
        if token != self.token[node]:
            return
        self.bo[node] = None
        self.count_start[node] = None
        if self.alive[node] and self.user is not None:
            self.user.on_access(node)

    def kill(self, node: int) -> None:
        self.alive[node] = False
        self.withdraw(node)
