"""How a receiver picks (channel, timeslot) segments for a new link.

Five nodes, three data channels at different rates, four slots.  One link
already holds a few segments; we ask for a rate on link 0->1 and look at
what the free-segment sets, the link bandwidth and the greedy choice are.

    python3 demos/02_segment_allocation.py
"""
import numpy as np

from ecrmac.conflict import neighbor_sets
from ecrmac.segments import (Neighborhood, ScheduleTable, brute_force_feasible, free_segments,
                             link_bandwidth, select_segments)

# %% topology: 0-1 is the new link, 2->3 is already scheduled nearby
pos = np.array([[0, 0], [100, 0], [200, 0], [300, 0], [0, 120]], dtype=float)
nb = neighbor_sets(pos, 150.0)
print("neighbours:", {i: sorted(s) for i, s in enumerate(nb)})

slots = 4
caps = {1: 2e6 / slots, 2: 5.5e6 / slots, 3: 11e6 / slots}  # alpha = B_c / |T|
existing = {(2, 3): [(3, 0), (3, 1)], (4, 0): [(1, 2)]}

# %% each endpoint's schedule table, filled from what it overheard
tables = {}
for node in (0, 1):
    t = ScheduleTable(owner=node, interval=0, num_timeslots=slots, capacities=dict(caps),
                      neighbors=nb[node])
    for link, keys in existing.items():
        if node in link:
            for c, s in keys:
                t.assign(link, c, s)
        elif any(x in nb[node] for x in link):
            t.observe(link, keys)
    tables[node] = t

for node, t in tables.items():
    free = sorted((s.channel, s.timeslot) for s in free_segments(t))
    print(f"free_segment({node}) = {free}")
band = link_bandwidth(tables[0], tables[1])
print("B(0,1) =", sorted((s.channel, s.timeslot) for s in band))

# %% greedy pick against the four conditions, and the exhaustive check
hood = Neighborhood(nb, existing)
for rate in (1e6, 3e6, 9e6):
    got = select_segments((0, 1), rate, band, hood)
    ok = brute_force_feasible((0, 1), rate, sorted(band, key=lambda s: (s.channel, s.timeslot)), hood)
    picked = [(s.channel, s.timeslot) for s in got] if got else "infeasible"
    print(f"rate {rate / 1e6:.0f} Mb/s -> {picked}   (exhaustive search says feasible={ok})")
