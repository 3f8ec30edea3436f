"""Four nodes on a line, two flows, three data channels.

A(0) sends to B(1) and D(3) sends to C(2).  B and C are neighbours, so a
single-channel MAC would serialise the two links.  Run it and watch the
negotiation put the links on different channels in the same slots.

    python3 demos/01_hidden_terminal.py
"""
from collections import defaultdict

from ecrmac.audit import verify
from ecrmac.engine import run
from ecrmac.scenario import ChannelSpec, FlowSpec, ScenarioConfig
from ecrmac.trace import records

# %% the scenario
cfg = ScenarioConfig(
    num_nodes=4,
    node_positions=((0.0, 0.0), (100.0, 0.0), (200.0, 0.0), (300.0, 0.0)),
    area_width=400.0, area_height=100.0,
    channels=tuple(ChannelSpec(i, 2e6) for i in range(4)),  # 0 is the control channel
    pu_list=(),
    flows=(FlowSpec(0, 1, 2e6, 400.0), FlowSpec(3, 2, 2e6, 400.0)),
    tie_break="lowest",
    sim_duration=0.5,
)
report, trace = run(cfg, seed=1)
recs = records(trace)

# %% what got negotiated, interval by interval
table = defaultdict(lambda: defaultdict(list))
for r in recs:
    if r["kind"] == "assign":
        table[r["data"]["interval"]][tuple(r["data"]["link"])].append((r["ch"], r["slot"]))

names = {0: "A", 1: "B", 2: "C", 3: "D"}
for k in sorted(table)[:3]:
    print(f"beacon interval {k}")
    for (u, v), keys in sorted(table[k].items()):
        chans = sorted({c for c, _ in keys})
        slots = sorted(t for _, t in keys)
        print(f"  {names[u]}->{names[v]}  channel(s) {chans}  slots {slots[:6]}{' ...' if len(slots) > 6 else ''}")

# %% outcome
lost = [r for r in recs if r["kind"] == "data_tx" and not r["data"]["ok"]]
print(f"\ndelivered {report.delivered_packets} of {report.generated} packets, {len(lost)} DATA frames lost")
print("\n".join(verify(recs).lines()))
