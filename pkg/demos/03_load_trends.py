"""Throughput, delay and energy of ECR-MAC against single-channel DCF.

The full evaluation (80 nodes, 500 s, flows 2..30, 10 seeds) takes most of
an hour on one core; the defaults below run a short version.  Pass
``--full`` for the real thing.

    python3 demos/03_load_trends.py            # ~2 min
    python3 demos/03_load_trends.py --full
"""
import argparse
import dataclasses

from ecrmac.experiment import sweep
from ecrmac.metrics import aggregate
from ecrmac.scenario import default_scenario

ap = argparse.ArgumentParser()
ap.add_argument("--full", action="store_true")
args = ap.parse_args()

cfg = default_scenario()
if args.full:
    flows, seeds = (2, 10, 20, 30), range(1, 11)
else:
    cfg = dataclasses.replace(cfg, sim_duration=60.0)
    flows, seeds = (2, 10, 30), range(1, 3)

# %% run
res = sweep(cfg, flows, list(seeds), progress=print)

# %% summarise
def mean(proto, f, attr):
    return getattr(aggregate([r.report for r in res.results if r.protocol == proto and r.flows == f]), attr)

print(f"\n{'flows':>5} {'ECR kb/s':>9} {'DCF kb/s':>9} {'norm':>6} {'ECR delay':>9} {'DCF delay':>9}"
      f" {'ECR J/pkt':>9} {'DCF J/pkt':>9}")
for f in flows:
    row = [mean("ecr", f, "throughput") / 1e3, mean("dcf", f, "throughput") / 1e3,
           mean("ecr", f, "normalized_throughput"),
           mean("ecr", f, "avg_end_to_end_delay"), mean("dcf", f, "avg_end_to_end_delay"),
           mean("ecr", f, "per_packet_energy"), mean("dcf", f, "per_packet_energy")]
    print(f"{f:>5} " + " ".join(f"{v:>9.3f}" if v is not None else f"{'-':>9}" for v in row))
