"""
Trends across a small sweep
===========================

A cut-down version of the default sweep (three seeds, 30 s runs) comparing
AAMRP with network-wide flooding and a shared tree without clusters.
"""

import tempfile
from pathlib import Path

from aamrp.cli import run_sweep
from aamrp.metrics import aggregate
from aamrp.scenario import parse_scenario

sf = parse_scenario("""
world.sim_time = 30
sweep.node_counts = 25, 50, 75
sweep.group_sizes = 1..4
sweep.seeds = 1..3
""")

out = Path(tempfile.mkdtemp())
rows = run_sweep(sf, out, jobs=1)
means = {(r.protocol, r.n_nodes, r.group_size): r.mean() for r in aggregate(rows)}


def fmt(v, scale=1.0):
    return "N/A" if v is None else f"{v * scale:10.2f}"


# Control overhead as the network grows (four receivers).
print("nodes   " + "".join(f"{p:>12s}" for p in sf.sweep.protocols))
for n in sf.sweep.node_counts:
    print(f"{n:5d}   " + "".join(f"  {fmt(means[(p, n, 4)].overhead)}" for p in sf.sweep.protocols))

# Delivery and delay for AAMRP as the group grows (50 nodes).
print("\ngroup   PDF %      delay ms")
for g in sf.sweep.group_sizes:
    m = means[("aamrp", 50, g)]
    print(f"{g:5d}   {fmt(m.pdf_pct)} {fmt(m.delay_s, 1000)}")

# Everything is also on disk: the CSV and one plot-ready file per metric.
print("\n", (out / "metrics.csv").read_text().splitlines()[0])
print(sorted(p.name for p in (out / "plots").iterdir()))
