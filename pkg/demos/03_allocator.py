"""
Greedy block packing against full enumeration
=============================================

Three users share nine blocks. The greedy pass serves the largest deficit
first; a local search then repairs what the greedy order got wrong.
"""
import numpy as np

from zotnet import allocate_rbs, exhaustive_allocate
from zotnet.allocator import rbs_used

rng = np.random.default_rng(3)
rates = rng.uniform(0.0, 1.332, (3, 9))
targets = [2.0, 1.5, 2.5]

for name, dec in (("greedy only", allocate_rbs(targets, rates, repair=False)),
                  ("greedy + repair", allocate_rbs(targets, rates)),
                  ("exhaustive", exhaustive_allocate(targets, rates))):
    print(f"{name:16s} blocks {rbs_used(dec)}  feasible {all(d.feasible for d in dec)}")
    for u, d in enumerate(dec):
        print(f"   user {u}: blocks {d.assigned_rbs} -> {d.achieved_rate:.2f} of {d.target_rate} Mb/s")

# a tally over many random instances
agree = gap = 0
for _ in range(200):
    r = rng.uniform(0, 1.332, (3, 9))
    t = rng.uniform(0, 3, 3)
    g, e = allocate_rbs(t, r), exhaustive_allocate(t, r)
    agree += all(d.feasible for d in g) == all(d.feasible for d in e)
    if all(d.feasible for d in e):
        gap = max(gap, rbs_used(g) - rbs_used(e))
print("feasibility agreement", agree, "/ 200, worst block gap", gap)
