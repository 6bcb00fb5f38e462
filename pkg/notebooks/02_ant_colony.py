"""
Ants choosing a multicast tree
==============================

A small weighted graph, its backup paths, and the colony converging on a
cheap combination of source-to-leader paths.
"""

import numpy as np

from aamrp.ant_tree import AntParams, WeightedGraph, build_path_sets, construct_tree, k_shortest_paths
from aamrp.oracles import best_combination, union_cost

# Links carry a cost and a delay; both directions are added.
g = WeightedGraph()
for u, v, cost in [(0, 1, 1), (1, 2, 1), (0, 3, 2), (3, 2, 1), (2, 4, 1), (3, 4, 3), (1, 5, 2), (4, 5, 1)]:
    g.add_link(u, v, cost, 0.01)

# The three cheapest loop-free routes from the source to one leader.
for p in k_shortest_paths(g, 0, 4, 3):
    print("path", p.nodes, "cost", p.cost)

# Backup path sets for two leaders, then the colony.
params = AntParams(K=3, max_iterations=200)
sets = build_path_sets(g, 0, [4, 5], params.K)
history = []
tree = construct_tree(g, 0, [4, 5], params, np.random.default_rng(0), path_sets=sets, convergence=history)

print("chosen paths:", {d: p.nodes for d, p in tree.paths.items()})
print("tree cost", tree.cost, "after", tree.iterations, "iterations")
print("best-so-far cost every 20 iterations:", history[::20])

# Exhaustive check over every combination of backup paths.
opt, combo = best_combination(sets, lambda c: union_cost(g.edges, c, params.delay_bound, params.delay_penalty))
print("exhaustive optimum", opt)
