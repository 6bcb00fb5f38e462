"""Brute-force reference computations.

Deliberately naive: exhaustive enumeration and matrix powers, sharing no
code with the production paths they are used to check.
"""
from __future__ import annotations

import itertools

import numpy as np


def all_simple_paths(edges: dict, s, t) -> list[tuple[float, tuple]]:
    """Every loop-free s->t path as ``(cost, nodes)``, sorted by cost then nodes."""
    out = []

    def dfs(u, path, cost):
        if u == t:
            out.append((cost, tuple(path)))
            return
        for v, (c, _) in edges.get(u, {}).items():
            if v not in path:
                path.append(v)
                dfs(v, path, cost + c)
                path.pop()

    dfs(s, [s], 0.0)
    out.sort()
    return out


def k_shortest_brute(edges: dict, s, t, K: int) -> list[tuple[float, tuple]]:
    return all_simple_paths(edges, s, t)[:K]


def reachability_within(adj: np.ndarray, k: int) -> np.ndarray:
    """Boolean matrix R with R[i, j] true iff j is reachable from i in 1..k steps."""
    n = adj.shape[0]
    a = adj.astype(np.int64)
    power = np.eye(n, dtype=np.int64)
    reach = np.zeros((n, n), dtype=bool)
    for _ in range(k):
        power = np.minimum(power @ a, 1)
        reach |= power.astype(bool)
    np.fill_diagonal(reach, False)
    return reach


def best_combination(path_sets: dict, cost_of) -> tuple[float, tuple]:
    """Cheapest choice of one path per destination, by exhaustive product.

    ``cost_of`` maps a tuple of chosen paths to a tree cost.
    """
    dests = sorted(path_sets)
    best = (float("inf"), ())
    for combo in itertools.product(*(path_sets[m] for m in dests)):
        c = cost_of(combo)
        if c < best[0]:
            best = (c, combo)
    return best


def union_cost(edges: dict, paths, delay_bound: float, penalty: float) -> float:
    used = set()
    extra = 0.0
    for p in paths:
        nodes = p.nodes
        pe = list(zip(nodes, nodes[1:]))
        used.update(pe)
        cost = sum(edges[u][v][0] for u, v in pe)
        delay = sum(edges[u][v][1] for u, v in pe)
        if delay > delay_bound:
            extra += cost * (penalty - 1)
    return sum(edges[u][v][0] for u, v in used) + extra


def evaporate_closed_form(tau0: float, rho: float, n: int) -> float:
    return tau0 * (1 - rho) ** n


def broadcast_range_formula(n_old: int, n_new: int, threshold: int) -> int:
    return 2 if n_old + n_new > threshold else 1
