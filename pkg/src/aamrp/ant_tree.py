"""Ant-colony construction of the source-to-leader multicast tree.

The colony works on top of a backup-path layer: for each destination the
K cheapest loop-free paths are computed first, and an ant builds a tree by
walking, for every destination in turn, from the source along edges that
keep it on a prefix of one of those backup paths. Each step is a weighted
random draw over the admissible next hops (pheromone^alpha * heuristic^beta).
"""
from __future__ import annotations

import heapq
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

log = logging.getLogger(__name__)


class DestinationUnreachable(Exception):
    pass


class EmptyDestinationSet(ValueError):
    pass


@dataclass
class WeightedGraph:
    """Directed graph; ``edges[u][v] = (cost, delay)``."""

    edges: dict[int, dict[int, tuple[float, float]]] = field(default_factory=dict)

    def add_edge(self, u: int, v: int, cost: float = 1.0, delay: float = 0.0) -> None:
        if u == v:
            raise ValueError("self-loops are not allowed")
        if not cost >= 0 or cost == float("inf"):
            raise ValueError(f"edge cost must be finite and non-negative, got {cost}")
        self.edges.setdefault(u, {})[v] = (float(cost), float(delay))
        self.edges.setdefault(v, {})

    def add_link(self, u: int, v: int, cost: float = 1.0, delay: float = 0.0) -> None:
        self.add_edge(u, v, cost, delay)
        self.add_edge(v, u, cost, delay)

    @classmethod
    def from_adjacency(cls, adjacency, cost: float = 1.0, delay: float = 0.0,
                       nodes: Iterable[int] | None = None) -> "WeightedGraph":
        g = cls()
        keep = None if nodes is None else set(nodes)
        items = adjacency.items() if isinstance(adjacency, dict) else enumerate(adjacency)
        for u, nbrs in items:
            if keep is not None and u not in keep:
                continue
            g.edges.setdefault(u, {})
            for v in nbrs:
                if keep is None or v in keep:
                    g.add_edge(u, v, cost, delay)
        return g

    @property
    def nodes(self) -> set[int]:
        return set(self.edges)

    def cost(self, u: int, v: int) -> float:
        return self.edges[u][v][0]

    def delay(self, u: int, v: int) -> float:
        return self.edges[u][v][1]

    def successors(self, u: int):
        return self.edges.get(u, {})


@dataclass(frozen=True)
class Path:
    nodes: tuple[int, ...]
    cost: float
    delay: float

    @property
    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.nodes, self.nodes[1:]))


def path_from_nodes(g: WeightedGraph, nodes) -> Path:
    nodes = tuple(nodes)
    cost = sum(g.cost(u, v) for u, v in zip(nodes, nodes[1:]))
    delay = sum(g.delay(u, v) for u, v in zip(nodes, nodes[1:]))
    return Path(nodes, cost, delay)


def _dijkstra(g: WeightedGraph, s: int, t: int, banned_nodes=frozenset(), banned_edges=frozenset()):
    # Heap key (cost, node sequence) gives the lexicographically smallest
    # path among the cheapest ones, provided edge costs are positive.
    heap = [(0.0, (s,))]
    done = set()
    while heap:
        cost, path = heapq.heappop(heap)
        u = path[-1]
        if u in done:
            continue
        done.add(u)
        if u == t:
            return cost, path
        for v, (c, _) in g.successors(u).items():
            if v in done or v in banned_nodes or (u, v) in banned_edges:
                continue
            heapq.heappush(heap, (cost + c, path + (v,)))
    return None


def k_shortest_paths(g: WeightedGraph, s: int, m: int, K: int) -> list[Path]:
    """Up to ``K`` cheapest loop-free ``s``->``m`` paths (Yen's algorithm).

    Ties in cost are broken by the lexicographic order of the node
    sequence, so the result is a pure function of the graph.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if s == m:
        return [Path((s,), 0.0, 0.0)]
    first = _dijkstra(g, s, m)
    if first is None:
        raise DestinationUnreachable(f"{m} unreachable from {s}")
    found = [first[1]]
    candidates: list[tuple[float, tuple[int, ...]]] = []
    in_candidates: set[tuple[int, ...]] = set()
    while len(found) < K:
        last = found[-1]
        for i in range(len(last) - 1):
            spur, root = last[i], last[: i + 1]
            banned_edges = {(p[i], p[i + 1]) for p in found if len(p) > i + 1 and p[: i + 1] == root}
            banned_nodes = frozenset(root[:-1])
            res = _dijkstra(g, spur, m, banned_nodes, banned_edges)
            if res is None:
                continue
            total = root[:-1] + res[1]
            if total in in_candidates:
                continue
            root_cost = sum(g.cost(u, v) for u, v in zip(root, root[1:]))
            heapq.heappush(candidates, (root_cost + res[0], total))
            in_candidates.add(total)
        while candidates and candidates[0][1] in found:
            heapq.heappop(candidates)
        if not candidates:
            break
        found.append(heapq.heappop(candidates)[1])
    return [path_from_nodes(g, p) for p in found]


def apply_delay_penalty(path: Path, delay_bound: float, penalty: float) -> float:
    """Cost of ``path`` after the soft delay constraint."""
    if penalty <= 1:
        raise ValueError("penalty must be > 1")
    return path.cost * penalty if path.delay > delay_bound else path.cost


@dataclass
class AntParams:
    alpha: float = 1.0
    beta: float = 2.0
    rho: float = 0.1
    Q: float = 1.0
    n_ants: int = 10
    max_iterations: int = 50
    time_limit: float = 10.0
    K: int = 3
    delay_bound: float = 0.5
    delay_penalty: float = 10.0
    tau0: float = 1.0
    tau_min: float = 0.01
    deposit_policy: str = "best"  # or "all"
    persist_pheromone: bool = False

    def violations(self) -> list[tuple[str, str]]:
        out = []
        if self.alpha < 0:
            out.append(("ants.alpha", "must be >= 0"))
        if self.beta < 0:
            out.append(("ants.beta", "must be >= 0"))
        if not 0 < self.rho < 1:
            out.append(("ants.rho", "must lie in the open interval (0, 1)"))
        if self.Q <= 0:
            out.append(("ants.Q", "must be > 0"))
        if self.n_ants < 1:
            out.append(("ants.n_ants", "must be >= 1"))
        if self.max_iterations < 1:
            out.append(("ants.max_iterations", "must be >= 1"))
        if self.time_limit <= 0:
            out.append(("ants.time_limit", "must be > 0"))
        if self.K < 1:
            out.append(("ants.K", "must be >= 1"))
        if self.delay_penalty <= 1:
            out.append(("ants.delay_penalty", "must be > 1"))
        if self.tau_min <= 0:
            out.append(("ants.tau_min", "must be > 0"))
        if self.tau0 < self.tau_min:
            out.append(("ants.tau0", "must be >= ants.tau_min"))
        if self.deposit_policy not in ("best", "all"):
            out.append(("ants.deposit_policy", "must be 'best' or 'all'"))
        return out


class PheromoneTable:
    """Per directed edge pheromone, floored at ``tau_min``."""

    def __init__(self, edges: Iterable[tuple[int, int]] = (), tau0: float = 1.0, tau_min: float = 0.01):
        self.tau0 = tau0
        self.tau_min = tau_min
        self.tau: dict[tuple[int, int], float] = {e: tau0 for e in edges}

    def __getitem__(self, edge) -> float:
        return self.tau.get(edge, self.tau0)

    def __setitem__(self, edge, value: float) -> None:
        self.tau[edge] = max(self.tau_min, value)

    def copy(self) -> "PheromoneTable":
        t = PheromoneTable(tau0=self.tau0, tau_min=self.tau_min)
        t.tau = dict(self.tau)
        return t

    @classmethod
    def for_graph(cls, g: WeightedGraph, tau0: float, tau_min: float) -> "PheromoneTable":
        return cls(((u, v) for u, nbrs in g.edges.items() for v in nbrs), tau0, tau_min)


def _weight(tau: float, eta: float, alpha: float, beta: float) -> float:
    return tau ** alpha * eta ** beta


def transition_probabilities(i: int, allowed, tau: PheromoneTable, eta: Callable[[int, int], float],
                             params: AntParams) -> dict[int, float]:
    if not allowed:
        raise ValueError("allowed set is empty")
    w = {u: _weight(tau[(i, u)], eta(i, u), params.alpha, params.beta) for u in allowed}
    total = sum(w.values())
    if not total > 0:
        raise RuntimeError(f"degenerate transition weights at node {i}: {w}")
    return {u: x / total for u, x in w.items()}


def next_node_probability(i: int, j: int, tau: PheromoneTable, eta, params: AntParams, allowed) -> float:
    """Probability that an ant at ``i`` moves to ``j``; zero outside ``allowed``."""
    if j not in allowed:
        if not allowed:
            raise ValueError("allowed set is empty")
        return 0.0
    return transition_probabilities(i, allowed, tau, eta, params)[j]


def evaporate(tau: PheromoneTable, rho: float) -> PheromoneTable:
    if not 0 < rho < 1:
        raise ValueError("rho must be in (0, 1)")
    keep = 1.0 - rho
    floor = tau.tau_min
    for e, v in tau.tau.items():
        tau.tau[e] = max(floor, keep * v)
    return tau


def deposit_amount(c_i: float, c_j: float, Q: float) -> float:
    return Q / ((c_j - c_i) ** 2 + 1.0)


def deposit(tau: PheromoneTable, ant_path, costs, Q: float) -> PheromoneTable:
    """Reinforce every edge of ``ant_path``.

    ``costs[n]`` is the sub-tree cost at node ``n``, i.e. the accumulated
    cost from the source to ``n`` along the ant's path.
    """
    nodes = ant_path.nodes if isinstance(ant_path, Path) else tuple(ant_path)
    for i, j in zip(nodes, nodes[1:]):
        tau[(i, j)] = tau[(i, j)] + deposit_amount(costs[i], costs[j], Q)
    return tau


def accumulated_costs(g: WeightedGraph, path: Path) -> dict[int, float]:
    acc = {path.nodes[0]: 0.0}
    total = 0.0
    for u, v in path.edges:
        total += g.cost(u, v)
        acc[v] = total
    return acc


@dataclass
class MulticastTree:
    source: int
    paths: dict[int, Path]
    cost: float
    edges: frozenset = frozenset()
    iterations: int = 0

    @property
    def destinations(self):
        return sorted(self.paths)

    def delay(self, m: int) -> float:
        return self.paths[m].delay

    def forwarders(self) -> set[int]:
        inner = set()
        for p in self.paths.values():
            inner.update(p.nodes[1:-1])
        return inner


def tree_cost(g: WeightedGraph, paths: Iterable[Path], params: AntParams) -> float:
    """Union-edge cost plus the surcharge of paths breaking the delay bound.

    A path over the bound contributes ``(penalty - 1) * path.cost`` on top of
    its share of the union, which equals pricing that path at
    ``cost * penalty`` when it shares no edges.
    """
    edges = set()
    surcharge = 0.0
    for p in paths:
        edges.update(p.edges)
        if p.delay > params.delay_bound:
            surcharge += apply_delay_penalty(p, params.delay_bound, params.delay_penalty) - p.cost
    return sum(g.cost(u, v) for u, v in edges) + surcharge


def build_path_sets(g: WeightedGraph, s: int, destinations, K: int) -> dict[int, list[Path]]:
    out = {}
    for m in destinations:
        try:
            out[m] = k_shortest_paths(g, s, m, K)
        except DestinationUnreachable:
            log.warning("destination %s unreachable from %s; left out of this tree", m, s)
    return out


def _walk(g, s, m, paths: list[Path], tau, eta, params, rng, decision_log):
    prefix = (s,)
    tabu = {s}
    while prefix[-1] != m:
        depth = len(prefix)
        allowed = sorted({p.nodes[depth] for p in paths
                          if len(p.nodes) > depth and p.nodes[:depth] == prefix
                          and p.nodes[depth] not in tabu})
        i = prefix[-1]
        probs = transition_probabilities(i, allowed, tau, eta, params)
        if decision_log is not None:
            decision_log(i, allowed, probs)
        r = rng.random()
        acc = 0.0
        nxt = allowed[-1]
        for u in allowed:
            acc += probs[u]
            if r < acc:
                nxt = u
                break
        prefix += (nxt,)
        tabu.add(nxt)
    for p in paths:
        if p.nodes == prefix:
            return p
    raise AssertionError("ant left the backup-path layer")


def construct_tree(g: WeightedGraph, s: int, destinations, params: AntParams,
                   rng: np.random.Generator, *, tau: PheromoneTable | None = None,
                   path_sets: dict[int, list[Path]] | None = None,
                   decision_log=None, convergence: list | None = None) -> MulticastTree:
    """Run the colony until ``max_iterations`` or ``time_limit`` and return the best tree seen.

    ``decision_log(i, allowed, probs)`` is called for every ant step;
    ``convergence`` (a list) receives the best-so-far cost per iteration.
    Passing ``tau`` lets the caller keep pheromone across calls.
    """
    dests = set(destinations)
    if not dests:
        raise EmptyDestinationSet("no destinations given")
    dests = sorted(dests - {s})
    if path_sets is None:
        path_sets = build_path_sets(g, s, dests, params.K)
    dests = [m for m in dests if m in path_sets]
    if not dests:
        return MulticastTree(s, {}, 0.0)
    if tau is None:
        # only edges on some backup path can ever be chosen
        tau = PheromoneTable({e for m in dests for p in path_sets[m] for e in p.edges},
                             params.tau0, params.tau_min)

    def eta(i, j):
        return 1.0 / max(g.cost(i, j), 1e-9)

    no_choice = all(len(path_sets[m]) == 1 for m in dests)
    best_paths = None
    best_cost = float("inf")
    started = time.perf_counter()
    it = 0
    for it in range(1, params.max_iterations + 1):
        iteration = []
        for _ in range(params.n_ants):
            chosen = [_walk(g, s, m, path_sets[m], tau, eta, params, rng, decision_log) for m in dests]
            iteration.append((tree_cost(g, chosen, params), chosen))
        it_cost, it_paths = min(iteration, key=lambda x: x[0])
        if it_cost < best_cost:
            best_cost, best_paths = it_cost, it_paths
        evaporate(tau, params.rho)
        depositors = [it_paths] if params.deposit_policy == "best" else [c for _, c in iteration]
        for chosen in depositors:
            for p in chosen:
                deposit(tau, p, accumulated_costs(g, p), params.Q)
        if convergence is not None:
            convergence.append(best_cost)
        if no_choice or time.perf_counter() - started > params.time_limit:
            break
    paths = dict(zip(dests, best_paths))
    edges = frozenset(e for p in best_paths for e in p.edges)
    return MulticastTree(s, paths, best_cost, edges, it)


def write_convergence_csv(path, series) -> None:
    with open(path, "w") as fh:
        fh.write("iteration,cost\n")
        for i, c in enumerate(series, 1):
            fh.write(f"{i},{c!r}\n")
