"""Cross-checks of the production code against the brute-force references.

Each check builds seeded random instances, runs both sides and returns a
small report. The ``oracle`` subcommand and the test suite share them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import oracles
from .ant_tree import AntParams, WeightedGraph, build_path_sets, construct_tree, k_shortest_paths
from .cluster import CmtEntry, broadcast_range


def random_graph(rng: np.random.Generator, n_min: int = 3, n_max: int = 8, p: float = 0.45,
                 max_cost: int = 3, delay_range=(0.05, 0.3)) -> WeightedGraph:
    """Undirected random graph with small integer costs, so cost ties are common."""
    n = int(rng.integers(n_min, n_max + 1))
    g = WeightedGraph()
    for u in range(n):
        g.edges.setdefault(u, {})
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                c = int(rng.integers(1, max_cost + 1))
                d = float(rng.uniform(*delay_range))
                g.add_link(u, v, c, d)
    return g


def reachable(g: WeightedGraph, s: int) -> set[int]:
    seen, todo = {s}, [s]
    while todo:
        u = todo.pop()
        for v in g.successors(u):
            if v not in seen:
                seen.add(v)
                todo.append(v)
    return seen


@dataclass
class KspReport:
    compared: int = 0
    mismatches: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def check_k_shortest(n_graphs: int = 200, seed: int = 0, Ks=(1, 2, 3)) -> KspReport:
    """Yen against exhaustive enumeration on ``n_graphs`` random graphs (8 nodes at most)."""
    rng = np.random.default_rng(seed)
    rep = KspReport()
    gi = 0
    while gi < n_graphs:
        g = random_graph(rng)
        s = 0
        targets = sorted(reachable(g, s) - {s})
        if not targets:
            continue
        gi += 1
        t = targets[int(rng.integers(len(targets)))]
        for K in Ks:
            got = [(p.cost, p.nodes) for p in k_shortest_paths(g, s, t, K)]
            want = oracles.k_shortest_brute(g.edges, s, t, K)
            rep.compared += 1
            if got != want:
                rep.mismatches.append((gi, K, got, want))
    return rep


@dataclass
class AntInstance:
    index: int
    ant_cost: float
    optimum: float
    iterations: int

    @property
    def within_5pct(self) -> bool:
        return self.ant_cost <= self.optimum * 1.05 + 1e-12


@dataclass
class AntReport:
    instances: list = field(default_factory=list)
    decisions: int = 0
    worst_sum_error: float = 0.0
    support_violations: int = 0

    @property
    def hits(self) -> int:
        return sum(1 for i in self.instances if i.within_5pct)


def check_ant_convergence(n_instances: int = 100, seed: int = 0, iterations: int = 500,
                          params: AntParams | None = None) -> AntReport:
    """Colony result against the exhaustive best combination of backup paths.

    Every ant decision is also checked: probabilities over the admissible
    hops must sum to one and no mass may fall outside them.
    """
    rng = np.random.default_rng(seed)
    base = params or AntParams()
    rep = AntReport()

    def log_decision(i, allowed, probs):
        rep.decisions += 1
        rep.worst_sum_error = max(rep.worst_sum_error, abs(math.fsum(probs.values()) - 1.0))
        if set(probs) - set(allowed) or any(probs.get(j, 0.0) < 0 for j in allowed):
            rep.support_violations += 1

    made = 0
    while made < n_instances:
        g = random_graph(rng)
        s = 0
        others = sorted(reachable(g, s) - {s})
        if not others:
            continue
        n_dest = int(rng.integers(1, min(3, len(others)) + 1))
        dests = sorted(rng.choice(others, size=n_dest, replace=False).tolist())
        K = int(rng.integers(1, 4))
        p = AntParams(**{**base.__dict__, "K": K, "max_iterations": iterations,
                         "delay_bound": float(rng.uniform(0.2, 0.8))})
        sets = build_path_sets(g, s, dests, K)
        tree = construct_tree(g, s, dests, p, np.random.default_rng(seed * 100003 + made),
                              path_sets=sets, decision_log=log_decision)

        def cost_of(combo):
            return oracles.union_cost(g.edges, combo, p.delay_bound, p.delay_penalty)

        opt, _ = oracles.best_combination(sets, cost_of)
        rep.instances.append(AntInstance(made, tree.cost, opt, tree.iterations))
        made += 1
    return rep


def check_broadcast_range(limit: int = 10) -> list[tuple[int, int, int, int, int]]:
    """Mismatches of the range rule over every (old, new, T) in [0, limit]^3."""
    bad = []
    for n_old in range(limit + 1):
        for n_new in range(limit + 1):
            cmt = {}
            for i in range(n_old + n_new):
                cmt[i] = CmtEntry(i, 0, 1, 0.0, 0.0, is_new=i >= n_old)
            for T in range(limit + 1):
                got = broadcast_range(cmt, T)
                want = oracles.broadcast_range_formula(n_old, n_new, T)
                if got != want:
                    bad.append((n_old, n_new, T, got, want))
    return bad


@dataclass
class QuiescenceReport:
    topologies: int = 0
    problems: list = field(default_factory=list)
    pdfs: list = field(default_factory=list)
    last_role_change: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.problems and all(p == 100.0 for p in self.pdfs)


def cluster_problems(sim, k: int) -> list[str]:
    """Structural faults of the clustering at the simulator's current time."""
    from .cluster import Role
    from .topology import k_hop_set

    out = []
    agents = sim.agents
    adj = sim.adjacency()
    leaders = sorted(m for m, a in agents.items() if a.role is Role.LEADER)
    for m, a in sorted(agents.items()):
        if a.role is Role.MEMBER:
            la = agents.get(a.leader)
            if la is None or la.role is not Role.LEADER:
                out.append(f"member {m} points at non-leader {a.leader}")
            elif m not in la.cmt:
                out.append(f"member {m} missing from leader {a.leader} table")
        elif a.role is not Role.LEADER:
            out.append(f"node {m} still {a.role.value}")
    for lead in leaders:
        for m in agents[lead].cmt:
            if agents[m].role is not Role.MEMBER or agents[m].leader != lead:
                out.append(f"leader {lead} lists {m} which does not follow it")
        near = k_hop_set(lead, adj, k)
        out.extend(f"leaders {lead} and {o} within {k} hops" for o in leaders if o > lead and o in near)
    return out


def check_quiescence(n_topologies: int = 50, seed: int = 0, max_nodes: int = 40,
                     max_group: int = 12, traffic_start: float = 20.0) -> QuiescenceReport:
    """Static connected topologies: clustering settles and delivery is lossless.

    Traffic starts at ``traffic_start``. By then the last role change must
    lie at least two rounds of the slowest periodic timer in the past; the
    cluster structure is inspected at that moment and again at the end.
    """
    import dataclasses

    from .cluster import RangeConfig
    from .engine import Scenario, Simulator, TrafficConfig
    from .topology import WorldConfig, hop_distances

    rng = np.random.default_rng(seed)
    proto = RangeConfig()
    rounds = 2 * max(proto.join_timeout, proto.leader_beacon_period, proto.member_base_period)
    rep = QuiescenceReport()
    attempt = 0
    while rep.topologies < n_topologies:
        attempt += 1
        n = int(rng.integers(8, max_nodes + 1))
        g = int(rng.integers(1, min(max_group, n - 1) + 1))
        sc = Scenario(world=WorldConfig(n_nodes=n, min_speed=0, max_speed=0, sim_time=traffic_start + 15),
                      traffic=dataclasses.replace(TrafficConfig(), group_size=g, start_time=traffic_start))
        sim = Simulator(sc, seed * 1000 + attempt)
        if len(hop_distances(0, sim.adjacency())) != n:
            continue
        rep.topologies += 1
        tag = f"topology {rep.topologies}"
        sim.run_until(traffic_start)
        last = max((t for t, *_ in sim.role_log), default=0.0)
        rep.last_role_change = max(rep.last_role_change, last)
        if last > traffic_start - rounds:
            rep.problems.append(f"{tag}: roles still changing at {last:.2f} s")
        rep.problems.extend(f"{tag} at traffic start: {p}" for p in cluster_problems(sim, proto.k_hops))
        res = sim.run()
        if sim.role_log and sim.role_log[-1][0] > last:
            rep.problems.append(f"{tag}: role change during traffic")
        rep.problems.extend(f"{tag} at end: {p}" for p in cluster_problems(sim, proto.k_hops))
        rep.pdfs.append(res.row.pdf_pct)
    return rep
