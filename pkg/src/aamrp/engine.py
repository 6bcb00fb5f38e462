"""Discrete-event simulator for cluster-based multicast over a mobile network.

One :class:`Simulator` runs one (scenario, seed) pair. Three protocols share
the same mobility, transport and traffic:

``aamrp``
    clusters of group members elect leaders; the source refreshes an
    ant-built tree to the leaders every ``refresh_period``; leaders hand data
    on to their members by unicast or hop-limited broadcast.
``shared_tree``
    same control plane, but every member joins the tree itself and there is
    no leader-local delivery.
``flooding``
    no control plane; every data packet is flooded network-wide.

The transport is contention free: a transmission reaches every node inside
radio range at send time after ``per_hop_latency``, each copy independently
lost with ``loss_probability``.
"""
from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .ant_tree import AntParams, PheromoneTable, WeightedGraph, construct_tree
from .cluster import ClusterAgent, Kind, ProtocolMessage, RangeConfig, Role
from .metrics import MetricsRow, RunCounters
from .topology import MobilityField, WorldConfig, adjacency_matrix, k_hop_set

log = logging.getLogger(__name__)

PROTOCOLS = ("aamrp", "flooding", "shared_tree")


@dataclass
class TransportModel:
    per_hop_latency: float = 0.002
    loss_probability: float = 0.0


@dataclass
class TreeConfig:
    refresh_period: float = 5.0
    refresh_offset: float = 4.0
    # REQ flood settle time before the tree is computed and REPs go out
    settle: float = 0.05
    # how long the previous round's forwarders stay active after a refresh
    handover: float = 0.1
    # "hop": every link costs 1; "distance": link cost is its length in metres
    edge_cost: str = "hop"


@dataclass
class TrafficConfig:
    sources: int = 1
    group_size: int = 4
    rate: float = 4.0
    payload_bytes: int = 512
    start_time: float = 5.0
    join_jitter: float = 0.5
    source_is_member: bool = False
    # no new packets in the last ``drain`` seconds so in-flight copies can land
    drain: float = 1.0


@dataclass
class Scenario:
    world: WorldConfig = field(default_factory=WorldConfig)
    protocol: RangeConfig = field(default_factory=RangeConfig)
    tree: TreeConfig = field(default_factory=TreeConfig)
    ants: AntParams = field(default_factory=AntParams)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    transport: TransportModel = field(default_factory=TransportModel)
    protocol_name: str = "aamrp"

    def violations(self) -> list[tuple[str, str]]:
        out = self.world.violations() + self.protocol.violations() + self.ants.violations()
        if self.protocol.k_hops != self.world.k_hops:
            out.append(("protocol.k_hops", "world and protocol k_hops disagree"))
        if self.protocol_name not in PROTOCOLS:
            out.append(("protocol.name", f"must be one of {PROTOCOLS}"))
        t = self.traffic
        if t.sources not in (0, 1):
            out.append(("traffic.sources", "must be 0 or 1 (one source per group at most)"))
        if t.group_size < 0:
            out.append(("traffic.group_size", "must be >= 0"))
        if t.group_size + (0 if t.source_is_member else 1) > self.world.n_nodes:
            out.append(("traffic.group_size", "group plus source exceeds n_nodes"))
        if t.rate < 0:
            out.append(("traffic.rate", "must be >= 0"))
        if t.payload_bytes < 0:
            out.append(("traffic.payload_bytes", "must be >= 0"))
        if t.start_time < 0 or t.join_jitter < 0 or t.drain < 0:
            out.append(("traffic.start_time", "times must be >= 0"))
        tr = self.transport
        if tr.per_hop_latency <= 0:
            out.append(("transport.per_hop_latency", "must be > 0"))
        if not 0 <= tr.loss_probability <= 1:
            out.append(("transport.loss_probability", "must lie in [0, 1]"))
        if self.tree.refresh_period <= 0:
            out.append(("tree.refresh_period", "must be > 0"))
        if self.tree.settle < 0 or self.tree.handover < 0:
            out.append(("tree.settle", "must be >= 0"))
        if self.tree.edge_cost not in ("hop", "distance"):
            out.append(("tree.edge_cost", "must be 'hop' or 'distance'"))
        return out


class ConfigError(ValueError):
    def __init__(self, violations):
        self.violations = violations
        super().__init__("; ".join(f"{k}: {v}" for k, v in violations))


@dataclass(frozen=True)
class DataPacket:
    source: int
    group: int
    seq: int
    created_at: float
    payload_bytes: int


@dataclass
class Forwarding:
    round: int
    children: set = field(default_factory=set)


@dataclass
class RunResult:
    counters: RunCounters
    row: MetricsRow
    trace: list[str] | None
    sim: "Simulator"


def _fmt_t(t: float) -> str:
    return f"{t:.9f}"


class Simulator:
    GROUP = 0

    def __init__(self, scenario: Scenario, seed: int, trace: bool = False, convergence: bool = False,
                 positions=None, source: int | None = None, members=None):
        """``positions``, ``source`` and ``members`` override the random draws (for hand-built cases)."""
        bad = scenario.violations()
        if bad:
            raise ConfigError(bad)
        self.sc = scenario
        self.seed = seed
        w = scenario.world
        self.n = w.n_nodes
        ss = np.random.SeedSequence(seed)
        mob, ants, traffic, transport = ss.spawn(4)
        self.rng_mobility = np.random.default_rng(mob)
        self.rng_ants = np.random.default_rng(ants)
        self.rng_traffic = np.random.default_rng(traffic)
        self.rng_transport = np.random.default_rng(transport)

        self.field = MobilityField(w, self.rng_mobility)
        if positions is not None:
            pos = np.asarray(positions, dtype=float)
            if pos.shape != (self.n, 2):
                raise ValueError(f"positions must have shape ({self.n}, 2)")
            self.field.pos = pos.copy()
        self._ticks = 0
        self._adj_tick = -1
        self._adj = None
        self._adj_mat = None
        self._conn_cache: dict[int, int] = {}

        self.now = 0.0
        self._queue: list = []
        self._ordinal = itertools.count()
        self.last_event_time = 0.0

        self.counters = RunCounters()
        self.trace: list[str] | None = [] if trace else None
        if trace:
            self.trace.append(f"# protocol={scenario.protocol_name}")
            self.trace.append(f"# seed={seed} n_nodes={self.n} group_size={scenario.traffic.group_size}")

        self.seen: list[set] = [set() for _ in range(self.n)]
        self.routes: list[dict] = [dict() for _ in range(self.n)]
        self.reverse_path: dict[int, int] = {}
        self.req_round = 0
        self.forwarding: dict[int, Forwarding] = {}
        self.swap_time = 0.0
        self.trees = []
        # per refresh round, best-so-far tree cost after each colony iteration
        self.convergence: list[list[float]] | None = [] if convergence else None
        self.pheromone: PheromoneTable | None = None
        self._data_seen_tree: list[set] = [set() for _ in range(self.n)]
        self._data_seen_local: list[set] = [set() for _ in range(self.n)]
        self._received: set = set()
        self._local_done: set = set()
        self._data_seq = itertools.count(1)
        self.role_log: list[tuple[float, int, Role, Role]] = []

        self._choose_membership(source, members)
        self.agents: dict[int, ClusterAgent] = {}
        if scenario.protocol_name != "flooding":
            for m in self.members:
                self.agents[m] = ClusterAgent(m, self.GROUP, scenario.protocol, self)
        self.flood_members: set[int] = set()
        self._started = False

    # setup

    def _choose_membership(self, source=None, members=None) -> None:
        t = self.sc.traffic
        order = self.rng_traffic.permutation(self.n).tolist()
        self.source = order[0] if source is None else source
        if members is not None:
            self.members = list(members)
        elif t.source_is_member:
            self.members = order[:t.group_size]
        else:
            self.members = order[1:1 + t.group_size]
        self.join_times = {m: float(self.rng_traffic.uniform(0, t.join_jitter)) if t.join_jitter > 0 else 0.0
                           for m in self.members}

    def schedule(self, time: float, kind: str, fn, *args) -> None:
        if time < self.now:
            raise RuntimeError(f"event {kind} scheduled in the past ({time} < {self.now})")
        heapq.heappush(self._queue, (time, next(self._ordinal), kind, fn, args))

    # topology access

    def _sync(self) -> None:
        tick = self.sc.world.tick
        target = int(math.floor(self.now / tick + 1e-9))
        while self._ticks < target:
            self.field.step(tick)
            self._ticks += 1
        if self._adj_tick != self._ticks or self._adj is None:
            if self.field.static and self._adj is not None:
                self._adj_tick = self._ticks
                return
            self._adj_mat = adjacency_matrix(self.field.pos, self.sc.world.radio_range)
            self._adj = [np.flatnonzero(r).tolist() for r in self._adj_mat]
            self._adj_tick = self._ticks
            self._conn_cache = {}

    def adjacency(self) -> list[list[int]]:
        self._sync()
        return self._adj

    def in_range(self, a: int, b: int) -> bool:
        self._sync()
        return bool(self._adj_mat[a, b])

    def connectivity(self, node: int) -> int:
        self._sync()
        c = self._conn_cache.get(node)
        if c is None:
            c = len(k_hop_set(node, self._adj, self.sc.world.k_hops))
            self._conn_cache[node] = c
        return c

    # tracing

    def _trace_ctrl(self, msg: ProtocolMessage, node: int, direction: str) -> None:
        dest = "BCAST" if msg.dest is None else str(msg.dest)
        self.trace.append("\t".join((_fmt_t(self.now), msg.kind.value, str(msg.origin), dest, str(msg.group),
                                     str(msg.hop_count), str(msg.ttl), str(msg.seq), str(node), direction)))

    def _trace_data(self, pkt: DataPacket, holder: int, event: str, extra) -> None:
        self.trace.append("\t".join((_fmt_t(self.now), "DATA", str(pkt.source), str(holder), str(pkt.group),
                                     str(pkt.seq), event, str(extra))))

    # transport

    def _receivers(self, sender: int, dest: int | None = None) -> list[int]:
        adj = self.adjacency()
        if dest is None:
            rx = adj[sender]
        else:
            rx = [dest] if self._adj_mat[sender, dest] else []
        p = self.sc.transport.loss_probability
        if p > 0 and rx:
            keep = self.rng_transport.random(len(rx)) >= p
            rx = [r for r, k in zip(rx, keep) if k]
        return rx

    def _send_ctrl(self, sender: int, msg: ProtocolMessage, next_hop: int | None) -> None:
        self.counters.routing_packets_sent += 1
        if self.trace is not None:
            self._trace_ctrl(msg, sender, "TX")
        rx = self._receivers(sender, next_hop)
        if rx:
            self.schedule(self.now + self.sc.transport.per_hop_latency, "MessageDelivery",
                          self._deliver_ctrl, sender, rx, msg.relayed())

    # the ``net`` interface used by ClusterAgent

    def flood(self, node: int, msg: ProtocolMessage) -> None:
        self.seen[node].add((msg.kind, msg.origin, msg.seq))
        self._send_ctrl(node, msg, None)

    def unicast(self, node: int, dest: int, msg: ProtocolMessage) -> None:
        self._forward_unicast(node, dest, msg)

    def _next_hop(self, node: int, dest: int) -> int | None:
        if self.in_range(node, dest):
            return dest
        return self.routes[node].get(dest)

    def _forward_unicast(self, node: int, dest: int, msg: ProtocolMessage) -> None:
        nh = self._next_hop(node, dest)
        if nh is None or msg.hop_count > self.n:
            return
        self._send_ctrl(node, msg, nh)

    def set_timer(self, node: int, delay: float, kind: str, group: int, token: int) -> None:
        self.schedule(self.now + delay, "TimerFire", self.agents[node].on_timer, kind, token)

    def role_changed(self, node: int, group: int, old: Role, new: Role) -> None:
        self.role_log.append((self.now, node, old, new))

    # control reception

    def _deliver_ctrl(self, sender: int, receivers: list[int], msg: ProtocolMessage) -> None:
        c = self.counters
        key = (msg.kind, msg.origin, msg.seq)
        tracing = self.trace is not None
        for r in receivers:
            c.control_packets_received += 1
            if tracing:
                self._trace_ctrl(msg, r, "RX")
            if msg.dest is not None:
                # unicast hop
                self.routes[r][msg.origin] = sender
                if msg.kind is Kind.MCAST_REP:
                    self._on_rep(r, sender, msg)
                elif r == msg.dest:
                    agent = self.agents.get(r)
                    if agent is not None:
                        agent.on_message(msg)
                else:
                    self._forward_unicast(r, msg.dest, msg)
                continue
            seen = self.seen[r]
            if key in seen:
                continue
            seen.add(key)
            self.routes[r][msg.origin] = sender
            if msg.kind is Kind.MCAST_REQ:
                self.reverse_path[r] = sender
            else:
                agent = self.agents.get(r)
                if agent is not None:
                    agent.on_message(msg)
            if msg.ttl > 0:
                self._send_ctrl(r, msg, None)

    # upper tier: REQ flood, ant tree, REP

    def _refresh(self) -> None:
        self.req_round += 1
        # the previous round keeps forwarding until the new one is installed
        self.swap_time = self.now + self.sc.tree.settle + self.sc.tree.handover
        self.reverse_path = {self.source: self.source}
        msg = ProtocolMessage(Kind.MCAST_REQ, self.source, self.GROUP, 0, self.n, self.req_round)
        self._snapshot = [list(a) for a in self.adjacency()]
        self._snapshot_pos = self.field.pos.copy()
        self.flood(self.source, msg)
        self.schedule(self.now + self.sc.tree.settle, "TreeRefresh", self._build_tree, self.req_round)
        nxt = self.now + self.sc.tree.refresh_period
        if nxt <= self.sc.world.sim_time:
            self.schedule(nxt, "TreeRefresh", self._refresh)

    def tree_destinations(self) -> list[int]:
        reached = self.reverse_path
        if self.sc.protocol_name == "aamrp":
            cands = [m for m, a in self.agents.items() if a.role is Role.LEADER]
        else:
            cands = [m for m, a in self.agents.items() if a.role is not Role.NON_MEMBER]
        return sorted(m for m in cands if m != self.source and m in reached)

    def _build_tree(self, rnd: int) -> None:
        self.swap_time = self.now + self.sc.tree.handover
        dests = self.tree_destinations()
        if not dests:
            self.trees.append((self.now, None))
            return
        reached = set(self.reverse_path)
        g = self.snapshot_graph(reached)
        ants = self.sc.ants
        tau = None
        if ants.persist_pheromone:
            if self.pheromone is None:
                self.pheromone = PheromoneTable(tau0=ants.tau0, tau_min=ants.tau_min)
            tau = self.pheromone
        series = None
        if self.convergence is not None:
            series = []
            self.convergence.append(series)
        tree = construct_tree(g, self.source, dests, ants, self.rng_ants, tau=tau, convergence=series)
        self.trees.append((self.now, tree))
        for m in tree.destinations:
            nodes = tree.paths[m].nodes
            self.send_mcast_rep(m, list(reversed(nodes)), rnd)

    def snapshot_graph(self, nodes) -> WeightedGraph:
        """Weighted graph of the links present at the last REQ flood, restricted to ``nodes``."""
        delay = self.sc.transport.per_hop_latency
        if self.sc.tree.edge_cost == "hop":
            return WeightedGraph.from_adjacency(self._snapshot, cost=1.0, delay=delay, nodes=nodes)
        g = WeightedGraph()
        pos = self._snapshot_pos
        keep = set(nodes)
        for u in sorted(keep):
            g.edges.setdefault(u, {})
            for v in self._snapshot[u]:
                if v in keep:
                    g.add_edge(u, v, float(np.hypot(*(pos[u] - pos[v]))), delay)
        return g

    def reverse_route(self, node: int) -> list[int] | None:
        """Path from ``node`` back to the source along recorded REQ upstreams."""
        path = [node]
        while path[-1] != self.source:
            up = self.reverse_path.get(path[-1])
            if up is None or up in path:
                return None
            path.append(up)
        return path

    def send_mcast_rep(self, leader: int, route: list[int] | None = None, rnd: int | None = None) -> bool:
        """Send a REP from ``leader`` toward the source along ``route``.

        ``route`` runs leader -> ... -> source and defaults to the recorded
        reverse path. Returns False when no route is known.
        """
        if route is None:
            route = self.reverse_route(leader)
        if not route or route[0] != leader or route[-1] != self.source:
            return False
        if rnd is None:
            rnd = self.req_round
        if len(route) == 1:
            return True
        msg = ProtocolMessage(Kind.MCAST_REP, leader, self.GROUP, 0, 0, rnd, dest=self.source,
                              route=tuple(route[1:]))
        self._send_ctrl(leader, msg, route[1])
        return True

    def _on_rep(self, node: int, child: int, msg: ProtocolMessage) -> None:
        route = msg.route
        if not route or route[0] != node:
            return
        if node != self.source:
            f = self.forwarding.get(node)
            if f is None or f.round != msg.seq:
                # a new round replaces the old routes
                f = self.forwarding[node] = Forwarding(msg.seq)
            f.children.add(child)
        rest = route[1:]
        if rest:
            fwd = ProtocolMessage(msg.kind, msg.origin, msg.group, msg.hop_count, 0, msg.seq, dest=msg.dest,
                                  route=rest)
            self._send_ctrl(node, fwd, rest[0])

    def is_forwarder(self, node: int) -> bool:
        f = self.forwarding.get(node)
        if f is None:
            return False
        return f.round == self.req_round or (f.round == self.req_round - 1 and self.now < self.swap_time)

    def forwarder_table(self) -> dict[int, set]:
        return {n: set(f.children) for n, f in self.forwarding.items() if self.is_forwarder(n)}

    # data plane

    def live_members(self) -> list[int]:
        if self.sc.protocol_name == "flooding":
            live = self.flood_members
        else:
            live = [m for m, a in self.agents.items() if a.role is not Role.NON_MEMBER]
        return [m for m in live if m != self.source]

    def _is_member(self, node: int) -> bool:
        if self.sc.protocol_name == "flooding":
            return node in self.flood_members and node != self.source
        a = self.agents.get(node)
        return a is not None and a.role is not Role.NON_MEMBER and node != self.source

    def _generate(self) -> None:
        t = self.sc.traffic
        pkt = DataPacket(self.source, self.GROUP, next(self._data_seq), self.now, t.payload_bytes)
        expected = len(self.live_members())
        self.counters.data_packets_sent_by_sources += 1
        self.counters.expected_receipts += expected
        if self.trace is not None:
            self._trace_data(pkt, self.source, "GEN", expected)
        self._start_delivery(pkt)
        nxt = self.now + 1.0 / t.rate
        if nxt <= self.sc.world.sim_time - t.drain:
            self.schedule(nxt, "TrafficGeneration", self._generate)

    def _start_delivery(self, pkt: DataPacket) -> None:
        name = self.sc.protocol_name
        s = self.source
        if name == "flooding":
            self._data_seen_tree[s].add(pkt.seq)
            self._send_data(s, pkt, ("FLOOD",), None)
            return
        self._data_seen_tree[s].add(pkt.seq)
        if name == "aamrp":
            a = self.agents.get(s)
            if a is not None and a.role is Role.LEADER:
                self.local_deliver(s, pkt)
        if self._tree_active():
            self._send_data(s, pkt, ("TREE",), None)

    def _tree_active(self) -> bool:
        def nonempty(entry):
            return entry[1] is not None and bool(entry[1].paths)
        if not self.trees:
            return False
        if nonempty(self.trees[-1]):
            return True
        return len(self.trees) > 1 and nonempty(self.trees[-2]) and self.now < self.swap_time

    def _send_data(self, sender: int, pkt: DataPacket, mode: tuple, next_hop: int | None) -> None:
        if self.trace is not None:
            self._trace_data(pkt, sender, "TX", mode[0])
        if self.sc.protocol_name == "flooding" and sender != self.source:
            self.counters.routing_packets_sent += 1
        rx = self._receivers(sender, next_hop)
        if rx:
            self.schedule(self.now + self.sc.transport.per_hop_latency, "MessageDelivery",
                          self._deliver_data, sender, rx, pkt, mode)

    def _receipt(self, node: int, pkt: DataPacket) -> bool:
        """Book a data reception at ``node``; True if it was a first copy at a member."""
        c = self.counters
        if not self._is_member(node):
            if self.sc.protocol_name == "flooding":
                c.control_packets_received += 1
            if self.trace is not None:
                self._trace_data(pkt, node, "RX", "RELAY")
            return False
        c.data_packets_received_total += 1
        key = (node, pkt.seq)
        if key in self._received:
            if self.sc.protocol_name == "flooding":
                c.control_packets_received += 1
            if self.trace is not None:
                self._trace_data(pkt, node, "RX", "DUP")
            return False
        self._received.add(key)
        c.record_receipt(self.now - pkt.created_at)
        if self.trace is not None:
            self._trace_data(pkt, node, "RX", "NEW")
        return True

    def _deliver_data(self, sender: int, receivers: list[int], pkt: DataPacket, mode: tuple) -> None:
        kind = mode[0]
        for r in receivers:
            if kind == "UNICAST":
                dest = mode[1]
                if r == dest:
                    self._receipt(r, pkt)
                else:
                    if self.trace is not None:
                        self._trace_data(pkt, r, "RX", "RELAY")
                    self._unicast_data(r, pkt, dest, mode[2] + 1)
                continue
            self._receipt(r, pkt)
            if kind == "FLOOD":
                if pkt.seq not in self._data_seen_tree[r]:
                    self._data_seen_tree[r].add(pkt.seq)
                    self._send_data(r, pkt, mode, None)
            elif kind == "TREE":
                if self.sc.protocol_name == "aamrp":
                    a = self.agents.get(r)
                    if a is not None and a.role is Role.LEADER:
                        self.local_deliver(r, pkt)
                if pkt.seq not in self._data_seen_tree[r] and self.is_forwarder(r):
                    self._data_seen_tree[r].add(pkt.seq)
                    self._send_data(r, pkt, mode, None)
            elif kind == "LOCAL":
                leader, ttl = mode[1], mode[2] - 1
                key = (leader, pkt.seq)
                if ttl > 0 and key not in self._data_seen_local[r] and r != leader:
                    self._data_seen_local[r].add(key)
                    self._send_data(r, pkt, ("LOCAL", leader, ttl), None)

    def _unicast_data(self, node: int, pkt: DataPacket, dest: int, hops: int) -> None:
        nh = self._next_hop(node, dest)
        if nh is None or hops > self.n:
            return
        self._send_data(node, pkt, ("UNICAST", dest, hops), nh)

    def local_deliver(self, leader: int, pkt: DataPacket) -> None:
        """Hand a packet from a cluster leader to its members."""
        key = (leader, pkt.seq)
        if key in self._local_done:
            return
        self._local_done.add(key)
        agent = self.agents[leader]
        agent.expire_members()
        if not agent.cmt:
            return
        if agent.broadcast_range() == 1:
            for m in sorted(agent.cmt):
                self._unicast_data(leader, pkt, m, 0)
        else:
            ttl = agent.local_ttl()
            self._data_seen_local[leader].add(key)
            self._send_data(leader, pkt, ("LOCAL", leader, ttl), None)

    # main loop

    def _start(self) -> None:
        if self._started:
            return
        self._started = True
        name = self.sc.protocol_name
        for m in self.members:
            if name == "flooding":
                self.schedule(self.join_times[m], "TimerFire", self.flood_members.add, m)
            else:
                self.schedule(self.join_times[m], "TimerFire", self.agents[m].start_join)
        t = self.sc.traffic
        if t.sources == 0:
            return
        if name != "flooding":
            self.schedule(self.sc.tree.refresh_offset, "TreeRefresh", self._refresh)
        if t.rate > 0 and t.start_time <= self.sc.world.sim_time - t.drain:
            self.schedule(t.start_time, "TrafficGeneration", self._generate)

    def run_until(self, t_end: float) -> None:
        self._start()
        while self._queue and self._queue[0][0] <= t_end:
            time, _, _kind, fn, args = heapq.heappop(self._queue)
            if time < self.last_event_time:
                raise RuntimeError("event order violated")
            self.last_event_time = time
            self.now = time
            fn(*args)
        self.now = max(self.now, t_end)

    def run(self) -> RunResult:
        self._start()
        self.run_until(self.sc.world.sim_time)
        row = MetricsRow.from_counters(self.sc.protocol_name, self.n, self.sc.traffic.group_size,
                                       self.seed, self.counters)
        return RunResult(self.counters, row, self.trace, self)

    def leave(self, node: int, at: float) -> None:
        self.schedule(at, "TimerFire", self.agents[node].leave_group)


def run(scenario: Scenario, seed: int, trace: bool = False, convergence: bool = False) -> RunResult:
    return Simulator(scenario, seed, trace=trace, convergence=convergence).run()
