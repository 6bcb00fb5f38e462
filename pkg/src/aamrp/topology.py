"""Node placement, random-waypoint motion and radio-graph queries."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def distance(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class MobilityState:
    current: Position
    waypoint: Position
    speed: float
    pause_remaining: float = 0.0


@dataclass(frozen=True)
class WorldConfig:
    area_width: float = 600.0
    area_height: float = 600.0
    radio_range: float = 250.0
    n_nodes: int = 50
    k_hops: int = 2
    min_speed: float = 1.0
    max_speed: float = 10.0
    pause_time: float = 5.0
    sim_time: float = 50.0
    rng_seed: int = 0
    tick: float = 0.1

    def violations(self) -> list[tuple[str, str]]:
        out = []
        if self.area_width <= 0 or self.area_height <= 0:
            out.append(("world.area", "area dimensions must be > 0"))
        if self.radio_range <= 0:
            out.append(("world.radio_range", "must be > 0"))
        if self.n_nodes < 1:
            out.append(("world.n_nodes", "must be >= 1"))
        if self.k_hops < 1:
            out.append(("protocol.k_hops", "must be >= 1"))
        if self.min_speed < 0 or self.max_speed < self.min_speed:
            out.append(("world.max_speed", "need 0 <= min_speed <= max_speed"))
        if self.pause_time < 0:
            out.append(("world.pause_time", "must be >= 0"))
        if self.sim_time <= 0:
            out.append(("world.sim_time", "must be > 0"))
        if self.tick <= 0:
            out.append(("world.tick", "must be > 0"))
        return out


def random_position(config: WorldConfig, rng: np.random.Generator) -> Position:
    return Position(float(rng.uniform(0, config.area_width)), float(rng.uniform(0, config.area_height)))


def initial_state(config: WorldConfig, rng: np.random.Generator) -> MobilityState:
    start = random_position(config, rng)
    return MobilityState(
        current=start,
        waypoint=random_position(config, rng),
        speed=float(rng.uniform(config.min_speed, config.max_speed)),
    )


def advance_mobility(state: MobilityState, config: WorldConfig, dt: float,
                     rng: np.random.Generator) -> MobilityState:
    """Advance one node by ``dt`` seconds of random-waypoint motion.

    Leftover time after an arrival is not carried into the pause; the node
    lands on the waypoint and the pause starts at the next call.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if state.pause_remaining > 0:
        left = state.pause_remaining - dt
        if left > 0:
            return replace(state, pause_remaining=left)
        # pause over: pick the next leg
        return MobilityState(
            current=state.current,
            waypoint=random_position(config, rng),
            speed=float(rng.uniform(config.min_speed, config.max_speed)),
            pause_remaining=0.0,
        )
    if state.speed <= 0:
        return state
    remaining = state.current.distance(state.waypoint)
    step = state.speed * dt
    if step >= remaining:
        if config.pause_time > 0:
            return replace(state, current=state.waypoint, pause_remaining=config.pause_time)
        return MobilityState(state.waypoint, random_position(config, rng),
                             float(rng.uniform(config.min_speed, config.max_speed)), 0.0)
    frac = step / remaining
    cx, cy = state.current.x, state.current.y
    nxt = Position(cx + (state.waypoint.x - cx) * frac, cy + (state.waypoint.y - cy) * frac)
    return replace(state, current=nxt)


class MobilityField:
    """Vectorised random-waypoint state for a whole scenario.

    Same motion law as :func:`advance_mobility`, held in arrays so a
    100-node tick costs a handful of numpy ops.
    """

    def __init__(self, config: WorldConfig, rng: np.random.Generator):
        self.config = config
        self.rng = rng
        self.static = config.max_speed <= 0
        n = config.n_nodes
        self.pos = np.column_stack([rng.uniform(0, config.area_width, n),
                                    rng.uniform(0, config.area_height, n)])
        self.wp = self._draw_points(n)
        self.speed = rng.uniform(config.min_speed, config.max_speed, n)
        self.pause = np.zeros(n)

    def _draw_points(self, n):
        c = self.config
        return np.column_stack([self.rng.uniform(0, c.area_width, n),
                                self.rng.uniform(0, c.area_height, n)])

    def step(self, dt: float) -> None:
        if self.static:
            return
        c = self.config
        paused = self.pause > 0
        self.pause[paused] -= dt
        resume = paused & (self.pause <= 0)
        if resume.any():
            k = int(resume.sum())
            self.pause[resume] = 0.0
            self.wp[resume] = self._draw_points(k)
            self.speed[resume] = self.rng.uniform(c.min_speed, c.max_speed, k)
        moving = ~paused
        if not moving.any():
            return
        delta = self.wp[moving] - self.pos[moving]
        dist = np.hypot(delta[:, 0], delta[:, 1])
        step = self.speed[moving] * dt
        arrive = step >= dist
        frac = np.where(arrive, 1.0, step / np.where(dist > 0, dist, 1.0))
        newpos = self.pos[moving] + delta * frac[:, None]
        newpos[arrive] = self.wp[moving][arrive]
        self.pos[moving] = newpos
        idx = np.flatnonzero(moving)[arrive]
        if idx.size:
            if c.pause_time > 0:
                self.pause[idx] = c.pause_time
            else:
                self.wp[idx] = self._draw_points(idx.size)
                self.speed[idx] = self.rng.uniform(c.min_speed, c.max_speed, idx.size)
        np.clip(self.pos[:, 0], 0, c.area_width, out=self.pos[:, 0])
        np.clip(self.pos[:, 1], 0, c.area_height, out=self.pos[:, 1])

    def positions(self) -> list[Position]:
        return [Position(float(x), float(y)) for x, y in self.pos]


def neighbors(node_id: int, positions, radio_range: float) -> set[int]:
    """Nodes within ``radio_range`` of ``node_id`` (inclusive boundary)."""
    p = positions[node_id]
    return {j for j, q in enumerate(positions)
            if j != node_id and math.hypot(p.x - q.x, p.y - q.y) <= radio_range}


def adjacency_matrix(pos: np.ndarray, radio_range: float) -> np.ndarray:
    diff = pos[:, None, :] - pos[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    adj = d2 <= radio_range * radio_range
    np.fill_diagonal(adj, False)
    return adj


def adjacency_lists(pos: np.ndarray, radio_range: float) -> list[list[int]]:
    adj = adjacency_matrix(pos, radio_range)
    return [np.flatnonzero(row).tolist() for row in adj]


def k_hop_set(node_id: int, adjacency, k: int) -> set[int]:
    """Nodes reachable from ``node_id`` within ``k`` edges, excluding itself.

    ``adjacency`` maps a node to an iterable of neighbours (a dict or a
    list of lists both work).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    seen = {node_id: 0}
    queue = deque([node_id])
    while queue:
        u = queue.popleft()
        if seen[u] == k:
            continue
        for v in adjacency[u]:
            if v not in seen:
                seen[v] = seen[u] + 1
                queue.append(v)
    del seen[node_id]
    return set(seen)


def hop_distances(source: int, adjacency) -> dict[int, int]:
    seen = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if v not in seen:
                seen[v] = seen[u] + 1
                queue.append(v)
    return seen


def connectivity(node_id: int, adjacency, k: int) -> int:
    return len(k_hop_set(node_id, adjacency, k))
