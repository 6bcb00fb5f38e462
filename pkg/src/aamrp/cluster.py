"""Per-node group membership: discovery, leader election, cluster upkeep.

A :class:`ClusterAgent` holds one node's state for one multicast group.
It talks to the outside world only through the ``net`` object handed to
it, which must provide::

    net.now                               current simulation time
    net.flood(node, msg)                  originate a hop-limited broadcast
    net.unicast(node, dest, msg)          send along the node's route to dest
    net.set_timer(node, delay, kind, group, token)
    net.connectivity(node)                size of the node's k-hop neighbourhood
    net.role_changed(node, group, old, new)

so the state machine can be driven by the simulator or by a test double.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass


class Role(enum.Enum):
    NON_MEMBER = "NON_MEMBER"
    JOINING = "JOINING"
    LEADER = "LEADER"
    MEMBER = "MEMBER"


class Kind(str, enum.Enum):
    JOIN = "JOIN"
    LEADER = "LEADER"
    MEMBER = "MEMBER"
    MCAST_REQ = "MCAST_REQ"
    MCAST_REP = "MCAST_REP"


ALLOWED_TRANSITIONS = {
    (Role.NON_MEMBER, Role.JOINING),
    (Role.JOINING, Role.LEADER),
    (Role.JOINING, Role.MEMBER),
    (Role.MEMBER, Role.JOINING),
    (Role.MEMBER, Role.MEMBER),
    (Role.MEMBER, Role.NON_MEMBER),
    (Role.LEADER, Role.NON_MEMBER),
}


class NoLeaderAvailable(Exception):
    pass


@dataclass
class ProtocolMessage:
    kind: Kind
    origin: int
    group: int
    hop_count: int = 0
    ttl: int = 0
    seq: int = 0
    connectivity: int = 0
    dest: int | None = None
    # MEMBER reports carry the member's hop distance to its leader
    distance: int = 0
    # MCAST_REP carries the hop list it still has to travel
    route: tuple = ()

    def relayed(self) -> "ProtocolMessage":
        return ProtocolMessage(self.kind, self.origin, self.group, self.hop_count + 1,
                               max(self.ttl - 1, 0), self.seq, self.connectivity, self.dest,
                               self.distance, self.route)


@dataclass
class GmtEntry:
    member: int
    multicast_group: int
    hop_count: int
    role_seen: Role
    connectivity: int
    last_heard: float


@dataclass
class CmtEntry:
    member: int
    multicast_group: int
    distance_hops: int
    joined_at: float
    last_heard: float
    is_new: bool = True


@dataclass
class RangeConfig:
    k_hops: int = 2
    threshold_T: int = 5
    member_base_period: float = 4.0
    leader_beacon_period: float = 2.0
    join_timeout: float = 2.5
    missed_beacons: int = 3
    tick: float = 0.1

    def violations(self) -> list[tuple[str, str]]:
        out = []
        if self.k_hops < 1:
            out.append(("protocol.k_hops", "must be >= 1"))
        if self.threshold_T < 0:
            out.append(("protocol.threshold_T", "must be >= 0"))
        for name in ("member_base_period", "leader_beacon_period", "join_timeout"):
            if getattr(self, name) <= 0:
                out.append((f"protocol.{name}", "must be > 0"))
        if self.missed_beacons < 1:
            out.append(("protocol.missed_beacons", "must be >= 1"))
        return out


def select_best_leader(candidates) -> int:
    """Closest leader first, then the best connected, then the highest id."""
    candidates = list(candidates)
    if not candidates:
        raise NoLeaderAvailable("no LEADER entries to choose from")
    best = min(candidates, key=lambda e: (e.hop_count, -e.connectivity, -e.member))
    return best.member


def wins_election(node_id: int, own_connectivity: int, peers) -> bool:
    """True when this node beats every joining peer on (connectivity, id)."""
    me = (own_connectivity, node_id)
    return all(me > (p.connectivity, p.member) for p in peers)


def broadcast_range(cmt, threshold_T: int) -> int:
    entries = list(cmt.values() if isinstance(cmt, dict) else cmt)
    n_new = sum(1 for e in entries if e.is_new)
    n_old = len(entries) - n_new
    return 2 if n_old + n_new > threshold_T else 1


def member_update_period(distance_hops: int, base_period: float, tick: float = 0.0) -> float:
    """Report period for a member ``distance_hops`` away from its leader."""
    if distance_hops < 1:
        raise ValueError("distance_hops must be >= 1")
    return max(base_period / distance_hops, tick)


def should_switch(current_hops: int, overheard_hops: int) -> bool:
    return overheard_hops < current_hops


class ClusterAgent:
    JOIN_TIMEOUT = "join_timeout"
    BEACON = "beacon"
    REPORT = "member_report"
    WATCHDOG = "watchdog"

    def __init__(self, node: int, group: int, config: RangeConfig, net):
        self.node = node
        self.group = group
        self.cfg = config
        self.net = net
        self.role = Role.NON_MEMBER
        self.gmt: dict[int, GmtEntry] = {}
        self.cmt: dict[int, CmtEntry] = {}
        self.leader: int | None = None
        self.leader_hops = 0
        self.leader_last_heard = 0.0
        self.warnings = 0
        self.transitions: list[tuple[float, Role, Role]] = []
        self._seq = 0
        self._tokens: dict[str, int] = {}

    # plumbing

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def _set_role(self, new: Role) -> None:
        old = self.role
        if (old, new) not in ALLOWED_TRANSITIONS:
            raise RuntimeError(f"illegal role transition {old} -> {new} at node {self.node}")
        self.role = new
        self.transitions.append((self.net.now, old, new))
        self.net.role_changed(self.node, self.group, old, new)

    def _arm(self, kind: str, delay: float) -> None:
        token = self._tokens.get(kind, 0) + 1
        self._tokens[kind] = token
        self.net.set_timer(self.node, delay, kind, self.group, token)

    def _disarm_all(self) -> None:
        for kind in list(self._tokens):
            self._tokens[kind] += 1

    def _flood(self, kind: Kind) -> None:
        msg = ProtocolMessage(kind, self.node, self.group, 0, self.cfg.k_hops, self._next_seq(),
                              connectivity=self.net.connectivity(self.node))
        self.net.flood(self.node, msg)

    def _report(self) -> None:
        msg = ProtocolMessage(Kind.MEMBER, self.node, self.group, 0, 0, self._next_seq(),
                              dest=self.leader, distance=self.leader_hops)
        self.net.unicast(self.node, self.leader, msg)

    def _leader_window(self) -> float:
        return self.cfg.missed_beacons * self.cfg.leader_beacon_period

    def fresh_leaders(self, exclude=None) -> list[GmtEntry]:
        now = self.net.now
        win = self._leader_window()
        return [e for e in self.gmt.values()
                if e.role_seen is Role.LEADER and now - e.last_heard <= win and e.member != exclude]

    def fresh_joining_peers(self) -> list[GmtEntry]:
        now = self.net.now
        # a peer still joining re-floods every timeout; older entries belong to peers that settled
        win = self.cfg.join_timeout + 0.1
        return [e for e in self.gmt.values()
                if e.role_seen is Role.JOINING and now - e.last_heard <= win
                and e.hop_count <= self.cfg.k_hops]

    # public operations

    def start_join(self) -> None:
        if self.role is Role.JOINING:
            self.warnings += 1
            return
        if self.role is not Role.NON_MEMBER:
            raise RuntimeError(f"start_join from {self.role}")
        self._enter_joining()

    def _enter_joining(self) -> None:
        self.leader = None
        self._disarm_all()
        self._set_role(Role.JOINING)
        self._flood(Kind.JOIN)
        self._arm(self.JOIN_TIMEOUT, self.cfg.join_timeout)

    def leave_group(self) -> None:
        if self.role not in (Role.MEMBER, Role.LEADER):
            raise RuntimeError(f"leave_group from {self.role}")
        self._disarm_all()
        self._set_role(Role.NON_MEMBER)
        self.gmt.clear()
        self.cmt.clear()
        self.leader = None

    def broadcast_range(self) -> int:
        return broadcast_range(self.cmt, self.cfg.threshold_T)

    def local_ttl(self) -> int:
        """Hop radius for local data delivery, clamped to the furthest member."""
        if not self.cmt:
            return 0
        furthest = max(e.distance_hops for e in self.cmt.values())
        return min(self.broadcast_range(), furthest)

    # timers

    def on_timer(self, kind: str, token: int) -> None:
        if self._tokens.get(kind) != token:
            return
        getattr(self, "_on_" + kind)()

    def _on_join_timeout(self) -> None:
        if self.role is not Role.JOINING:
            return
        leaders = self.fresh_leaders()
        if leaders:
            self._join_leader(self.gmt[select_best_leader(leaders)])
        elif wins_election(self.node, self.net.connectivity(self.node), self.fresh_joining_peers()):
            self._become_leader()
        else:
            # keep our entry fresh in the peers' tables and wait another round
            self._flood(Kind.JOIN)
            self._arm(self.JOIN_TIMEOUT, self.cfg.join_timeout)

    def _join_leader(self, entry: GmtEntry) -> None:
        self._disarm_all()
        self.leader = entry.member
        self.leader_hops = max(1, entry.hop_count)
        self.leader_last_heard = entry.last_heard
        self._set_role(Role.MEMBER)
        self._report()
        self._arm(self.REPORT, member_update_period(self.leader_hops, self.cfg.member_base_period,
                                                    self.cfg.tick))
        self._arm(self.WATCHDOG, self.cfg.leader_beacon_period)

    def _become_leader(self) -> None:
        self._disarm_all()
        self.leader = None
        self._set_role(Role.LEADER)
        self._flood(Kind.LEADER)
        self._arm(self.BEACON, self.cfg.leader_beacon_period)

    def _on_beacon(self) -> None:
        if self.role is not Role.LEADER:
            return
        self.expire_members()
        for e in self.cmt.values():
            e.is_new = False
        self._flood(Kind.LEADER)
        self._arm(self.BEACON, self.cfg.leader_beacon_period)

    def expire_members(self) -> None:
        now = self.net.now
        stale = [m for m, e in self.cmt.items()
                 if now - e.last_heard > self.cfg.missed_beacons * member_update_period(
                     e.distance_hops, self.cfg.member_base_period, self.cfg.tick)]
        for m in stale:
            del self.cmt[m]

    def _on_member_report(self) -> None:
        if self.role is not Role.MEMBER:
            return
        self._report()
        self._arm(self.REPORT, member_update_period(self.leader_hops, self.cfg.member_base_period,
                                                    self.cfg.tick))

    def _on_watchdog(self) -> None:
        if self.role is not Role.MEMBER:
            return
        if self.net.now - self.leader_last_heard > self._leader_window():
            lost = self.leader
            others = self.fresh_leaders(exclude=lost)
            if others:
                self._join_leader(self.gmt[select_best_leader(others)])
            else:
                self._enter_joining()
            return
        self._arm(self.WATCHDOG, self.cfg.leader_beacon_period)

    # messages

    def on_message(self, msg: ProtocolMessage) -> None:
        if self.role is Role.NON_MEMBER or msg.group != self.group:
            return
        now = self.net.now
        if msg.kind is Kind.JOIN:
            if msg.origin != self.node:
                self.gmt[msg.origin] = GmtEntry(msg.origin, msg.group, msg.hop_count, Role.JOINING,
                                                msg.connectivity, now)
        elif msg.kind is Kind.LEADER:
            if msg.origin == self.node:
                return
            self.gmt[msg.origin] = GmtEntry(msg.origin, msg.group, msg.hop_count, Role.LEADER,
                                            msg.connectivity, now)
            if self.role is Role.MEMBER:
                if msg.origin == self.leader:
                    self.leader_last_heard = now
                    self.leader_hops = max(1, msg.hop_count)
                else:
                    self.maybe_switch_leader(msg)
        elif msg.kind is Kind.MEMBER:
            if self.role is Role.LEADER and msg.dest == self.node:
                e = self.cmt.get(msg.origin)
                if e is None:
                    self.cmt[msg.origin] = CmtEntry(msg.origin, msg.group, max(1, msg.distance), now, now)
                else:
                    e.distance_hops = max(1, msg.distance)
                    e.last_heard = now

    def maybe_switch_leader(self, overheard: ProtocolMessage) -> bool:
        if self.role is not Role.MEMBER or overheard.origin == self.leader:
            return False
        if not should_switch(self.leader_hops, overheard.hop_count):
            return False
        self._join_leader(self.gmt[overheard.origin])
        return True
