"""Cluster-based multicast routing with ant-colony trees for mobile ad hoc networks.

Modules:

- ``topology``   random waypoint mobility, radio links, k-hop neighbourhoods
- ``cluster``    per-node join / election / leader upkeep state machine
- ``ant_tree``   K-shortest backup paths and the ant colony tree builder
- ``engine``     discrete-event simulator tying it all together
- ``metrics``    overhead, routing load, delay and delivery fraction
- ``scenario``   scenario files; ``cli`` the command line
"""
from .ant_tree import AntParams, MulticastTree, WeightedGraph, construct_tree, k_shortest_paths
from .cluster import ClusterAgent, RangeConfig, Role
from .engine import Scenario, Simulator, TrafficConfig, TransportModel, TreeConfig, run
from .metrics import RunCounters, format_csv
from .topology import WorldConfig

__version__ = "0.1.0"

__all__ = [
    "AntParams", "ClusterAgent", "MulticastTree", "RangeConfig", "Role", "RunCounters", "Scenario",
    "Simulator", "TrafficConfig", "TransportModel", "TreeConfig", "WeightedGraph", "WorldConfig",
    "construct_tree", "format_csv", "k_shortest_paths", "run",
]
