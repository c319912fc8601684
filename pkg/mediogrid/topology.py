#  topology.py
#
#  Copyright 2024 The mediogrid authors
#
#  MIT License
#
#  Permission is hereby granted, free of charge, to any person obtaining a copy
#  of this software and associated documentation files (the "Software"), to deal
#  in the Software without restriction, including without limitation the rights
#  to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
#  copies of the Software, and to permit persons to whom the Software is
#  furnished to do so, subject to the following conditions:
#
#  The above copyright notice and this permission notice shall be included in all
#  copies or substantial portions of the Software.
#
#  THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
#  IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
#  FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
#  AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
#  LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
#  OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
#  SOFTWARE.
#
#

"""
Grid layout and the parametric network model.

Every transfer time in mediogrid derives from one throughput model: a link of
bandwidth ``B`` carrying ``p`` parallel streams, each capped at ``r_max``,
delivers ``min(B, p * r_max)`` until the knee ``ceil(B / r_max)``; past the
knee every excess stream costs a contention factor ``gamma``.
"""
__all__ = [
        "NetworkLink", "ModelConstants", "Node", "Cluster", "GridTopology",
        "load_topology", "dump_topology", "resolve_link", "aggregate_throughput", "p_knee",
        ]

import math
import typing
from dataclasses import dataclass, field

from .config import Config, ConfigDocument, parse_document
from .errors import ConfigError, TopologyError
from .utils import fmt_float, logger
from .vars import (
                NODE_ID,
                CLUSTER_ID,
                GIGABYTE,
                LOOPBACK_NAME,
                INTER_DEFAULTS,
                INTRA_DEFAULTS,
                DEFAULT_GAMMA,
                DEFAULT_HANDSHAKE_ROUNDS,
                DEFAULT_PER_FILE_ROUNDS,
                DEFAULT_COMMAND_ROUND,
                Role,
                )


@dataclass(frozen=True)
class NetworkLink:
    name: str
    bandwidth_mbps: float
    rtt: float #: seconds
    rmax_mbps: float #: per-stream cap
    gamma: float = DEFAULT_GAMMA #: contention penalty per stream past the knee
    handshake_rounds: int = DEFAULT_HANDSHAKE_ROUNDS #: session setup, in rtts
    per_file_rounds: int = DEFAULT_PER_FILE_ROUNDS #: data-channel setup per file, in rtts
    command_round: int = DEFAULT_COMMAND_ROUND #: per-file command cost without pipelining

    def __post_init__(self):
        if not self.bandwidth_mbps > 0:
            raise ValueError("link '{}': bandwidth must be positive".format(self.name))
        if not self.rtt >= 0:
            raise ValueError("link '{}': rtt must not be negative".format(self.name))
        if not 0 < self.rmax_mbps <= self.bandwidth_mbps:
            raise ValueError("link '{}': per-stream cap must lie in (0, bandwidth]".format(self.name))
        if not self.gamma >= 0:
            raise ValueError("link '{}': contention gamma must not be negative".format(self.name))
        if self.command_round not in (0, 1):
            raise ValueError("link '{}': command_round is 0 or 1".format(self.name))

    @property
    def p_knee(self) -> int:
        return p_knee(self)


@dataclass(frozen=True)
class ModelConstants:
    """values filled into links that leave them out; a bandwidth here also
    makes it the link of every cluster pair without an explicit one"""
    rmax_mbps: typing.Optional[float] = None
    gamma: float = DEFAULT_GAMMA
    handshake_rounds: int = DEFAULT_HANDSHAKE_ROUNDS
    per_file_rounds: int = DEFAULT_PER_FILE_ROUNDS
    command_round: int = DEFAULT_COMMAND_ROUND
    bandwidth_mbps: typing.Optional[float] = None
    rtt: typing.Optional[float] = None

    def link(self, name:str, scope:dict, given:typing.Optional[dict]=None) -> NetworkLink:
        given = given or {}
        bandwidth = given.get("bandwidth_mbps", scope["bandwidth_mbps"])
        if "rmax_mbps" in given:
            rmax = given["rmax_mbps"]
        else:
            rmax = min(bandwidth, self.rmax_mbps if self.rmax_mbps is not None else scope["rmax_mbps"])
        return NetworkLink(
                    name=name,
                    bandwidth_mbps=bandwidth,
                    rtt=given.get("rtt", scope["rtt"]),
                    rmax_mbps=rmax,
                    gamma=given.get("gamma", self.gamma),
                    handshake_rounds=given.get("h", self.handshake_rounds),
                    per_file_rounds=given.get("hf", self.per_file_rounds),
                    command_round=given.get("command_round", self.command_round),
                    )

    def inter_scope(self) -> dict:
        return {
            "bandwidth_mbps": self.bandwidth_mbps if self.bandwidth_mbps is not None else INTER_DEFAULTS["bandwidth_mbps"],
            "rtt": self.rtt if self.rtt is not None else INTER_DEFAULTS["rtt"],
            "rmax_mbps": INTER_DEFAULTS["rmax_mbps"],
            }


@dataclass(frozen=True)
class Node:
    name: NODE_ID
    cluster: CLUSTER_ID
    storage_capacity: int #: bytes
    role: Role = Role.STORAGE

    def __post_init__(self):
        if not self.storage_capacity > 0:
            raise ValueError("node '{}': storage capacity must be positive".format(self.name))


@dataclass(frozen=True)
class Cluster:
    name: CLUSTER_ID
    nodes: typing.Tuple[Node, ...]
    intra_link: NetworkLink

    def __post_init__(self):
        if not self.nodes:
            raise ValueError("cluster '{}' has no nodes".format(self.name))


def pair_key(a:CLUSTER_ID, b:CLUSTER_ID) -> typing.FrozenSet[str]:
    return frozenset((a, b))


_RESERVED_CHARS = ("~", "/")


def pair_name(a:CLUSTER_ID, b:CLUSTER_ID) -> str:
    return "~".join(sorted((a, b)))


@dataclass(frozen=True)
class GridTopology:
    """clusters, their nodes and the links between them; immutable after load"""
    clusters: typing.Tuple[Cluster, ...]
    inter_links: typing.Mapping[typing.FrozenSet[str], NetworkLink]
    defaults: ModelConstants = ModelConstants()
    loopback_mbps: float = field(default_factory=lambda: Config.MEDIOGRID_LOOPBACK_MBPS)
    _nodes: dict = field(init=False, repr=False, compare=False)
    _clusters: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        clusters = {}
        nodes = {}
        for cluster in self.clusters:
            if cluster.name in clusters:
                raise ConfigError("duplicate cluster '{}'".format(cluster.name))
            clusters[cluster.name] = cluster
            for node in cluster.nodes:
                if node.name in nodes:
                    raise ConfigError("duplicate node '{}'".format(node.name))
                nodes[node.name] = node
        object.__setattr__(self, "_nodes", nodes)
        object.__setattr__(self, "_clusters", clusters)

    def node(self, name:NODE_ID) -> Node:
        try:
            return self._nodes[name]
        except KeyError:
            raise TopologyError("unknown node '{}'".format(name))

    def has_node(self, name:NODE_ID) -> bool:
        return name in self._nodes

    def cluster(self, name:CLUSTER_ID) -> Cluster:
        try:
            return self._clusters[name]
        except KeyError:
            raise TopologyError("unknown cluster '{}'".format(name))

    def cluster_of(self, node:NODE_ID) -> CLUSTER_ID:
        return self.node(node).cluster

    def nodes_in(self, cluster:CLUSTER_ID) -> typing.List[NODE_ID]:
        return [node.name for node in self.cluster(cluster).nodes]

    @property
    def node_names(self) -> typing.List[NODE_ID]:
        return sorted(self._nodes)

    @property
    def cluster_names(self) -> typing.List[CLUSTER_ID]:
        return [cluster.name for cluster in self.clusters]

    @property
    def loopback(self) -> NetworkLink:
        return NetworkLink(
                    name=LOOPBACK_NAME,
                    bandwidth_mbps=self.loopback_mbps,
                    rtt=0.0,
                    rmax_mbps=self.loopback_mbps,
                    gamma=0.0,
                    handshake_rounds=self.defaults.handshake_rounds,
                    per_file_rounds=self.defaults.per_file_rounds,
                    command_round=self.defaults.command_round,
                    )

    def inter_link(self, a:CLUSTER_ID, b:CLUSTER_ID) -> NetworkLink:
        link = self.inter_links.get(pair_key(a, b))
        if link is not None:
            return link
        if self.defaults.bandwidth_mbps is None:
            raise TopologyError("no link defined between clusters '{}' and '{}'".format(*sorted((a, b))))
        return self.defaults.link(pair_name(a, b), self.defaults.inter_scope())


def p_knee(link:NetworkLink) -> int:
    """stream count at which the link saturates, ceil(B / r_max)"""
    # NOTE: the epsilon keeps exact ratios such as 1.1/0.1 from rounding up a whole stream
    return max(1, math.ceil(link.bandwidth_mbps / link.rmax_mbps - 1e-9))


def aggregate_throughput(link:NetworkLink, p:int) -> float:
    """
        megabits/second delivered by p parallel streams on an otherwise idle link

        A(p) = min(B, p * r_max) / (1 + gamma * max(0, p - p_knee))
    """
    if p < 1:
        raise ValueError("stream count must be >= 1, got {}".format(p))
    excess = max(0, p - p_knee(link))
    return min(link.bandwidth_mbps, p * link.rmax_mbps) / (1.0 + link.gamma * excess)


def resolve_link(topology:GridTopology, src:NODE_ID, dst:NODE_ID) -> NetworkLink:
    """
        returns the link a transfer from src to dst travels over: loopback for
        the same node, the cluster's intra link inside one cluster, otherwise
        the inter link of the cluster pair
    """
    source = topology.node(src)
    dest = topology.node(dst)
    if source.name == dest.name:
        return topology.loopback
    if source.cluster == dest.cluster:
        return topology.cluster(source.cluster).intra_link
    return topology.inter_link(source.cluster, dest.cluster)


def _link_error(document:ConfigDocument, path:tuple, error:ValueError) -> ConfigError:
    return ConfigError(str(error), document.line_of(*path))


def load_topology(config_text:typing.Union[str, ConfigDocument]) -> GridTopology:
    """
        builds a fully resolved GridTopology from config text; links leaving
        out constants get them from the [defaults] section, then from the
        built-in calibration
    """
    document = parse_document(config_text) if isinstance(config_text, str) else config_text
    raw_defaults = document.section("defaults")
    defaults = ModelConstants(
                    rmax_mbps=raw_defaults.get("rmax_mbps"),
                    gamma=raw_defaults.get("gamma", DEFAULT_GAMMA),
                    handshake_rounds=raw_defaults.get("h", DEFAULT_HANDSHAKE_ROUNDS),
                    per_file_rounds=raw_defaults.get("hf", DEFAULT_PER_FILE_ROUNDS),
                    command_round=raw_defaults.get("command_round", DEFAULT_COMMAND_ROUND),
                    bandwidth_mbps=raw_defaults.get("bandwidth_mbps"),
                    rtt=raw_defaults.get("rtt"),
                    )

    clusters = []
    cluster_names = set()
    node_names = set()
    for index, raw in enumerate(document.data["clusters"]):
        path = ("clusters", index)
        if raw["name"] in cluster_names:
            raise ConfigError("duplicate cluster '{}'".format(raw["name"]), document.line_of(*path))
        # NOTE: link sessions are keyed by link name, these would alias a pair or loopback link
        if raw["name"] == LOOPBACK_NAME or any(c in raw["name"] for c in _RESERVED_CHARS):
            raise ConfigError("cluster name '{}' is reserved or contains '~' or '/'".format(raw["name"]),
                              document.line_of(*path))
        cluster_names.add(raw["name"])
        nodes = []
        for node_index, raw_node in enumerate(raw["nodes"]):
            if raw_node["name"] in node_names:
                raise ConfigError("duplicate node '{}'".format(raw_node["name"]),
                                  document.line_of(*path, "nodes", node_index))
            node_names.add(raw_node["name"])
            nodes.append(Node(raw_node["name"], raw["name"], raw_node["capacity_bytes"], Role(raw_node["role"])))
        try:
            intra = defaults.link(raw["name"], INTRA_DEFAULTS, raw["link"])
        except ValueError as error:
            raise _link_error(document, path + ("link",), error)
        clusters.append(Cluster(raw["name"], tuple(nodes), intra))

    inter_links = {}
    for index, raw in enumerate(document.data["links"]):
        path = ("links", index)
        a, b = raw["clusters"]
        for name in (a, b):
            if name not in cluster_names:
                raise ConfigError("link names unknown cluster '{}'".format(name), document.line_of(*path))
        if a == b:
            raise ConfigError("link joins cluster '{}' to itself".format(a), document.line_of(*path))
        if pair_key(a, b) in inter_links:
            raise ConfigError("duplicate link between '{}' and '{}'".format(a, b), document.line_of(*path))
        try:
            inter_links[pair_key(a, b)] = defaults.link(pair_name(a, b), defaults.inter_scope(), raw["link"])
        except ValueError as error:
            raise _link_error(document, path + ("link",), error)

    topology = GridTopology(tuple(clusters), inter_links, defaults)
    logger.debug("loaded topology with {} clusters, {} nodes, {} inter links".format(
                    len(clusters), len(node_names), len(inter_links)))
    return topology


def _link_line(link:NetworkLink) -> str:
    return " ".join((
        "bandwidth_mbps={}".format(fmt_float(link.bandwidth_mbps)),
        "rtt_s={}".format(fmt_float(link.rtt)),
        "rmax_mbps={}".format(fmt_float(link.rmax_mbps)),
        "gamma={}".format(fmt_float(link.gamma)),
        "h={}".format(link.handshake_rounds),
        "hf={}".format(link.per_file_rounds),
        "command_round={}".format(link.command_round),
        ))


def dump_topology(topology:GridTopology) -> str:
    """serializes a topology back into config text that loads to an equal topology"""
    defaults = topology.defaults
    lines = ["[defaults]"]
    entries = [
        "gamma={}".format(fmt_float(defaults.gamma)),
        "h={}".format(defaults.handshake_rounds),
        "hf={}".format(defaults.per_file_rounds),
        "command_round={}".format(defaults.command_round),
        ]
    if defaults.rmax_mbps is not None:
        entries.append("rmax_mbps={}".format(fmt_float(defaults.rmax_mbps)))
    if defaults.bandwidth_mbps is not None:
        entries.append("bandwidth_mbps={}".format(fmt_float(defaults.bandwidth_mbps)))
    if defaults.rtt is not None:
        entries.append("rtt_s={}".format(fmt_float(defaults.rtt)))
    lines.append(" ".join(entries))

    for cluster in topology.clusters:
        lines.append("")
        lines.append("[cluster {}]".format(cluster.name))
        lines.append(_link_line(cluster.intra_link))
        for node in cluster.nodes:
            if node.storage_capacity % GIGABYTE == 0:
                capacity = "capacity_gb={}".format(node.storage_capacity // GIGABYTE)
            else:
                capacity = "capacity_bytes={}".format(node.storage_capacity)
            lines.append("node {} {} role={}".format(node.name, capacity, node.role.value))

    for key in sorted(topology.inter_links, key=sorted):
        a, b = sorted(key)
        lines.append("")
        lines.append("[link {} {}]".format(a, b))
        lines.append(_link_line(topology.inter_links[key]))
    return "\n".join(lines) + "\n"
