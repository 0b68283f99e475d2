"""Network data model: gas properties, nodes, pipes, compressors.

All quantities are SI (Pa, m, kg/s, s). Objects are frozen dataclasses;
transforms return new networks.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

from .errors import DomainError, NetworkReferenceError
from .units import T0

log = logging.getLogger(__name__)

DEFAULT_SOUND_SPEED = 370.0  # m/s
DEFAULT_FRICTION = 0.01
DEFAULT_EXPONENT = (1.4 - 1.0) / 1.4  # (gamma - 1) / gamma for methane-like gas
DEFAULT_ALPHA_MAX = 1.5


@dataclass(frozen=True)
class GasProperties:
    sound_speed: float = DEFAULT_SOUND_SPEED
    friction: float = DEFAULT_FRICTION

    def __post_init__(self):
        if not self.sound_speed > 0:
            raise DomainError("sound_speed must be positive")
        if not self.friction > 0:
            raise DomainError("friction factor must be positive")

    @property
    def beta(self):
        """Friction coefficient f * c_s**2 (m^2/s^2)."""
        return self.friction * self.sound_speed**2


@dataclass(frozen=True)
class Node:
    id: str
    q: float = 0.0  # kg/s, positive = injection
    p_min: float = 0.0
    p_max: float = math.inf
    noise_sigma: float = 0.0  # kg/s
    noise_tau: float = T0  # s

    def __post_init__(self):
        if not (0.0 <= self.p_min <= self.p_max):
            raise DomainError(f"node {self.id}: need 0 <= p_min <= p_max")
        if self.noise_sigma < 0:
            raise DomainError(f"node {self.id}: noise_sigma must be >= 0")
        if self.noise_sigma > 0 and not self.noise_tau > 0:
            raise DomainError(f"node {self.id}: noise_tau must be > 0")


@dataclass(frozen=True)
class Pipe:
    id: str
    from_node: str
    to_node: str
    length: float
    diameter: float
    friction: float | None = None

    def __post_init__(self):
        if not self.length > 0:
            raise DomainError(f"pipe {self.id}: length must be positive")
        if not self.diameter > 0:
            raise DomainError(f"pipe {self.id}: diameter must be positive")
        if self.from_node == self.to_node:
            raise DomainError(f"pipe {self.id}: from and to nodes coincide")
        if self.friction is not None and not self.friction > 0:
            raise DomainError(f"pipe {self.id}: friction must be positive")

    @property
    def area(self):
        return math.pi * self.diameter**2 / 4.0

    @property
    def volume(self):
        return self.area * self.length

    def other(self, node_id):
        if node_id == self.from_node:
            return self.to_node
        if node_id == self.to_node:
            return self.from_node
        raise KeyError(f"{node_id} is not an end of pipe {self.id}")


@dataclass(frozen=True)
class Compressor:
    """Station at ``node`` on ``pipe``, boosting flow away from ``node``."""

    id: str
    pipe: str
    node: str
    alpha_min: float = 1.0
    alpha_max: float = DEFAULT_ALPHA_MAX
    efficiency: float = 1.0
    cost: float = 1.0
    exponent: float = DEFAULT_EXPONENT

    def __post_init__(self):
        if not (0 < self.alpha_min <= self.alpha_max):
            raise DomainError(f"compressor {self.id}: need 0 < alpha_min <= alpha_max")
        if not (0 < self.efficiency <= 1):
            raise DomainError(f"compressor {self.id}: efficiency must be in (0, 1]")
        if not (0 < self.exponent < 1):
            raise DomainError(f"compressor {self.id}: exponent must be in (0, 1)")
        if self.cost < 0:
            raise DomainError(f"compressor {self.id}: cost must be >= 0")


@dataclass(frozen=True)
class Network:
    gas: GasProperties
    nodes: tuple[Node, ...]
    pipes: tuple[Pipe, ...]
    compressors: tuple[Compressor, ...] = ()
    slack: str | None = None
    slack_pressure: float = 0.0
    mainline: tuple[str, str] | None = None
    name: str = "network"

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "pipes", tuple(self.pipes))
        object.__setattr__(self, "compressors", tuple(self.compressors))
        if self.slack is None and self.nodes:
            object.__setattr__(self, "slack", self.nodes[0].id)
        if self.mainline is not None:
            object.__setattr__(self, "mainline", tuple(self.mainline))
        self._check_references()

    def _check_references(self):
        ids = set()
        for n in self.nodes:
            if n.id in ids:
                raise DomainError(f"duplicate node id '{n.id}'")
            ids.add(n.id)
        pids = set()
        for p in self.pipes:
            if p.id in pids:
                raise DomainError(f"duplicate pipe id '{p.id}'")
            pids.add(p.id)
            for end in (p.from_node, p.to_node):
                if end not in ids:
                    raise NetworkReferenceError(end, "node")
        ends = set()
        cids = set()
        for c in self.compressors:
            if c.id in cids:
                raise DomainError(f"duplicate compressor id '{c.id}'")
            cids.add(c.id)
            if c.pipe not in pids:
                raise NetworkReferenceError(c.pipe, "pipe")
            pipe = self.pipe(c.pipe)
            if c.node not in (pipe.from_node, pipe.to_node):
                raise DomainError(
                    f"compressor {c.id}: node '{c.node}' is not an end of pipe {c.pipe}"
                )
            if (c.pipe, c.node) in ends:
                raise DomainError(f"two compressors at the {c.node} end of pipe {c.pipe}")
            ends.add((c.pipe, c.node))
        if self.slack is not None and self.slack not in ids:
            raise NetworkReferenceError(self.slack, "node")
        if self.mainline is not None:
            for end in self.mainline:
                if end not in ids:
                    raise NetworkReferenceError(end, "node")

    # lookups -------------------------------------------------------------

    @cached_property
    def _node_map(self):
        return {n.id: n for n in self.nodes}

    @cached_property
    def _pipe_map(self):
        return {p.id: p for p in self.pipes}

    @cached_property
    def _compressor_at(self):
        return {(c.pipe, c.node): c for c in self.compressors}

    @cached_property
    def node_index(self):
        return {n.id: i for i, n in enumerate(self.nodes)}

    def node(self, node_id):
        try:
            return self._node_map[node_id]
        except KeyError:
            raise NetworkReferenceError(node_id, "node") from None

    def pipe(self, pipe_id):
        try:
            return self._pipe_map[pipe_id]
        except KeyError:
            raise NetworkReferenceError(pipe_id, "pipe") from None

    def compressor_at(self, pipe_id, node_id):
        """Compressor sitting at ``node_id`` on ``pipe_id`` or None."""
        return self._compressor_at.get((pipe_id, node_id))

    def beta(self, pipe):
        f = pipe.friction if pipe.friction is not None else self.gas.friction
        return f * self.gas.sound_speed**2

    def end_ratio(self, ratios, pipe_id, node_id):
        """Compression ratio applied at the ``node_id`` end of a pipe (1 if none)."""
        c = self.compressor_at(pipe_id, node_id)
        if c is None:
            return 1.0
        return float(ratios.get(c.id, 1.0))

    @cached_property
    def adjacency(self):
        """node id -> list of (pipe id, neighbour id), neighbours in id order."""
        adj = {n.id: [] for n in self.nodes}
        for p in self.pipes:
            adj[p.from_node].append((p.id, p.to_node))
            adj[p.to_node].append((p.id, p.from_node))
        for lst in adj.values():
            lst.sort(key=lambda e: (e[1], e[0]))
        return adj

    def bfs_tree(self, root=None):
        """Breadth-first traversal from ``root`` (default: slack).

        Returns ``(order, parent)`` where ``order`` lists ``(pipe_id, parent,
        child)`` in visiting order and ``parent`` maps node -> (pipe, parent).
        Children are visited in ascending node id. Requires a tree.
        """
        root = self.slack if root is None else root
        seen = {root}
        order = []
        parent = {root: None}
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for pid, v in self.adjacency[u]:
                if v in seen:
                    if parent[u] is None or parent[u][0] != pid:
                        raise DomainError("network contains a cycle; only trees are supported")
                    continue
                seen.add(v)
                parent[v] = (pid, u)
                order.append((pid, u, v))
                queue.append(v)
        if len(seen) != len(self.nodes):
            raise DomainError("network is not connected")
        return order, parent

    def tree_path(self, a, b):
        """Node and pipe sequence of the unique path a -> b."""
        _, parent = self.bfs_tree(a)
        nodes = [b]
        pipes = []
        while nodes[-1] != a:
            pid, u = parent[nodes[-1]]
            pipes.append(pid)
            nodes.append(u)
        return nodes[::-1], pipes[::-1]

    def replace(self, **changes):
        from dataclasses import replace

        return replace(self, **changes)

    def with_nodes(self, nodes):
        return self.replace(nodes=tuple(nodes))


@dataclass
class ValidationReport:
    imbalance: float
    balanced: bool
    connected: bool
    acyclic: bool
    bound_issues: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self):
        return self.balanced and self.connected and self.acyclic and not self.bound_issues

    def failures(self):
        out = []
        if not self.balanced:
            out.append(f"injections unbalanced by {self.imbalance:+.6g} kg/s")
        if not self.connected:
            out.append("network is not connected")
        if not self.acyclic:
            out.append("network contains a cycle")
        out.extend(self.bound_issues)
        return out


def imbalance(net):
    return math.fsum(n.q for n in net.nodes)


def balance_tolerance(net):
    return 1e-9 * max((abs(n.q) for n in net.nodes), default=0.0)


def _components(net):
    seen = set()
    count = 0
    for n in net.nodes:
        if n.id in seen:
            continue
        count += 1
        stack = [n.id]
        seen.add(n.id)
        while stack:
            u = stack.pop()
            for _, v in net.adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
    return count


def validate(net):
    """Check balance, connectivity, acyclicity and bound sanity.

    Never raises; downstream solvers refuse networks whose report is not ok.
    """
    imb = imbalance(net)
    balanced = abs(imb) <= balance_tolerance(net)
    connected = _components(net) == 1
    # a connected graph is a tree iff |E| = |V| - 1 (parallel pipes count as cycles)
    acyclic = connected and len(net.pipes) == len(net.nodes) - 1
    if not connected:
        acyclic = len(net.pipes) == len(net.nodes) - _components(net)

    issues = []
    for n in net.nodes:
        if n.p_min > n.p_max:
            issues.append(f"node {n.id}: p_min > p_max")
    if not net.slack_pressure > 0:
        issues.append("slack pressure must be positive")
    else:
        s = net.node(net.slack)
        if not (s.p_min <= net.slack_pressure <= s.p_max):
            issues.append(
                f"slack pressure {net.slack_pressure:.6g} Pa outside bounds of node {s.id}"
            )

    warns = []
    per_pipe = {}
    for c in net.compressors:
        per_pipe.setdefault(c.pipe, []).append(c.id)
    for pid, cs in per_pipe.items():
        if len(cs) > 1:
            warns.append(f"pipe {pid} carries {len(cs)} compressors ({', '.join(cs)})")
    return ValidationReport(imb, balanced, connected, acyclic, issues, warns)


def require_tree(net, balanced=True):
    """Raise DomainError unless the network is a connected (balanced) tree."""
    rep = validate(net)
    if not rep.connected:
        raise DomainError("network is not connected")
    if not rep.acyclic:
        raise DomainError("network contains a cycle; only trees are supported")
    if balanced and not rep.balanced:
        raise DomainError(f"injections unbalanced by {rep.imbalance:+.6g} kg/s")
    return rep
