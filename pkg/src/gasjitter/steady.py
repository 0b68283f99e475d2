"""Stationary gas flow on tree networks.

Per-pipe flow is total mass flow (kg/s); the friction law uses the flux
flow/area, so along a pipe

    p(x)**2 = p(0)**2 - (beta * x / d) * (flow / A) * |flow / A|

where p(0) is the pressure after the compressor at the pipe's from-end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InfeasibleError
from .network import require_tree

DEFAULT_SAMPLES = 101


@dataclass(frozen=True)
class EdgeFlows:
    """Signed mass flow per pipe, relative to the pipe's from -> to orientation."""

    flows: dict

    def __getitem__(self, pipe_id):
        return self.flows[pipe_id]

    def __iter__(self):
        return iter(self.flows)

    def items(self):
        return self.flows.items()

    def nodal_residual(self, net):
        """Outflow minus injection at each node (zero for a valid solution)."""
        res = {n.id: -n.q for n in net.nodes}
        for p in net.pipes:
            phi = self.flows[p.id]
            res[p.from_node] += phi
            res[p.to_node] -= phi
        return res


def compute_tree_flows(net):
    """Unique edge flows of a balanced tree.

    The flow on each pipe equals the net injection of the component on its
    from-side once the pipe is removed.
    """
    require_tree(net)
    order, _ = net.bfs_tree()
    subtotal = {n.id: n.q for n in net.nodes}
    flows = {}
    for pid, parent, child in reversed(order):
        s = subtotal[child]  # injection of the child's side, flowing child -> parent
        subtotal[parent] += s
        pipe = net.pipe(pid)
        flows[pid] = s if pipe.from_node == child else -s
    return EdgeFlows({p.id: flows[p.id] for p in net.pipes})


def drop_coefficient(pipe, beta):
    """K such that p(x)**2 = p0**2 - K * x * flow * |flow|."""
    return beta / (pipe.diameter * pipe.area**2)


def pressure_after(p_in, pipe, flow, x, gas):
    """Pressure at distance ``x`` from the from-end, given the pipe-side inlet
    pressure ``p_in`` and the signed mass flow."""
    if not p_in > 0:
        raise DomainError("inlet pressure must be positive")
    if x < 0 or x > pipe.length * (1 + 1e-12):
        raise DomainError(f"x={x} outside [0, {pipe.length}]")
    beta = (pipe.friction if pipe.friction is not None else gas.friction) * gas.sound_speed**2
    rad = p_in**2 - drop_coefficient(pipe, beta) * x * flow * abs(flow)
    if not rad > 0:
        raise InfeasibleError(
            f"pressure in pipe {pipe.id} collapses before x={x:.6g} m", location=pipe.id
        )
    return math.sqrt(rad)


@dataclass
class SteadyState:
    net: object
    flows: EdgeFlows
    ratios: dict
    node_pressure: dict
    end_pressure: dict  # (pipe id, node id) -> pressure on the pipe side of that end
    drop: dict = field(default_factory=dict)  # pipe id -> K * flow * |flow| (Pa^2/m)

    def inlet(self, pipe_id):
        """Pipe-side pressure at x = 0 (from-end)."""
        return self.end_pressure[(pipe_id, self.net.pipe(pipe_id).from_node)]

    def outlet(self, pipe_id):
        """Pipe-side pressure at x = L (to-end)."""
        return self.end_pressure[(pipe_id, self.net.pipe(pipe_id).to_node)]

    def profile(self, pipe_id, x):
        """Pressure along a pipe (vectorised over ``x``)."""
        p0 = self.inlet(pipe_id)
        rad = p0**2 - self.drop[pipe_id] * np.asarray(x, dtype=float)
        return np.sqrt(rad)

    def sample(self, pipe_id, n=DEFAULT_SAMPLES):
        x = np.linspace(0.0, self.net.pipe(pipe_id).length, n)
        return x, self.profile(pipe_id, x)


def solve_steady(net, ratios=None, flows=None, enforce_bounds=True):
    """Propagate pressures breadth-first from the slack node.

    ``ratios`` maps compressor id -> compression ratio; missing compressors
    run at 1. With ``enforce_bounds`` each ratio must lie in its
    [alpha_min, alpha_max]; otherwise only positivity is required.
    """
    if flows is None:
        flows = compute_tree_flows(net)
    ratios = dict(ratios or {})
    known = {c.id for c in net.compressors}
    for cid, a in ratios.items():
        if cid not in known:
            raise DomainError(f"unknown compressor '{cid}'")
        if not a > 0:
            raise DomainError(f"compressor {cid}: ratio must be positive")
    full = {}
    for c in net.compressors:
        a = float(ratios.get(c.id, 1.0))
        if enforce_bounds and not (c.alpha_min * (1 - 1e-12) <= a <= c.alpha_max * (1 + 1e-12)):
            raise DomainError(
                f"compressor {c.id}: ratio {a:.6g} outside [{c.alpha_min}, {c.alpha_max}]"
            )
        full[c.id] = a
    if not net.slack_pressure > 0:
        raise DomainError("slack pressure must be positive")

    order, _ = net.bfs_tree()
    node_p = {net.slack: float(net.slack_pressure)}
    end_p = {}
    drop = {}
    for pid, u, v in order:
        pipe = net.pipe(pid)
        phi = flows[pid]
        d = drop_coefficient(pipe, net.beta(pipe)) * phi * abs(phi)
        drop[pid] = d
        side_u = node_p[u] * net.end_ratio(full, pid, u)
        if u == pipe.from_node:
            rad = side_u**2 - d * pipe.length
        else:
            rad = side_u**2 + d * pipe.length
        if not rad > 0:
            raise InfeasibleError(
                f"pipe {pid}: pressure collapses (p^2 = {rad:.6g} Pa^2 at the {v} end)",
                location=pid,
            )
        side_v = math.sqrt(rad)
        end_p[(pid, u)] = side_u
        end_p[(pid, v)] = side_v
        node_p[v] = side_v / net.end_ratio(full, pid, v)
    return SteadyState(net, flows, full, node_p, end_p, drop)


@dataclass(frozen=True)
class Violation:
    location: str  # node id, or pipe id for profile samples
    x: float | None  # position along the pipe; None for nodes
    kind: str  # "min" or "max"
    pressure: float
    bound: float

    @property
    def amount(self):
        return self.bound - self.pressure if self.kind == "min" else self.pressure - self.bound


def pipe_bounds(net, pipe):
    """Pressure envelope for a pipe: spans the bounds of its two end nodes."""
    a, b = net.node(pipe.from_node), net.node(pipe.to_node)
    return min(a.p_min, b.p_min), max(a.p_max, b.p_max)


def check_bounds(ss, net=None, samples=DEFAULT_SAMPLES, rtol=0.0):
    """Nodes and sampled pipe profiles lying outside their pressure bounds.

    Pipe samples include both pipe-side ends, so the pressure right after a
    compressor is checked against the pipe envelope.
    """
    net = ss.net if net is None else net
    out = []
    for n in net.nodes:
        p = ss.node_pressure[n.id]
        if p < n.p_min * (1 - rtol):
            out.append(Violation(n.id, None, "min", p, n.p_min))
        if p > n.p_max * (1 + rtol):
            out.append(Violation(n.id, None, "max", p, n.p_max))
    if samples:
        for pipe in net.pipes:
            lo, hi = pipe_bounds(net, pipe)
            x, p = ss.sample(pipe.id, max(samples, 2))
            i = int(np.argmin(p))
            if p[i] < lo * (1 - rtol):
                out.append(Violation(pipe.id, float(x[i]), "min", float(p[i]), lo))
            j = int(np.argmax(p))
            if p[j] > hi * (1 + rtol):
                out.append(Violation(pipe.id, float(x[j]), "max", float(p[j]), hi))
    return out
