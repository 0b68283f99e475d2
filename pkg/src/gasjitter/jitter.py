"""Diffusive pressure jitter around a stationary flow.

Slowly varying consumption noise excites a single growing mode: the
integrated mass imbalance Xi(t) = int sum_n xi_n dt spreads over the linepack
and the pressure perturbation on pipe (i, j) becomes

    delta_p(t, x) = c_s**2 * c_ij * Z_ij(x) * Xi(t) / sum_kl(c_kl * A_kl * L_kl)

with Z_ij(x) = (p_in + p_out) / (2 p(x)) (mean one over the pipe) and edge
constants c_ij fixed by pressure continuity at nodes. For noise with
integral time scale tau_eff, Var Xi(t) ~ S * tau_eff * t, so Var delta_p
grows linearly with rate D(x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from .errors import DomainError
from .network import require_tree
from .steady import DEFAULT_SAMPLES
from .units import P0, T0


@dataclass
class ZetaProfile:
    pipe_id: str
    length: float
    p_in: float  # pipe-side pressure at x = 0
    p_out: float  # pipe-side pressure at x = L
    drop: float  # d(p**2)/dx magnitude with sign of the flow, Pa^2/m
    x: np.ndarray
    z: np.ndarray

    def __call__(self, x):
        p = np.sqrt(self.p_in**2 - self.drop * np.asarray(x, dtype=float))
        return (self.p_in + self.p_out) / (2.0 * p)

    @property
    def start(self):
        return (self.p_in + self.p_out) / (2.0 * self.p_in)

    @property
    def end(self):
        return (self.p_in + self.p_out) / (2.0 * self.p_out)

    def at_node(self, pipe, node_id):
        return self.start if node_id == pipe.from_node else self.end


def zeta_profile(ss, pipe_id, n=DEFAULT_SAMPLES):
    """Zero-mode profile of one pipe from the stationary pressures."""
    pipe = ss.net.pipe(pipe_id)
    x = np.linspace(0.0, pipe.length, n)
    zp = ZetaProfile(pipe_id, pipe.length, ss.inlet(pipe_id), ss.outlet(pipe_id),
                     ss.drop[pipe_id], x, None)
    zp.z = zp(x)
    return zp


def zeta_profiles(ss, n=DEFAULT_SAMPLES):
    return {p.id: zeta_profile(ss, p.id, n) for p in ss.net.pipes}


@dataclass
class EdgeConstants:
    c: dict  # pipe id -> c_ij
    nodal: dict  # node id -> coefficient of the nodal pressure perturbation

    def scaled(self, lam):
        return EdgeConstants({k: lam * v for k, v in self.c.items()},
                             {k: lam * v for k, v in self.nodal.items()})


def edge_constants(net, ss, profiles=None):
    """Edge constants from continuity of delta_p at every node.

    The pipe-side perturbation at a station end is the nodal one times the
    ratio. The first pipe leaving the slack node gets c = 1.
    """
    require_tree(net, balanced=False)
    profiles = profiles or zeta_profiles(ss, 2)
    order, _ = net.bfs_tree()
    nodal = {net.slack: 1.0}
    c = {}
    for pid, u, v in order:
        pipe = net.pipe(pid)
        zp = profiles[pid]
        c[pid] = ss.ratios.get(_station(net, pid, u), 1.0) * nodal[u] / zp.at_node(pipe, u)
        nodal[v] = c[pid] * zp.at_node(pipe, v) / ss.ratios.get(_station(net, pid, v), 1.0)
    if order:
        lam = 1.0 / c[order[0][0]]
        c = {k: v * lam for k, v in c.items()}
        nodal = {k: v * lam for k, v in nodal.items()}
    return EdgeConstants({p.id: c[p.id] for p in net.pipes}, nodal)


def _station(net, pipe_id, node_id):
    comp = net.compressor_at(pipe_id, node_id)
    return None if comp is None else comp.id


@dataclass(frozen=True)
class FluctuationStrength:
    S: float  # (kg/s)^2, variance of the summed consumption noise
    tau_eff: float  # s, integral time: Var Xi(t) ~ S * tau_eff * t

    def __post_init__(self):
        if self.S < 0:
            raise DomainError("S must be >= 0")
        if not self.tau_eff > 0:
            raise DomainError("tau_eff must be > 0")

    @property
    def rate(self):
        """Growth rate of Var Xi, (kg)^2 / s."""
        return self.S * self.tau_eff


def fluctuation_strength(net):
    """S from independent node noises; tau_eff = 2 * variance-weighted tau.

    An Ornstein-Uhlenbeck process with correlation time tau has integral
    time 2 * tau (its autocovariance integrated over both lags).
    """
    var = np.array([n.noise_sigma**2 for n in net.nodes])
    S = math.fsum(var)
    if S == 0:
        return FluctuationStrength(0.0, T0)
    tau = np.array([n.noise_tau for n in net.nodes])
    return FluctuationStrength(S, 2.0 * math.fsum(var * tau) / S)


def uniform_sources_strength(phi0=20.0, n_nodes=70, tau_eff=T0):
    """S for n_nodes independent sources each with std phi0 / 3."""
    return FluctuationStrength((phi0 / 3.0) ** 2 * n_nodes, tau_eff)


@dataclass
class JitterProfile:
    net: object
    steady: object
    consts: EdgeConstants
    strength: FluctuationStrength
    zeta: dict
    weighted_volume: float  # sum c * A * L, m^3
    D: dict = field(default_factory=dict)  # pipe id -> samples of D, Pa^2/s

    def factor(self, pipe_id):
        """c_s**2 * c_ij / sum(c A L), Pa per kg of integrated imbalance per unit Z."""
        cs2 = self.net.gas.sound_speed**2
        return cs2 * self.consts.c[pipe_id] / self.weighted_volume

    def at(self, pipe_id, x):
        """D at positions ``x`` along a pipe."""
        return (self.factor(pipe_id) * self.zeta[pipe_id](x)) ** 2 * self.strength.rate

    def node_D(self, node_id):
        """D of the nodal pressure (before any station boost)."""
        cs2 = self.net.gas.sound_speed**2
        return (cs2 * self.consts.nodal[node_id] / self.weighted_volume) ** 2 * self.strength.rate

    def amplitude(self, xi_integral):
        """Zero-mode amplitude for integrated imbalance Xi (kg)."""
        return self.net.gas.sound_speed**2 * np.asarray(xi_integral) / self.weighted_volume

    def delta_p(self, pipe_id, x, xi_integral):
        """Pressure perturbation implied by integrated imbalance Xi."""
        return self.amplitude(xi_integral) * self.consts.c[pipe_id] * self.zeta[pipe_id](x)

    def peak(self):
        """(pipe id, x, D) of the largest sampled D."""
        best = None
        for pid, d in self.D.items():
            i = int(np.argmax(d))
            if best is None or d[i] > best[2]:
                best = (pid, float(self.zeta[pid].x[i]), float(d[i]))
        return best

    def peak_node(self):
        """Node with the largest nodal D."""
        return max(self.consts.nodal, key=lambda k: (self.node_D(k), k))


def diffusion_coefficient(ss, consts=None, strength=None, n=DEFAULT_SAMPLES, profiles=None):
    """Sampled D(x) = (c_s**2 c Z(x) / sum(c A L))**2 * S * tau_eff on every pipe."""
    net = ss.net
    profiles = profiles or zeta_profiles(ss, n)
    consts = consts or edge_constants(net, ss, profiles)
    strength = strength or fluctuation_strength(net)
    vol = math.fsum(consts.c[p.id] * p.area * p.length for p in net.pipes)
    jp = JitterProfile(net, ss, consts, strength, profiles, vol)
    jp.D = {p.id: jp.at(p.id, profiles[p.id].x) for p in net.pipes}
    return jp


def jitter_profile(ss, n=DEFAULT_SAMPLES, strength=None):
    return diffusion_coefficient(ss, strength=strength, n=n)


def reference_D(p0=P0, t0=T0):
    """D0 = (p0 / 3)**2 / t0."""
    if not (p0 > 0 and t0 > 0):
        raise DomainError("p0 and t0 must be positive")
    return (p0 / 3.0) ** 2 / t0


def normalize_D(D, p0=P0, t0=T0):
    return np.asarray(D) / reference_D(p0, t0) if np.ndim(D) else D / reference_D(p0, t0)


def _check(D, t):
    if np.any(np.asarray(D) <= 0) or np.any(np.asarray(t) <= 0):
        raise DomainError("D and t must be positive")


def pressure_pdf(D, t, delta):
    """Gaussian density of the pressure perturbation after time t."""
    _check(D, t)
    var = np.asarray(t) * np.asarray(D)
    out = np.exp(-np.asarray(delta) ** 2 / (2.0 * var)) / np.sqrt(2.0 * np.pi * var)
    return float(out) if np.ndim(out) == 0 else out


def exceedance_probability(D, t, margin):
    """P(|delta_p(t)| >= margin)."""
    _check(D, t)
    if np.any(np.asarray(margin) < 0):
        raise DomainError("margin must be >= 0")
    out = erfc(np.asarray(margin) / np.sqrt(2.0 * np.asarray(t) * np.asarray(D)))
    return float(out) if np.ndim(out) == 0 else out


def node_exceedance(jp, t):
    """Per node: (margin to the nearer bound, probability of crossing it by t)."""
    out = {}
    for n in jp.net.nodes:
        p = jp.steady.node_pressure[n.id]
        margin = max(min(p - n.p_min, n.p_max - p), 0.0)
        D = jp.node_D(n.id)
        prob = exceedance_probability(D, t, margin) if D > 0 else float(margin == 0)
        out[n.id] = (margin, prob)
    return out


# mainline distance -------------------------------------------------------------


def default_mainline(net):
    """Slack node and the node farthest from it along the pipes."""
    order, _ = net.bfs_tree()
    dist = {net.slack: 0.0}
    for pid, u, v in order:
        dist[v] = dist[u] + net.pipe(pid).length
    far = max(dist, key=lambda k: (dist[k], k))
    return net.slack, far


def mainline_mileposts(net):
    """Distance along the mainline (m) for every node.

    Mainline nodes get their cumulative distance from the start; off-line
    nodes inherit the distance of the mainline node they hang from.
    """
    start, end = net.mainline or default_mainline(net)
    nodes, pipes = net.tree_path(start, end)
    pos = {nodes[0]: 0.0}
    for a, b, pid in zip(nodes, nodes[1:], pipes):
        pos[b] = pos[a] + net.pipe(pid).length
    _, parent = net.bfs_tree(start)
    out = {}
    for n in net.nodes:
        u = n.id
        while u not in pos:
            u = parent[u][1]
        out[n.id] = pos[u]
    return out, set(pipes)


def pipe_mileposts(net, pipe_id, x):
    """Mainline distance for positions x along a pipe."""
    pos, on_line = mainline_mileposts(net)
    pipe = net.pipe(pipe_id)
    x = np.asarray(x, dtype=float)
    a, b = pos[pipe.from_node], pos[pipe.to_node]
    if pipe_id in on_line:
        return a + (b - a) * x / pipe.length
    return np.full_like(x, min(a, b))
