"""Transient isothermal gas flow on a tree network with stochastic consumption.

Staggered finite volumes per pipe: pressures at cell centres, mass flows on
faces. One step updates the faces first (pressure gradient plus friction
treated semi-implicitly), solving the zero-volume junction balance for the
squared nodal pressures, then updates cell pressures from the new face
flows. Mass is conserved to rounding and the stationary profile is an exact
fixed point.

Ensemble arrays carry the trajectory axis first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SimulationError
from .network import require_tree
from .steady import solve_steady

MIN_CELLS = 4
CFL_SAFETY = 0.5
NOISE_BLOCK = 1000


@dataclass
class Grid:
    net: object
    cells: np.ndarray  # cells per pipe
    dx: np.ndarray  # spacing per pipe, m
    cell_offset: np.ndarray  # first global cell of each pipe
    face_offset: np.ndarray  # first global face of each pipe

    @property
    def n_cells(self):
        return int(self.cells.sum())

    @property
    def n_faces(self):
        return int((self.cells + 1).sum())

    def centers(self, k):
        return (np.arange(self.cells[k]) + 0.5) * self.dx[k]


def discretize(net, dx_target, min_cells=MIN_CELLS):
    """ceil(L / dx_target) cells per pipe, at least ``min_cells``."""
    if not dx_target > 0:
        raise DomainError("dx_target must be positive")
    lengths = np.array([p.length for p in net.pipes])
    cells = np.maximum(np.ceil(lengths / dx_target - 1e-12).astype(int), min_cells)
    dx = lengths / cells
    cell_offset = np.r_[0, np.cumsum(cells)[:-1]]
    face_offset = np.r_[0, np.cumsum(cells + 1)[:-1]]
    return Grid(net, cells, dx, cell_offset, face_offset)


def ou_step(xi, sigma, tau, dt, rng):
    """Exact Ornstein-Uhlenbeck update over dt."""
    if not dt < tau:
        raise DomainError("ou_step needs dt < tau")
    decay = math.exp(-dt / tau)
    noise = rng.standard_normal(np.shape(xi))
    return xi * decay + sigma * math.sqrt(1.0 - decay * decay) * noise


@dataclass
class SimState:
    t: float
    p: np.ndarray  # (n_traj, n_cells) Pa
    phi: np.ndarray  # (n_traj, n_faces) kg/s
    p_node: np.ndarray  # (n_traj, n_nodes) Pa, nodal (pre-station) pressure
    xi: np.ndarray  # (n_traj, n_noisy) kg/s

    def copy(self):
        return SimState(self.t, self.p.copy(), self.phi.copy(), self.p_node.copy(), self.xi.copy())


class Simulator:
    """Stepping engine for one network, station ratios and grid."""

    def __init__(self, net, ratios=None, dx=5e3, dt=None, cfl=CFL_SAFETY, steady=None):
        require_tree(net)
        self.net = net
        self.steady = steady or solve_steady(net, ratios, enforce_bounds=False)
        self.ratios = self.steady.ratios
        self.grid = discretize(net, dx)
        self.cs2 = net.gas.sound_speed**2
        dx_min = float(self.grid.dx.min())
        self.dt_max = cfl * dx_min / net.gas.sound_speed
        self.dt = self.dt_max if dt is None else float(dt)
        self.cfl = cfl
        self._build()

    # layout ------------------------------------------------------------------

    def _build(self):
        net, g = self.net, self.grid
        nid = net.node_index
        left_cell, right_cell, int_face, h_int, a_int, fr_int = [], [], [], [], [], []
        end_face, end_cell, end_node, end_sign, end_alpha, h_end, a_end, fr_end = ([] for _ in range(8))
        cell_area, cell_dx, cell_left, cell_right = [], [], [], []
        for k, pipe in enumerate(net.pipes):
            n, dx, c0, f0 = int(g.cells[k]), float(g.dx[k]), int(g.cell_offset[k]), int(g.face_offset[k])
            A = pipe.area
            fr = net.beta(pipe) / (2.0 * pipe.diameter * A)
            for j in range(1, n):
                int_face.append(f0 + j)
                left_cell.append(c0 + j - 1)
                right_cell.append(c0 + j)
                h_int.append(dx)
                a_int.append(A)
                fr_int.append(fr)
            for face, cell, node, s in ((f0, c0, pipe.from_node, 1.0),
                                        (f0 + n, c0 + n - 1, pipe.to_node, -1.0)):
                end_face.append(face)
                end_cell.append(cell)
                end_node.append(nid[node])
                end_sign.append(s)
                end_alpha.append(net.end_ratio(self.ratios, pipe.id, node))
                h_end.append(dx / 2.0)
                a_end.append(A)
                fr_end.append(fr)
            for j in range(n):
                cell_area.append(A)
                cell_dx.append(dx)
                cell_left.append(f0 + j)
                cell_right.append(f0 + j + 1)
        arr = lambda v, t=float: np.asarray(v, dtype=t)
        self.int_face, self.left_cell, self.right_cell = arr(int_face, int), arr(left_cell, int), arr(right_cell, int)
        self.h_int, self.a_int, self.fr_int = arr(h_int), arr(a_int), arr(fr_int)
        self.end_face, self.end_cell, self.end_node = arr(end_face, int), arr(end_cell, int), arr(end_node, int)
        self.end_sign, self.end_alpha = arr(end_sign), arr(end_alpha)
        self.h_end, self.a_end, self.fr_end = arr(h_end), arr(a_end), arr(fr_end)
        self.cell_area, self.cell_dx = arr(cell_area), arr(cell_dx)
        self.cell_left, self.cell_right = arr(cell_left, int), arr(cell_right, int)
        inc = np.zeros((len(end_face), len(net.nodes)))
        inc[np.arange(len(end_face)), self.end_node] = 1.0
        self.incidence = inc
        self.q = np.array([n.q for n in net.nodes], dtype=float)
        self.noisy = np.array([i for i, n in enumerate(net.nodes) if n.noise_sigma > 0], dtype=int)
        self.sigma = np.array([net.nodes[i].noise_sigma for i in self.noisy])
        self.tau = np.array([net.nodes[i].noise_tau for i in self.noisy])
        self.cell_mass = self.cell_area * self.cell_dx / self.cs2  # kg per Pa

    # states ------------------------------------------------------------------

    def steady_state(self, n_traj=1):
        """Cells sampled from the exact stationary profile, uniform face flows."""
        net, g, ss = self.net, self.grid, self.steady
        p = np.empty(g.n_cells)
        phi = np.empty(g.n_faces)
        for k, pipe in enumerate(net.pipes):
            c0, f0, n = int(g.cell_offset[k]), int(g.face_offset[k]), int(g.cells[k])
            p[c0:c0 + n] = ss.profile(pipe.id, g.centers(k))
            phi[f0:f0 + n + 1] = ss.flows[pipe.id]
        pn = np.array([ss.node_pressure[n.id] for n in net.nodes])
        tile = lambda v: np.tile(v, (n_traj, 1))
        return SimState(0.0, tile(p), tile(phi), tile(pn), np.zeros((n_traj, len(self.noisy))))

    def total_mass(self, state):
        return state.p @ self.cell_mass

    # stepping ----------------------------------------------------------------

    def step(self, state, dt=None, xi=None):
        """Advance one step in place; ``xi`` (n_traj, n_noisy) is held over the step."""
        dt = self.dt if dt is None else dt
        if dt > self.dt_max * (1 + 1e-12):
            raise DomainError(
                f"dt={dt:.4g} s violates the CFL limit {self.dt_max:.4g} s "
                f"(safety {self.cfl} * dx / c_s)"
            )
        xi = state.xi if xi is None else xi
        p, phi = state.p, state.phi

        # interior faces
        pl, pr = p[:, self.left_cell], p[:, self.right_cell]
        pbar = 0.5 * (pl + pr)
        f = phi[:, self.int_face]
        num = f - dt * self.a_int * (pr * pr - pl * pl) / (2.0 * self.h_int * pbar)
        phi[:, self.int_face] = num / (1.0 + dt * self.fr_int * np.abs(f) / pbar)

        # pipe ends: outward flow = s * a + b * P with P the squared nodal pressure
        pc = p[:, self.end_cell]
        side = state.p_node[:, self.end_node] * self.end_alpha
        pbar = 0.5 * (pc + side)
        f = phi[:, self.end_face]
        den = 1.0 + dt * self.fr_end * np.abs(f) / pbar
        gcoef = dt * self.a_end / (2.0 * self.h_end * pbar)
        a = (f - self.end_sign * gcoef * pc * pc) / den
        b = gcoef * self.end_alpha**2 / den
        inj = np.broadcast_to(self.q, state.p_node.shape).copy()
        if len(self.noisy):
            inj[:, self.noisy] += xi
        P = (inj - (self.end_sign * a) @ self.incidence) / (b @ self.incidence)
        if not np.all(P > 0):
            tr, node = np.argwhere(~(P > 0))[0]
            raise SimulationError(
                f"nodal pressure collapsed at node {self.net.nodes[node].id} "
                f"(trajectory {tr}, t={state.t + dt:.6g} s)",
                location=self.net.nodes[node].id, time=state.t + dt,
            )
        phi[:, self.end_face] = a + self.end_sign * b * P[:, self.end_node]
        state.p_node = np.sqrt(P)

        # cells
        div = phi[:, self.cell_right] - phi[:, self.cell_left]
        p -= dt * self.cs2 / (self.cell_area * self.cell_dx) * div
        if not np.all(p > 0):
            tr, cell = np.argwhere(~(p > 0))[0]
            k = int(np.searchsorted(self.grid.cell_offset, cell, side="right") - 1)
            raise SimulationError(
                f"pressure collapsed in pipe {self.net.pipes[k].id} "
                f"(cell {cell - self.grid.cell_offset[k]}, trajectory {tr}, t={state.t + dt:.6g} s)",
                location=self.net.pipes[k].id, time=state.t + dt,
            )
        state.t += dt
        return state

    # probes ------------------------------------------------------------------

    def probe_weights(self, probes, state_shape_cells=None):
        """Linear interpolation of (pipe id, x) probes over [end, centres, end]."""
        rows = []
        for pid, x in probes:
            k = next((i for i, p in enumerate(self.net.pipes) if p.id == pid), None)
            if k is None:
                raise DomainError(f"unknown probe pipe '{pid}'")
            pipe = self.net.pipes[k]
            if not 0 <= x <= pipe.length:
                raise DomainError(f"probe x={x} outside pipe {pid}")
            pos = np.r_[0.0, self.grid.centers(k), pipe.length]
            j = int(np.clip(np.searchsorted(pos, x, side="right") - 1, 0, len(pos) - 2))
            w = (x - pos[j]) / (pos[j + 1] - pos[j])
            rows.append((k, j, w))
        return rows

    def read_probes(self, state, rows):
        out = np.empty((state.p.shape[0], len(rows)))
        for i, (k, j, w) in enumerate(rows):
            pipe = self.net.pipes[k]
            c0, n = int(self.grid.cell_offset[k]), int(self.grid.cells[k])

            def val(m):
                if m == 0:
                    return state.p_node[:, self.net.node_index[pipe.from_node]] * \
                        self.net.end_ratio(self.ratios, pipe.id, pipe.from_node)
                if m == n + 1:
                    return state.p_node[:, self.net.node_index[pipe.to_node]] * \
                        self.net.end_ratio(self.ratios, pipe.id, pipe.to_node)
                return state.p[:, c0 + m - 1]

            out[:, i] = (1 - w) * val(j) + w * val(j + 1)
        return out


@dataclass
class Ensemble:
    times: np.ndarray  # (n_rec,)
    probes: list  # [(pipe id, x)]
    probe_p0: np.ndarray  # (n_probes,) stationary pressure at each probe
    probe_dp: np.ndarray  # (n_traj, n_rec, n_probes)
    node_dp: np.ndarray  # (n_traj, n_rec, n_nodes)
    pipe_mean_dp: np.ndarray  # (n_traj, n_rec, n_pipes) volume-mean deviation
    pipe_net_inflow: np.ndarray  # (n_traj, n_rec, n_pipes) integral of (inflow - outflow), kg
    xi_integral: np.ndarray  # (n_traj, n_rec) integral of the summed noise, kg
    max_rel_dev: np.ndarray  # (n_traj, n_rec) max over cells of |dp| / p_st
    node_ids: list = field(default_factory=list)
    pipe_ids: list = field(default_factory=list)
    dt: float = 0.0
    noise_taus: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n_trajectories(self):
        return self.probe_dp.shape[0]

    @property
    def horizon(self):
        return float(self.times[-1])


def simulate(net, ratios=None, horizon=9e4, dt=None, dx=5e3, n_trajectories=1, seed=0,
             stride=None, probes=None, steady=None, cfl=CFL_SAFETY):
    """Ensemble of noise-driven runs started from the stationary state.

    Trajectory i draws its noise from ``numpy.random.default_rng(seed + i)``,
    so runs are reproducible trajectory by trajectory.
    """
    sim = Simulator(net, ratios, dx=dx, dt=dt, cfl=cfl, steady=steady)
    n_steps = int(math.ceil(horizon / sim.dt - 1e-9))
    stride = stride or max(1, n_steps // 400)
    if probes is None:
        probes = [(p.id, 0.5 * p.length) for p in net.pipes]
    rows = sim.probe_weights(probes)
    state = sim.steady_state(n_trajectories)
    p_st = state.p[0].copy()
    pn_st = state.p_node[0].copy()
    probe0 = sim.read_probes(state, rows)[0]
    n_noisy = len(sim.noisy)
    rngs = [np.random.default_rng(seed + i) for i in range(n_trajectories)]
    if n_noisy:
        state.xi = np.stack([r.standard_normal(n_noisy) for r in rngs]) * sim.sigma
    decay = np.exp(-sim.dt / sim.tau) if n_noisy else np.zeros(0)
    kick = sim.sigma * np.sqrt(1.0 - decay**2) if n_noisy else np.zeros(0)

    # per-pipe bookkeeping for the linepack identity
    n_pipes = len(net.pipes)
    first_face = sim.grid.face_offset
    last_face = sim.grid.face_offset + sim.grid.cells
    vol = np.array([p.volume for p in net.pipes])
    cell_pipe = np.repeat(np.arange(n_pipes), sim.grid.cells)
    phi_st = state.phi[0].copy()
    inflow = np.zeros((n_trajectories, n_pipes))
    xi_int = np.zeros(n_trajectories)

    rec_t, rec_probe, rec_node, rec_mean, rec_in, rec_xi, rec_dev = [], [], [], [], [], [], []

    def record():
        dp = state.p - p_st
        rec_t.append(state.t)
        rec_probe.append(sim.read_probes(state, rows) - probe0)
        rec_node.append(state.p_node - pn_st)
        mean = np.zeros((n_trajectories, n_pipes))
        np.add.at(mean.T, cell_pipe, (dp * sim.cell_area * sim.cell_dx).T)
        rec_mean.append(mean / vol)
        rec_in.append(inflow.copy())
        rec_xi.append(xi_int.copy())
        rec_dev.append(np.max(np.abs(dp) / p_st, axis=1))

    record()
    block = None
    for n in range(n_steps):
        if n_noisy and n % NOISE_BLOCK == 0:
            k = min(NOISE_BLOCK, n_steps - n)
            block = np.stack([r.standard_normal((k, n_noisy)) for r in rngs], axis=1)
        xi_now = state.xi
        sim.step(state, xi=xi_now)
        if n_noisy:
            xi_int += sim.dt * xi_now.sum(axis=1)
            state.xi = xi_now * decay + kick * block[n % NOISE_BLOCK]
        dphi = state.phi - phi_st
        inflow += sim.dt * (dphi[:, first_face] - dphi[:, last_face])
        if (n + 1) % stride == 0 or n + 1 == n_steps:
            record()

    return Ensemble(
        times=np.array(rec_t),
        probes=list(probes),
        probe_p0=probe0,
        probe_dp=np.stack(rec_probe, axis=1),
        node_dp=np.stack(rec_node, axis=1),
        pipe_mean_dp=np.stack(rec_mean, axis=1),
        pipe_net_inflow=np.stack(rec_in, axis=1),
        xi_integral=np.stack(rec_xi, axis=1),
        max_rel_dev=np.stack(rec_dev, axis=1),
        node_ids=[nd.id for nd in net.nodes],
        pipe_ids=[p.id for p in net.pipes],
        dt=sim.dt,
        noise_taus=sim.tau.copy(),
    )


@dataclass
class VarianceFit:
    slope: float  # Pa^2/s
    stderr: float
    intercept: float
    r2: float
    t_min: float
    t_max: float
    n_points: int

    def ci(self, z=1.96):
        return self.slope - z * self.stderr, self.slope + z * self.stderr


def variance_growth(ens, probe=0, t_min=None, t_max=None, min_trajectories=100,
                    max_rel_dev=0.1):
    """Least-squares slope of the ensemble variance of delta_p against time.

    ``probe`` is an index into ``ens.probes`` or a (pipe id, x) pair that was
    recorded. The window defaults to [max(5 tau_max, horizon / 10), t*] where
    t* is the last time with every trajectory within ``max_rel_dev`` of the
    stationary pressure.
    """
    if ens.n_trajectories < min_trajectories:
        raise DomainError(f"need at least {min_trajectories} trajectories, got {ens.n_trajectories}")
    if not isinstance(probe, (int, np.integer)):
        try:
            probe = ens.probes.index(tuple(probe))
        except ValueError:
            raise DomainError(f"probe {probe} was not recorded") from None
    t = ens.times
    tau_max = float(ens.noise_taus.max()) if len(ens.noise_taus) else 0.0
    if t_min is None:
        t_min = max(5.0 * tau_max, ens.horizon / 10.0)
    if t_max is None:
        ok = np.max(ens.max_rel_dev, axis=0) <= max_rel_dev
        bad = np.flatnonzero(~ok)
        t_max = ens.horizon if len(bad) == 0 else float(t[max(bad[0] - 1, 0)])
    if t_min < 0 or t_max > ens.horizon * (1 + 1e-12) or t_min >= t_max:
        raise DomainError(
            f"fit window [{t_min:.6g}, {t_max:.6g}] s outside simulated horizon {ens.horizon:.6g} s"
        )
    sel = (t >= t_min) & (t <= t_max)
    if sel.sum() < 3:
        raise DomainError("fit window holds fewer than 3 recorded times")
    var = ens.probe_dp[:, sel, probe].var(axis=0, ddof=1)
    x = t[sel]
    if np.all(var == 0):
        return VarianceFit(0.0, 0.0, 0.0, 1.0, t_min, t_max, int(sel.sum()))
    X = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(X, var, rcond=None)
    resid = var - X @ coef
    n = len(x)
    s2 = resid @ resid / (n - 2)
    stderr = math.sqrt(s2 / np.sum((x - x.mean()) ** 2))
    ss_tot = np.sum((var - var.mean()) ** 2)
    r2 = 1.0 - (resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return VarianceFit(float(coef[1]), stderr, float(coef[0]), float(r2), float(t_min), float(t_max), n)
