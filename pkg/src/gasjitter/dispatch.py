"""Compressor dispatch: greedy heuristic, optimal gas flow as a geometric
program, and a signomial refinement that forbids decompression.

Geometric program variables are normalised by the slack pressure p_ref:
u_i = log(p_i**2 / p_ref**2) and t_k = log(alpha_k). Reported values use the
absolute form beta_hat = 2 log p = u + 2 log p_ref.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .convex import BarrierSolver, LSEProgram
from .errors import (
    BoundError,
    DomainError,
    GasJitterError,
    InfeasibleError,
    NonConvergenceError,
    OrientationError,
)
from .steady import check_bounds, compute_tree_flows, drop_coefficient, pipe_bounds, solve_steady

log = logging.getLogger(__name__)

METHODS = ("greedy", "gp", "sp")
FEASIBILITY_RTOL = 1e-6
# stand-ins for absent pressure bounds, relative to the slack pressure
P_FLOOR = 1e-3
P_CAP = 1e3


@dataclass
class DispatchResult:
    method: str
    ratios: dict
    steady: object
    power: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def node_pressure(self):
        return self.steady.node_pressure

    @property
    def beta_hat(self):
        return {k: 2.0 * math.log(p) for k, p in self.steady.node_pressure.items()}

    @property
    def t_hat(self):
        return {k: math.log(a) for k, a in self.ratios.items()}


# orientation ---------------------------------------------------------------


def throughput(net, flows, comp):
    """Mass flow leaving the compressor's node through its pipe."""
    pipe = net.pipe(comp.pipe)
    phi = flows[comp.pipe]
    return phi if comp.node == pipe.from_node else -phi


def classify_compressors(net, flows):
    """Split compressors into (active, bypassed); raise on flow against any station."""
    active, bypassed = [], []
    for c in net.compressors:
        f = throughput(net, flows, c)
        if f < 0:
            raise OrientationError(
                f"compressor {c.id}: flow {f:.6g} kg/s runs against its boosting direction"
            )
        (active if f > 0 else bypassed).append(c)
    return active, bypassed


def compression_power(ratios, flows, net):
    """Total compression power: sum of (c * phi / eta) * (max(alpha**m, 1) - 1)."""
    total = []
    for c in net.compressors:
        a = float(ratios.get(c.id, 1.0))
        f = throughput(net, flows, c)
        if f < 0:
            raise OrientationError(f"compressor {c.id}: negative flow {f:.6g} kg/s")
        total.append(c.cost * f / c.efficiency * (max(a**c.exponent, 1.0) - 1.0))
    return math.fsum(total)


def _finish(net, flows, ratios, method, diagnostics, enforce_bounds=True):
    ss = solve_steady(net, ratios, flows=flows, enforce_bounds=enforce_bounds)
    viol = check_bounds(ss, rtol=FEASIBILITY_RTOL)
    _raise_violations(viol, method)
    return DispatchResult(method, ss.ratios, ss, compression_power(ss.ratios, flows, net), diagnostics)


def _raise_violations(viol, method):
    if not viol:
        return
    lows = [v for v in viol if v.kind == "min"]
    worst = max(lows or viol, key=lambda v: v.amount)
    where = worst.location if worst.x is None else f"{worst.location} at x={worst.x:.6g} m"
    msg = (f"{method}: pressure {worst.pressure:.6g} Pa at {where} "
           f"{'below' if worst.kind == 'min' else 'above'} bound {worst.bound:.6g} Pa")
    if lows:
        raise InfeasibleError(msg, location=worst.location)
    raise BoundError(msg)


# greedy ----------------------------------------------------------------------


def _propagate(net, flows, ratios, order):
    """Node pressures from the slack; NaN below any pipe where pressure collapses."""
    p = {net.slack: float(net.slack_pressure)}
    for pid, u, v in order:
        pipe = net.pipe(pid)
        side_u = p[u] * net.end_ratio(ratios, pid, u)
        d = drop_coefficient(pipe, net.beta(pipe)) * flows[pid] * abs(flows[pid]) * pipe.length
        rad = side_u**2 - d if u == pipe.from_node else side_u**2 + d
        p[v] = math.sqrt(rad) / net.end_ratio(ratios, pid, v) if rad > 0 else math.nan
    return p


def _segment(children, v, boundary):
    """Nodes downstream of ``v`` reached without crossing another station."""
    nodes = [v]
    stack = [v]
    while stack:
        u = stack.pop()
        for pid, w in children[u]:
            if (pid, u) in boundary:
                continue
            nodes.append(w)
            stack.append(w)
    return nodes


def greedy_dispatch(net, flows=None):
    """Operational heuristic: run a station at alpha_max only when the segment
    it feeds would otherwise fall below its minimum pressure.

    Stations are visited outward from the slack, children in ascending node
    id. A segment runs from the station to the next station or a leaf.
    """
    flows = compute_tree_flows(net) if flows is None else flows
    active, _ = classify_compressors(net, flows)
    order, parent = net.bfs_tree()
    children = {n.id: [] for n in net.nodes}
    for pid, u, v in order:
        children[u].append((pid, v))
    parent_end = {}
    for c in active:
        pid, par = parent[c.node] if parent[c.node] is not None else (None, None)
        if pid == c.pipe:
            raise OrientationError(
                f"compressor {c.id} pushes flow toward the slack node; "
                "the greedy rule only handles stations facing downstream"
            )
        parent_end[(c.pipe, c.node)] = c
    boundary = set(parent_end)

    def off(c):
        return min(max(1.0, c.alpha_min), c.alpha_max)

    ratios = {c.id: off(c) for c in net.compressors}
    decisions = []
    for pid, u, v in order:
        c = parent_end.get((pid, u))
        if c is None:
            continue
        p = _propagate(net, flows, ratios, order)
        seg = _segment(children, v, boundary)
        ok = all(not math.isnan(p[n]) and p[n] >= net.node(n).p_min for n in seg)
        ratios[c.id] = off(c) if ok else c.alpha_max
        decisions.append((c.id, "hold" if ok else "boost"))
    try:
        return _finish(net, flows, ratios, "greedy", {"decisions": decisions})
    except InfeasibleError as exc:
        raise InfeasibleError(f"greedy dispatch infeasible: {exc}", exc.location) from exc


# geometric program -------------------------------------------------------------


@dataclass
class GPProblem:
    """Log-space optimal gas flow problem.

    ``program`` is over x = [u for ``node_vars``] + [t for ``comp_vars``];
    the slack node and fixed stations are folded into constants.
    """

    net: object
    flows: object
    p_ref: float
    node_vars: list
    comp_vars: list
    fixed: dict  # compressor id -> fixed log ratio
    delta: dict  # pipe id -> beta L / d * (phi / A)**2, Pa^2
    upstream: dict  # pipe id -> (upstream node, downstream node)
    weights: dict  # active compressor id -> c * phi / eta
    program: LSEProgram
    bounds: dict = field(default_factory=dict)  # compressor id -> (t_lo, t_hi)

    @property
    def beta_hat_nodes(self):
        """Every node carries a beta_hat; the slack's is fixed at 2 log p_ref."""
        return [n.id for n in self.net.nodes]

    @property
    def t_hat_compressors(self):
        return list(self.comp_vars)

    def node_u(self, x):
        u = {self.net.slack: 0.0}
        u.update(zip(self.node_vars, x[: len(self.node_vars)]))
        return u

    def comp_t(self, x):
        t = dict(self.fixed)
        t.update(zip(self.comp_vars, x[len(self.node_vars):]))
        return t

    def unpack(self, x):
        """Absolute beta_hat per node and t_hat per compressor."""
        off = 2.0 * math.log(self.p_ref)
        return {k: v + off for k, v in self.node_u(x).items()}, self.comp_t(x)

    def pack(self, pressures, ratios):
        x = [2.0 * math.log(pressures[n] / self.p_ref) for n in self.node_vars]
        lo_hi = self.bounds
        for cid in self.comp_vars:
            lo, hi = lo_hi[cid]
            x.append(min(max(math.log(ratios.get(cid, 1.0)), lo), hi))
        return np.array(x)

    def objective_value(self, ratios):
        """log sum d alpha**m over active stations (the program objective)."""
        terms = [w * ratios.get(cid, 1.0) ** self.net_comp(cid).exponent
                 for cid, w in self.weights.items() if w > 0]
        return math.log(math.fsum(terms)) if terms else 0.0

    def net_comp(self, cid):
        return next(c for c in self.net.compressors if c.id == cid)


class _Rows:
    """Accumulates monomial terms for grouped log-sum-exp constraints."""

    def __init__(self, index):
        self.index = index
        self.rows, self.consts, self.groups, self.names = [], [], [], []

    def term(self, logc, expo, fixed):
        row = np.zeros(len(self.index))
        b = logc
        for var, e in expo.items():
            if var in self.index:
                row[self.index[var]] += e
            else:
                b += e * fixed.get(var, 0.0)
        return row, b

    def add(self, name, terms, fixed):
        built = [self.term(logc, expo, fixed) for logc, expo in terms]
        if all(not row.any() for row, _ in built):
            # every variable fixed: drop if satisfied, keep (and fail phase I) if not
            if math.log(math.fsum(math.exp(b) for _, b in built)) <= 1e-12:
                return
        g = len(self.names)
        self.names.append(name)
        for row, b in built:
            self.rows.append(row)
            self.consts.append(b)
            self.groups.append(g)

    def arrays(self):
        n = len(self.index)
        A = np.array(self.rows) if self.rows else np.zeros((0, n))
        return A, np.array(self.consts), np.array(self.groups, dtype=int)


def _u(node):
    return ("u", node)


def _t(cid):
    return ("t", cid)


def build_gp(net, flows=None, extra=None):
    """Assemble the optimal-gas-flow geometric program.

    Per pipe with flow from i to j and station ratio alpha at i:
        exp(u_j - u_i - 2 t) + delta' exp(-u_i - 2 t) <= 1
    which relaxes p_j**2 = alpha**2 p_i**2 - delta to an inequality.
    ``extra`` adds further affine groups as (name, [(logc, {var: e})]).
    """
    flows = compute_tree_flows(net) if flows is None else flows
    active, bypassed = classify_compressors(net, flows)
    p_ref = float(net.slack_pressure)
    if not p_ref > 0:
        raise DomainError("slack pressure must be positive")

    fixed = {_u(net.slack): 0.0}
    fixed_t = {}
    bounds = {}
    comp_vars = []
    for c in net.compressors:
        if c in bypassed:
            fixed_t[c.id] = 0.0
            continue
        lo = math.log(max(1.0, c.alpha_min))
        hi = math.log(c.alpha_max)
        if c.node == net.slack:
            # the slack pressure is fixed, so the outlet cap is a ratio cap
            env_hi = pipe_bounds(net, net.pipe(c.pipe))[1]
            hi = min(hi, math.log(min(env_hi / p_ref, P_CAP)))
        if hi - lo <= 1e-12:
            fixed_t[c.id] = lo
            continue
        bounds[c.id] = (lo, hi)
        comp_vars.append(c.id)
    for cid, v in fixed_t.items():
        fixed[_t(cid)] = v
    node_vars = [n.id for n in net.nodes if n.id != net.slack]
    index = {_u(n): i for i, n in enumerate(node_vars)}
    index.update({_t(c): len(node_vars) + k for k, c in enumerate(comp_vars)})

    rows = _Rows(index)
    delta, upstream = {}, {}
    for pipe in net.pipes:
        phi = flows[pipe.id]
        up, dn = (pipe.from_node, pipe.to_node) if phi >= 0 else (pipe.to_node, pipe.from_node)
        upstream[pipe.id] = (up, dn)
        d = net.beta(pipe) * pipe.length / pipe.diameter * (phi / pipe.area) ** 2
        delta[pipe.id] = d
        c = net.compressor_at(pipe.id, up)
        t = {_t(c.id): -2.0} if c is not None else {}
        terms = [(0.0, {_u(dn): 1.0, _u(up): -1.0, **t})]
        if d > 0:
            terms.append((math.log(d / p_ref**2), {_u(up): -1.0, **t}))
        rows.add(f"pipe {pipe.id}", terms, fixed)
        if c is not None:
            _, hi = pipe_bounds(net, pipe)
            cap = min(hi / p_ref, P_CAP)
            rows.add(f"outlet {c.id}", [(-2.0 * math.log(cap), {_u(up): 1.0, _t(c.id): 2.0})], fixed)

    for n in net.nodes:
        if n.id == net.slack:
            continue
        lo = max(n.p_min / p_ref, P_FLOOR)
        hi = min(n.p_max / p_ref, P_CAP)
        rows.add(f"p_max {n.id}", [(-2.0 * math.log(hi), {_u(n.id): 1.0})], fixed)
        rows.add(f"p_min {n.id}", [(2.0 * math.log(lo), {_u(n.id): -1.0})], fixed)
    for cid in comp_vars:
        lo, hi = bounds[cid]
        rows.add(f"alpha_max {cid}", [(-hi, {_t(cid): 1.0})], fixed)
        rows.add(f"alpha_min {cid}", [(lo, {_t(cid): -1.0})], fixed)
    for name, terms in extra or ():
        rows.add(name, terms, fixed)

    weights = {}
    obj_rows, obj_b = [], []
    for c in active:
        w = c.cost * throughput(net, flows, c) / c.efficiency
        weights[c.id] = w
        if w <= 0:
            continue
        row, b = rows.term(math.log(w), {_t(c.id): c.exponent}, fixed)
        obj_rows.append(row)
        obj_b.append(b)
    A, b, g = rows.arrays()
    A0 = np.array(obj_rows) if obj_rows else np.zeros((0, len(index)))
    prog = LSEProgram(A0, np.array(obj_b), A, b, g, rows.names)
    return GPProblem(net, flows, p_ref, node_vars, comp_vars, fixed_t, delta, upstream,
                     weights, prog, bounds)


def _start_point(problem):
    """Initial guess: physics with stations at their lower bound."""
    net = problem.net
    for pick in ("lo", "hi"):
        ratios = {}
        for c in net.compressors:
            if c.id in problem.bounds:
                lo, hi = problem.bounds[c.id]
                ratios[c.id] = math.exp(lo if pick == "lo" else hi)
            else:
                ratios[c.id] = math.exp(problem.fixed.get(c.id, 0.0))
        try:
            ss = solve_steady(net, ratios, flows=problem.flows, enforce_bounds=False)
        except InfeasibleError:
            continue
        return problem.pack(ss.node_pressure, ratios)
    return np.zeros(problem.program.n_vars)


def _effective_ratios(problem, x, lower=None, all_stations=True):
    """Ratios making the physical pressure reproduce the program's pressure on
    the far side of every station (walking outward from the slack).

    With ``all_stations`` false only stations pushing toward the slack are
    adjusted; the others keep exp(t_hat).
    """
    net = problem.net
    u = problem.node_u(x)
    p_gp = {k: problem.p_ref * math.exp(v / 2.0) for k, v in u.items()}
    ratios = {cid: math.exp(v) for cid, v in problem.comp_t(x).items()}
    order, _ = net.bfs_tree()
    p = {net.slack: problem.p_ref}
    for pid, par, child in order:
        d = problem.delta[pid]
        up, _ = problem.upstream[pid]
        c = net.compressor_at(pid, up)
        if c is not None and c.id in problem.comp_vars and (all_stations or up != par):
            if up == par:
                a = math.sqrt(p_gp[child] ** 2 + d) / p[par]
            else:
                a = math.sqrt(p[par] ** 2 + d) / p_gp[child]
            if lower is not None:
                a = max(a, lower(c))
            ratios[c.id] = min(a, c.alpha_max)
        side = p[par] * net.end_ratio(ratios, pid, par)
        rad = side**2 - d if par == up else side**2 + d
        if not rad > 0:
            raise InfeasibleError(f"relaxed solution not realisable at pipe {pid}", pid)
        p[child] = math.sqrt(rad) / net.end_ratio(ratios, pid, child)
    return ratios


def _realise(problem, x, method, diagnostics, lower=None):
    """Turn a program point into a physical dispatch that passes check_bounds."""
    net, flows = problem.net, problem.flows
    ratios = {cid: math.exp(v) for cid, v in problem.comp_t(x).items()}
    for c in net.compressors:
        ratios[c.id] = min(ratios[c.id], c.alpha_max)
    try:
        res = _finish(net, flows, ratios, method, diagnostics, enforce_bounds=False)
        res.diagnostics["realisation"] = "exp(t_hat)"
        return res
    except (InfeasibleError, BoundError) as exc:
        first = exc
    for mode, everywhere in (("effective upstream-facing", False), ("effective", True)):
        try:
            ratios = _effective_ratios(problem, x, lower, everywhere)
            res = _finish(net, flows, ratios, method, diagnostics, enforce_bounds=False)
        except (InfeasibleError, BoundError) as exc:
            last = exc
            continue
        res.diagnostics["realisation"] = mode
        return res
    raise type(last)(f"{last} (exp(t_hat) realisation also failed: {first})") from last


def solve_gp(problem, solver=None, x0=None):
    """Solve the program and realise the optimum as a physical dispatch."""
    solver = solver or BarrierSolver()
    x0 = _start_point(problem) if x0 is None else x0
    sol = solver.solve(problem.program, x0)
    beta_hat, t_hat = problem.unpack(sol.x)
    diag = {
        "iterations": sol.iterations,
        "objective": sol.objective,
        "max_constraint": float(sol.constraints.max()) if len(sol.constraints) else 0.0,
        "history": sol.history,
        "beta_hat": beta_hat,
        "t_hat": t_hat,
        "x": sol.x,
    }
    return _realise(problem, sol.x, "gp", diag)


def _condensed(problem, u_point):
    """Affine inner approximations of sqrt(p_dn**2 + delta) >= p_up on every
    pipe whose station is free, linearised around ``u_point``."""
    extra = []
    p2 = problem.p_ref**2
    for pipe in problem.net.pipes:
        up, dn = problem.upstream[pipe.id]
        c = problem.net.compressor_at(pipe.id, up)
        if c is None or c.id not in problem.comp_vars:
            continue
        d = problem.delta[pipe.id] / p2
        if d == 0.0:
            extra.append((f"no-decompression {c.id}", [(0.0, {_u(up): 1.0, _u(dn): -1.0})]))
            continue
        e = math.exp(u_point[dn])
        w1 = e / (e + d)
        w2 = 1.0 - w1
        logc = w1 * math.log(w1) - w2 * math.log(d) + (w2 * math.log(w2) if w2 > 0 else 0.0)
        extra.append((f"no-decompression {c.id}", [(logc, {_u(up): 1.0, _u(dn): -w1})]))
    return extra


def solve_sp(net, flows=None, max_iters=50, rtol=1e-7, solver=None):
    """Optimal gas flow without decompression, by successive condensation.

    Starts from the geometric-program optimum; if that already realises with
    every station at ratio >= 1 it is returned after one iteration.
    """
    for c in net.compressors:
        if c.alpha_min < 1.0:
            raise DomainError(f"compressor {c.id}: the no-decompression solve needs alpha_min >= 1")
    flows = compute_tree_flows(net) if flows is None else flows
    solver = solver or BarrierSolver()
    base = build_gp(net, flows)
    try:
        gp = solve_gp(base, solver)
    except InfeasibleError:
        gp = None
    else:
        if all(a >= 1.0 - 1e-9 for a in gp.ratios.values()):
            gp.method = "sp"
            gp.diagnostics.update(iterations=1, trace=[gp.diagnostics["objective"]])
            return gp

    def lower(c):
        return max(1.0, c.alpha_min)

    # linearisation points: the relaxed optimum first, then physical dispatches
    starts = []
    if gp is not None:
        starts.append(base.pack(gp.steady.node_pressure, gp.ratios))
        starts.append(gp.diagnostics["x"])
    for build in (lambda: greedy_dispatch(net, flows).steady,
                  lambda: solve_steady(net, {c.id: lower(c) for c in net.compressors}, flows=flows),
                  lambda: solve_steady(net, {c.id: c.alpha_max for c in net.compressors}, flows=flows)):
        try:
            ss = build()
        except GasJitterError:
            continue
        starts.append(base.pack(ss.node_pressure, ss.ratios))

    x = None
    problem = None
    for x_start in starts:
        problem = build_gp(net, flows, extra=_condensed(base, base.node_u(x_start)))
        try:
            sol = solver.solve(problem.program, x_start)
        except InfeasibleError:
            continue
        x = sol.x
        break
    if x is None:
        raise InfeasibleError("no-decompression dispatch: every condensation start is infeasible")

    trace = [sol.objective]
    for it in range(2, max_iters + 1):
        problem = build_gp(net, flows, extra=_condensed(base, base.node_u(x)))
        sol = solver.solve(problem.program, x)
        x = sol.x
        trace.append(sol.objective)
        if abs(trace[-1] - trace[-2]) <= rtol * max(1.0, abs(trace[-1])):
            break
    else:
        raise NonConvergenceError(
            f"signomial iteration did not settle in {max_iters} iterations",
            {"trace": trace, "x": x.tolist()},
        )
    beta_hat, t_hat = problem.unpack(x)
    diag = {"iterations": len(trace), "trace": trace, "objective": trace[-1],
            "beta_hat": beta_hat, "t_hat": t_hat, "x": x}
    return _realise(problem, x, "sp", diag, lower=lower)


def dispatch(net, method="gp", flows=None):
    """Run one dispatch method by name."""
    flows = compute_tree_flows(net) if flows is None else flows
    if method == "greedy":
        return greedy_dispatch(net, flows)
    if method == "gp":
        return solve_gp(build_gp(net, flows))
    if method == "sp":
        return solve_sp(net, flows)
    raise DomainError(f"unknown dispatch method '{method}' (choose from {', '.join(METHODS)})")
