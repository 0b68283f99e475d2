"""Barrier method for small convex programs in log-sum-exp form.

    minimize    lse(A0 x + b0)
    subject to  lse(A_g x + b_g) <= 0     for every constraint group g

where lse(z) = log(sum(exp(z))). A group with a single row is an affine
inequality. Geometric programs in log variables take exactly this form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleError, NonConvergenceError


@dataclass
class LSEProgram:
    A0: np.ndarray  # (T0, n) objective terms; T0 may be 0 (zero objective)
    b0: np.ndarray
    A: np.ndarray  # (T, n) constraint terms
    b: np.ndarray
    group: np.ndarray  # (T,) constraint index of each term, nondecreasing
    names: list = field(default_factory=list)  # one label per constraint group

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.A0 = np.atleast_2d(np.asarray(self.A0, dtype=float)).reshape(-1, self.n_vars)
        self.b0 = np.asarray(self.b0, dtype=float).reshape(-1)
        self.group = np.asarray(self.group, dtype=int)
        if self.group.size and np.any(np.diff(self.group) < 0):
            raise ValueError("constraint terms must be sorted by group")
        self.starts = np.flatnonzero(np.r_[True, np.diff(self.group) != 0]) if self.group.size else np.zeros(0, int)
        if not self.names:
            self.names = [f"c{i}" for i in range(self.n_constraints)]

    @property
    def n_vars(self):
        return np.asarray(self.A).shape[1]

    @property
    def n_constraints(self):
        return len(self.starts)

    # evaluation -------------------------------------------------------------

    def constraints(self, x):
        """Values f_g(x) of every constraint group."""
        z = self.A @ x + self.b
        return _group_lse(z, self.starts)

    def objective(self, x):
        if len(self.b0) == 0:
            return 0.0
        z = self.A0 @ x + self.b0
        m = z.max()
        return float(m + np.log(np.exp(z - m).sum()))


def _group_lse(z, starts):
    zmax = np.maximum.reduceat(z, starts)
    counts = np.diff(np.r_[starts, len(z)])
    e = np.exp(z - np.repeat(zmax, counts))
    return zmax + np.log(np.add.reduceat(e, starts))


def _lse_derivatives(A, z):
    """Gradient and Hessian of a single lse(Ax + b) given z = Ax + b."""
    w = np.exp(z - z.max())
    w /= w.sum()
    g = A.T @ w
    H = (A.T * w) @ A - np.outer(g, g)
    return g, H


@dataclass
class SolveResult:
    x: np.ndarray
    objective: float
    constraints: np.ndarray
    iterations: int  # total Newton steps
    history: list  # (t, newton steps, objective, duality gap bound) per outer step


class BarrierSolver:
    """Log-barrier interior-point method with damped Newton centering."""

    def __init__(self, gap_tol=1e-10, mu=20.0, t0=1.0, max_newton=200, max_outer=60,
                 newton_tol=1e-11):
        self.gap_tol = gap_tol
        self.mu = mu
        self.t0 = t0
        self.max_newton = max_newton
        self.max_outer = max_outer
        self.newton_tol = newton_tol

    # barrier pieces ---------------------------------------------------------

    def _barrier(self, prog, x, t):
        f = prog.constraints(x)
        if np.any(f >= 0) or not np.all(np.isfinite(f)):
            return np.inf
        return t * prog.objective(x) - np.log(-f).sum()

    def _grad_hess(self, prog, x, t):
        n = prog.n_vars
        g = np.zeros(n)
        H = np.zeros((n, n))
        if len(prog.b0):
            g0, H0 = _lse_derivatives(prog.A0, prog.A0 @ x + prog.b0)
            g += t * g0
            H += t * H0
        z = prog.A @ x + prog.b
        starts = prog.starts
        counts = np.diff(np.r_[starts, len(z)])
        f = _group_lse(z, starts)
        w = np.exp(z - np.repeat(f, counts))  # softmax weights within each group
        grad_terms = prog.A * w[:, None]
        G = np.add.reduceat(grad_terms, starts, axis=0)  # (m, n) constraint gradients
        inv = 1.0 / (-f)
        g += G.T @ inv
        H += (prog.A.T * (w * np.repeat(inv, counts))) @ prog.A
        H += (G.T * (inv**2 - inv)) @ G
        return g, H

    def _center(self, prog, x, t, stop=None):
        steps = 0
        while True:
            g, H = self._grad_hess(prog, x, t)
            try:
                dx = -np.linalg.solve(H, g)
            except np.linalg.LinAlgError:
                dx = -np.linalg.lstsq(H + 1e-12 * np.eye(len(g)), g, rcond=None)[0]
            lam2 = float(-g @ dx)
            if lam2 / 2 <= self.newton_tol:
                return x, steps
            if np.all(np.abs(dx) <= 8 * np.finfo(float).eps * np.maximum(1.0, np.abs(x))):
                return x, steps  # step below the resolution of x
            phi = self._barrier(prog, x, t)
            # decrements below this are indistinguishable from rounding in phi
            noise = max(1e-4, 1e3 * np.finfo(float).eps * (abs(phi) + 1.0))
            s = 1.0
            while True:
                xn = x + s * dx
                phin = self._barrier(prog, xn, t)
                if phin <= phi - 0.01 * s * lam2:
                    break
                # near the centre the decrease drowns in rounding of t * objective:
                # keep the better of the two points and stop
                if lam2 < noise and s == 1.0 and np.isfinite(phin):
                    return (xn, steps + 1) if phin <= phi else (x, steps)
                s *= 0.5
                if s < 1e-14:
                    return x, steps  # no further progress at machine precision
            x = xn
            steps += 1
            if stop is not None and stop(x):
                return x, steps
            if steps >= self.max_newton:
                raise NonConvergenceError(
                    f"Newton centering did not converge in {steps} steps (t={t:.3g})",
                    {"t": t, "x": x.tolist(), "decrement": lam2},
                )

    def minimize(self, prog, x):
        """Phase II from a strictly feasible ``x``."""
        x = np.asarray(x, dtype=float).copy()
        m = max(prog.n_constraints, 1)
        t = self.t0
        history = []
        total = 0
        for _ in range(self.max_outer):
            x, k = self._center(prog, x, t)
            total += k
            history.append((t, k, prog.objective(x), m / t))
            if m / t < self.gap_tol or len(prog.b0) == 0:
                return SolveResult(x, prog.objective(x), prog.constraints(x), total, history)
            t *= self.mu
        raise NonConvergenceError(
            f"barrier method stopped after {self.max_outer} outer iterations (gap {m / t:.3g})",
            {"history": history, "x": x.tolist()},
        )

    def find_feasible(self, prog, x0=None, margin=1e-3):
        """Phase I: minimise s subject to f_g(x) <= s, s >= -1.

        Returns a strictly feasible point or raises InfeasibleError naming the
        most violated constraint at the best point found.
        """
        n = prog.n_vars
        x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
        if prog.n_constraints == 0:
            return x0
        f0 = prog.constraints(x0)
        if np.all(f0 < -margin):
            return x0
        # augmented variable y = (x, s): lse(A x + b - s) <= 0 and -s - 1 <= 0
        A = np.hstack([prog.A, -np.ones((prog.A.shape[0], 1))])
        A = np.vstack([A, np.r_[np.zeros(n), -1.0][None, :]])
        b = np.r_[prog.b, -1.0]
        group = np.r_[prog.group, prog.n_constraints]
        aux = LSEProgram(np.r_[np.zeros(n), 1.0][None, :], [0.0], A, b, group)
        y = np.r_[x0, max(f0.max(), -1.0 + 1e-3) + 1.0]
        stop = lambda yy: yy[-1] < -margin
        m = aux.n_constraints
        t = self.t0
        for _ in range(self.max_outer):
            y, _ = self._center(aux, y, t, stop=stop)
            if y[-1] < 0 and (y[-1] < -margin or m / t < self.gap_tol):
                return y[:-1]
            if m / t < self.gap_tol:
                break
            t *= self.mu
        f = prog.constraints(y[:-1])
        worst = int(np.argmax(f))
        raise InfeasibleError(
            f"no strictly feasible point: constraint '{prog.names[worst]}' "
            f"violated by {max(y[-1], f[worst]):.3g} (log scale) at best point",
            location=prog.names[worst],
        )

    def solve(self, prog, x0=None):
        x = self.find_feasible(prog, x0)
        return self.minimize(prog, x)
