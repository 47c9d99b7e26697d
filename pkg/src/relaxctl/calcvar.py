"""Generalized necessary conditions for the simplest variational problem.

    int_{t0}^{t1} L(t, x, x') dt -> min,   x(t0) = x0,   x(t1) = x1.

Each check is taken along a trajectory together with a relaxed decomposition
``x' = sum_i alpha_i u_i``, ``L(t, x, x') = sum_i alpha_i L(t, x, u_i)``.
With ``k = 1`` and ``u_1 = x'`` they are the classical Euler, Weierstrass
and Legendre conditions.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _fd
from .errors import InputError, PreconditionError
from .ode import Trajectory


@dataclass(frozen=True, eq=False)
class LagrangianProblem:
    """Evaluators take ``(t, x, v)`` with ``x`` of shape (n,).

    When ``vectorized`` is true they also accept ``v`` of shape (K, n) and
    return shape (K,) for ``L`` and (K, n) for the gradients.
    """

    t0: float
    t1: float
    n: int
    L: Callable
    x0: np.ndarray
    x1: np.ndarray
    L_x: Optional[Callable] = None
    L_xdot: Optional[Callable] = None
    L_xdotxdot: Optional[Callable] = None
    vectorized: bool = True
    name: str = ""

    def lagrangian(self, t, x, v):
        v = np.asarray(v, dtype=float)
        if v.ndim == 1:
            return float(self.L(t, x, v))
        if self.vectorized:
            return np.asarray(self.L(t, x, v), dtype=float).reshape(len(v))
        return np.array([float(self.L(t, x, row)) for row in v])

    def _grad(self, fn, wrt, t, x, v):
        v = np.asarray(v, dtype=float)
        x = np.asarray(x, dtype=float)
        if fn is not None:
            if v.ndim == 1 or self.vectorized:
                return np.asarray(fn(t, x, v), dtype=float).reshape(v.shape)
            return np.array([fn(t, x, row) for row in v], dtype=float).reshape(v.shape)
        rows = np.atleast_2d(v)
        if wrt == "x":
            out = np.array([_fd.jacobian(lambda z: self.L(t, z, row), x)[0] for row in rows])
        else:
            out = np.array([_fd.jacobian(lambda z: self.L(t, x, z), row)[0] for row in rows])
        return out.reshape(v.shape)

    def grad_x(self, t, x, v):
        return self._grad(self.L_x, "x", t, x, v)

    def grad_v(self, t, x, v):
        return self._grad(self.L_xdot, "v", t, x, v)

    def hess_v(self, t, x, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.L_xdotxdot is not None:
            return np.asarray(self.L_xdotxdot(t, x, v), dtype=float).reshape(self.n, self.n)
        hess = _fd.jacobian(lambda z: self.grad_v(t, x, z), v, h=1e-4)
        asym = float(np.abs(hess - hess.T).max())
        if asym > 1e-6:
            warnings.warn(f"numerical Hessian asymmetric by {asym:.2e}; symmetrised", RuntimeWarning, stacklevel=2)
        return 0.5 * (hess + hess.T)


def check_lagrangian_gradients(lp: LagrangianProblem, samples, h: float = 1e-5, tol: float = 1e-5):
    """Max relative deviation of ``L_x`` and ``L_xdot`` from central differences."""
    errs = {"L_x": 0.0, "L_xdot": 0.0}
    for t, x, v in samples:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        v = np.atleast_1d(np.asarray(v, dtype=float))
        fx = _fd.jacobian(lambda z: lp.lagrangian(t, z, v), x, h)[0]
        fv = _fd.jacobian(lambda z: lp.lagrangian(t, x, z), v, h)[0]
        for key, ana, num in (("L_x", lp.grad_x(t, x, v), fx), ("L_xdot", lp.grad_v(t, x, v), fv)):
            scale = max(1.0, float(np.abs(num).max()))
            errs[key] = max(errs[key], float(np.abs(ana - num).max()) / scale)
    return errs, all(e <= tol for e in errs.values())


def _check_usl(lp, traj: Trajectory, rc, tol):
    if not traj.grid.same_as(rc.grid):
        raise InputError("trajectory and relaxed control must share the grid")
    vel = traj.velocity()
    bad = []
    for j, t in enumerate(traj.grid.nodes):
        us = rc.vertices[:, j, :]
        a = rc.weights[:, j]
        x = traj.states[j]
        if np.abs(a @ us - vel[j]).max() > tol:
            bad.append(j)
            continue
        lhat = lp.lagrangian(t, x, vel[j])
        if abs(float(a @ lp.lagrangian(t, x, us)) - lhat) > tol * (1.0 + abs(lhat)):
            bad.append(j)
    if bad:
        raise PreconditionError(f"relaxed decomposition does not match the trajectory at nodes {bad[:20]}")
    return vel


def generalized_euler_residual(lp: LagrangianProblem, traj: Trajectory, rc, usl_tol: float = 1e-9) -> np.ndarray:
    """Integrated Euler residual, shape (M+1, n).

    ``r(t_j) = L_v(t_j) - L_v(t_0) - sum_{l<j} h_l sum_i alpha_i L_x(t_l, x_l, u_i(t_l))``
    with ``L_v`` taken at the finite-difference velocity.
    """
    vel = _check_usl(lp, traj, rc, usl_tol)
    nodes = traj.grid.nodes
    xs = traj.states
    M1 = nodes.size
    lv = np.array([lp.grad_v(nodes[j], xs[j], vel[j]) for j in range(M1)]).reshape(M1, lp.n)
    drive = np.zeros((M1, lp.n))
    for j in range(M1):
        gx = lp.grad_x(nodes[j], xs[j], rc.vertices[:, j, :]).reshape(rc.k, lp.n)
        drive[j] = rc.weights[:, j] @ gx
    integral = np.vstack([np.zeros((1, lp.n)), np.cumsum(drive[:-1] * traj.grid.steps[:, None], axis=0)])
    return lv - lv[0] - integral


def weierstrass_excess(lp: LagrangianProblem, t, x_hat, u_hat, u):
    """``L(t,x,u) - L(t,x,u_hat) - <L_v(t,x,u_hat), u - u_hat>``; vectorised over rows of ``u``."""
    x_hat = np.atleast_1d(np.asarray(x_hat, dtype=float))
    u_hat = np.atleast_1d(np.asarray(u_hat, dtype=float))
    u = np.asarray(u, dtype=float)
    base = lp.lagrangian(t, x_hat, u_hat)
    slope = lp.grad_v(t, x_hat, u_hat)
    return lp.lagrangian(t, x_hat, u) - base - (u - u_hat) @ slope


@dataclass
class WeierstrassResult:
    min_excess: float
    witness: tuple[int, int, np.ndarray]  # node, vertex, u
    bound: float
    passed: bool


def default_sweep(n: int, bound: float = 5.0, points: int = 401) -> np.ndarray:
    """Tensor sweep grid over ``[-bound, bound]^n``; capped at about 1e5 points."""
    per = points
    while per**n > 100_000 and per > 3:
        per = max(3, per // 2 + 1)
    axes = [np.linspace(-bound, bound, per)] * n
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def weierstrass_check(lp, traj: Trajectory, rc, u_grid=None, bound: float = 5.0, tol: float = 1e-8):
    """Minimum excess over all nodes, vertices, and the sweep grid plus the vertices."""
    grid = default_sweep(lp.n, bound) if u_grid is None else np.asarray(u_grid, dtype=float).reshape(-1, lp.n)
    best = (np.inf, (0, 0, np.zeros(lp.n)))
    for j, t in enumerate(traj.grid.nodes):
        x = traj.states[j]
        us = np.vstack([grid, rc.vertices[:, j, :]])
        for i in range(rc.k):
            e = weierstrass_excess(lp, t, x, rc.vertices[i, j], us)
            g = int(np.argmin(e))
            if e[g] < best[0]:
                best = (float(e[g]), (j, i, us[g].copy()))
    return WeierstrassResult(best[0], best[1], bound, best[0] >= -tol)


@dataclass
class LegendreResult:
    min_eigenvalues: np.ndarray  # (k, M+1)
    passed: bool

    @property
    def minimum(self) -> float:
        return float(self.min_eigenvalues.min())


def _min_eig(hess: np.ndarray) -> float:
    n = hess.shape[0]
    if n == 1:
        return float(hess[0, 0])
    if n == 2:
        a, b, c = hess[0, 0], hess[0, 1], hess[1, 1]
        return float(0.5 * (a + c) - np.hypot(0.5 * (a - c), b))
    return float(np.linalg.eigvalsh(hess)[0])


def legendre_check(lp, traj: Trajectory, rc, tol: float = 1e-8) -> LegendreResult:
    """Smallest eigenvalue of ``L_vv`` at every node and vertex; pass iff all >= -tol."""
    out = np.empty((rc.k, traj.grid.M + 1))
    for j, t in enumerate(traj.grid.nodes):
        for i in range(rc.k):
            out[i, j] = _min_eig(lp.hess_v(t, traj.states[j], rc.vertices[i, j]))
    return LegendreResult(out, bool(out.min() >= -tol))


@dataclass
class FalsifierResult:
    passed: bool
    u1: float
    u2: float
    residual: float


def falsifier_grid(count: int = 101, lo: float = 1e-3, hi: float = 1.0) -> np.ndarray:
    """Symmetric log-spaced grid: ``count`` negative and ``count`` positive slopes."""
    mags = np.logspace(np.log10(lo), np.log10(hi), count)
    return np.concatenate([-mags[::-1], mags])


def linearity_falsifier(lp: LagrangianProblem, u_grid=None, tol: float = 1e-12, hyp_tol: float = 1e-9):
    """Search pairs ``u1 < 0 < u2`` for ``u2 L_x(0, u1) != u1 L_x(0, u2)``.

    A violation shows that ``x = 0`` is not a strong local minimum even though
    it satisfies the classical maximum principle. Requires ``n = 1``,
    ``L(0, .) = 0`` on the grid, and ``L_x(0, 0) = 0``.
    """
    if lp.n != 1:
        raise InputError("the linearity falsifier needs a scalar problem")
    grid = falsifier_grid() if u_grid is None else np.asarray(u_grid, dtype=float).ravel()
    t = lp.t0
    zero = np.zeros(1)
    us = grid.reshape(-1, 1)
    lvals = lp.lagrangian(t, zero, us)
    if np.abs(lvals).max() > hyp_tol:
        raise PreconditionError("L(0, v) must vanish for every v on the grid")
    if abs(float(lp.grad_x(t, zero, zero)[0])) > hyp_tol:
        raise PreconditionError("L_x(0, 0) must vanish")
    lx = lp.grad_x(t, zero, us).ravel()
    neg = grid < 0
    pos = grid > 0
    u1, l1 = grid[neg], lx[neg]
    u2, l2 = grid[pos], lx[pos]
    if u1.size == 0 or u2.size == 0:
        raise InputError("grid needs both negative and positive values")
    res = np.abs(u2[None, :] * l1[:, None] - u1[:, None] * l2[None, :])
    a, b = np.unravel_index(int(np.argmax(res)), res.shape)
    worst = float(res[a, b])
    return FalsifierResult(worst <= tol, float(u1[a]), float(u2[b]), worst)
