"""Optimal control problems with endpoint constraints and control sets.

A problem is posed in Mayer form on a fixed interval ``[t0, t1]``::

    f0(x(t0), x(t1)) -> min,   x' = phi(t, x, u),   u(t) in U,
    f(x(t0), x(t1)) <= 0,      g(x(t0), x(t1)) = 0.

Derivatives that are not supplied default to central differences with step
``1e-6 * (1 + |z|)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import _fd
from .errors import InputError, PreconditionError

MEMBERSHIP_TOL = 1e-12


# ----------------------------------------------------------------------
# Control sets


class ControlSet:
    """A subset ``U`` of R^r with a membership test and a maximisation grid."""

    r: int = 1

    def contains(self, u) -> np.ndarray | bool:
        """Membership of one point (shape (r,)) or a batch (shape (K, r))."""
        u = np.asarray(u, dtype=float)
        if u.ndim <= 1:
            return bool(self._contains(u.reshape(1, -1))[0])
        return self._contains(u)

    def _contains(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample_grid(self, points: int = 2001) -> np.ndarray:
        """Finite sample of ``U`` used to evaluate maxima; shape (G, r)."""
        raise NotImplementedError


@dataclass(frozen=True)
class Box(ControlSet):
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or np.any(lo > hi) or not np.all(np.isfinite(lo) & np.isfinite(hi)):
            raise InputError("Box needs finite lo <= hi of equal shape")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "r", lo.size)

    def _contains(self, u):
        return np.all((u >= self.lo - MEMBERSHIP_TOL) & (u <= self.hi + MEMBERSHIP_TOL), axis=1)

    def sample_grid(self, points=2001):
        # tensor grid with roughly `points` samples in total for r > 1
        per = points if self.r == 1 else max(3, int(math.ceil(points ** (1.0 / self.r))))
        axes = [np.linspace(a, b, per) for a, b in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class FiniteSet(ControlSet):
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.size == 0:
            raise InputError("FiniteSet must be nonempty")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "r", pts.shape[1])

    def _contains(self, u):
        dist = np.abs(u[:, None, :] - self.points[None, :, :]).max(axis=2)
        return dist.min(axis=1) <= MEMBERSHIP_TOL

    def sample_grid(self, points=2001):
        return self.points.copy()


@dataclass(frozen=True)
class UnionOfIntervals(ControlSet):
    """Scalar control set given by closed intervals, truncated to ``[-bound, bound]``.

    Infinite endpoints are allowed and are clipped to the bound, so
    ``{|u| >= 1}`` is ``UnionOfIntervals([(-inf, -1), (1, inf)], bound=10)``.
    """

    intervals: Sequence[tuple[float, float]]
    bound: float = 10.0

    def __post_init__(self):
        clipped = []
        for a, b in self.intervals:
            a, b = max(float(a), -self.bound), min(float(b), self.bound)
            if a > b:
                continue
            clipped.append((a, b))
        if not clipped:
            raise InputError("UnionOfIntervals is empty after truncation to the bound")
        object.__setattr__(self, "intervals", tuple(clipped))
        object.__setattr__(self, "r", 1)

    def _contains(self, u):
        w = u[:, 0]
        ok = np.zeros(w.shape, dtype=bool)
        for a, b in self.intervals:
            ok |= (w >= a - MEMBERSHIP_TOL) & (w <= b + MEMBERSHIP_TOL)
        return ok

    def sample_grid(self, points=2001):
        parts = [np.linspace(a, b, points if b > a else 1) for a, b in self.intervals]
        return np.concatenate(parts).reshape(-1, 1)


@dataclass(frozen=True)
class Oracle(ControlSet):
    membership: Callable[[np.ndarray], bool]
    grid: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim == 1:
            grid = grid.reshape(-1, 1)
        if grid.size == 0:
            raise InputError("Oracle control set needs a nonempty sample grid")
        bad = [i for i, u in enumerate(grid) if not self.membership(u)]
        if bad:
            raise InputError(f"sample grid points {bad[:5]} fail the membership test")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "r", grid.shape[1])

    def _contains(self, u):
        return np.array([bool(self.membership(row)) for row in u])

    def sample_grid(self, points=2001):
        return self.grid.copy()


# ----------------------------------------------------------------------
# Problem


@dataclass(frozen=True, eq=False)
class ControlProblem:
    """Mayer-form optimal control problem.

    ``dynamics(t, x, u)`` returns ``phi`` with shape (n,). When
    ``vectorized`` is true it must also accept ``u`` of shape (..., r) and
    return shape (..., n); this is used for grid maximisation.
    """

    t0: float
    t1: float
    n: int
    r: int
    dynamics: Callable
    cost: Callable
    control_set: ControlSet
    dynamics_jac_x: Optional[Callable] = None
    cost_grad: Optional[Callable] = None
    ineq: Optional[Callable] = None
    ineq_jac: Optional[Callable] = None
    eq: Optional[Callable] = None
    eq_jac: Optional[Callable] = None
    m1: int = 0
    m2: int = 0
    vectorized: bool = False
    name: str = ""
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.t0 < self.t1:
            raise InputError(f"need t0 < t1, got {self.t0}, {self.t1}")
        if self.control_set.r != self.r:
            raise InputError("control set dimension does not match r")
        if (self.m1 > 0) != (self.ineq is not None) or (self.m2 > 0) != (self.eq is not None):
            raise InputError("m1/m2 must match the presence of ineq/eq evaluators")

    # dynamics ---------------------------------------------------------
    def phi(self, t, x, u) -> np.ndarray:
        return np.asarray(self.dynamics(t, x, u), dtype=float)

    def phi_batch(self, t, x, us) -> np.ndarray:
        """``phi`` at each row of ``us`` (shape (K, r)); returns (K, n)."""
        us = np.asarray(us, dtype=float)
        if self.vectorized:
            return np.asarray(self.dynamics(t, x, us), dtype=float).reshape(len(us), self.n)
        return np.array([self.dynamics(t, x, u) for u in us], dtype=float).reshape(len(us), self.n)

    def phi_x(self, t, x, u) -> np.ndarray:
        if self.dynamics_jac_x is not None:
            return np.asarray(self.dynamics_jac_x(t, x, u), dtype=float).reshape(self.n, self.n)
        return _fd.jacobian(lambda z: self.dynamics(t, z, u), x)

    # endpoint maps ------------------------------------------------------
    def _split(self, fn):
        def wrapped(z):
            return fn(z[: self.n], z[self.n :])

        return wrapped

    def f0(self, z1, z2) -> float:
        return float(self.cost(z1, z2))

    def f0_grad(self, z1, z2) -> tuple[np.ndarray, np.ndarray]:
        if self.cost_grad is not None:
            g1, g2 = self.cost_grad(z1, z2)
            return np.asarray(g1, dtype=float), np.asarray(g2, dtype=float)
        jac = _fd.jacobian(self._split(self.cost), np.concatenate([z1, z2]))[0]
        return jac[: self.n], jac[self.n :]

    def f(self, z1, z2) -> np.ndarray:
        if self.m1 == 0:
            return np.zeros(0)
        return np.atleast_1d(np.asarray(self.ineq(z1, z2), dtype=float))

    def g(self, z1, z2) -> np.ndarray:
        if self.m2 == 0:
            return np.zeros(0)
        return np.atleast_1d(np.asarray(self.eq(z1, z2), dtype=float))

    def _endpoint_jac(self, fn, jac_fn, m, z1, z2):
        if m == 0:
            return np.zeros((0, self.n)), np.zeros((0, self.n))
        if jac_fn is not None:
            a, b = jac_fn(z1, z2)
            return (
                np.asarray(a, dtype=float).reshape(m, self.n),
                np.asarray(b, dtype=float).reshape(m, self.n),
            )
        jac = _fd.jacobian(self._split(fn), np.concatenate([z1, z2]))
        return jac[:, : self.n], jac[:, self.n :]

    def f_jac(self, z1, z2):
        return self._endpoint_jac(self.ineq, self.ineq_jac, self.m1, z1, z2)

    def g_jac(self, z1, z2):
        return self._endpoint_jac(self.eq, self.eq_jac, self.m2, z1, z2)


# ----------------------------------------------------------------------
# Gradient checks


@dataclass
class GradientReport:
    max_errors: dict[str, float]
    tol: float
    passed: bool


def _rel_err(analytic, numeric) -> float:
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    if analytic.size == 0:
        return 0.0
    scale = max(1.0, float(np.max(np.abs(numeric))))
    return float(np.max(np.abs(analytic - numeric))) / scale


def check_gradients(problem: ControlProblem, samples, h: float = 1e-5, tol: float = 1e-5) -> GradientReport:
    """Compare the supplied derivatives with central differences.

    ``samples`` is a nonempty sequence of ``(t, x, u, z1, z2)`` tuples.
    """
    if h <= 0:
        raise InputError("step h must be positive")
    samples = list(samples)
    if not samples:
        raise InputError("samples must be nonempty")
    errs = {"dynamics_jac_x": 0.0, "cost_grad": 0.0, "ineq_jac": 0.0, "eq_jac": 0.0}
    n = problem.n
    for k, (t, x, u, z1, z2) in enumerate(samples):
        x = np.asarray(x, dtype=float)
        u = np.atleast_1d(np.asarray(u, dtype=float))
        z1 = np.asarray(z1, dtype=float)
        z2 = np.asarray(z2, dtype=float)
        z = np.concatenate([z1, z2])
        try:
            errs["dynamics_jac_x"] = max(
                errs["dynamics_jac_x"],
                _rel_err(problem.phi_x(t, x, u), _fd.jacobian(lambda y: problem.phi(t, y, u), x, h)),
            )
            g1, g2 = problem.f0_grad(z1, z2)
            fd = _fd.jacobian(lambda y: problem.f0(y[:n], y[n:]), z, h)[0]
            errs["cost_grad"] = max(errs["cost_grad"], _rel_err(np.concatenate([g1, g2]), fd))
            if problem.m1:
                a, b = problem.f_jac(z1, z2)
                fd = _fd.jacobian(lambda y: problem.f(y[:n], y[n:]), z, h)
                errs["ineq_jac"] = max(errs["ineq_jac"], _rel_err(np.hstack([a, b]), fd))
            if problem.m2:
                a, b = problem.g_jac(z1, z2)
                fd = _fd.jacobian(lambda y: problem.g(y[:n], y[n:]), z, h)
                errs["eq_jac"] = max(errs["eq_jac"], _rel_err(np.hstack([a, b]), fd))
        except Exception as exc:  # user evaluators may raise anything
            raise InputError(f"evaluator failed at sample {k}: t={t}, x={x}, u={u}: {exc}") from exc
    passed = all(v <= tol and math.isfinite(v) for v in errs.values())
    return GradientReport(max_errors=errs, tol=tol, passed=passed)


def random_samples(problem: ControlProblem, count: int = 100, seed: int = 0, scale: float = 1.0):
    """Random ``(t, x, u, z1, z2)`` samples; controls are drawn from the maximisation grid."""
    rng = np.random.default_rng(seed)
    grid = problem.control_set.sample_grid(201)
    out = []
    for _ in range(count):
        t = rng.uniform(problem.t0, problem.t1)
        x = rng.normal(scale=scale, size=problem.n)
        u = grid[rng.integers(len(grid))]
        out.append((t, x, u, rng.normal(scale=scale, size=problem.n), rng.normal(scale=scale, size=problem.n)))
    return out


# ----------------------------------------------------------------------
# Built-in problems


def example1_problem(f, df, g, m: int = 2, bound: float = 10.0, check_points: int = 1001) -> ControlProblem:
    """Mayer form of the tracking problem with the control constraint ``|u| >= 1``.

    States are ``(x1, x2)`` with ``x1' = u`` and ``x2' = (x1 - f(t))**m + g(u)``;
    the cost is ``x2(1) - x2(0)`` and the endpoint equalities are
    ``x1(0) = 0`` and ``x1(1) = f(1)``. ``g`` must accept numpy arrays.
    """
    if m < 2 or m % 2:
        raise PreconditionError(f"m must be an even integer >= 2, got {m}")
    if abs(f(0.0)) > 1e-12:
        raise PreconditionError(f"f(0) must be 0, got {f(0.0)}")
    ts = np.linspace(0.0, 1.0, check_points)
    slopes = np.abs(np.array([df(t) for t in ts], dtype=float))
    if np.any(slopes > 1.0 + 1e-12):
        bad = ts[np.argmax(slopes)]
        raise PreconditionError(f"|f'(t)| <= 1 fails at t={bad}")
    on_edge = slopes >= 1.0 - 1e-12
    # |f'| = 1 on a set of positive measure shows up as consecutive grid hits
    if np.any(on_edge[1:] & on_edge[:-1]):
        bad = ts[1:][on_edge[1:] & on_edge[:-1]][0]
        raise PreconditionError(f"|f'(t)| = 1 on an interval near t={bad}")
    g1 = float(g(np.asarray(1.0)))
    if abs(float(g(np.asarray(-1.0))) - g1) > 1e-12 * (1.0 + abs(g1)):
        raise PreconditionError("g(-1) must equal g(1)")
    f1 = float(f(1.0))

    def dynamics(t, x, u):
        w = np.asarray(u, dtype=float)[..., 0]
        dev = x[0] - f(t)
        second = dev**m + g(w)
        return np.stack([w, second * np.ones_like(w)], axis=-1)

    def jac_x(t, x, u):
        return np.array([[0.0, 0.0], [m * (x[0] - f(t)) ** (m - 1), 0.0]])

    def cost(z1, z2):
        return z2[1] - z1[1]

    def cost_grad(z1, z2):
        return np.array([0.0, -1.0]), np.array([0.0, 1.0])

    def eq(z1, z2):
        return np.array([z1[0], z2[0] - f1])

    def eq_jac(z1, z2):
        return np.array([[1.0, 0.0], [0.0, 0.0]]), np.array([[0.0, 0.0], [1.0, 0.0]])

    return ControlProblem(
        t0=0.0,
        t1=1.0,
        n=2,
        r=1,
        dynamics=dynamics,
        dynamics_jac_x=jac_x,
        cost=cost,
        cost_grad=cost_grad,
        eq=eq,
        eq_jac=eq_jac,
        m2=2,
        control_set=UnionOfIntervals([(-np.inf, -1.0), (1.0, np.inf)], bound=bound),
        vectorized=True,
        name="example1",
        meta={"f": f, "df": df, "g": g, "m": m, "bound": bound, "infimum": g1},
    )


def example2_problem(L, L_x, L_xdot, L_xdotxdot=None):
    """Fixed-endpoint variational problem on ``[0, 1]`` with ``x(0) = x(1) = 0``.

    The evaluators are autonomous: ``L(x, v)`` with ``x`` of shape (1,) and
    ``v`` of shape (..., 1).
    """
    from .calcvar import LagrangianProblem

    return LagrangianProblem(
        t0=0.0,
        t1=1.0,
        n=1,
        L=lambda t, x, v: L(x, v),
        L_x=lambda t, x, v: L_x(x, v),
        L_xdot=lambda t, x, v: L_xdot(x, v),
        L_xdotxdot=None if L_xdotxdot is None else (lambda t, x, v: L_xdotxdot(x, v)),
        x0=np.zeros(1),
        x1=np.zeros(1),
        name="example2",
    )
