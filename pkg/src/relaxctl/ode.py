"""Fixed-grid RK4 for the state, relaxed-state and adjoint systems.

Controls are sample-and-hold: the value stored at node ``j`` is used across
step ``[t_j, t_{j+1}]``, including all internal RK4 stages.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DivergenceError, InputError

DEFAULT_STEPS = 1000


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing time nodes.

    Grids built with :meth:`uniform` have nodes ``t0 + j*(t1 - t0)/M``.
    Refined chattering grids may be non-uniform so that every switching
    time is a node.
    """

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2 or not np.all(np.diff(nodes) > 0):
            raise InputError("grid nodes must be a strictly increasing 1-d array with >= 2 entries")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, t0: float, t1: float, M: int = DEFAULT_STEPS) -> "TimeGrid":
        if M < 1 or not t0 < t1:
            raise InputError(f"uniform grid needs M >= 1 and t0 < t1, got M={M}")
        j = np.arange(M + 1)
        nodes = t0 + j * (t1 - t0) / M
        nodes[-1] = t1
        return cls(nodes)

    @property
    def t0(self) -> float:
        return float(self.nodes[0])

    @property
    def t1(self) -> float:
        return float(self.nodes[-1])

    @property
    def M(self) -> int:
        return self.nodes.size - 1

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def h(self) -> float:
        """Largest step length (the step itself on uniform grids)."""
        return float(self.steps.max())

    def same_as(self, other: "TimeGrid") -> bool:
        return self is other or (
            self.nodes.shape == other.nodes.shape and np.array_equal(self.nodes, other.nodes)
        )


def _as_2d(values, rows, name):
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[0] != rows:
        raise InputError(f"{name} must have {rows} rows, got shape {np.shape(values)}")
    return arr


@dataclass(frozen=True, eq=False)
class ControlSignal:
    """Piecewise-constant control; ``values`` has one row per node (M+1) or per step (M)."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals.reshape(-1, 1)
        if vals.shape[0] not in (self.grid.M, self.grid.M + 1):
            raise InputError("control needs M or M+1 samples")
        object.__setattr__(self, "values", vals)

    def step_values(self) -> np.ndarray:
        return self.values[: self.grid.M]


class _GridFunction:
    prefix = "x"

    def __init__(self, grid: TimeGrid, values):
        self.grid = grid
        self._values = _as_2d(values, grid.M + 1, "samples")
        self._values.setflags(write=False)

    @property
    def n(self) -> int:
        return self._values.shape[1]

    def __call__(self, t) -> np.ndarray:
        """Piecewise-linear interpolation; shape (n,) for scalar t, (len(t), n) otherwise."""
        t = np.asarray(t, dtype=float)
        cols = [np.interp(t, self.grid.nodes, self._values[:, i]) for i in range(self.n)]
        return np.stack(cols, axis=-1)

    def to_csv(self, path) -> None:
        header = ["t"] + [f"{self.prefix}_{i + 1}" for i in range(self.n)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for t, row in zip(self.grid.nodes, self._values):
                writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if len(rows) < 3 or rows[0][0] != "t":
            raise InputError(f"{path}: expected a header starting with 't' and >= 2 rows")
        data = np.array([[float(v) for v in row] for row in rows[1:]])
        return cls(TimeGrid(data[:, 0]), data[:, 1:])


class Trajectory(_GridFunction):
    """State path sampled at the grid nodes, shape (M+1, n)."""

    prefix = "x"

    @property
    def states(self) -> np.ndarray:
        return self._values

    def velocity(self) -> np.ndarray:
        """Forward differences ``(x_{j+1} - x_j)/h_j``; the last node repeats the previous one."""
        v = np.diff(self._values, axis=0) / self.grid.steps[:, None]
        return np.vstack([v, v[-1:]])


class AdjointTrajectory(_GridFunction):
    """Row covectors ``p(t_j)``, shape (M+1, n)."""

    prefix = "p"

    @property
    def covectors(self) -> np.ndarray:
        return self._values

    def scaled(self, c: float) -> "AdjointTrajectory":
        return AdjointTrajectory(self.grid, c * self._values)


# ----------------------------------------------------------------------
# integration


def _rk4(rhs, nodes, x0):
    x = np.array(x0, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InputError("initial state must be finite")
    out = np.empty((nodes.size, x.size))
    out[0] = x
    for j in range(nodes.size - 1):
        t = nodes[j]
        h = nodes[j + 1] - t
        k1 = rhs(j, t, x)
        k2 = rhs(j, t + 0.5 * h, x + 0.5 * h * k1)
        k3 = rhs(j, t + 0.5 * h, x + 0.5 * h * k2)
        k4 = rhs(j, t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"non-finite state at step {j} (t={t})", step=j)
        out[j + 1] = x
    return out


def _check_membership(control_set, samples, what):
    ok = control_set.contains(samples)
    if not np.all(ok):
        bad = np.flatnonzero(~np.asarray(ok))
        raise InputError(f"{what} outside the control set at sample(s) {bad[:10].tolist()}")


def integrate_state(problem, control: ControlSignal, x0) -> Trajectory:
    """Classical RK4 for ``x' = phi(t, x, u)`` on the control's grid."""
    u = control.step_values()
    if u.shape[1] != problem.r:
        raise InputError("control dimension does not match the problem")
    _check_membership(problem.control_set, u, "control")

    def rhs(j, t, x):
        return problem.phi(t, x, u[j])

    return Trajectory(control.grid, _rk4(rhs, control.grid.nodes, x0))


def integrate_relaxed_state(problem, rc, x0) -> Trajectory:
    """RK4 for ``x' = sum_i alpha_i phi(t, x, u_i)`` with weights and vertices held per step."""
    verts = rc.vertices
    alpha = rc.weights
    k = rc.k

    def rhs(j, t, x):
        acc = alpha[0, j] * problem.phi(t, x, verts[0, j])
        for i in range(1, k):
            acc = acc + alpha[i, j] * problem.phi(t, x, verts[i, j])
        return acc

    return Trajectory(rc.grid, _rk4(rhs, rc.grid.nodes, x0))


def adjoint_coefficients(problem, traj: Trajectory, rc):
    """Relaxed Jacobians ``sum_i alpha_i phi_x`` at the left, mid and right stage of each step.

    Returns three arrays of shape (M, n, n). The state at the midpoint comes
    from linear interpolation of ``traj``.
    """
    if not traj.grid.same_as(rc.grid):
        raise InputError("trajectory and relaxed control must share the grid")
    nodes = traj.grid.nodes
    xs = traj.states
    M, n = traj.grid.M, traj.n
    left = np.zeros((M, n, n))
    mid = np.zeros((M, n, n))
    right = np.zeros((M, n, n))
    for j in range(M):
        t, h = nodes[j], nodes[j + 1] - nodes[j]
        xm = 0.5 * (xs[j] + xs[j + 1])
        for i in range(rc.k):
            a = rc.weights[i, j]
            if a == 0.0:
                continue
            u = rc.vertices[i, j]
            left[j] += a * problem.phi_x(t, xs[j], u)
            mid[j] += a * problem.phi_x(t + 0.5 * h, xm, u)
            right[j] += a * problem.phi_x(nodes[j + 1], xs[j + 1], u)
    return left, mid, right


def adjoint_batch(problem, traj: Trajectory, rc, p_terminal, coefficients=None) -> np.ndarray:
    """Backward RK4 of ``p' = -p sum_i alpha_i phi_x`` for a batch of terminal covectors.

    Returns shape (M+1, d, n) for ``p_terminal`` of shape (d, n).
    """
    left, mid, right = coefficients if coefficients is not None else adjoint_coefficients(problem, traj, rc)
    out = kernels.adjoint_sweep(left, mid, right, traj.grid.steps, np.atleast_2d(p_terminal))
    if not np.all(np.isfinite(out)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(out.reshape(out.shape[0], -1)), axis=1)).max())
        raise DivergenceError(f"non-finite adjoint at node {bad}", step=bad)
    return out


def integrate_adjoint_backward(problem, traj: Trajectory, rc, p_terminal) -> AdjointTrajectory:
    p_terminal = np.asarray(p_terminal, dtype=float).reshape(1, -1)
    if p_terminal.shape[1] != traj.n:
        raise InputError("terminal covector dimension does not match the state")
    out = adjoint_batch(problem, traj, rc, p_terminal)
    return AdjointTrajectory(traj.grid, out[:, 0, :])
