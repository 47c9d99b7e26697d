"""Sliding-regime (relaxed) controls and convex decomposition of velocities."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .ode import TimeGrid, Trajectory

SIMPLEX_TOL = 1e-12


class RelaxedControl:
    """``k`` vertex controls with simplex weights on a grid.

    Parameters
    ----------
    grid : TimeGrid
    vertices : array_like, shape (k, M+1, r)
        Vertex control samples ``u_i(t_j)``.
    weights : array_like, shape (k, M+1)
        Weights ``alpha_i(t_j)``.
    """

    def __init__(self, grid: TimeGrid, vertices, weights):
        verts = np.asarray(vertices, dtype=float)
        alpha = np.asarray(weights, dtype=float)
        if verts.ndim == 2:
            verts = verts[..., None]
        if alpha.ndim != 2 or verts.ndim != 3:
            raise InputError("weights must be (k, M+1) and vertices (k, M+1, r)")
        if alpha.shape != verts.shape[:2] or alpha.shape[1] != grid.M + 1:
            raise InputError(
                f"grid mismatch: weights {alpha.shape}, vertices {verts.shape}, grid has {grid.M + 1} nodes"
            )
        verts.setflags(write=False)
        alpha.setflags(write=False)
        self.grid = grid
        self.vertices = verts
        self.weights = alpha

    @classmethod
    def constant(cls, grid: TimeGrid, vertex_values, weights) -> "RelaxedControl":
        """Vertices constant in time; ``weights`` may be (k,) or (k, M+1)."""
        vv = np.atleast_2d(np.asarray(vertex_values, dtype=float))
        if vv.shape[0] == 1 and vv.shape[1] > 1 and np.ndim(vertex_values) == 1:
            vv = vv.T
        w = np.asarray(weights, dtype=float)
        if w.ndim == 1:
            w = np.repeat(w[:, None], grid.M + 1, axis=1)
        verts = np.repeat(vv[:, None, :], grid.M + 1, axis=1)
        return cls(grid, verts, w)

    @classmethod
    def ordinary(cls, grid: TimeGrid, u) -> "RelaxedControl":
        """The ``k = 1``, ``alpha = 1`` control reproducing an ordinary control."""
        u = np.asarray(u, dtype=float)
        if u.ndim == 1:
            u = u.reshape(-1, 1)
        if u.shape[0] == grid.M:
            u = np.vstack([u, u[-1:]])
        return cls(grid, u[None], np.ones((1, grid.M + 1)))

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def r(self) -> int:
        return self.vertices.shape[2]

    def to_csv(self, path) -> None:
        k, r = self.k, self.r
        if r == 1:
            ucols = [f"u_{i + 1}" for i in range(k)]
        else:
            ucols = [f"u_{i + 1}_{c + 1}" for i in range(k) for c in range(r)]
        header = ["t"] + ucols + [f"alpha_{i + 1}" for i in range(k)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for j, t in enumerate(self.grid.nodes):
                row = [repr(float(t))]
                row += [repr(float(v)) for v in self.vertices[:, j, :].ravel()]
                row += [repr(float(a)) for a in self.weights[:, j]]
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path) -> "RelaxedControl":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header = rows[0]
        if not header or header[0] != "t":
            raise InputError(f"{path}: header must start with 't'")
        k = sum(1 for h in header if h.startswith("alpha_"))
        nu = sum(1 for h in header if h.startswith("u_"))
        if k == 0 or nu % k:
            raise InputError(f"{path}: inconsistent u/alpha columns")
        r = nu // k
        data = np.array([[float(v) for v in row] for row in rows[1:]])
        grid = TimeGrid(data[:, 0])
        verts = data[:, 1 : 1 + nu].reshape(-1, k, r).transpose(1, 0, 2)
        alpha = data[:, 1 + nu :].T
        return cls(grid, verts, alpha)


@dataclass
class ValidationReport:
    violations: list[tuple[str, int, int, float]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def of_kind(self, kind: str):
        return [v for v in self.violations if v[0] == kind]


def validate(rc: RelaxedControl, control_set, tol: float = SIMPLEX_TOL) -> ValidationReport:
    """List violations as ``(kind, node, vertex, amount)``.

    Kinds are ``"negative"``, ``"simplex"`` (vertex is -1), ``"identically_zero"``
    (node is -1) and ``"membership"``.
    """
    report = ValidationReport()
    alpha = rc.weights
    for i, j in zip(*np.nonzero(alpha < 0.0)):
        report.violations.append(("negative", int(j), int(i), float(alpha[i, j])))
    dev = alpha.sum(axis=0) - 1.0
    for j in np.flatnonzero(np.abs(dev) > tol):
        report.violations.append(("simplex", int(j), -1, float(dev[j])))
    for i in np.flatnonzero(np.all(alpha == 0.0, axis=1)):
        report.violations.append(("identically_zero", -1, int(i), 0.0))
    for i in range(rc.k):
        ok = np.asarray(control_set.contains(rc.vertices[i]))
        for j in np.flatnonzero(~ok):
            report.violations.append(("membership", int(j), i, 0.0))
    return report


# ----------------------------------------------------------------------
# simplex-constrained least squares


def _affine_lstsq(a_p: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimise ``|A z - b|`` subject to ``sum(z) = 1`` (no sign constraint)."""
    p = a_p.shape[1]
    if p == 1:
        return np.ones(1)
    # z = e_0 + N y with the columns of N spanning {sum z = 0}
    basis = np.zeros((p, p - 1))
    basis[0, :] = -1.0
    basis[1:, :] = np.eye(p - 1)
    y, *_ = np.linalg.lstsq(a_p @ basis, b - a_p[:, 0], rcond=None)
    z = basis @ y
    z[0] += 1.0
    return z


def simplex_lstsq(A, b, max_iter: int | None = None) -> tuple[np.ndarray, float]:
    """Active-set solution of ``min |A alpha - b|`` over the probability simplex.

    Returns the weights (nonnegative, summing to one) and the residual norm.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != b.shape[0]:
        raise InputError("A must be (m, k) and b of length m")
    m, k = A.shape
    if k == 0:
        raise InputError("need at least one vertex")
    scale = max(1.0, float(np.abs(A).max(initial=0.0)), float(np.abs(b).max(initial=0.0)))
    gtol = 1e-13 * scale**2 * max(m, 1)
    start = int(np.argmin(np.linalg.norm(A - b[:, None], axis=0)))
    alpha = np.zeros(k)
    alpha[start] = 1.0
    passive = [start]
    max_iter = max_iter or 10 * k + 20
    for _ in range(max_iter):
        grad = A.T @ (A @ alpha - b)
        level = grad[passive].mean()
        free = [i for i in range(k) if i not in passive]
        if not free:
            break
        j = min(free, key=lambda i: grad[i])
        if grad[j] >= level - gtol:
            break
        passive.append(j)
        for _inner in range(k + 1):
            z = _affine_lstsq(A[:, passive], b)
            if np.all(z > 0.0):
                alpha[:] = 0.0
                alpha[passive] = z
                break
            cur = alpha[passive]
            neg = z <= 0.0
            theta = np.min(cur[neg] / (cur[neg] - z[neg]))
            step = cur + theta * (z - cur)
            keep = [idx for idx, val in zip(passive, step) if val > 1e-15]
            alpha[:] = 0.0
            alpha[passive] = np.maximum(step, 0.0)
            alpha[[idx for idx in passive if idx not in keep]] = 0.0
            passive = keep or [int(np.argmax(alpha))]
        else:
            break
    # project and renormalise so the simplex invariants hold exactly
    alpha = np.maximum(alpha, 0.0)
    alpha /= alpha.sum()
    return alpha, float(np.linalg.norm(A @ alpha - b))


def decompose_velocity(v, vertices, aux=None, tol: float = 1e-9):
    """Weights ``alpha`` on the simplex with ``sum_i alpha_i u_i = v``.

    Parameters
    ----------
    v : array_like, shape (n,)
    vertices : array_like, shape (k, n)
    aux : tuple (target, values), optional
        Extra scalar constraint ``sum_i alpha_i values_i = target``.
    tol : float
        Feasibility tolerance applied to each constraint group.

    Returns
    -------
    ndarray of shape (k,), or None when no weights reach the tolerance.
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    verts = np.asarray(vertices, dtype=float).reshape(-1, v.size)
    A = verts.T
    b = v
    if aux is not None:
        target, values = aux
        A = np.vstack([A, np.asarray(values, dtype=float).reshape(1, -1)])
        b = np.concatenate([b, [float(target)]])
    alpha, _ = simplex_lstsq(A, b)
    if np.linalg.norm(verts.T @ alpha - v) > tol:
        return None
    if aux is not None and abs(float(np.dot(A[-1], alpha)) - float(aux[0])) > tol:
        return None
    return alpha


def decompose_along_trajectory(traj: Trajectory, vertex_signals, model, tol: float = 1e-9):
    """Nodewise decomposition of the trajectory's finite-difference velocity.

    ``model`` is a :class:`~relaxctl.problem.ControlProblem` (vertices are
    mapped through the dynamics) or a
    :class:`~relaxctl.calcvar.LagrangianProblem` (vertices are velocities and
    the Lagrangian value is matched as well).

    Returns ``(rc, infeasible)``; ``rc`` is None when any node is infeasible.
    """
    M = traj.grid.M
    verts = np.asarray(vertex_signals, dtype=float)
    if verts.ndim == 1:
        verts = verts.reshape(-1, 1)
    if verts.ndim == 2:
        verts = np.repeat(verts[:, None, :], M + 1, axis=1)
    if verts.shape[1] != M + 1:
        raise InputError("vertex signals must have one sample per grid node")
    k = verts.shape[0]
    vel = traj.velocity()
    xs = traj.states
    nodes = traj.grid.nodes
    is_control = hasattr(model, "dynamics")
    weights = np.zeros((k, M + 1))
    infeasible = []
    for j in range(M + 1):
        us = verts[:, j, :]
        if is_control:
            cols = model.phi_batch(nodes[j], xs[j], us)
            alpha = decompose_velocity(vel[j], cols, tol=tol)
        else:
            lvals = model.lagrangian(nodes[j], xs[j], us)
            lhat = float(model.lagrangian(nodes[j], xs[j], vel[j]))
            alpha = decompose_velocity(vel[j], us, aux=(lhat, lvals), tol=tol)
        if alpha is None:
            infeasible.append(j)
        else:
            weights[:, j] = alpha
    if infeasible:
        return None, infeasible
    return RelaxedControl(traj.grid, verts, weights), []
