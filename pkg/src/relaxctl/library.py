"""Named building blocks for built-in problems and their candidate triples."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .calcvar import LagrangianProblem
from .errors import InputError
from .ode import TimeGrid, Trajectory
from .problem import Box, ControlProblem, example1_problem, example2_problem
from .relaxed import RelaxedControl


@dataclass(frozen=True)
class PathSpec:
    f: Callable[[float], float]
    df: Callable[[float], float]


@dataclass(frozen=True)
class LagrangianSpec:
    """Autonomous Lagrangian ``L(x, v)``; ``v`` may carry leading batch axes."""

    L: Callable
    L_x: Callable
    L_xdot: Callable
    L_xdotxdot: Optional[Callable] = None


def _v(v):
    return np.asarray(v, dtype=float)[..., 0]


def _col(a):
    return np.asarray(a, dtype=float)[..., None]


F_SPECS: dict[str, PathSpec] = {
    "linear_half": PathSpec(lambda t: 0.5 * t, lambda t: 0.5),
    "zero": PathSpec(lambda t: 0.0 * t, lambda t: 0.0),
    "quadratic_quarter": PathSpec(lambda t: 0.25 * t * t, lambda t: 0.5 * t),
    "sine_half": PathSpec(lambda t: 0.5 * np.sin(t), lambda t: 0.5 * np.cos(t)),
    # violates |f'| != 1; kept so the precondition can be exercised from configs
    "identity": PathSpec(lambda t: 1.0 * t, lambda t: 1.0),
}

G_SPECS: dict[str, Callable] = {
    "square": lambda u: np.asarray(u, dtype=float) ** 2,
    "quartic": lambda u: np.asarray(u, dtype=float) ** 4,
    "cosh": lambda u: np.cosh(np.asarray(u, dtype=float)),
}

L_SPECS: dict[str, LagrangianSpec] = {
    "x_udot_sq": LagrangianSpec(
        L=lambda x, v: x[0] * _v(v) ** 2,
        L_x=lambda x, v: _col(_v(v) ** 2),
        L_xdot=lambda x, v: _col(2.0 * x[0] * _v(v)),
        L_xdotxdot=lambda x, v: np.array([[2.0 * x[0]]]),
    ),
    "x_udot": LagrangianSpec(
        L=lambda x, v: x[0] * _v(v),
        L_x=lambda x, v: _col(_v(v)),
        L_xdot=lambda x, v: _col(x[0] + 0.0 * _v(v)),
        L_xdotxdot=lambda x, v: np.array([[0.0]]),
    ),
    "x_sin_udot": LagrangianSpec(
        L=lambda x, v: x[0] * np.sin(_v(v)),
        L_x=lambda x, v: _col(np.sin(_v(v))),
        L_xdot=lambda x, v: _col(x[0] * np.cos(_v(v))),
        L_xdotxdot=lambda x, v: np.array([[-x[0] * np.sin(_v(v))]]),
    ),
    "udot_sq": LagrangianSpec(
        L=lambda x, v: _v(v) ** 2,
        L_x=lambda x, v: _col(0.0 * _v(v)),
        L_xdot=lambda x, v: _col(2.0 * _v(v)),
        L_xdotxdot=lambda x, v: np.array([[2.0]]),
    ),
    "neg_udot_sq": LagrangianSpec(
        L=lambda x, v: -_v(v) ** 2,
        L_x=lambda x, v: _col(0.0 * _v(v)),
        L_xdot=lambda x, v: _col(-2.0 * _v(v)),
        L_xdotxdot=lambda x, v: np.array([[-2.0]]),
    ),
    "quartic_mix": LagrangianSpec(
        L=lambda x, v: -_v(v) ** 4 + _v(v) ** 2,
        L_x=lambda x, v: _col(0.0 * _v(v)),
        L_xdot=lambda x, v: _col(-4.0 * _v(v) ** 3 + 2.0 * _v(v)),
        L_xdotxdot=lambda x, v: np.array([[-12.0 * _v(v) ** 2 + 2.0]]),
    ),
}


def lookup(registry: dict, name: str, what: str):
    try:
        return registry[name]
    except KeyError:
        raise InputError(f"unknown {what} {name!r}; choose from {sorted(registry)}") from None


def lagrangian_problem(spec: LagrangianSpec, t0=0.0, t1=1.0, x0=0.0, x1=0.0, name="") -> LagrangianProblem:
    return LagrangianProblem(
        t0=t0,
        t1=t1,
        n=1,
        L=lambda t, x, v: spec.L(x, v),
        L_x=lambda t, x, v: spec.L_x(x, v),
        L_xdot=lambda t, x, v: spec.L_xdot(x, v),
        L_xdotxdot=None if spec.L_xdotxdot is None else (lambda t, x, v: spec.L_xdotxdot(x, v)),
        x0=np.atleast_1d(np.asarray(x0, dtype=float)),
        x1=np.atleast_1d(np.asarray(x1, dtype=float)),
        name=name,
    )


def example1_from_names(f: str = "linear_half", g: str = "square", m: int = 2, bound: float = 10.0) -> ControlProblem:
    path = lookup(F_SPECS, f, "f_spec")
    return example1_problem(path.f, path.df, lookup(G_SPECS, g, "g_spec"), m=m, bound=bound)


def example2_from_name(L: str = "x_udot_sq") -> LagrangianProblem:
    spec = lookup(L_SPECS, L, "L_spec")
    return example2_problem(spec.L, spec.L_x, spec.L_xdot, spec.L_xdotxdot)


def example1_candidate(problem: ControlProblem, M: int = 1000, perturbation: float = 0.0, offset: float = 0.0):
    """The relaxed triple suspected of the infimum: ``x1 = f``, ``x2 = g(1) t + c``.

    Vertices are ``+1`` and ``-1`` with weights ``(1 + f')/2`` and ``(1 - f')/2``.
    ``perturbation`` shifts ``x1`` by a constant; ``x2`` then picks up the
    running term ``perturbation**m``.
    """
    f, df, g, m = (problem.meta[k] for k in ("f", "df", "g", "m"))
    grid = TimeGrid.uniform(problem.t0, problem.t1, M)
    t = grid.nodes
    slope = np.array([df(s) for s in t], dtype=float)
    x1 = np.array([f(s) for s in t], dtype=float) + perturbation
    g1 = float(g(np.asarray(1.0)))
    x2 = offset + (perturbation**m + g1) * t
    traj = Trajectory(grid, np.column_stack([x1, x2]))
    weights = np.vstack([(1.0 + slope) / 2.0, (1.0 - slope) / 2.0])
    rc = RelaxedControl.constant(grid, [[1.0], [-1.0]], weights)
    return traj, rc


def straight_line(lp: LagrangianProblem, M: int = 1000) -> Trajectory:
    grid = TimeGrid.uniform(lp.t0, lp.t1, M)
    s = (grid.nodes - lp.t0) / (lp.t1 - lp.t0)
    return Trajectory(grid, lp.x0[None, :] + s[:, None] * (lp.x1 - lp.x0)[None, :])


def lagrangian_to_control(lp: LagrangianProblem, bound: float = 10.0) -> ControlProblem:
    """Mayer form: states ``(x, y)`` with ``x' = u``, ``y' = L(t, x, u)``, cost ``y(t1) - y(t0)``.

    ``U`` is the box ``[-bound, bound]^n``; endpoint equalities fix ``x``.
    """
    n = lp.n

    def dynamics(t, z, u):
        u = np.asarray(u, dtype=float)
        x = z[:n]
        lval = np.asarray(lp.lagrangian(t, x, u), dtype=float)
        return np.concatenate([u, lval[..., None]], axis=-1)

    def jac_x(t, z, u):
        out = np.zeros((n + 1, n + 1))
        out[n, :n] = lp.grad_x(t, z[:n], np.asarray(u, dtype=float))
        return out

    e = np.zeros(n + 1)
    e[n] = 1.0
    sel = np.hstack([np.eye(n), np.zeros((n, 1))])

    return ControlProblem(
        t0=lp.t0,
        t1=lp.t1,
        n=n + 1,
        r=n,
        dynamics=dynamics,
        dynamics_jac_x=jac_x,
        cost=lambda z1, z2: z2[n] - z1[n],
        cost_grad=lambda z1, z2: (-e, e),
        eq=lambda z1, z2: np.concatenate([z1[:n] - lp.x0, z2[:n] - lp.x1]),
        eq_jac=lambda z1, z2: (np.vstack([sel, np.zeros((n, n + 1))]), np.vstack([np.zeros((n, n + 1)), sel])),
        m2=2 * n,
        control_set=Box(-bound * np.ones(n), bound * np.ones(n)),
        vectorized=lp.vectorized,
        name=f"{lp.name or 'lagrangian'}_mayer",
        meta={"lagrangian": lp},
    )


def lagrangian_candidate(lp: LagrangianProblem, traj: Trajectory, rc: RelaxedControl):
    """Lift ``(x, rc)`` to the Mayer form by integrating the running cost along the relaxed control."""
    nodes = traj.grid.nodes
    run = np.array(
        [float(rc.weights[:, j] @ lp.lagrangian(nodes[j], traj.states[j], rc.vertices[:, j, :])) for j in range(nodes.size)]
    )
    # trapezoid rule; exact for the constant running costs of the built-ins
    y = np.concatenate([[0.0], np.cumsum(0.5 * (run[1:] + run[:-1]) * traj.grid.steps)])
    return Trajectory(traj.grid, np.column_stack([traj.states, y]))
