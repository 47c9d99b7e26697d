"""Ordinary controls whose trajectories converge uniformly to a relaxed trajectory.

``synthesize`` slices each of ``N`` slabs into consecutive sub-slabs, one per
vertex, with durations proportional to the slab-averaged weights. The
tracking example also has an exact broken-line construction with slopes
``+-1`` that interpolates ``f`` at ``s/N``.
"""
from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NormalityError
from .ode import ControlSignal, TimeGrid, Trajectory, integrate_state


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("RELAXCTL_THREADS", "1")))
    except ValueError:
        return 1


def slab_weights(rc, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Slab-averaged weights (N, k) and vertex values at slab midpoints (N, k, r)."""
    nodes = rc.grid.nodes
    t0, t1 = rc.grid.t0, rc.grid.t1
    H = (t1 - t0) / N
    weights = np.empty((N, rc.k))
    verts = np.empty((N, rc.k, rc.r))
    for s in range(N):
        a, b = t0 + s * H, t0 + (s + 1) * H
        inside = (nodes >= a - 1e-14) & (nodes <= b + 1e-14)
        mid = 0.5 * (a + b)
        if np.any(inside):
            w = rc.weights[:, inside].mean(axis=1)
        else:
            w = np.array([np.interp(mid, nodes, rc.weights[i]) for i in range(rc.k)])
        w = np.maximum(w, 0.0)
        weights[s] = w / w.sum()
        j = int(np.clip(np.searchsorted(nodes, mid, side="right") - 1, 0, rc.grid.M - 1))
        verts[s] = rc.vertices[:, j, :]
    return weights, verts


def _step_counts(w: np.ndarray, total: int) -> np.ndarray:
    counts = np.rint(w * total).astype(int)
    counts[(w > 0) & (counts == 0)] = 1
    while counts.sum() > total:
        counts[int(np.argmax(counts))] -= 1
    while counts.sum() < total:
        counts[int(np.argmax(w * total - counts))] += 1
    return counts


def synthesize(rc, N: int, q: int = 16) -> ControlSignal:
    """Piecewise-constant ordinary control on a uniform grid of ``N*k*q`` steps.

    In slab ``s`` vertex ``i`` (in order ``1..k``) is held for
    ``round(alpha_bar_i * k*q)`` refined steps, at least one when its weight
    is positive.
    """
    if N < 1:
        raise InputError("N must be >= 1")
    k = rc.k
    per = k * q
    weights, verts = slab_weights(rc, N)
    grid = TimeGrid.uniform(rc.grid.t0, rc.grid.t1, N * per)
    values = np.empty((N * per, rc.r))
    pos = 0
    for s in range(N):
        for i, c in enumerate(_step_counts(weights[s], per)):
            values[pos : pos + c] = verts[s, i]
            pos += c
    return ControlSignal(grid, values)


def example1_broken_line(path, N: int, q: int = 16) -> tuple[Trajectory, ControlSignal]:
    """Slope ``+-1`` broken line interpolating ``f`` at ``s/N`` on ``[0, 1]``.

    On ``[s/N, m_s]`` it is ``t + b_s`` with ``b_s = f(s/N) - s/N``, and on
    ``[m_s, (s+1)/N]`` it is ``-t + c_s`` with ``c_s = f((s+1)/N) + (s+1)/N``,
    where ``m_s = (c_s - b_s)/2``. Each piece is split into ``q`` refined steps.
    """
    f = path.f if hasattr(path, "f") else path[0]
    if N < 1:
        raise InputError("N must be >= 1")
    nodes = [0.0]
    xs = [float(f(0.0))]
    us = []
    for s in range(N):
        a, b = s / N, (s + 1) / N
        bs = f(a) - a
        cs = f(b) + b
        m = 0.5 * (cs - bs)
        if not (a - 1e-12 <= m <= b + 1e-12):
            raise InputError(f"switch point {m} leaves slab s={s} ([{a}, {b}]); |f'| <= 1 is violated")
        m = min(max(m, a), b)
        for lo, hi, sign, const in ((a, m, 1.0, bs), (m, b, -1.0, cs)):
            if hi <= lo:
                continue
            ts = np.linspace(lo, hi, q + 1)[1:]
            nodes.extend(ts.tolist())
            xs.extend((sign * ts + const).tolist())
            us.extend([sign] * q)
        if abs(xs[-1] - f(b)) > 1e-12:
            raise InputError(f"broken line misses f at s/N for s={s + 1}")
    grid = TimeGrid(np.array(nodes))
    return Trajectory(grid, np.array(xs)), ControlSignal(grid, np.array(us))


@dataclass
class ConvergenceRow:
    N: int
    sup_dev: float
    cost: float
    gap: float


@dataclass
class ConvergenceReport:
    rows: list[ConvergenceRow]
    J_star: float
    mode: str = "generic"
    trajectories: dict = field(default_factory=dict, repr=False)

    @property
    def Ns(self) -> list[int]:
        return [r.N for r in self.rows]

    def ratios(self) -> list[float]:
        return [b.sup_dev / a.sup_dev for a, b in zip(self.rows, self.rows[1:]) if a.sup_dev > 0]

    def monotone(self) -> bool:
        devs = [r.sup_dev for r in self.rows]
        return all(b <= a for a, b in zip(devs, devs[1:]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["N", "sup_dev", "cost", "gap"])
            for r in self.rows:
                writer.writerow([r.N, repr(r.sup_dev), repr(r.cost), repr(r.gap)])


def _one(problem, xhat: Trajectory, rc, N, J_star, mode, q):
    if mode == "example1":
        meta = problem.meta
        _, u = example1_broken_line((meta["f"], meta["df"]), N, q)
    else:
        u = synthesize(rc, N, q)
    xN = integrate_state(problem, u, xhat.states[0])
    dev = float(np.abs(xN.states - xhat(xN.grid.nodes)).max())
    cost = problem.f0(xN.states[0], xN.states[-1])
    return ConvergenceRow(N, dev, cost, abs(cost - J_star)), xN


def convergence_report(
    problem,
    xhat: Trajectory,
    rc,
    Ns,
    J_star: float | None = None,
    mode: str = "generic",
    q: int = 16,
    normality: bool | None = None,
    override_normality: bool = False,
    keep_trajectories: bool = False,
) -> ConvergenceReport:
    """Deviation and cost of the chattering sequence for each ``N``.

    Unless ``override_normality`` is set, the candidate must carry a normal
    certificate; when ``normality`` is None it is computed here.
    ``J_star`` defaults to the cost of ``xhat``.
    """
    Ns = [int(n) for n in Ns]
    if not Ns or any(b <= a for a, b in zip(Ns, Ns[1:])) or Ns[0] < 1:
        raise InputError(f"Ns must be positive and strictly increasing, got {Ns}")
    if mode not in ("generic", "example1"):
        raise InputError(f"unknown mode {mode!r}")
    if mode == "example1" and "f" not in problem.meta:
        raise InputError("example1 mode needs the tracking problem")
    if not override_normality:
        if normality is None:
            from .certificate import certify

            cert = certify(problem, xhat, rc)
            normality = cert.normality == "normal"
        if not normality:
            raise NormalityError("no normal certificate; the approximating sequence is not guaranteed")
    if J_star is None:
        J_star = problem.f0(xhat.states[0], xhat.states[-1])
    work = [(problem, xhat, rc, N, J_star, mode, q) for N in Ns]
    threads = _threads()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda a: _one(*a), work))
    else:
        results = [_one(*a) for a in work]
    report = ConvergenceReport([r for r, _ in results], float(J_star), mode)
    if keep_trajectories:
        report.trajectories = {r.N: x for r, x in results}
    return report
