"""Multiplier certificates for the relaxed maximum principle.

A certificate for a candidate triple ``(x, u_1..u_k, alpha_1..alpha_k)`` is a
nonzero tuple ``(lambda0, lambda_f, lambda_g)`` with ``lambda0 >= 0`` and
``lambda_f >= 0`` plus a covector path ``p`` such that

1. ``p' = -p sum_i alpha_i phi_x(t, x, u_i)``;
2. ``p(t0) = lambda0 f0_z1 + f_z1^T lambda_f + g_z1^T lambda_g`` and
   ``p(t1) = -(lambda0 f0_z2 + f_z2^T lambda_f + g_z2^T lambda_g)``;
3. ``<lambda_f, f(x(t0), x(t1))> = 0``;
4. every ``u_i`` with positive weight, and the relaxed velocity itself,
   maximise ``<p, phi(t, x, u)>`` over ``U``.

Conditions 1-3 are linear in the multipliers. The adjoint is integrated
backward from the ``t1`` equation, and the ``t0`` equation leaves a
homogeneous system whose nullspace holds every tuple satisfying 1-3.
Condition 4 is a convex cone inside that nullspace. It is searched with a
cutting-plane linear program on each face ``y_b = +-1`` of the unit cube of
nullspace coordinates.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import kernels
from .errors import InputError
from .ode import AdjointTrajectory, Trajectory, adjoint_batch, adjoint_coefficients

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CertifyOptions:
    eps_act: float = 1e-8
    sigma_tol: float = 1e-10
    eps_sign: float = 1e-10
    eps_normal: float = 1e-8
    tol_cert: float = 1e-6
    tol_max: float = 1e-6
    adjoint_factor: float = 10.0
    control_points: int = 2001
    max_cuts: int = 40


@dataclass(frozen=True, eq=False)
class MultiplierTuple:
    lambda0: float
    lambda_f: np.ndarray
    lambda_g: np.ndarray
    adjoint: AdjointTrajectory

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([[self.lambda0], np.ravel(self.lambda_f), np.ravel(self.lambda_g)])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    def scaled(self, c: float) -> "MultiplierTuple":
        return MultiplierTuple(
            c * self.lambda0, c * np.asarray(self.lambda_f), c * np.asarray(self.lambda_g), self.adjoint.scaled(c)
        )

    def check_invariants(self, tol: float = 0.0) -> bool:
        return (
            self.lambda0 >= -tol
            and bool(np.all(np.asarray(self.lambda_f) >= -tol))
            and abs(self.norm - 1.0) <= max(tol, 1e-12)
        )


@dataclass
class CertificateReport:
    r0: np.ndarray
    r1: np.ndarray
    slackness: float
    rho: np.ndarray  # (k, M+1)
    rho_star: np.ndarray  # (M+1,)
    adjoint_residual: np.ndarray  # (M,)
    scale: float  # 1 / |(lambda0, lambda_f, lambda_g)|
    tolerances: dict
    passes: dict = field(default_factory=dict)

    @property
    def sup_rho(self) -> np.ndarray:
        return self.rho.max(axis=1)

    @property
    def sup_rho_star(self) -> float:
        return float(self.rho_star.max())

    @property
    def passed(self) -> bool:
        return all(self.passes.values())

    def as_dict(self) -> dict:
        return {
            "adjoint": "pass" if self.passes["adjoint"] else "fail",
            "adjoint_residual_sup": float(self.adjoint_residual.max(initial=0.0) * self.scale),
            "transversality": [float(np.linalg.norm(self.r0)), float(np.linalg.norm(self.r1))],
            "transversality_pass": self.passes["transversality"],
            "slackness": float(self.slackness),
            "slackness_pass": self.passes["slackness"],
            "max_condition": {
                "sup_rho_i": [float(v) for v in self.sup_rho],
                "sup_rho_star": self.sup_rho_star,
                "pass": self.passes["max_condition"],
            },
        }


# ----------------------------------------------------------------------
# shared per-candidate data


class _Context:
    """Quantities that depend on the triple but not on the multipliers."""

    def __init__(self, problem, traj: Trajectory, rc, opts: CertifyOptions):
        if not traj.grid.same_as(rc.grid):
            raise InputError("trajectory and relaxed control must share the grid")
        if traj.n != problem.n or rc.r != problem.r:
            raise InputError("trajectory/control dimensions do not match the problem")
        self.problem = problem
        self.traj = traj
        self.rc = rc
        self.opts = opts
        self.z1 = traj.states[0]
        self.z2 = traj.states[-1]
        self.f0_grad = problem.f0_grad(self.z1, self.z2)
        self.f_val = problem.f(self.z1, self.z2)
        self.f_jac = problem.f_jac(self.z1, self.z2)
        self.g_jac = problem.g_jac(self.z1, self.z2)
        self.coefficients = adjoint_coefficients(problem, traj, rc)
        self._table = None

    @property
    def table(self):
        if self._table is None:
            self._table = _HamiltonianTable(self.problem, self.traj, self.rc, self.opts.control_points)
        return self._table

    def transversality(self, lam0, lam_f, lam_g, p0, p1):
        (a1, a2), (F1, F2), (G1, G2) = self.f0_grad, self.f_jac, self.g_jac
        r0 = p0 - (lam0 * a1 + F1.T @ lam_f + G1.T @ lam_g)
        r1 = p1 + lam0 * a2 + F2.T @ lam_f + G2.T @ lam_g
        return r0, r1


class _HamiltonianTable:
    """``phi`` on the control grid and at the vertices, node by node."""

    def __init__(self, problem, traj, rc, points):
        grid_u = problem.control_set.sample_grid(points)
        if grid_u.size == 0:
            raise InputError("empty maximisation grid")
        nodes = traj.grid.nodes
        xs = traj.states
        M1 = nodes.size
        self.grid_u = grid_u
        self.phi_grid = np.empty((M1, len(grid_u), problem.n))
        self.phi_vert = np.empty((M1, rc.k, problem.n))
        for j in range(M1):
            self.phi_grid[j] = problem.phi_batch(nodes[j], xs[j], grid_u)
            self.phi_vert[j] = problem.phi_batch(nodes[j], xs[j], rc.vertices[:, j, :])
        self.alpha = rc.weights
        self.velocity = np.einsum("kj,jkn->jn", rc.weights, self.phi_vert)

    def residuals(self, P: np.ndarray):
        """Maximum-condition profiles for covectors ``P`` of shape (M+1, n)."""
        hg, idx = kernels.hamiltonian_argmax(P, self.phi_grid)
        hv = np.einsum("jkn,jn->jk", self.phi_vert, P)
        hstar = np.maximum(hg, hv.max(axis=1))
        rho = self.alpha * (hstar[None, :] - hv.T)
        rho_star = hstar - np.einsum("jn,jn->j", self.velocity, P)
        return rho, rho_star, idx


def _adjoint_residual(ctx: _Context, P: np.ndarray) -> np.ndarray:
    left = ctx.coefficients[0]
    steps = ctx.traj.grid.steps
    dp = np.diff(P, axis=0) / steps[:, None]
    return np.linalg.norm(dp + np.einsum("jn,jnm->jm", P[:-1], left), axis=1)


# ----------------------------------------------------------------------
# condition-wise checks


def transversality_residual(problem, traj, mt: MultiplierTuple, ctx: _Context | None = None):
    """``(r0, r1)`` for the boundary conditions on ``p``."""
    if not mt.adjoint.grid.same_as(traj.grid):
        raise InputError("adjoint must be defined on the trajectory grid")
    if ctx is None:
        z1, z2 = traj.states[0], traj.states[-1]
        a1, a2 = problem.f0_grad(z1, z2)
        F1, F2 = problem.f_jac(z1, z2)
        G1, G2 = problem.g_jac(z1, z2)
        lf, lg = np.asarray(mt.lambda_f, float), np.asarray(mt.lambda_g, float)
        p = mt.adjoint.covectors
        r0 = p[0] - (mt.lambda0 * a1 + F1.T @ lf + G1.T @ lg)
        r1 = p[-1] + mt.lambda0 * a2 + F2.T @ lf + G2.T @ lg
        return r0, r1
    p = mt.adjoint.covectors
    return ctx.transversality(mt.lambda0, np.asarray(mt.lambda_f, float), np.asarray(mt.lambda_g, float), p[0], p[-1])


def slackness_value(problem, traj, mt: MultiplierTuple) -> float:
    """``<lambda_f, f(x(t0), x(t1))>``."""
    if problem.m1 == 0:
        return 0.0
    fv = problem.f(traj.states[0], traj.states[-1])
    return float(np.dot(np.asarray(mt.lambda_f, float), fv))


def maximum_condition_residuals(problem, traj, rc, mt: MultiplierTuple, points: int = 2001, ctx=None):
    """Profiles ``rho_i(t_j)`` (shape (k, M+1)) and ``rho_star(t_j)`` (shape (M+1,)).

    ``H*`` is the maximum of ``<p, phi>`` over the control-set sample grid
    together with the vertex controls, so both profiles are nonnegative up to
    rounding.
    """
    if ctx is None:
        table = _HamiltonianTable(problem, traj, rc, points)
    else:
        table = ctx.table
    rho, rho_star, _ = table.residuals(mt.adjoint.covectors)
    return rho, rho_star


def certificate_report(problem, traj, rc, mt: MultiplierTuple, opts: CertifyOptions | None = None, ctx=None):
    """Residuals of all four conditions for one tuple.

    Pass/fail decisions use the residuals of the tuple rescaled to unit
    norm, so they do not change under positive scaling.
    """
    opts = opts or CertifyOptions()
    ctx = ctx or _Context(problem, traj, rc, opts)
    norm = mt.norm
    if norm == 0.0:
        raise InputError("multiplier tuple is zero; a certificate must be nontrivial")
    scale = 1.0 / norm
    P = mt.adjoint.covectors
    r0, r1 = transversality_residual(problem, traj, mt, ctx)
    slack = slackness_value(problem, traj, mt)
    rho, rho_star = maximum_condition_residuals(problem, traj, rc, mt, ctx=ctx)
    floor = -1e-12 * (1.0 + float(np.abs(ctx.table.phi_grid).max()) * float(np.abs(P).max()))
    if rho.min(initial=0.0) < floor or rho_star.min() < floor:
        warnings.warn("negative maximum-condition residual beyond rounding", RuntimeWarning, stacklevel=2)
    adj = _adjoint_residual(ctx, P)
    h = traj.grid.h
    passes = {
        "adjoint": bool(adj.max(initial=0.0) * scale <= opts.adjoint_factor * h),
        "transversality": bool(max(np.linalg.norm(r0), np.linalg.norm(r1)) * scale <= opts.tol_cert),
        "slackness": bool(abs(slack) * scale <= opts.tol_cert),
        "max_condition": bool(max(rho.max(initial=0.0), rho_star.max()) * scale <= opts.tol_max),
        "signs": bool(
            mt.lambda0 >= -opts.eps_sign * norm and np.all(np.asarray(mt.lambda_f) >= -opts.eps_sign * norm)
        ),
    }
    return CertificateReport(
        r0=r0,
        r1=r1,
        slackness=slack,
        rho=rho,
        rho_star=rho_star,
        adjoint_residual=adj,
        scale=scale,
        tolerances={
            "tol_cert": opts.tol_cert,
            "tol_max": opts.tol_max,
            "adjoint": opts.adjoint_factor * h,
        },
        passes=passes,
    )


# ----------------------------------------------------------------------
# multiplier search


def _nullspace(R: np.ndarray, sigma_tol: float) -> np.ndarray:
    d = R.shape[1]
    if d == 0:
        return np.zeros((0, 0))
    smax = float(np.abs(R).max(initial=0.0))
    if smax == 0.0:
        basis = np.eye(d)
    else:
        _, s, vt = np.linalg.svd(R)
        rank = int(np.sum(s > sigma_tol * s[0]))
        basis = vt[rank:].T
    if basis.shape[1] == 0:
        return basis
    # canonical orthonormal basis: project the coordinate axes in order
    # (lambda0 first) and orthonormalise, so the result does not depend on
    # the SVD's arbitrary rotation
    proj = basis @ basis.T
    cols = []
    for s_ in range(d):
        v = proj[:, s_].copy()
        for c in cols:
            v -= (c @ v) * c
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            cols.append(v / nv)
        if len(cols) == basis.shape[1]:
            break
    return np.array(cols).T


class _Search:
    def __init__(self, ctx: _Context):
        self.ctx = ctx
        problem = ctx.problem
        opts = ctx.opts
        self.active = np.flatnonzero(ctx.f_val >= -opts.eps_act) if problem.m1 else np.zeros(0, dtype=int)
        na = self.active.size
        self.d = 1 + na + problem.m2
        (a1, a2), (F1, F2), (G1, G2) = ctx.f0_grad, ctx.f_jac, ctx.g_jac
        # rows: endpoint derivative covectors of each free multiplier
        self.E1 = np.vstack([a1[None, :], F1[self.active], G1])
        self.E2 = np.vstack([a2[None, :], F2[self.active], G2])
        self.P_basis = adjoint_batch(problem, ctx.traj, ctx.rc, -self.E2, ctx.coefficients)  # (M+1, d, n)
        self.R = (self.P_basis[0] - self.E1).T  # (n, d)
        self.W = _nullspace(self.R, opts.sigma_tol)
        self.q = self.W.shape[1]
        self.sign_rows = np.arange(1 + na)  # lambda0 and active lambda_f

    def unpack(self, mu: np.ndarray):
        problem = self.ctx.problem
        na = self.active.size
        lam_f = np.zeros(problem.m1)
        lam_f[self.active] = mu[1 : 1 + na]
        return float(mu[0]), lam_f, mu[1 + na :].copy()

    def covectors(self, mu: np.ndarray) -> np.ndarray:
        return np.einsum("jdn,d->jn", self.P_basis, mu)

    def tuple_from(self, mu: np.ndarray) -> MultiplierTuple | None:
        eps = self.ctx.opts.eps_sign
        mu = mu / np.linalg.norm(mu)
        signed = mu[self.sign_rows]
        if np.any(signed < -eps):
            return None
        mu = mu.copy()
        mu[self.sign_rows] = np.maximum(signed, 0.0)
        mu /= np.linalg.norm(mu)
        lam0, lam_f, lam_g = self.unpack(mu)
        adjoint = AdjointTrajectory(self.ctx.traj.grid, self.covectors(mu))
        return MultiplierTuple(lam0, lam_f, lam_g, adjoint)

    # cutting-plane LP ---------------------------------------------------
    def _rows_for(self, Pb, nodes, wvecs):
        # <P(y)_j, w> = sum_b y_b <Pb[b, j], w>
        return np.einsum("bjn,jn->jb", Pb[:, nodes, :], wvecs)

    def lp_face(self, face: int, sign: float, abnormal: bool = False):
        table = self.ctx.table
        W = self.W
        q = self.q
        Pb = np.einsum("jdn,db->bjn", self.P_basis, W)  # (q, M+1, n)
        M1 = Pb.shape[1]
        nodes = np.arange(M1)
        # vertex rows for rho_star: <p, phi_i - v> <= s
        rows = []
        for i in range(table.phi_vert.shape[1]):
            rows.append(self._rows_for(Pb, nodes, table.phi_vert[:, i, :] - table.velocity))
        A_ub = np.vstack(rows)
        sign_A = -W[self.sign_rows]
        A_eq = np.zeros((1, q))
        A_eq[0, face] = 1.0
        b_eq = [sign]
        if abnormal:
            A_eq = np.vstack([A_eq, W[0:1]])
            b_eq = [sign, 0.0]
        bounds = [(-1.0, 1.0)] * q + [(None, None)]
        c = np.zeros(q + 1)
        c[-1] = 1.0
        y = None
        for _ in range(self.ctx.opts.max_cuts):
            full_ub = np.vstack(
                [
                    np.hstack([A_ub, -np.ones((A_ub.shape[0], 1))]),
                    np.hstack([sign_A, np.zeros((sign_A.shape[0], 1))]),
                ]
            )
            b_ub = np.zeros(full_ub.shape[0])
            res = linprog(
                c,
                A_ub=full_ub,
                b_ub=b_ub,
                A_eq=np.hstack([A_eq, np.zeros((A_eq.shape[0], 1))]),
                b_eq=b_eq,
                bounds=bounds,
                method="highs",
            )
            if res.status != 0:
                return None
            y, s_lp = res.x[:q], res.x[-1]
            P = np.einsum("bjn,b->jn", Pb, y)
            rho, rho_star, idx = table.residuals(P)
            worst = max(rho.max(initial=0.0), rho_star.max())
            if worst <= s_lp + 1e-10 * (1.0 + abs(s_lp)):
                break
            phi_best = table.phi_grid[nodes, idx]
            viol = rho_star > s_lp
            new = [self._rows_for(Pb, nodes[viol], (phi_best - table.velocity)[viol])]
            for i in range(table.phi_vert.shape[1]):
                vi = rho[i] > s_lp
                if np.any(vi):
                    w = table.alpha[i, :, None] * (phi_best - table.phi_vert[:, i, :])
                    new.append(self._rows_for(Pb, nodes[vi], w[vi]))
            A_ub = np.vstack([A_ub] + new)
        return None if y is None else W @ y


def _dedupe(tuples: list[MultiplierTuple]) -> list[MultiplierTuple]:
    out: list[MultiplierTuple] = []
    for t in tuples:
        v = t.vector
        if all(float(v @ o.vector) < 1.0 - 1e-9 for o in out):
            out.append(t)
    return out


def solve_multipliers(problem, traj, rc, opts: CertifyOptions | None = None, ctx=None) -> list[MultiplierTuple]:
    """Sign-feasible unit-norm tuples satisfying conditions 1-3.

    The list holds the sign-feasible canonical nullspace directions and, when
    the nullspace has dimension >= 2, the optimum of the maximum-condition
    LP on every face of the coordinate cube, with and without
    ``lambda0 = 0``. An empty list means no tuple satisfies 1-3 at this
    discretisation.
    """
    opts = opts or CertifyOptions()
    ctx = ctx or _Context(problem, traj, rc, opts)
    search = _Search(ctx)
    return _candidates(search)


def _candidates(search: _Search) -> list[MultiplierTuple]:
    q = search.q
    if q == 0:
        return []
    if q > 3:
        warnings.warn(f"multiplier nullspace has dimension {q}; discretisation may be degenerate", stacklevel=3)
    found = []
    for b in range(q):
        for sgn in (1.0, -1.0):
            found.append(search.tuple_from(sgn * search.W[:, b]))
    if q >= 2:
        for abnormal in (False, True):
            for b in range(q):
                for sgn in (1.0, -1.0):
                    mu = search.lp_face(b, sgn, abnormal=abnormal)
                    if mu is not None and np.linalg.norm(mu) > 0:
                        found.append(search.tuple_from(mu))
    return _dedupe([t for t in found if t is not None])


def normality_check(candidates, reports, eps: float = 1e-8) -> bool:
    """True iff every candidate passing all conditions has ``lambda0 > eps``.

    Vacuously true for an empty list; callers report that case separately.
    """
    return all(mt.lambda0 > eps for mt, rep in zip(candidates, reports) if rep.passed)


@dataclass
class Certification:
    candidates: list[MultiplierTuple]
    reports: list[CertificateReport]
    nullspace_dim: int
    normal: bool

    @property
    def passing(self) -> list[int]:
        return [i for i, r in enumerate(self.reports) if r.passed]

    @property
    def normality(self) -> str:
        """``"normal"``, ``"abnormal"`` or ``"no_certificate"``."""
        if not self.passing:
            return "no_certificate"
        return "normal" if self.normal else "abnormal"


def certify(problem, traj, rc, opts: CertifyOptions | None = None) -> Certification:
    """Solve for multipliers, check all four conditions, and decide normality."""
    opts = opts or CertifyOptions()
    ctx = _Context(problem, traj, rc, opts)
    search = _Search(ctx)
    cands = _candidates(search)
    reports = [certificate_report(problem, traj, rc, mt, opts, ctx) for mt in cands]
    order = sorted(range(len(cands)), key=lambda i: (not reports[i].passed, -cands[i].lambda0))
    cands = [cands[i] for i in order]
    reports = [reports[i] for i in order]
    log.debug("nullspace dim %d, %d candidates, %d passing", search.q, len(cands), sum(r.passed for r in reports))
    return Certification(cands, reports, search.q, normality_check(cands, reports, opts.eps_normal))
