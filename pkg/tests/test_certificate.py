import numpy as np
import pytest

from relaxctl import (
    AdjointTrajectory,
    CertifyOptions,
    MultiplierTuple,
    RelaxedControl,
    TimeGrid,
    Trajectory,
    certificate_report,
    certify,
    library,
    maximum_condition_residuals,
    normality_check,
    slackness_value,
    solve_multipliers,
    transversality_residual,
)
from relaxctl.certificate import CertificateReport, _Context, _Search
from relaxctl.errors import InputError

from conftest import scalar_integrator


def tuple_with(grid, lam0, lam_f, lam_g, p):
    cov = np.tile(np.asarray(p, dtype=float), (grid.M + 1, 1))
    return MultiplierTuple(lam0, np.asarray(lam_f, float), np.asarray(lam_g, float), AdjointTrajectory(grid, cov))


def test_transversality_example1(ex1_small):
    ex1, traj, _ = ex1_small
    mt = tuple_with(traj.grid, 1.0, [], [0.0, 0.0], [0.0, -1.0])
    r0, r1 = transversality_residual(ex1, traj, mt)
    assert np.allclose(r1, 0.0) and np.allclose(r0, 0.0)


def test_zero_tuple_rejected(ex1_small):
    ex1, traj, rc = ex1_small
    mt = tuple_with(traj.grid, 0.0, [], [0.0, 0.0], [0.0, 0.0])
    r0, r1 = transversality_residual(ex1, traj, mt)
    assert not r0.any() and not r1.any()
    with pytest.raises(InputError):
        certificate_report(ex1, traj, rc, mt)


def test_terminal_cost_fixes_terminal_adjoint():
    c = 1.0
    # x(0) = 0 fixed, terminal cost c x(1)
    p = scalar_integrator(
        eq=lambda z1, z2: z1.copy(), eq_jac=lambda z1, z2: (np.eye(1), np.zeros((1, 1))), m2=1
    )
    g = TimeGrid.uniform(0, 1, 50)
    traj = Trajectory(g, -g.nodes[:, None])
    rc = RelaxedControl.ordinary(g, -np.ones((51, 1)))
    cands = solve_multipliers(p, traj, rc)
    assert len(cands) == 1
    mt = cands[0]
    assert mt.lambda0 > 0 and mt.lambda_g[0] == pytest.approx(-mt.lambda0)
    assert np.allclose(mt.adjoint.covectors, -c * mt.lambda0)
    assert certificate_report(p, traj, rc, mt).passed


def test_stationary_cost_gives_unit_multiplier():
    p = scalar_integrator(cost=lambda z1, z2: 0.0, cost_grad=lambda z1, z2: (np.zeros(1), np.zeros(1)))
    g = TimeGrid.uniform(0, 1, 20)
    traj = Trajectory(g, 0.3 * g.nodes[:, None])
    rc = RelaxedControl.ordinary(g, 0.3 * np.ones((21, 1)))
    cands = solve_multipliers(p, traj, rc)
    assert len(cands) == 1 and cands[0].lambda0 == 1.0
    assert not cands[0].adjoint.covectors.any()
    assert certify(p, traj, rc).normality == "normal"


def test_slackness_values(ex1_small):
    _, traj, _ = ex1_small
    g = traj.grid
    assert slackness_value(library.example1_from_names(), traj, tuple_with(g, 1.0, [], [0, 0], [0, -1])) == 0.0
    p = scalar_integrator(
        ineq=lambda z1, z2: np.array([-0.3]), ineq_jac=lambda z1, z2: (np.zeros((1, 1)), np.zeros((1, 1))), m1=1
    )
    tr = Trajectory(g, np.zeros((g.M + 1, 1)))
    assert slackness_value(p, tr, tuple_with(g, 1.0, [0.0], [], [0.0])) == 0.0
    assert slackness_value(p, tr, tuple_with(g, 1.0, [1.0], [], [0.0])) == pytest.approx(-0.3)


def test_maximum_condition_example1(ex1_small):
    ex1, traj, rc = ex1_small
    rho, rho_star = maximum_condition_residuals(ex1, traj, rc, tuple_with(traj.grid, 1.0, [], [0, 0], [0, -1]))
    assert rho.max() <= 1e-12 and rho_star.max() <= 1e-12
    assert rho.min() >= 0.0 and rho_star.min() >= 0.0


def test_maximum_condition_wrong_sign(ex1_small):
    ex1, traj, rc = ex1_small
    rho, rho_star = maximum_condition_residuals(ex1, traj, rc, tuple_with(traj.grid, 1.0, [], [0, 0], [0, 1]))
    assert rho_star.max() == pytest.approx(99.0, abs=1e-9)


def test_control_free_dynamics_zero_residual():
    p = scalar_integrator()
    p = type(p)(**{**p.__dict__, "dynamics": lambda t, x, u: np.zeros(np.shape(u))})
    g = TimeGrid.uniform(0, 1, 10)
    traj = Trajectory(g, np.zeros((11, 1)))
    rc = RelaxedControl.ordinary(g, 0.2 * np.ones((11, 1)))
    rho, _ = maximum_condition_residuals(p, traj, rc, tuple_with(g, 1.0, [], [], [-1.0]))
    assert not rho.any()


def test_example1_certificate(ex1_triple):
    ex1, traj, rc = ex1_triple
    cert = certify(ex1, traj, rc)
    assert cert.normality == "normal"
    best = cert.candidates[cert.passing[0]]
    assert len(cert.passing) == 1
    assert best.lambda0 == pytest.approx(1.0, abs=1e-6)
    assert np.abs(best.lambda_g).max() <= 1e-6
    P = best.adjoint.covectors
    assert np.abs(P[:, 0]).max() <= 1e-6 and np.abs(P[:, 1] + best.lambda0).max() <= 1e-6


def test_perturbed_trajectory_not_certified(ex1):
    traj, rc = library.example1_candidate(ex1, 200, perturbation=0.1)
    cert = certify(ex1, traj, rc, CertifyOptions(tol_cert=1e-4, tol_max=1e-4))
    assert not cert.passing and cert.normality == "no_certificate"


def test_nullspace_dimension_matches_rank():
    a, b = 0.0, 0.4
    p = scalar_integrator(
        eq=lambda z1, z2: np.concatenate([z1 - a, z2 - b]),
        eq_jac=lambda z1, z2: (np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]])),
        m2=2,
    )
    g = TimeGrid.uniform(0, 1, 40)
    traj = Trajectory(g, 0.4 * g.nodes[:, None])
    rc = RelaxedControl.ordinary(g, 0.4 * np.ones((41, 1)))
    s = _Search(_Context(p, traj, rc, CertifyOptions()))
    assert s.q == s.R.shape[1] - np.linalg.matrix_rank(s.R)
    assert s.q == 2


def _report(passed):
    rep = CertificateReport(np.zeros(1), np.zeros(1), 0.0, np.zeros((1, 2)), np.zeros(2), np.zeros(1), 1.0, {})
    rep.passes = {"all": passed}
    return rep


def test_normality_check_cases(ex1_small):
    g = ex1_small[1].grid
    normal = tuple_with(g, 1.0, [], [0, 0], [0, -1])
    abnormal = tuple_with(g, 0.0, [], [1.0, 0.0], [0, 0])
    assert normality_check([normal], [_report(True)])
    assert not normality_check([abnormal], [_report(True)])
    assert normality_check([abnormal], [_report(False)])
    assert normality_check([], [])


def test_report_invariant_under_scaling(ex1_small):
    ex1, traj, rc = ex1_small
    ctx = _Context(ex1, traj, rc, CertifyOptions())
    for mt in solve_multipliers(ex1, traj, rc, ctx=ctx):
        base = certificate_report(ex1, traj, rc, mt, ctx=ctx).passes
        for c in (1e-3, 7.0, 1e4):
            assert certificate_report(ex1, traj, rc, mt.scaled(c), ctx=ctx).passes == base
