import numpy as np
import pytest

from relaxctl import Box, ControlProblem, FiniteSet, Oracle, UnionOfIntervals, library
from relaxctl.errors import InputError, PreconditionError
from relaxctl.problem import check_gradients, example1_problem, random_samples

from conftest import scalar_integrator


def test_union_membership_respects_truncation():
    U = UnionOfIntervals([(-np.inf, -1.0), (1.0, np.inf)], bound=10.0)
    assert U.contains(np.array([1.0]))
    assert U.contains(np.array([-10.0]))
    assert not U.contains(np.array([0.5]))
    assert not U.contains(np.array([10.5]))
    grid = U.sample_grid(2001)
    assert np.all(U.contains(grid))
    assert np.isclose(np.abs(grid).min(), 1.0) and np.isclose(np.abs(grid).max(), 10.0)


def test_box_and_finite_set_grids_are_members():
    B = Box(np.array([-1.0, 0.0]), np.array([1.0, 2.0]))
    assert np.all(B.contains(B.sample_grid(400)))
    F = FiniteSet(np.array([[-1.0], [1.0]]))
    assert F.contains(np.array([1.0])) and not F.contains(np.array([0.0]))


def test_oracle_rejects_grid_outside_set():
    with pytest.raises(InputError):
        Oracle(lambda u: bool(u[0] > 0), np.array([[-1.0], [1.0]]))


def test_identity_dynamics_jacobian_is_exact():
    p = scalar_integrator()
    rep = check_gradients(p, random_samples(p, 20, seed=1))
    assert rep.max_errors["dynamics_jac_x"] == 0.0


def test_running_term_derivative(ex1):
    # x1 - f(t) = 1 at t = 0.4
    t = 0.4
    x = np.array([1.2, 0.3])
    J = ex1.phi_x(t, x, np.array([1.0]))
    assert J[1, 0] == pytest.approx(2.0, abs=1e-12)
    h = 1e-5
    fd = (ex1.phi(t, x + [h, 0], [1.0])[1] - ex1.phi(t, x - [h, 0], [1.0])[1]) / (2 * h)
    assert abs(fd - 2.0) <= 1e-9


def test_linear_inequality_jacobian():
    p = scalar_integrator(
        ineq=lambda z1, z2: z1 - 1.0, ineq_jac=lambda z1, z2: (np.eye(1), np.zeros((1, 1))), m1=1
    )
    F1, F2 = p.f_jac(np.zeros(1), np.zeros(1))
    assert np.array_equal(F1, np.eye(1)) and np.array_equal(F2, np.zeros((1, 1)))
    # central differences of a linear map are exact up to rounding
    assert check_gradients(p, random_samples(p, 10)).max_errors["ineq_jac"] <= 1e-10


def test_example1_builder(ex1):
    assert ex1.meta["infimum"] == 1.0
    assert ex1.m2 == 2 and ex1.n == 2
    _, rc = library.example1_candidate(ex1, 50)
    assert np.allclose(rc.weights[0], 0.75)


def test_example1_zero_path_is_valid():
    p = library.example1_from_names("zero")
    _, rc = library.example1_candidate(p, 20)
    assert np.allclose(rc.weights, 0.5)


def test_example1_identity_path_rejected():
    with pytest.raises(PreconditionError):
        library.example1_from_names("identity")


def test_example1_odd_power_rejected():
    with pytest.raises(InputError):
        example1_problem(lambda t: 0.5 * t, lambda t: 0.5, lambda u: u**2, m=3)


def test_example2_lagrangians_vanish_at_zero():
    for name in ("x_udot_sq", "x_udot", "x_sin_udot"):
        lp = library.example2_from_name(name)
        us = np.linspace(-2, 2, 9)[:, None]
        assert np.all(lp.lagrangian(0.0, np.zeros(1), us) == 0.0)
    lp = library.example2_from_name("x_sin_udot")
    assert lp.grad_x(0.0, np.zeros(1), np.array([0.3]))[0] == pytest.approx(np.sin(0.3))


def test_unknown_registry_name():
    with pytest.raises(InputError):
        library.example1_from_names("nope")


def test_gradcheck_flags_wrong_jacobian(ex1):
    bad = ControlProblem(
        t0=0.0,
        t1=1.0,
        n=1,
        r=1,
        dynamics=lambda t, x, u: np.array([x[0] ** 2]),
        dynamics_jac_x=lambda t, x, u: np.array([[x[0]]]),
        cost=lambda z1, z2: float(z2[0]),
        control_set=Box(np.array([-1.0]), np.array([1.0])),
    )
    rep = check_gradients(bad, random_samples(bad, 20, seed=3))
    assert not rep.passed


def test_gradcheck_names_failing_sample():
    def boom(t, x, u):
        raise RuntimeError("bad evaluator")

    p = ControlProblem(
        t0=0.0, t1=1.0, n=1, r=1, dynamics=boom, cost=lambda z1, z2: 0.0, control_set=Box(np.array([-1.0]), np.array([1.0]))
    )
    with pytest.raises(InputError, match="sample"):
        check_gradients(p, random_samples(p, 3))
