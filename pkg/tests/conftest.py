import numpy as np
import pytest

from relaxctl import library


@pytest.fixture(scope="session")
def ex1():
    return library.example1_from_names("linear_half", "square", 2)


@pytest.fixture(scope="session")
def ex1_triple(ex1):
    traj, rc = library.example1_candidate(ex1, 1000)
    return ex1, traj, rc


@pytest.fixture(scope="session")
def ex1_small(ex1):
    traj, rc = library.example1_candidate(ex1, 200)
    return ex1, traj, rc


def scalar_integrator(lo=-1.0, hi=1.0, **kw):
    """x' = u on [0, 1] with a box control set."""
    from relaxctl import Box, ControlProblem

    kw.setdefault("cost", lambda z1, z2: float(z2[0]))
    kw.setdefault("cost_grad", lambda z1, z2: (np.zeros(1), np.ones(1)))
    return ControlProblem(
        t0=0.0,
        t1=1.0,
        n=1,
        r=1,
        dynamics=lambda t, x, u: np.asarray(u, dtype=float).copy(),
        dynamics_jac_x=lambda t, x, u: np.zeros((1, 1)),
        control_set=Box(np.array([lo]), np.array([hi])),
        vectorized=True,
        **kw,
    )
