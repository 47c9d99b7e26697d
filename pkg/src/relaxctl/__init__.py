"""Numerical checks of the relaxed maximum principle and chattering synthesis."""
from .calcvar import (
    LagrangianProblem,
    generalized_euler_residual,
    legendre_check,
    linearity_falsifier,
    weierstrass_check,
    weierstrass_excess,
)
from .certificate import (
    CertificateReport,
    CertifyOptions,
    MultiplierTuple,
    certificate_report,
    certify,
    maximum_condition_residuals,
    normality_check,
    slackness_value,
    solve_multipliers,
    transversality_residual,
)
from .chattering import ConvergenceReport, convergence_report, example1_broken_line, synthesize
from .errors import DivergenceError, InputError, NormalityError, PreconditionError, RelaxctlError
from .kernels import BACKEND
from .ode import (
    AdjointTrajectory,
    ControlSignal,
    TimeGrid,
    Trajectory,
    integrate_adjoint_backward,
    integrate_relaxed_state,
    integrate_state,
)
from .problem import (
    Box,
    ControlProblem,
    FiniteSet,
    Oracle,
    UnionOfIntervals,
    check_gradients,
    example1_problem,
    example2_problem,
)
from .relaxed import RelaxedControl, decompose_along_trajectory, decompose_velocity, simplex_lstsq, validate

__version__ = "0.1.0"
