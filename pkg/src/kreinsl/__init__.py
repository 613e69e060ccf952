"""Directing functionals, Fourier transforms and spectral measures for singular
Sturm-Liouville operators with an entire solution at the limit-point end."""

from .model import (
    Bump,
    CompactFunction,
    ConfigError,
    ConstantCoeff,
    CustomSeries,
    DomainError,
    EntireSolutionSpec,
    Hydrogen,
    Laguerre,
    Legendre,
    SLProblem,
    SolutionValue,
    StepMeasure,
    apply_tau,
    make_problem,
    sampled_function,
    spec_from_config,
    spec_to_config,
    zero_function,
)
from .odeint import IntegrationError, ShootingConfig, integrate_sl, phi_eval, phi_to_c, psi_c_theta
from .oracle import DiscretizedProblem, RefinementAdvisory, discretize, oracle_eigenvalues, oracle_eigs
from .quadrature import QuadratureRule
from .specfun import SeriesConvergenceError, series_phi
from .spectral import (
    EigenRecord,
    SpectralAdvisory,
    classify_endpoint,
    eigenvalues_truncated,
    growth_exponent,
    measure_family,
    parseval_check,
    spectral_measure_approx,
    wronskian,
)
from .transform import (
    NearEigenvalueError,
    apply_resolvent,
    check_shift_property,
    directing_functional,
    l2_norm,
    non_range_function,
    resolvent_residual,
    solvability_test,
)

__version__ = "0.1.0"
