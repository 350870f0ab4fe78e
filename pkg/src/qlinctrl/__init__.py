"""Covariance-level models of linear quantum stochastic systems under classical feedback."""

from .covariance import (
    CovarianceTrajectory,
    LyapunovError,
    is_hurwitz,
    matrix_exponential,
    min_eig_hermitian,
    propagate,
    propagate_piecewise,
    solve_steady_state,
)
from .entanglement import (
    EntanglementReport,
    InvalidCovarianceError,
    log_negativity,
    random_realizable_system,
    random_separable_covariance,
    separability_lmi,
    sudden_death_time,
    verify_no_go,
)
from .interconnect import (
    ClosedLoop,
    CompositionError,
    ControllerSpec,
    WiringSpec,
    compose_closed_loop,
    partial_transpose_frame,
    validate_block_structure,
)
from .model import (
    ConstructionError,
    ItoFieldSpec,
    OscillatorSpec,
    QuadratureSystem,
    heisenberg_check,
    realizability_residual,
    to_quadrature,
    vacuum_field,
)

__version__ = "0.1.0"
