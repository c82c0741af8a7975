"""Recovery and realization of stochastic unknown-input models.

Given a known discrete-time LTI plant driven by an unknown
wide-sense-stationary input, this package recovers the input
autocorrelations from output measurements, fits an AR model, realizes a
whitened innovations model, and applies an augmented-state Kalman filter
for state estimation.  Balanced snapshot-based model reduction handles
large plants, and a benchmark harness reproduces the heat-conduction
experiments.
"""

__version__ = "0.1.0"

from .armodel import (
    ArModel,
    InnovationsModel,
    ar_autocorrelation,
    closed_loop_markov,
    fit_yule_walker,
    realize_innovations,
    residual_covariance,
    select_ar_order,
)
from .autocorr import (
    CorrelationSequence,
    relative_error,
    sample_autocorrelation,
    subtract_noise_floor,
)
from .estimator import UnknownInputRealizer
from .filtering import (
    AugmentedSystem,
    FilterState,
    armse,
    build_augmented,
    build_augmented_from_input_model,
    kalman_step,
    nsr,
    run_filter,
)
from .lti import (
    LtiSystem,
    MarkovSequence,
    check_assumptions,
    markov_parameters,
    simulate,
)
from .realization import BpodBasis, StateSpaceRealization, bpod_reduce, era
from .recovery import (
    CoefficientMatrix,
    build_coefficient_matrix,
    conjugate_gradient_solve,
    kronecker,
    solve_input_autocorr,
    vec,
)

__all__ = [
    "ArModel",
    "AugmentedSystem",
    "BpodBasis",
    "CoefficientMatrix",
    "CorrelationSequence",
    "FilterState",
    "InnovationsModel",
    "LtiSystem",
    "MarkovSequence",
    "StateSpaceRealization",
    "UnknownInputRealizer",
    "ar_autocorrelation",
    "armse",
    "bpod_reduce",
    "build_augmented",
    "build_augmented_from_input_model",
    "build_coefficient_matrix",
    "check_assumptions",
    "closed_loop_markov",
    "conjugate_gradient_solve",
    "era",
    "fit_yule_walker",
    "kalman_step",
    "kronecker",
    "markov_parameters",
    "nsr",
    "realize_innovations",
    "relative_error",
    "residual_covariance",
    "run_filter",
    "sample_autocorrelation",
    "select_ar_order",
    "simulate",
    "solve_input_autocorr",
    "subtract_noise_floor",
    "vec",
]
