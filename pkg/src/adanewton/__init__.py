"""Adaptive-sample-size Newton method for regularized empirical risk minimization."""

from .ada import (
    AdaNewtonConfig,
    AdaNewtonError,
    InvalidInitializationError,
    SolverState,
    ada_newton,
    certificate_holds,
    certificate_threshold,
    prop1_min_c,
    theoretical_growth_safe,
    warmup,
)
from .baselines import (
    LineSearchConfig,
    SagaConfig,
    SgdConfig,
    newton_linesearch,
    reference_optimum,
    saga,
    sgd,
)
from .model import (
    AccuracyPolicy,
    Dataset,
    LossModel,
    RiskConfig,
    accuracy,
    load_csv,
    load_libsvm,
    normalize_maxabs,
    synth_logistic,
)
from .risk import (
    newton_decrement,
    newton_step,
    risk_gradient,
    risk_hessian,
    risk_value,
    spd_solve,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyPolicy",
    "AdaNewtonConfig",
    "AdaNewtonError",
    "Dataset",
    "InvalidInitializationError",
    "LineSearchConfig",
    "LossModel",
    "RiskConfig",
    "SagaConfig",
    "SgdConfig",
    "SolverState",
    "accuracy",
    "ada_newton",
    "certificate_holds",
    "certificate_threshold",
    "load_csv",
    "load_libsvm",
    "newton_decrement",
    "newton_linesearch",
    "newton_step",
    "normalize_maxabs",
    "prop1_min_c",
    "reference_optimum",
    "risk_gradient",
    "risk_hessian",
    "risk_value",
    "saga",
    "sgd",
    "spd_solve",
    "synth_logistic",
    "theoretical_growth_safe",
    "warmup",
]
