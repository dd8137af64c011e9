"""Privacy/utility analysis of Gaussian location obfuscation with remapping."""

from .analytic import AnalyticReport, CaseLabel, analytic_report
from .estimators import (
    AdversaryEstimate,
    GaussianJoint,
    SingularObservation,
    adversary_imperfect,
    adversary_perfect,
    adversary_randomized,
    gaussian_condition,
    remap,
)
from .model import (
    Adversary,
    DegenerateModel,
    Mechanism,
    MechanismOutput,
    ModelParams,
    NegativeVariance,
    NonFiniteParameter,
    ParameterError,
    ProbabilityOutOfRange,
    WorldSample,
    apply_mechanism,
    sample_world,
    validate,
)
from .sim import MetricsReport, VerifyReport, run_monte_carlo, verify
from .sweep import SweepSpec, default_sweep_spec, emit_csv, run_sweep
from .trace import Trace, TraceError, fit_user_model, protect, read_trace, write_trace

__version__ = "0.1.0"
