"""Ensemble Kalman inversion for Bayesian physics-informed neural networks."""

from .autodiff import Jet2, directional_jet, jet_arith, jet_func
from .eki import (
    DriftModel,
    Ensemble,
    NoiseModel,
    RunReport,
    StoppingConfig,
    discrepancy,
    init_ensemble,
    kalman_update,
    perturb,
    run,
    should_stop,
)
from .estimator import EKIBPINN
from .linalg import RngStream, cross_covariance, spd_solve, standard_normal
from .problems import (
    Dataset,
    InverseProblem,
    PhysParamSpec,
    make_problem,
    observe,
    observe_ensemble,
    transform,
)
from .runner import ExperimentConfig, ResultBundle, emit, run_experiment
from .stats import (
    PosteriorSummary,
    linear_reference_posterior,
    relative_error_lambda,
    relative_error_u,
    summarize,
)
from .surrogate import (
    MlpArchitecture,
    forward,
    forward_batch,
    forward_jet,
    forward_jet_batch,
    param_count,
    sample_theta_prior,
)

__version__ = "0.1.0"
