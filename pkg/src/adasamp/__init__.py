"""Adaptive-sampling SGD: log-time weighted sampling, multiplicative example
reweighting, stability probes, and generalization-bound evaluators."""

from .adaptive import (
    SamplerConfig,
    TrainTrace,
    conditional_kl,
    posterior_objective,
    train,
    utilities,
    utility,
    weight_update,
)
from .bounds import (
    BoundReport,
    EnumeratedDivergence,
    chisq_divergence,
    enumerate_posterior_divergence,
    gen_bound_chisq,
    gen_bound_derandomized,
    gen_bound_kl,
    gen_bound_sgd_strongly_convex,
    kl_divergence,
    kl_from_utility_advantage,
    kl_from_utility_sum,
    sgd_stability_convex,
    sgd_stability_initial_risk,
    sgd_stability_nonconvex,
    sgd_stability_strongly_convex,
)
from .data import load_csv, save_csv, synth_data
from .model import (
    Dataset,
    Example,
    RegularityConstants,
    accuracy,
    batch_objective_grad,
    bounded_loss,
    default_domain_radius,
    mean_bounded_loss,
    objective_grad,
    objective_value,
    predict_proba,
    predict_proba_batch,
    project,
    regularity_constants,
    softmax,
    surrogate_loss,
    zeros_hypothesis,
)
from .optim import StepSchedule, UpdateRuleState, apply_update, step_size
from .weight_tree import WeightTree

__version__ = "0.1.0"

__all__ = [
    "BoundReport",
    "Dataset",
    "EnumeratedDivergence",
    "Example",
    "RegularityConstants",
    "SamplerConfig",
    "StepSchedule",
    "TrainTrace",
    "UpdateRuleState",
    "WeightTree",
    "accuracy",
    "apply_update",
    "batch_objective_grad",
    "bounded_loss",
    "chisq_divergence",
    "conditional_kl",
    "default_domain_radius",
    "enumerate_posterior_divergence",
    "gen_bound_chisq",
    "gen_bound_derandomized",
    "gen_bound_kl",
    "gen_bound_sgd_strongly_convex",
    "kl_divergence",
    "kl_from_utility_advantage",
    "kl_from_utility_sum",
    "load_csv",
    "mean_bounded_loss",
    "objective_grad",
    "objective_value",
    "posterior_objective",
    "predict_proba",
    "predict_proba_batch",
    "project",
    "regularity_constants",
    "save_csv",
    "softmax",
    "sgd_stability_convex",
    "sgd_stability_initial_risk",
    "sgd_stability_nonconvex",
    "sgd_stability_strongly_convex",
    "step_size",
    "surrogate_loss",
    "synth_data",
    "train",
    "utilities",
    "utility",
    "weight_update",
    "zeros_hypothesis",
]
