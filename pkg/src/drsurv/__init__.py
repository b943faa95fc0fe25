"""Marginal survival estimation under dependent censoring via two working Cox models."""

import json
from importlib import resources

from .cox import CoxModelFit, CoxOptions, EventRole, fit_cox, partial_loglik, partial_score_info
from .data import Dataset, ObservedRecord, StepFunction, read_csv, step_eval, validate_dataset
from .estimator import (
    EstimatorConfig,
    SurvivalCurve,
    estimate_survival,
    fit_estimator,
    greenwood_se,
    kaplan_meier,
    survival_at_fixed_coeffs,
)
from .kernel import KernelConfig, cond_cum_hazard, cond_survival, kernel_eval, reduce_covariates
from .variance import (
    InfluenceBundle,
    PerturbationConfig,
    influence_at,
    perturbation_derivative,
    pointwise_se_ci,
    score_influence,
)


def load_schema(name: str) -> dict:
    """Published JSON schema, ``"curve_report"`` or ``"simulation_report"``."""
    text = resources.files(__package__).joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)
