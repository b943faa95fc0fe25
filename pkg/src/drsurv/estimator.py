"""Marginal survival estimation adjusted for dependent censoring.

Pipeline: fit the failure and censoring working Cox models, condense each
covariate vector to the score pair ``(beta'L, gamma'L)``, estimate the
conditional survival at every observed score with the kernel-weighted
product-limit estimator, and average those conditional curves over the
sample. The Kaplan-Meier estimator is included as the unadjusted baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .cox import CoxOptions, EventRole, fit_cox
from .data import Dataset, StepFunction, risk_set_start, uniform_grid
from .kernel import KernelConfig, hazard_jumps, product_limit, reduce_covariates


@dataclass(frozen=True)
class EstimatorConfig:
    """Settings for the adjusted estimator.

    ``failure_columns`` / ``censoring_columns`` pick the covariate columns
    each working model uses (``None``: all of them).
    """

    kernel: KernelConfig = field(default_factory=KernelConfig)
    grid: tuple | None = None
    cox: CoxOptions = field(default_factory=CoxOptions)
    failure_columns: tuple | None = None
    censoring_columns: tuple | None = None

    def grid_for(self, tau: float) -> np.ndarray:
        if self.grid is None:
            return uniform_grid(tau, 50)
        grid = np.asarray(self.grid, dtype=float)
        if (np.diff(grid) < 0).any():
            raise ValueError("evaluation grid must be sorted")
        return np.clip(grid, 0.0, tau)


@dataclass(frozen=True, eq=False)
class SurvivalCurve:
    survival: StepFunction
    n: int
    coefficients_T: np.ndarray = field(default_factory=lambda: np.empty(0))
    coefficients_C: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __call__(self, t):
        return self.survival(t)


class FittedEstimator:
    """All intermediate quantities of one run of the adjusted estimator.

    Records are held in the dataset's canonical order; ``order`` maps that
    back to the caller's order (``canonical[k] == original[order[k]]``).
    """

    def __init__(self, ds, beta, gamma, cfg, fit_T=None, fit_C=None):
        self.order = ds.canonical_order()
        self.ds = ds.take(self.order)
        self.cfg = cfg
        self.fit_T = fit_T
        self.fit_C = fit_C
        self.beta = np.asarray(beta, dtype=float)
        self.gamma = np.asarray(gamma, dtype=float)
        self.z = reduce_covariates(
            self.ds, self.beta, self.gamma, cfg.failure_columns, cfg.censoring_columns
        )
        self.bandwidth = cfg.kernel.resolve(self.ds.n)
        self.times_T, self.mass_T = self._jumps(EventRole.FAILURE)
        self.cond_surv = product_limit(self.mass_T)
        self.curve = SurvivalCurve(
            StepFunction(self.times_T, self.cond_surv.mean(axis=0), 1.0),
            self.ds.n,
            self.beta.copy(),
            self.gamma.copy(),
        )

    def _jumps(self, role):
        return hazard_jumps(
            self.ds.time,
            role.indicator(self.ds.event),
            self.z.z,
            self.z.z,
            self.bandwidth,
            self.cfg.kernel.kernel,
        )

    @cached_property
    def censoring_hazard(self):
        """``(times, mass)`` of the censoring-role hazard at every score."""
        return self._jumps(EventRole.CENSORING)

    def unpermute(self, values):
        out = np.empty_like(values)
        out[self.order] = values
        return out


def fit_estimator(ds: Dataset, cfg: EstimatorConfig | None = None) -> FittedEstimator:
    cfg = cfg or EstimatorConfig()
    fit_T = fit_cox(ds.select(cfg.failure_columns), EventRole.FAILURE, cfg.cox)
    fit_C = fit_cox(ds.select(cfg.censoring_columns), EventRole.CENSORING, cfg.cox)
    return FittedEstimator(ds, fit_T.coefficients, fit_C.coefficients, cfg, fit_T, fit_C)


def estimate_survival(ds: Dataset, cfg: EstimatorConfig | None = None) -> SurvivalCurve:
    return fit_estimator(ds, cfg).curve


def survival_at_fixed_coeffs(ds: Dataset, beta, gamma, cfg: EstimatorConfig | None = None) -> SurvivalCurve:
    """Same estimator with the working-model coefficients supplied, not fitted."""
    return FittedEstimator(ds, beta, gamma, cfg or EstimatorConfig()).curve


def _km_table(ds: Dataset):
    ts = np.sort(ds.time)
    times, deaths = np.unique(ds.time[ds.event == 1], return_counts=True)
    at_risk = ds.n - risk_set_start(ts, times)
    return times, deaths.astype(float), at_risk.astype(float)


def kaplan_meier(ds: Dataset) -> SurvivalCurve:
    times, d, m = _km_table(ds)
    return SurvivalCurve(StepFunction(times, np.cumprod(1.0 - d / m), 1.0), ds.n)


def greenwood_se(ds: Dataset, t) -> np.ndarray:
    """Greenwood standard error of the Kaplan-Meier estimate at ``t``."""
    times, d, m = _km_table(ds)
    s = np.cumprod(1.0 - d / m)
    # the m == d term only occurs where the estimate has already hit zero
    terms = np.where(m > d, d / (m * np.maximum(m - d, 1.0)), 0.0)
    idx = np.searchsorted(times, np.asarray(t, dtype=float), side="right")
    cum = np.concatenate(([0.0], np.cumsum(terms)))[idx]
    surv = np.concatenate(([1.0], s))[idx]
    return surv * np.sqrt(cum)
