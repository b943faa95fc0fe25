"""Kernel-weighted conditional cumulative hazards on the reduced covariates.

For a query point ``z`` in the two-dimensional score space the hazard of
the chosen role puts mass

    d_j K((Z_j - z)/a) / sum_{Y_m >= Y_j} K((Z_m - z)/a)

at each observed time ``Y_j`` with an active indicator ``d_j``. Kernel
weights are handled on the log scale: with small bandwidths and widely
spread scores the Gaussian weights underflow long before their ratios do.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cox import EventRole
from .data import Dataset, StepFunction, risk_set_start
from .errors import DegenerateRiskSet, DimensionMismatch


def _gaussian2d_log(u1, u2):
    return -(u1 * u1 + u2 * u2)


# log K(u1, u2) for each supported kernel; every entry must be symmetric
LOG_KERNELS = {"gaussian2d": _gaussian2d_log}


@dataclass(frozen=True)
class KernelConfig:
    """Bandwidth ``a_n`` and kernel choice.

    ``bandwidth`` wins when given; otherwise ``a_n = bandwidth_scale * n**(-1/3)``.
    """

    bandwidth: float | None = None
    bandwidth_scale: float = 1.0
    kernel: str = "gaussian2d"

    def __post_init__(self):
        if self.kernel not in LOG_KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if not self.bandwidth_scale > 0:
            raise ValueError("bandwidth_scale must be positive")

    def resolve(self, n: int) -> float:
        if self.bandwidth is not None:
            return float(self.bandwidth)
        return float(self.bandwidth_scale) * n ** (-1.0 / 3.0)


def kernel_eval(cfg: KernelConfig, x1: float, x2: float) -> float:
    return float(np.exp(LOG_KERNELS[cfg.kernel](x1, x2)))


@dataclass(frozen=True, eq=False)
class ReducedCovariates:
    z: np.ndarray

    def __len__(self):
        return self.z.shape[0]


def reduce_covariates(
    ds: Dataset,
    beta,
    gamma,
    failure_columns=None,
    censoring_columns=None,
) -> ReducedCovariates:
    """Scores ``(beta'L_i, gamma'L_i)`` in record order.

    The column selectors let the two working models use different subsets
    of the stored covariates; ``None`` means all columns.
    """
    lt = ds.select(failure_columns).covariates
    lc = ds.select(censoring_columns).covariates
    beta = np.asarray(beta, dtype=float).reshape(-1)
    gamma = np.asarray(gamma, dtype=float).reshape(-1)
    if beta.shape[0] != lt.shape[1] or gamma.shape[0] != lc.shape[1]:
        raise DimensionMismatch(
            f"coefficients ({beta.shape[0]}, {gamma.shape[0]}) do not match "
            f"covariates ({lt.shape[1]}, {lc.shape[1]})"
        )
    z = np.column_stack([lt @ beta, lc @ gamma])
    z.setflags(write=False)
    return ReducedCovariates(z)


def hazard_jumps(time, indicator, z_all, z_query, bandwidth, kernel="gaussian2d"):
    """Aggregated hazard masses at every distinct active time.

    Parameters
    ----------
    time, indicator : (n,) arrays
        Observed times and the role's event indicator.
    z_all : (n, 2) array
        Reduced covariates of the sample.
    z_query : (k, 2) array
        Points at which the conditional hazard is wanted.

    Returns
    -------
    times : (J,) array
        Distinct times carrying an active indicator, increasing.
    mass : (k, J) array
        Hazard jump of each query point at each of those times.
    """
    time = np.asarray(time, dtype=float)
    indicator = np.asarray(indicator, dtype=float)
    z_all = np.asarray(z_all, dtype=float)
    z_query = np.atleast_2d(np.asarray(z_query, dtype=float))
    if z_all.shape != (time.shape[0], 2) or z_query.shape[1] != 2:
        raise DimensionMismatch("reduced covariates must be (n, 2) and queries (k, 2)")

    order = np.argsort(time, kind="stable")
    ts = time[order]
    active = indicator[order] > 0
    k = z_query.shape[0]
    if not active.any():
        return np.empty(0), np.empty((k, 0))

    u = (z_all[order][None, :, :] - z_query[:, None, :]) / bandwidth
    log_w = LOG_KERNELS[kernel](u[..., 0], u[..., 1])
    # log sum_{m >= position} w_m along the time-sorted axis
    log_tail = np.logaddexp.accumulate(log_w[:, ::-1], axis=1)[:, ::-1]
    cols = np.flatnonzero(active)
    log_den = log_tail[:, risk_set_start(ts, ts[cols])]
    if not np.isfinite(log_den).all():
        raise DegenerateRiskSet("kernel-weighted risk set has zero total weight")
    per_record = np.exp(log_w[:, cols] - log_den)

    times, group = np.unique(ts[cols], return_inverse=True)
    mass = np.zeros((k, times.shape[0]))
    np.add.at(mass.T, group, per_record.T)
    return times, mass


def cond_cum_hazard(
    ds: Dataset,
    z_all: ReducedCovariates,
    z,
    cfg: KernelConfig,
    role: EventRole = EventRole.FAILURE,
) -> StepFunction:
    if len(z_all) != ds.n:
        raise DimensionMismatch("reduced covariates do not match the dataset size")
    times, mass = hazard_jumps(
        ds.time, role.indicator(ds.event), z_all.z, np.reshape(z, (1, 2)),
        cfg.resolve(ds.n), cfg.kernel,
    )
    return StepFunction(times, np.cumsum(mass[0]), 0.0)


def product_limit(mass: np.ndarray) -> np.ndarray:
    """Running product of ``1 - jump`` along the last axis, floored at zero."""
    return np.cumprod(np.clip(1.0 - mass, 0.0, None), axis=-1)


def cond_survival(H: StepFunction) -> StepFunction:
    return StepFunction(H.jump_times, product_limit(H.jumps()), 1.0)
