"""Influence-function standard errors for the adjusted survival estimator.

The influence value of record ``i`` at time ``t`` is

    exp(-H_T(t|Z_i)) - S_n(t)
    - R_i I(Y_i <= t) exp(H_T(Y_i|Z_i) + H_C(Y_i|Z_i) - H_T(t|Z_i))
    + sum_{u <= t ^ Y_i} exp(H_T(u|Z_i) + H_C(u|Z_i) - H_T(t|Z_i)) dH_T(u|Z_i)
    + v_gamma' S_gamma(i) + v_beta' S_beta(i)

with ``H_T``, ``H_C`` the kernel hazards of both roles, ``S_beta``/``S_gamma``
the influence functions of the working-model coefficients and ``v_beta``/
``v_gamma`` forward differences of the estimator in the coefficients.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .cox import CoxModelFit, EventRole, solve_information
from .data import Dataset
from .estimator import EstimatorConfig, FittedEstimator, survival_at_fixed_coeffs
from .errors import DimensionMismatch


@dataclass(frozen=True)
class PerturbationConfig:
    """Finite-difference step ``eps_n``; defaults to ``epsilon_scale * n**(-5/12)``."""

    epsilon: float | None = None
    epsilon_scale: float = 1.0

    def __post_init__(self):
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.epsilon_scale > 0:
            raise ValueError("epsilon_scale must be positive")

    def resolve(self, n: int, bandwidth: float | None = None) -> float:
        eps = self.epsilon if self.epsilon is not None else self.epsilon_scale * n ** (-5.0 / 12.0)
        if bandwidth is not None and eps >= bandwidth:
            warnings.warn(
                f"perturbation step {eps:.3g} is not small relative to bandwidth {bandwidth:.3g}",
                stacklevel=2,
            )
        return float(eps)


@dataclass(frozen=True, eq=False)
class InfluenceBundle:
    t: float
    a_values: np.ndarray
    v_beta: np.ndarray
    v_gamma: np.ndarray
    s_hat: float


def score_influence_matrix(ds: Dataset, fit: CoxModelFit, role: EventRole, records=None) -> np.ndarray:
    """Estimated influence function of a working-model coefficient vector.

    Evaluated at each of ``records`` (a ``Dataset`` or ``(time, event,
    covariates)`` triples; defaults to the sample itself). ``ds`` must hold
    exactly the covariates the model was fitted on. Returns ``(k, p)``.
    """
    L = ds.covariates
    b = np.asarray(fit.coefficients, dtype=float)
    if b.shape[0] != L.shape[1]:
        raise DimensionMismatch("fit and dataset covariate dimensions differ")
    if records is None:
        y, r, l = ds.time, ds.event, L
    elif isinstance(records, Dataset):
        y, r, l = records.time, records.event, records.covariates
    else:
        y = np.array([rec[0] for rec in records], dtype=float)
        r = np.array([rec[1] for rec in records], dtype=float)
        l = np.array([np.asarray(rec[2], dtype=float) for rec in records]).reshape(len(y), -1)
    if l.shape[1] != L.shape[1]:
        raise DimensionMismatch("record covariates do not match the fitted model")

    n = ds.n
    order = np.argsort(ds.time, kind="stable")
    ts, Ls, ds_delta = ds.time[order], L[order], role.indicator(ds.event)[order]
    eta = Ls @ b
    shift = eta.max()
    w = np.exp(eta - shift)
    # risk-set means P_n[I(Y >= s) e^{b'L}] and P_n[I(Y >= s) L e^{b'L}], s = each sorted Y
    tail0 = np.concatenate((np.cumsum(w[::-1])[::-1], [0.0])) / n
    tail1 = np.vstack((np.cumsum((w[:, None] * Ls)[::-1], axis=0)[::-1], np.zeros(L.shape[1]))) / n

    def risk(s):
        i = np.searchsorted(ts, s, side="left")
        return tail0[i], tail1[i]

    s0_k, s1_k = risk(ts)
    # compensator pieces P_n[d I(Y <= y) / S0(Y)] and P_n[d I(Y <= y) S1(Y) / S0(Y)^2]
    comp_a = np.concatenate(([0.0], np.cumsum(ds_delta / s0_k))) / n
    comp_b = np.vstack((np.zeros(L.shape[1]), np.cumsum((ds_delta / s0_k**2)[:, None] * s1_k, axis=0))) / n

    s0_y, s1_y = risk(y)
    upto = np.searchsorted(ts, y, side="right")
    d = role.indicator(r)
    w_l = np.exp(l @ b - shift)
    bracket = (
        d[:, None] * (l - s1_y / s0_y[:, None])
        - l * (w_l * comp_a[upto])[:, None]
        + w_l[:, None] * comp_b[upto]
    )
    return solve_information(fit.information, bracket.T).T


def score_influence(ds: Dataset, fit: CoxModelFit, role: EventRole, record) -> np.ndarray:
    return score_influence_matrix(ds, fit, role, [record])[0]


def perturbation_derivative(ds: Dataset, beta_hat, gamma_hat, cfg: EstimatorConfig, pcfg: PerturbationConfig, t):
    """Forward differences of the estimator in each coefficient direction.

    Returns ``(v_beta, v_gamma)`` with shapes ``(p,)``/``(p',)`` for scalar
    ``t`` and ``(len(t), p)``/``(len(t), p')`` for an array of times.
    """
    beta_hat = np.asarray(beta_hat, dtype=float)
    gamma_hat = np.asarray(gamma_hat, dtype=float)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    eps = pcfg.resolve(ds.n, cfg.kernel.resolve(ds.n))
    base = survival_at_fixed_coeffs(ds, beta_hat, gamma_hat, cfg)(t_arr)

    def column(b, g):
        return (survival_at_fixed_coeffs(ds, b, g, cfg)(t_arr) - base) / eps

    eye_b, eye_g = np.eye(beta_hat.size), np.eye(gamma_hat.size)
    v_beta = np.column_stack([column(beta_hat + eps * e, gamma_hat) for e in eye_b]) if beta_hat.size else np.empty((t_arr.size, 0))
    v_gamma = np.column_stack([column(beta_hat, gamma_hat + eps * e) for e in eye_g]) if gamma_hat.size else np.empty((t_arr.size, 0))
    if np.ndim(t) == 0:
        return v_beta[0], v_gamma[0]
    return v_beta, v_gamma


def _pad_cum(mass):
    return np.hstack((np.zeros((mass.shape[0], 1)), np.cumsum(mass, axis=1)))


def _rowwise(padded, times, s, side="right"):
    """Row ``i`` of a padded cumulative step matrix evaluated at ``s[i]``."""
    idx = np.searchsorted(times, s, side=side)
    return padded[np.arange(padded.shape[0]), idx]


def influence_terms(model: FittedEstimator, t: float) -> np.ndarray:
    """Plug-in part of the influence values (all but the coefficient terms), canonical order."""
    ds = model.ds
    n = ds.n
    tT, mT = model.times_T, model.mass_T
    tC, mC = model.censoring_hazard
    cumT, cumC = _pad_cum(mT), _pad_cum(mC)

    rows_t = np.full(n, float(t))
    hT_t = _rowwise(cumT, tT, rows_t)
    hT_y = _rowwise(cumT, tT, ds.time)
    hC_y = _rowwise(cumC, tC, ds.time)
    s_hat = float(model.curve(t))

    first = np.exp(-hT_t)
    observed = (ds.event == 1) & (ds.time <= t)
    at_failure = np.where(observed, np.exp(hT_y + hC_y - hT_t), 0.0)

    # H_C at each failure-role jump time, right-continuous
    hC_u = cumC[:, np.searchsorted(tC, tT, side="right")]
    upper = np.minimum(ds.time, t)
    inside = tT[None, :] <= upper[:, None]
    expo = np.where(inside, cumT[:, 1:] + hC_u - hT_t[:, None], -np.inf)
    integral = np.sum(np.exp(expo) * mT, axis=1)
    return first - s_hat - at_failure + integral


def influence_at(model: FittedEstimator, t: float, pcfg: PerturbationConfig | None = None) -> InfluenceBundle:
    """Estimated influence value of every record at time ``t`` (caller's record order)."""
    if model.fit_T is None or model.fit_C is None:
        raise ValueError("influence values need an estimator with fitted working models")
    pcfg = pcfg or PerturbationConfig()
    cfg = model.cfg
    v_beta, v_gamma = perturbation_derivative(model.ds, model.beta, model.gamma, cfg, pcfg, float(t))
    s_beta = score_influence_matrix(model.ds.select(cfg.failure_columns), model.fit_T, EventRole.FAILURE)
    s_gamma = score_influence_matrix(model.ds.select(cfg.censoring_columns), model.fit_C, EventRole.CENSORING)
    a = influence_terms(model, t) + s_gamma @ v_gamma + s_beta @ v_beta
    return InfluenceBundle(float(t), model.unpermute(a), v_beta, v_gamma, float(model.curve(t)))


def normal_quantile(level: float) -> float:
    return NormalDist().inv_cdf((1.0 + level) / 2.0)


def pointwise_se_ci(bundle: InfluenceBundle, s_hat: float | None = None, level: float = 0.95):
    """Wald interval from the mean squared influence value, clipped to [0, 1]."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    a = np.asarray(bundle.a_values, dtype=float)
    if a.size < 2:
        raise ValueError("need at least two influence values")
    s_hat = bundle.s_hat if s_hat is None else float(s_hat)
    se = float(np.sqrt(np.mean(a * a) / a.size))
    half = normal_quantile(level) * se
    return se, max(0.0, s_hat - half), min(1.0, s_hat + half)
