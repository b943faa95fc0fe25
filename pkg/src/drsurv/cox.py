"""Working Cox regressions for the failure and the censoring time.

Both models maximise the per-sample log partial likelihood

    (1/n) sum_i d_i [b'L_i - log sum_{Y_j >= Y_i} exp(b'L_j)]

where ``d_i`` is the event indicator ``R_i`` for the failure model and
``1 - R_i`` for the censoring model. Tied times follow the literal
``Y_j >= Y_i`` risk set, i.e. the Breslow convention.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, risk_set_start
from .errors import DimensionMismatch, NoEventsForRole, NotConverged, SingularInformation

RIDGE = 1e-10
# smallest admissible eigenvalue ratio of the information matrix
RCOND = 1e-8
MAX_HALVINGS = 30


class EventRole(enum.Enum):
    FAILURE = "failure"
    CENSORING = "censoring"

    def indicator(self, event) -> np.ndarray:
        event = np.asarray(event, dtype=float)
        return event if self is EventRole.FAILURE else 1.0 - event


@dataclass(frozen=True)
class CoxOptions:
    tol: float = 1e-8
    max_iter: int = 100


@dataclass(frozen=True, eq=False)
class CoxModelFit:
    coefficients: np.ndarray
    log_likelihood: float
    information: np.ndarray
    gradient: np.ndarray
    converged: bool
    iterations: int
    role: EventRole
    history: tuple = field(default=(), repr=False)


class _RiskSums:
    """Risk-set moments of exp(b'L) for every record, in canonical order."""

    def __init__(self, ds: Dataset, role: EventRole):
        order = ds.canonical_order()
        self.time = ds.time[order]
        self.L = ds.covariates[order]
        self.delta = role.indicator(ds.event[order])
        self.n, self.p = self.L.shape
        self.start = risk_set_start(self.time, self.time)

    def _revcum(self, a):
        return np.cumsum(a[::-1], axis=0)[::-1][self.start]

    def loglik(self, beta):
        eta = self.L @ beta
        shift = eta.max()
        s0 = self._revcum(np.exp(eta - shift))
        return float(np.sum(self.delta * (eta - shift - np.log(s0))) / self.n)

    def derivatives(self, beta):
        eta = self.L @ beta
        shift = eta.max()
        w = np.exp(eta - shift)
        s0 = self._revcum(w)
        s1 = self._revcum(w[:, None] * self.L)
        s2 = self._revcum(w[:, None, None] * self.L[:, :, None] * self.L[:, None, :])
        mean = s1 / s0[:, None]
        ll = float(np.sum(self.delta * (eta - shift - np.log(s0))) / self.n)
        grad = self.delta @ (self.L - mean) / self.n
        cov = s2 / s0[:, None, None] - mean[:, :, None] * mean[:, None, :]
        info = np.einsum("i,ijk->jk", self.delta, cov) / self.n
        return ll, grad, 0.5 * (info + info.T)


def _check_dim(ds: Dataset, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.shape[0] != ds.covariate_dim:
        raise DimensionMismatch(
            f"coefficient vector has length {beta.shape[0]}, covariates have {ds.covariate_dim}"
        )
    return beta


def partial_loglik(ds: Dataset, beta, role: EventRole = EventRole.FAILURE) -> float:
    beta = _check_dim(ds, beta)
    return _RiskSums(ds, role).loglik(beta)


def partial_score_info(ds: Dataset, beta, role: EventRole = EventRole.FAILURE):
    """Analytic gradient and observed information (negative Hessian), per sample."""
    beta = _check_dim(ds, beta)
    _, grad, info = _RiskSums(ds, role).derivatives(beta)
    return grad, info


def solve_information(info: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``info @ x = rhs``, adding a 1e-10 ridge once if ``info`` is singular."""
    info = np.asarray(info, dtype=float)
    if not np.isfinite(info).all():
        raise SingularInformation("information matrix has non-finite entries")
    p = info.shape[0]

    def _ok(m):
        lam = np.linalg.eigvalsh(m)
        top = np.abs(lam).max()
        return top > 0 and lam.min() > RCOND * top

    if not _ok(info):
        info = info + RIDGE * np.eye(p)
        if not _ok(info):
            raise SingularInformation(
                "information matrix is singular; covariates may be collinear"
            )
    return np.linalg.solve(info, rhs)


def fit_cox(
    ds: Dataset,
    role: EventRole = EventRole.FAILURE,
    opts: CoxOptions | None = None,
) -> CoxModelFit:
    """Newton-Raphson with step halving, started at zero.

    Converged means the gradient max-norm is below ``opts.tol`` and the
    Newton step has stopped moving the coefficients. A likelihood that keeps
    increasing toward infinity (monotone likelihood) ends in
    :class:`NotConverged` rather than a spurious optimum: it is recognised by
    the information matrix collapsing relative to its value at zero.
    """
    opts = opts or CoxOptions()
    if ds.covariate_dim < 1:
        raise DimensionMismatch("Cox fit needs at least one covariate")
    sums = _RiskSums(ds, role)
    if not sums.delta.any():
        raise NoEventsForRole(f"no records carry a {role.value} indicator")

    beta = np.zeros(ds.covariate_dim)
    history = []
    step_tol = np.sqrt(opts.tol)
    info_scale = None
    for it in range(opts.max_iter + 1):
        ll, grad, info = sums.derivatives(beta)
        history.append(ll)
        top = np.abs(np.linalg.eigvalsh(info)).max()
        if info_scale is None:
            info_scale = top
        step = solve_information(info, grad)
        gnorm = np.abs(grad).max()
        if gnorm < opts.tol and np.abs(step).max() <= step_tol * (1.0 + np.abs(beta).max()):
            if it > 0 and top <= RCOND * info_scale:
                # gradient and information both decayed to nothing away from zero:
                # the likelihood is still rising toward its supremum at infinity
                fit = CoxModelFit(beta, ll, info, grad, False, it, role, tuple(history))
                raise NotConverged(
                    f"{role.value} model: monotone likelihood, coefficients diverge "
                    f"(|beta|max={np.abs(beta).max():.3g})",
                    fit,
                )
            # one more full Newton step takes the gradient to rounding level, so
            # the score identity holds exactly at the reported coefficients
            polished = beta + step
            ll_p, grad_p, info_p = sums.derivatives(polished)
            if ll_p >= ll and np.abs(grad_p).max() <= gnorm:
                beta, ll, grad, info = polished, ll_p, grad_p, info_p
            return CoxModelFit(beta, ll, info, grad, True, it, role, tuple(history))
        if it == opts.max_iter:
            break
        slack = 64 * np.finfo(float).eps * (1.0 + abs(ll))
        for h in range(MAX_HALVINGS + 1):
            cand = beta + step / 2.0**h
            if sums.loglik(cand) >= ll - slack:
                beta = cand
                break
        else:
            fit = CoxModelFit(beta, ll, info, grad, False, it, role, tuple(history))
            raise NotConverged(
                f"{role.value} model: step halving failed to increase the likelihood "
                f"at iteration {it} (|beta|max={np.abs(beta).max():.3g})",
                fit,
            )

    fit = CoxModelFit(beta, ll, info, grad, False, opts.max_iter, role, tuple(history))
    raise NotConverged(
        f"{role.value} model did not converge in {opts.max_iter} iterations "
        f"(|grad|max={gnorm:.3g}, |beta|max={np.abs(beta).max():.3g})",
        fit,
    )
