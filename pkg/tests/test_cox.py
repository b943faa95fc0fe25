import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import random_dataset
from drsurv.cox import CoxOptions, EventRole, fit_cox, partial_loglik, partial_score_info
from drsurv.data import Dataset
from drsurv.errors import DimensionMismatch, NoEventsForRole, NotConverged, SingularInformation
from drsurv.simulation import invert_cumhaz

FAIL, CENS = EventRole.FAILURE, EventRole.CENSORING


def as_lists(ds):
    return list(ds.time), list(ds.event), [list(r) for r in ds.covariates]


def test_zero_covariates_value():
    ds = Dataset.from_arrays([1.0, 2.0], [1, 1], [[0.0], [0.0]])
    for b in (-3.0, 0.0, 2.5):
        assert partial_loglik(ds, [b], FAIL) == pytest.approx(-math.log(2) / 2, abs=1e-15)


def test_three_record_value_against_direct_sum():
    ds = Dataset.from_arrays([1.0, 2.0, 3.0], [1, 1, 0], [[0.0], [1.0], [2.0]])
    # term for Y=1: 0.5*0 - log(e^0 + e^0.5 + e^1); term for Y=2: 0.5 - log(e^0.5 + e^1)
    direct = (-math.log(1 + math.exp(0.5) + math.exp(1.0)) + 0.5 - math.log(math.exp(0.5) + math.exp(1.0))) / 3
    assert partial_loglik(ds, [0.5], FAIL) == pytest.approx(direct, abs=1e-14)
    assert partial_loglik(ds, [0.5], FAIL) == pytest.approx(oracles.partial_loglik(*as_lists(ds), [0.5]), abs=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_loglik_matches_nested_loops(seed):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, 8, 3)
    b = rng.normal(size=3)
    for role, name in ((FAIL, "failure"), (CENS, "censoring")):
        assert partial_loglik(ds, b, role) == pytest.approx(
            oracles.partial_loglik(*as_lists(ds), b, name), abs=1e-12
        )


def test_role_symmetry_of_loglik(rng):
    ds = random_dataset(rng, 10, 2)
    flipped = ds.with_events(1 - ds.event)
    b = rng.normal(size=2)
    assert partial_loglik(ds, b, FAIL) == partial_loglik(flipped, b, CENS)


def test_dimension_mismatch():
    ds = Dataset.from_arrays([1.0, 2.0], [1, 1], [[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(DimensionMismatch):
        partial_loglik(ds, [0.1], FAIL)
    with pytest.raises(DimensionMismatch):
        partial_score_info(ds, [0.1, 0.2, 0.3], FAIL)


def test_zero_covariates_score_info():
    ds = Dataset.from_arrays([1.0, 2.0, 3.0], [1, 0, 1], np.zeros((3, 2)))
    grad, info = partial_score_info(ds, [0.4, -1.0], FAIL)
    np.testing.assert_array_equal(grad, 0.0)
    np.testing.assert_array_equal(info, 0.0)


def finite_difference_check(ds, b, role, h=1e-6):
    grad, info = partial_score_info(ds, b, role)
    p = len(b)
    fd_grad = np.empty(p)
    fd_hess = np.empty((p, p))
    for k in range(p):
        e = np.zeros(p)
        e[k] = h
        fd_grad[k] = (partial_loglik(ds, b + e, role) - partial_loglik(ds, b - e, role)) / (2 * h)
        fd_hess[:, k] = (partial_score_info(ds, b + e, role)[0] - partial_score_info(ds, b - e, role)[0]) / (2 * h)
    return grad, info, fd_grad, fd_hess


@pytest.mark.parametrize("seed", range(10))
def test_gradient_and_information_finite_differences(seed):
    rng = np.random.default_rng(100 + seed)
    ds = random_dataset(rng, 5, 2)
    for role in (FAIL, CENS):
        if not role.indicator(ds.event).any():
            continue
        grad, info, fd_grad, fd_hess = finite_difference_check(ds, np.array([0.3, -0.2]), role)
        assert np.abs(grad - fd_grad).max() < 1e-6
        assert np.abs(info + fd_hess).max() < 1e-5
        np.testing.assert_allclose(info, info.T, atol=1e-15)


def test_information_matches_nested_loops(rng):
    ds = random_dataset(rng, 9, 3)
    b = rng.normal(size=3)
    _, info = partial_score_info(ds, b, FAIL)
    np.testing.assert_allclose(info, oracles.information(*as_lists(ds), b), atol=1e-13)


def test_zero_covariates_fit_is_immediate():
    ds = Dataset.from_arrays([1.0, 2.0, 3.0], [1, 0, 1], np.zeros((3, 1)))
    fit = fit_cox(ds, FAIL)
    assert fit.converged
    assert fit.iterations == 0
    np.testing.assert_array_equal(fit.coefficients, 0.0)


def test_recovers_true_coefficient():
    rng = np.random.default_rng(7)
    n = 2000
    x = rng.uniform(size=n)
    T = invert_cumhaz(rng.standard_exponential(n), 1.0 * x, 0.0)
    C = invert_cumhaz(rng.standard_exponential(n), np.zeros(n), -0.5)
    ds = Dataset.from_arrays(np.minimum(T, C), (T <= C).astype(int), x[:, None])
    fit = fit_cox(ds, FAIL)
    assert fit.converged
    assert abs(fit.coefficients[0] - 1.0) < 0.1


def test_monotone_likelihood_not_converged():
    # every failure has the largest covariate in its risk set
    ds = Dataset.from_arrays([1.0, 2.0, 3.0, 4.0], [1, 1, 1, 0], [[3.0], [2.0], [1.0], [0.0]])
    grid = [partial_loglik(ds, [b], FAIL) for b in np.linspace(0, 15, 31)]
    assert np.all(np.diff(grid) > 0)
    assert grid[-1] < 0
    with pytest.raises(NotConverged) as err:
        fit_cox(ds, FAIL)
    assert err.value.fit is not None
    assert abs(err.value.fit.coefficients[0]) > 10


def test_no_events_for_role():
    ds = Dataset.from_arrays([1.0, 2.0], [1, 1], [[0.0], [1.0]])
    with pytest.raises(NoEventsForRole):
        fit_cox(ds, CENS)


def test_collinear_covariates_singular():
    rng = np.random.default_rng(3)
    x = rng.normal(size=20)
    ds = Dataset.from_arrays(rng.exponential(size=20), np.ones(20, dtype=int), np.column_stack([x, 2 * x]))
    with pytest.raises(SingularInformation):
        fit_cox(ds, FAIL)


def test_no_covariates_rejected():
    ds = Dataset.from_arrays([1.0, 2.0], [1, 0])
    with pytest.raises(DimensionMismatch):
        fit_cox(ds, FAIL)


@pytest.fixture
def moderate_ds():
    rng = np.random.default_rng(11)
    n = 80
    x = rng.uniform(size=(n, 2))
    T = invert_cumhaz(rng.standard_exponential(n), x @ [1.0, -1.0], 0.0)
    C = invert_cumhaz(rng.standard_exponential(n), x @ [0.5, 0.5], 0.0)
    return Dataset.from_arrays(np.minimum(T, C), (T <= C).astype(int), x)


def test_fit_properties(moderate_ds):
    fit = fit_cox(moderate_ds, FAIL, CoxOptions(tol=1e-10))
    assert fit.converged
    grad, info = partial_score_info(moderate_ds, fit.coefficients, FAIL)
    assert np.abs(grad).max() < 1e-10
    np.testing.assert_allclose(fit.information, info)
    assert fit.log_likelihood == pytest.approx(partial_loglik(moderate_ds, fit.coefficients, FAIL))
    # the objective never decreases from one Newton iteration to the next
    assert np.all(np.diff(fit.history) >= -1e-14)
    # unimodal along random lines through the optimum
    rng = np.random.default_rng(0)
    for _ in range(5):
        d = rng.normal(size=2)
        vals = [partial_loglik(moderate_ds, fit.coefficients + s * d, FAIL) for s in np.linspace(-2, 2, 41)]
        peak = int(np.argmax(vals))
        assert np.all(np.diff(vals[: peak + 1]) >= 0) and np.all(np.diff(vals[peak:]) <= 0)


def test_fit_permutation_invariant(moderate_ds):
    perm = np.random.default_rng(5).permutation(moderate_ds.n)
    a = fit_cox(moderate_ds, FAIL)
    b = fit_cox(moderate_ds.take(perm), FAIL)
    np.testing.assert_allclose(a.coefficients, b.coefficients, atol=1e-12)


def test_role_duality(moderate_ds):
    a = fit_cox(moderate_ds, CENS)
    b = fit_cox(moderate_ds.with_events(1 - moderate_ds.event), FAIL)
    np.testing.assert_array_equal(a.coefficients, b.coefficients)
    assert a.iterations == b.iterations


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gradient_vanishes_at_fitted_optimum(seed):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, 40, 2, censor_rate=0.3)
    try:
        fit = fit_cox(ds, FAIL)
    except (NotConverged, SingularInformation):
        return
    assert np.abs(fit.gradient).max() < 1e-8
