#!/usr/bin/env python3
"""
Test mixture densities and the EM fit
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from src.errors import DataError, NumericalError
from src.gmm import (_MIN_RIDGE, EmConfig, GaussianComponent, Gmm, _regularize, fit_em,
                     fit_em_with_history, log_pdf, log_pdf_batch, responsibilities)


def two_cluster_data(n=400, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal([0.2, 0.2, 0.2], 0.03, size=(n, 3))
    b = rng.normal([0.8, 0.6, 0.5], 0.03, size=(n, 3))
    return np.vstack([a, b])


def standard_model():
    return Gmm((GaussianComponent(1.0, np.zeros(3), np.eye(3)),))


# Test cases
log_pdf_cases = [
    {"name": "origin", "x": [0.0, 0.0, 0.0]},
    {"name": "unit offset", "x": [1.0, 0.0, 0.0]},
    {"name": "far point", "x": [3.0, -2.0, 1.0]},
]


@pytest.mark.parametrize("case", log_pdf_cases, ids=lambda c: c["name"])
def test_log_pdf_matches_scipy(case):
    mixture = Gmm((
        GaussianComponent(0.3, [0.0, 0.0, 0.0], np.eye(3)),
        GaussianComponent(0.7, [1.0, 1.0, 1.0], np.diag([0.5, 1.0, 2.0])),
    ))
    expected = np.log(0.3 * multivariate_normal([0, 0, 0], np.eye(3)).pdf(case["x"])
                      + 0.7 * multivariate_normal([1, 1, 1], np.diag([0.5, 1.0, 2.0])).pdf(case["x"]))
    assert log_pdf(mixture, case["x"]) == pytest.approx(expected, rel=1e-9)


def test_log_pdf_far_from_every_component_stays_finite():
    value = log_pdf(standard_model(), [1e3, 1e3, 1e3])
    assert np.isfinite(value)
    assert value < -1e5


def test_responsibilities_sum_to_one():
    mixture = Gmm((
        GaussianComponent(0.5, [0.0, 0.0, 0.0], np.eye(3)),
        GaussianComponent(0.5, [4.0, 0.0, 0.0], np.eye(3)),
    ))
    r = responsibilities(mixture, [0.0, 0.0, 0.0])
    assert r.sum() == pytest.approx(1.0)
    assert r[0] > 0.99


def test_mixture_validation():
    with pytest.raises(DataError):
        Gmm((GaussianComponent(0.4, np.zeros(3), np.eye(3)),))
    with pytest.raises(DataError):
        GaussianComponent(0.0, np.zeros(3), np.eye(3))
    with pytest.raises(NumericalError, match="degenerate component"):
        Gmm((GaussianComponent(1.0, np.zeros(3), np.zeros((3, 3))),)).component_log_densities(np.zeros((1, 3)))


def test_fit_recovers_two_clusters():
    model = fit_em(two_cluster_data(), EmConfig(n_components=2, seed=1))
    means = sorted(c.mean.tolist() for c in model.components)
    assert np.allclose(means[0], [0.2, 0.2, 0.2], atol=0.01)
    assert np.allclose(means[1], [0.8, 0.6, 0.5], atol=0.01)
    assert np.allclose(model.weights, 0.5, atol=0.02)


def test_regularized_history_stays_within_a_relative_bound():
    # the ridge makes each M-step an inexact maximizer, so only a relative bound holds
    _, history = fit_em_with_history(two_cluster_data(seed=3), EmConfig(n_components=3, max_iters=40, seed=2))
    steps = np.diff(history)
    assert np.all(steps >= -1e-6 * np.abs(np.asarray(history[:-1])))


def test_fit_is_reproducible():
    data = two_cluster_data(seed=4)
    a = fit_em(data, EmConfig(n_components=2, seed=5))
    b = fit_em(data, EmConfig(n_components=2, seed=5))
    assert np.array_equal(log_pdf_batch(a, data), log_pdf_batch(b, data))


def test_single_component_is_the_sample_gaussian():
    data = np.random.default_rng(6).normal(0.5, 0.1, size=(500, 3))
    model = fit_em(data, EmConfig(n_components=1, cov_regularizer=1e-6))
    assert np.allclose(model.components[0].mean, data.mean(axis=0), atol=1e-9)
    mle = np.cov(data, rowvar=False, bias=True)
    expected = mle + 1e-6 * np.trace(mle) / 3 * np.eye(3)
    assert np.allclose(model.components[0].covariance, expected, rtol=1e-9, atol=1e-15)


def test_fit_needs_enough_distinct_points():
    with pytest.raises(DataError, match="insufficient data"):
        fit_em(np.zeros((10, 3)), EmConfig(n_components=2))
    with pytest.raises(DataError, match="insufficient data"):
        fit_em(np.random.default_rng(0).random((3, 3)), EmConfig(n_components=5))


def test_dict_round_trip_preserves_density():
    model = fit_em(two_cluster_data(), EmConfig(n_components=2))
    again = Gmm.from_dict(model.to_dict())
    x = np.array([[0.5, 0.4, 0.35]])
    assert log_pdf_batch(again, x)[0] == log_pdf_batch(model, x)[0]


def random_cluster_data(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 5))
    centers = rng.uniform(0.2, 0.8, size=(k, 3))
    spreads = rng.uniform(0.02, 0.1, size=k)
    return np.vstack([rng.normal(c, s, size=(80, 3)) for c, s in zip(centers, spreads)]), k


@pytest.mark.parametrize("seed", range(100))
def test_unregularized_history_never_decreases(seed):
    data, k = random_cluster_data(seed)
    _, history = fit_em_with_history(data, EmConfig(n_components=k, max_iters=60, rel_tol=1e-10,
                                                    cov_regularizer=0.0, seed=seed))
    assert np.all(np.diff(history) >= -1e-9)


integral_cases = [
    {"name": "single isotropic", "components": [(1.0, [0.5, 0.5, 0.5], np.eye(3) * 0.02)]},
    {"name": "correlated full covariance",
     "components": [(1.0, [0.4, 0.5, 0.6], [[0.04, 0.01, 0.0], [0.01, 0.02, 0.005], [0.0, 0.005, 0.03]])]},
    {"name": "three components",
     "components": [(0.2, [0.3, 0.3, 0.3], np.eye(3) * 0.015),
                    (0.5, [0.7, 0.4, 0.5], np.diag([0.03, 0.02, 0.025])),
                    (0.3, [0.5, 0.7, 0.4], [[0.02, -0.005, 0.0], [-0.005, 0.02, 0.0], [0.0, 0.0, 0.02]])]},
]


@pytest.mark.parametrize("case", integral_cases, ids=lambda c: c["name"])
def test_density_integrates_to_one(case):
    model = Gmm(tuple(GaussianComponent(w, m, c) for w, m, c in case["components"]))
    step = 0.03
    axis = np.arange(-1.0, 2.0, step) + step / 2
    grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    total = np.exp(log_pdf_batch(model, grid)).sum() * step ** 3
    assert total == pytest.approx(1.0, abs=1e-4)


def test_monte_carlo_mass_matches():
    model = Gmm((GaussianComponent(0.6, [0.3, 0.4, 0.5], np.eye(3) * 0.01),
                 GaussianComponent(0.4, [0.7, 0.6, 0.5], np.eye(3) * 0.02)))
    rng = np.random.default_rng(12)
    proposal = multivariate_normal([0.5, 0.5, 0.5], np.eye(3) * 0.1)
    x = proposal.rvs(size=400000, random_state=rng)
    weights = np.exp(log_pdf_batch(model, x) - proposal.logpdf(x))
    assert weights.mean() == pytest.approx(1.0, abs=0.03)


def test_ridge_floor_only_lifts_singular_covariances():
    cov = np.diag([0.01, 0.02, 0.03])
    assert np.array_equal(_regularize(cov, 0.0), cov)
    lifted = _regularize(np.zeros((3, 3)), 0.0)
    assert np.linalg.eigvalsh(lifted).min() == pytest.approx(_MIN_RIDGE, rel=1e-6)
    ridged = _regularize(cov, 1e-3)
    assert np.allclose(ridged - cov, 1e-3 * 0.06 / 3 * np.eye(3), rtol=1e-12, atol=0)
