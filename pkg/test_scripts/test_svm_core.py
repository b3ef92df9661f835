#!/usr/bin/env python3
"""
Test the SMO-trained classifier and regressor, Platt scaling and one-vs-rest
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest
from sklearn.svm import SVC

from src.errors import DataError
from src.evaluation import CLASSES
from src.svm_core import (Kernel, SvcBinary, SvcMulticlass, SvmConfig, fit_scaler, multiclass_fit,
                          multiclass_predict, multiclass_predict_batch, multiclass_scores,
                          platt_calibrate, platt_probability, scale_gamma, svc_decision,
                          svc_dual_objective, svc_fit, svr_fit, svr_predict)

LINEAR = Kernel("linear")


def blobs(seed=0, per_class=12, classes=("MEL", "NV", "BCC")):
    rng = np.random.default_rng(seed)
    centers = {"MEL": (0.0, 0.0), "NV": (4.0, 0.0), "BCC": (0.0, 4.0), "DF": (4.0, 4.0)}
    X = np.vstack([rng.normal(centers[c], 0.3, size=(per_class, 2)) for c in classes])
    labels = [c for c in classes for _ in range(per_class)]
    return X, labels


# Test cases
kernel_cases = [
    {"name": "unknown kind", "kind": "poly", "gamma": 1.0},
    {"name": "rbf without gamma", "kind": "rbf", "gamma": None},
    {"name": "rbf with negative gamma", "kind": "rbf", "gamma": -1.0},
]

degenerate_cases = [
    {"name": "all positive", "y": [1, 1, 1]},
    {"name": "all negative", "y": [-1, -1, -1]},
    {"name": "labels outside +-1", "y": [0, 1, -1]},
]


@pytest.mark.parametrize("case", kernel_cases, ids=lambda c: c["name"])
def test_invalid_kernels(case):
    with pytest.raises(DataError):
        Kernel(case["kind"], case["gamma"])


def test_symmetric_pair_has_the_textbook_solution():
    model = svc_fit([[-1.0], [1.0]], [-1, 1], LINEAR, C=10.0, tol=1e-9)
    assert np.allclose(sorted(model.dual_coefs), [-0.5, 0.5])
    assert model.bias == pytest.approx(0.0, abs=1e-12)
    assert svc_decision(model, [1.0]) == pytest.approx(1.0)
    assert svc_decision(model, [0.0]) == pytest.approx(0.0, abs=1e-12)
    assert svc_dual_objective(model) == pytest.approx(0.5)


def test_xor_needs_the_rbf_kernel():
    X = [[0, 0], [1, 1], [0, 1], [1, 0]]
    y = [-1, -1, 1, 1]
    model = svc_fit(X, y, Kernel("rbf", 1.0), C=10.0)
    assert np.all(np.sign(model.decision(X)) == y)


@pytest.mark.parametrize("case", degenerate_cases, ids=lambda c: c["name"])
def test_degenerate_labels(case):
    with pytest.raises(DataError):
        svc_fit([[0.0], [1.0], [2.0]], case["y"], LINEAR)


def test_solution_is_feasible_with_class_weights():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(40, 3))
    y = np.where(X[:, 0] + 0.5 * rng.normal(size=40) > 0, 1.0, -1.0)
    model = svc_fit(X, y, Kernel("rbf", 0.5), C=1.0, class_weights=(2.0, 0.5))
    assert abs(model.dual_coefs.sum()) < 1e-6
    assert (model.c_pos, model.c_neg) == (2.0, 0.5)
    assert model.dual_coefs.max() <= 2.0 + 1e-12
    assert model.dual_coefs.min() >= -0.5 - 1e-12


def test_matches_an_independent_solver():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(30, 2))
    y = np.where(X[:, 0] - X[:, 1] + 0.4 * rng.normal(size=30) > 0, 1.0, -1.0)
    ours = svc_fit(X, y, Kernel("rbf", 0.5), C=1.0, tol=1e-6)
    reference = SVC(kernel="rbf", gamma=0.5, C=1.0, tol=1e-6).fit(X, y)

    ref_coefs = reference.dual_coef_.ravel()
    ref_sv = reference.support_vectors_
    gram = Kernel("rbf", 0.5).matrix(ref_sv, ref_sv)
    ref_objective = np.sum(np.abs(ref_coefs)) - 0.5 * ref_coefs @ gram @ ref_coefs
    assert svc_dual_objective(ours) == pytest.approx(ref_objective, rel=1e-3)
    assert np.allclose(ours.decision(X), reference.decision_function(X), atol=1e-2)


def test_binary_model_dict_round_trip():
    model = svc_fit([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]], [-1, 1, 1], LINEAR)
    again = SvcBinary.from_dict(model.to_dict())
    assert np.array_equal(again.decision([[0.3, 0.7]]), model.decision([[0.3, 0.7]]))


def test_query_dimension_is_checked():
    model = svc_fit([[0.0, 0.0], [1.0, 1.0]], [-1, 1], LINEAR)
    with pytest.raises(DataError, match="dimension mismatch"):
        model.decision([[1.0, 2.0, 3.0]])


def test_svr_on_constant_targets_predicts_the_constant():
    X = np.random.default_rng(3).random((15, 2))
    model = svr_fit(X, np.full(15, 0.3), Kernel("rbf", 1.0), C=10.0, epsilon=0.02)
    assert np.allclose(model.predict(X), 0.3, atol=1e-9)
    assert model.dual_coefs.size == 0


def test_svr_fits_a_line_within_the_tube():
    x = np.linspace(0.0, 1.0, 21)
    model = svr_fit(x.reshape(-1, 1), x, LINEAR, C=10.0, epsilon=0.01, tol=1e-6)
    assert np.max(np.abs(model.predict(x.reshape(-1, 1)) - x)) < 0.02
    assert svr_predict(model, [0.5]) == pytest.approx(0.5, abs=0.02)
    assert abs(model.dual_coefs.sum()) < 1e-6


def test_platt_direction_and_symmetry():
    d = np.array([-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0])
    labels = np.array([-1, -1, -1, 1, -1, 1, 1, 1])
    a, b = platt_calibrate(d, labels)
    assert a < 0
    assert b == pytest.approx(0.0, abs=1e-6)
    p = platt_probability(a, b, [-2.0, 0.0, 2.0])
    assert p[0] < 0.5 < p[2]
    assert p[1] == pytest.approx(0.5, abs=1e-6)


def test_platt_needs_both_labels():
    with pytest.raises(DataError):
        platt_calibrate([0.1, 0.2], [1, 1])


def test_scaling_helpers():
    assert scale_gamma(np.ones((4, 3))) == 1.0
    scaler = fit_scaler(np.array([[1.0, 5.0], [3.0, 5.0]]))
    assert np.allclose(scaler.stds, [1.0, 1.0])
    assert np.allclose(scaler.transform([[2.0, 5.0]]), [[0.0, 0.0]])


@pytest.fixture(scope="module")
def multiclass():
    X, labels = blobs()
    return multiclass_fit(X, labels, SvmConfig(C=10.0, seed=4)), X, labels


def test_multiclass_learns_separated_blobs(multiclass):
    model, X, labels = multiclass
    predicted, scores = multiclass_predict_batch(model, X)
    assert predicted == labels
    assert scores.shape == (len(labels), len(CLASSES))
    assert np.allclose(scores.sum(axis=1), 1.0)


def test_absent_classes_score_zero(multiclass):
    model, X, _ = multiclass
    assert model.classes == ("MEL", "NV", "BCC")
    scores = multiclass_scores(model, X)
    for name in ("AKIEC", "BKL", "DF", "VASC"):
        assert np.all(scores[:, CLASSES.index(name)] == 0.0)


def test_single_prediction(multiclass):
    model, _, _ = multiclass
    label, scores = multiclass_predict(model, [4.0, 0.1])
    assert label == "NV"
    assert scores.shape == (len(CLASSES),)


def test_multiclass_dict_round_trip(multiclass):
    model, X, _ = multiclass
    again = SvcMulticlass.from_dict(model.to_dict())
    assert np.array_equal(multiclass_scores(again, X), multiclass_scores(model, X))


def test_threads_do_not_change_the_model():
    X, labels = blobs(seed=5, per_class=8, classes=("MEL", "NV", "BCC", "DF"))
    one = multiclass_fit(X, labels, SvmConfig(seed=1, threads=1))
    four = multiclass_fit(X, labels, SvmConfig(seed=1, threads=4))
    assert np.array_equal(multiclass_scores(one, X), multiclass_scores(four, X))


def test_multiclass_label_checks():
    X, labels = blobs(per_class=4)
    with pytest.raises(DataError, match="unknown class labels"):
        multiclass_fit(X, labels[:-1] + ["XYZ"])
    with pytest.raises(DataError, match="degenerate labels"):
        multiclass_fit(X, ["MEL"] * len(labels))


# ============================================================================
# SOLVER CROSS-CHECKS
# ============================================================================

def tiny_problem(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(6, 13))
    X = rng.normal(size=(n, 2))
    y = np.where(X[:, 0] + 0.8 * rng.normal(size=n) > 0, 1.0, -1.0)
    y[0], y[1] = 1.0, -1.0
    return X, y, float(rng.choice([0.5, 1.0, 5.0]))


def reference_dual_objective(reference, kernel):
    coefs = reference.dual_coef_.ravel()
    sv = reference.support_vectors_
    return float(np.sum(np.abs(coefs)) - 0.5 * coefs @ kernel.matrix(sv, sv) @ coefs)


@pytest.mark.parametrize("seed", range(50))
def test_dual_objective_on_tiny_problems(seed):
    X, y, C = tiny_problem(seed)
    kernel = Kernel("rbf", 0.5)
    ours = svc_fit(X, y, kernel, C=C, tol=1e-6)
    reference = SVC(kernel="rbf", gamma=0.5, C=C, tol=1e-6).fit(X, y)
    assert svc_dual_objective(ours) == pytest.approx(reference_dual_objective(reference, kernel),
                                                     rel=1e-3, abs=1e-6)
    assert abs(ours.dual_coefs.sum()) < 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_duplicating_positives_equals_doubling_their_weight(seed):
    X, y, C = tiny_problem(seed)
    kernel = Kernel("rbf", 0.5)
    positives = y > 0
    X_dup = np.vstack([X, X[positives]])
    y_dup = np.concatenate([y, y[positives]])
    duplicated = svc_fit(X_dup, y_dup, kernel, C=C, tol=1e-9)
    weighted = svc_fit(X, y, kernel, C=C, class_weights=(2.0, 1.0), tol=1e-9)
    grid = np.random.default_rng(seed).normal(size=(20, 2))
    assert np.allclose(duplicated.decision(grid), weighted.decision(grid), atol=1e-5)
    assert svc_dual_objective(duplicated) == pytest.approx(svc_dual_objective(weighted), rel=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_training_order_does_not_matter(seed):
    X, y, C = tiny_problem(seed)
    kernel = Kernel("rbf", 0.5)
    order = np.random.default_rng(seed).permutation(len(y))
    forward = svc_fit(X, y, kernel, C=C, tol=1e-9)
    shuffled = svc_fit(X[order], y[order], kernel, C=C, tol=1e-9)
    grid = np.random.default_rng(seed + 1).normal(size=(20, 2))
    assert np.allclose(forward.decision(grid), shuffled.decision(grid), atol=1e-5)

    reordered = SvcBinary.from_dict({**forward.to_dict(),
                                     "support_vectors": forward.support_vectors[::-1].tolist(),
                                     "dual_coefs": forward.dual_coefs[::-1].tolist()})
    assert np.allclose(reordered.decision(grid), forward.decision(grid), atol=1e-12)


platt_recovery_cases = [
    {"name": "steep with offset", "A": -1.5, "B": 0.3},
    {"name": "shallow", "A": -0.7, "B": -0.4},
]


@pytest.mark.parametrize("case", platt_recovery_cases, ids=lambda c: c["name"])
def test_platt_recovers_the_generating_sigmoid(case):
    rng = np.random.default_rng(21)
    d = rng.uniform(-4.0, 4.0, size=10000)
    p = 1.0 / (1.0 + np.exp(case["A"] * d + case["B"]))
    labels = np.where(rng.random(d.size) < p, 1, -1)
    a, b = platt_calibrate(d, labels)
    assert a == pytest.approx(case["A"], abs=0.15)
    assert b == pytest.approx(case["B"], abs=0.15)
