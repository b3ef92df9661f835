#!/usr/bin/env python3
"""
Test the tissue color model and lesion posteriors
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest

from src.bayes_seg import TissueColorModel, bayes_posterior, posterior_map, train_tissue_model
from src.errors import DataError
from src.gmm import EmConfig
from src.raster import BinaryMask

EM = EmConfig(n_components=2, max_iters=30, seed=3)

# Test cases
posterior_cases = [
    {"name": "equal likelihoods give the prior", "ll": 0.0, "ls": 0.0, "prior": 0.3, "expected": 0.3},
    {"name": "huge lesion evidence", "ll": -1000.0, "ls": -2000.0, "prior": 0.5, "expected": 1.0},
    {"name": "huge skin evidence", "ll": -2000.0, "ls": -1000.0, "prior": 0.5, "expected": 0.0},
    {"name": "log-odds of one", "ll": 1.0, "ls": 0.0, "prior": 0.5, "expected": 1.0 / (1.0 + np.exp(-1.0))},
]


@pytest.mark.parametrize("case", posterior_cases, ids=lambda c: c["name"])
def test_bayes_posterior(case):
    value = bayes_posterior(case["ll"], case["ls"], case["prior"])
    assert np.isfinite(value)
    assert value == pytest.approx(case["expected"], abs=1e-12)


@pytest.fixture(scope="module")
def trained(synthetic_cases):
    images = [c.image for c in synthetic_cases[:6]]
    masks = [c.mask for c in synthetic_cases[:6]]
    return train_tissue_model(images, masks, EM, pixels_per_class=300), images, masks


def test_estimated_prior_is_pooled_lesion_fraction(trained):
    model, _, masks = trained
    expected = sum(m.area for m in masks) / sum(m.bits.size for m in masks)
    assert model.prior_lesion == pytest.approx(expected)
    assert model.prior_lesion + model.prior_skin == pytest.approx(1.0)


def test_posterior_separates_lesion_from_skin(trained):
    model, images, masks = trained
    for img, mask in zip(images, masks):
        p = posterior_map(model, img).values
        assert p.shape == mask.shape
        assert np.all((p >= 0.0) & (p <= 1.0))
        assert p[mask.bits].mean() > 0.8
        assert p[~mask.bits].mean() < 0.2


def test_swapping_classes_complements_the_posterior(trained):
    model, images, _ = trained
    p = posterior_map(model, images[0]).values
    q = posterior_map(model.swapped(), images[0]).values
    assert np.allclose(p + q, 1.0, atol=1e-12)


def test_fixed_prior(synthetic_cases):
    cases = synthetic_cases[:2]
    model = train_tissue_model([c.image for c in cases], [c.mask for c in cases], EM,
                               fixed_prior=0.5, pixels_per_class=200)
    assert model.prior_lesion == 0.5


def test_missing_tissue_class(synthetic_cases):
    case = synthetic_cases[0]
    full = BinaryMask(np.ones(case.mask.shape))
    with pytest.raises(DataError, match="class has no pixels: skin"):
        train_tissue_model([case.image], [full], EM)
    empty = BinaryMask(np.zeros(case.mask.shape))
    with pytest.raises(DataError, match="class has no pixels: lesion"):
        train_tissue_model([case.image], [empty], EM)


def test_image_and_mask_sizes_must_agree(synthetic_cases):
    case = synthetic_cases[0]
    with pytest.raises(DataError, match="dimension mismatch"):
        train_tissue_model([case.image], [BinaryMask(np.ones((3, 3)))], EM)


def test_model_dict_round_trip(trained):
    model, images, _ = trained
    again = TissueColorModel.from_dict(model.to_dict())
    assert np.array_equal(posterior_map(again, images[1]).values, posterior_map(model, images[1]).values)


def test_priors_are_validated(trained):
    model, _, _ = trained
    with pytest.raises(DataError):
        TissueColorModel(model.lesion_gmm, model.skin_gmm, 0.0, 1.0)
    with pytest.raises(DataError):
        TissueColorModel(model.lesion_gmm, model.skin_gmm, 0.3, 0.3)
