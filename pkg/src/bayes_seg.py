#!/usr/bin/env python3
"""
Two-class tissue color model and per-pixel lesion posteriors
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.special import expit

from .errors import DataError
from .gmm import EmConfig, Gmm, fit_em, log_pdf_batch
from .raster import BinaryMask, RgbImage, ScalarMap, check_same_dims, sample_pixels

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TissueColorModel:
    """p(x|lesion), p(x|skin) as GMMs plus the class priors"""
    lesion_gmm: Gmm
    skin_gmm: Gmm
    prior_lesion: float
    prior_skin: float

    def __post_init__(self):
        if not (0.0 < self.prior_lesion < 1.0 and 0.0 < self.prior_skin < 1.0):
            raise DataError("class priors must lie in (0,1)")
        if abs(self.prior_lesion + self.prior_skin - 1.0) > 1e-12:
            raise DataError("class priors must sum to 1")

    def swapped(self) -> 'TissueColorModel':
        """Model with the roles of lesion and skin exchanged"""
        return TissueColorModel(self.skin_gmm, self.lesion_gmm, self.prior_skin, self.prior_lesion)

    def to_dict(self) -> Dict:
        return {
            "lesion_gmm": self.lesion_gmm.to_dict(),
            "skin_gmm": self.skin_gmm.to_dict(),
            "prior_lesion": self.prior_lesion,
            "prior_skin": self.prior_skin,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'TissueColorModel':
        return cls(
            lesion_gmm=Gmm.from_dict(data["lesion_gmm"]),
            skin_gmm=Gmm.from_dict(data["skin_gmm"]),
            prior_lesion=data["prior_lesion"],
            prior_skin=data["prior_skin"],
        )


def bayes_posterior(log_lik_lesion, log_lik_skin, prior_lesion: float, prior_skin: Optional[float] = None):
    """
    P(lesion|x) from class log-likelihoods, evaluated as a logistic of the
    log-odds so that neither likelihood is ever exponentiated.
    """
    if prior_skin is None:
        prior_skin = 1.0 - prior_lesion
    log_odds = (np.asarray(log_lik_lesion) + np.log(prior_lesion)) \
        - (np.asarray(log_lik_skin) + np.log(prior_skin))
    return expit(log_odds)


def train_tissue_model(images: Sequence[RgbImage], truth_masks: Sequence[BinaryMask],
                       cfg: EmConfig, fixed_prior: Optional[float] = None,
                       pixels_per_class: int = 2000) -> TissueColorModel:
    """
    Fit lesion and skin GMMs from truth-masked training pixels.

    Args:
        images: Training images at working resolution
        truth_masks: Matching truth masks
        cfg: EM settings shared by both mixtures
        fixed_prior: Lesion prior to use; None estimates it as the pooled lesion-pixel fraction
        pixels_per_class: Per-image cap on harvested pixels of each class

    Returns:
        TissueColorModel
    """
    if len(images) != len(truth_masks):
        raise DataError(f"{len(images)} images but {len(truth_masks)} masks")
    if not images:
        raise DataError("no training images")

    lesion_samples: List[np.ndarray] = []
    skin_samples: List[np.ndarray] = []
    lesion_pixels = 0
    total_pixels = 0
    for i, (img, mask) in enumerate(zip(images, truth_masks)):
        check_same_dims(img, mask, f"training image {i} and its mask")
        area = mask.area
        lesion_pixels += area
        total_pixels += mask.bits.size
        if area > 0:
            lesion_samples.append(sample_pixels(img, mask, True, pixels_per_class, cfg.seed + 2 * i))
        if area < mask.bits.size:
            skin_samples.append(sample_pixels(img, mask, False, pixels_per_class, cfg.seed + 2 * i + 1))

    if not lesion_samples:
        raise DataError("class has no pixels: lesion")
    if not skin_samples:
        raise DataError("class has no pixels: skin")

    lesion_data = np.concatenate(lesion_samples)
    skin_data = np.concatenate(skin_samples)
    logger.info("Fitting tissue GMMs on %d lesion / %d skin pixels from %d images",
                len(lesion_data), len(skin_data), len(images))
    lesion_gmm = fit_em(lesion_data, cfg)
    skin_gmm = fit_em(skin_data, cfg)

    if fixed_prior is None:
        prior_lesion = lesion_pixels / total_pixels
    else:
        prior_lesion = float(fixed_prior)
    return TissueColorModel(lesion_gmm, skin_gmm, prior_lesion, 1.0 - prior_lesion)


def posterior_map(model: TissueColorModel, img: RgbImage) -> ScalarMap:
    """Per-pixel P(lesion | rgb) at the image's own resolution"""
    pixels = img.pixels.reshape(-1, 3)
    ll = log_pdf_batch(model.lesion_gmm, pixels)
    ls = log_pdf_batch(model.skin_gmm, pixels)
    posterior = bayes_posterior(ll, ls, model.prior_lesion, model.prior_skin)
    return ScalarMap(posterior.reshape(img.height, img.width))
