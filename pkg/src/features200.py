#!/usr/bin/env python3
"""
200-dimension hand-crafted descriptor of an (image, lesion mask) pair.

Layout, per color channel R, G, B (62 each):
    12 first-order statistics inside the lesion
    12 first-order statistics over the surrounding border band
     4 lesion/band contrast features
    16 bins of the normalized inside histogram
     6 Sobel-magnitude statistics inside the lesion
    12 co-occurrence features (6 for horizontal, 6 for vertical neighbors)
followed by 14 channel-independent shape features of the mask.
"""
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy import stats
from skimage.feature import graycomatrix, graycoprops
from skimage.filters import sobel
from skimage.measure import regionprops

from .errors import DataError
from .morphology import close, dilate, disk, fill_holes
from .raster import BinaryMask, RgbImage, check_same_dims, perimeter, round_half_up

N_FEATURES = 200
CHANNELS = ("R", "G", "B")
FIRST_ORDER = ("mean", "std", "skewness", "kurtosis", "min", "max", "median",
               "p10", "p25", "p75", "p90", "entropy")
CONTRAST = ("diff", "ratio", "norm_diff", "hist_intersection")
GRADIENT = ("grad_mean", "grad_std", "grad_max", "grad_median", "grad_p90", "edge_density")
GLCM_PROPS = ("contrast", "correlation", "energy", "homogeneity", "entropy", "dissimilarity")
GLCM_DIRECTIONS = (("h", 0.0), ("v", np.pi / 2))
SHAPE = ("area_fraction", "perimeter_per_diag", "compactness", "solidity", "extent",
         "eccentricity", "equiv_diameter_per_diag", "major_axis_per_diag", "minor_axis_per_diag",
         "sin_2theta", "cos_2theta", "centroid_dx", "centroid_dy", "border_irregularity")

ENTROPY_BINS = 32
HIST_BINS = 16
GLCM_LEVELS = 8
EDGE_LEVEL = 0.1
EPS = 1e-6


@dataclass(frozen=True, eq=False)
class FeatureVector200:
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).ravel()
        if values.shape[0] != N_FEATURES:
            raise DataError(f"feature vector must have {N_FEATURES} entries, got {values.shape[0]}")
        if not np.all(np.isfinite(values)):
            raise DataError("feature vector has non-finite entries")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, eq=False)
class BorderBand:
    """Ring of skin around the lesion: dilate(mask, r) minus mask"""
    ring: BinaryMask
    radius: int


def band_radius(diagonal: float) -> int:
    return max(5, round_half_up(0.02 * diagonal))


def border_band(mask: BinaryMask) -> BorderBand:
    r = band_radius(mask.diagonal)
    grown = dilate(mask, disk(r))
    return BorderBand(BinaryMask(grown.bits & ~mask.bits), r)


def feature_names() -> List[str]:
    names = []
    for c in CHANNELS:
        names += [f"{c}_in_{s}" for s in FIRST_ORDER]
        names += [f"{c}_band_{s}" for s in FIRST_ORDER]
        names += [f"{c}_{s}" for s in CONTRAST]
        names += [f"{c}_hist{b:02d}" for b in range(HIST_BINS)]
        names += [f"{c}_{s}" for s in GRADIENT]
        names += [f"{c}_glcm_{d}_{p}" for d, _ in GLCM_DIRECTIONS for p in GLCM_PROPS]
    names += [f"shape_{s}" for s in SHAPE]
    return names


# ============================================================================
# PER-CHANNEL FEATURES
# ============================================================================

def _first_order(values: np.ndarray) -> List[float]:
    if values.size == 0:
        return [0.0] * len(FIRST_ORDER)
    std = float(values.std())
    if std < 1e-12:
        skewness = kurtosis = 0.0
    else:
        skewness = float(stats.skew(values))
        kurtosis = float(stats.kurtosis(values))
    p10, p25, p75, p90 = np.percentile(values, [10, 25, 75, 90])
    counts, _ = np.histogram(values, bins=ENTROPY_BINS, range=(0.0, 1.0))
    return [
        float(values.mean()), std, skewness, kurtosis,
        float(values.min()), float(values.max()), float(np.median(values)),
        float(p10), float(p25), float(p75), float(p90),
        float(stats.entropy(counts, base=2)),
    ]


def _normalized_histogram(values: np.ndarray) -> np.ndarray:
    if values.size == 0:
        return np.zeros(HIST_BINS)
    counts, _ = np.histogram(values, bins=HIST_BINS, range=(0.0, 1.0))
    return counts / values.size


def _contrast(inside: np.ndarray, band: np.ndarray) -> List[float]:
    if inside.size == 0 or band.size == 0:
        return [0.0, 1.0, 0.0, 0.0]
    mean_in, mean_band = float(inside.mean()), float(band.mean())
    diff = mean_in - mean_band
    intersection = np.minimum(_normalized_histogram(inside), _normalized_histogram(band)).sum()
    return [diff, mean_in / (mean_band + EPS), diff / (mean_in + mean_band + EPS), float(intersection)]


def _gradient(channel: np.ndarray, mask: np.ndarray) -> List[float]:
    if not mask.any():
        return [0.0] * len(GRADIENT)
    magnitude = sobel(channel)[mask]
    return [
        float(magnitude.mean()), float(magnitude.std()), float(magnitude.max()),
        float(np.median(magnitude)), float(np.percentile(magnitude, 90)),
        float(np.mean(magnitude > EDGE_LEVEL)),
    ]


def quantize(channel: np.ndarray) -> np.ndarray:
    """8 gray levels: min(floor(8v), 7)"""
    return np.minimum(np.floor(channel * GLCM_LEVELS), GLCM_LEVELS - 1).astype(np.uint8)


def _cooccurrence(channel: np.ndarray, mask: np.ndarray) -> List[float]:
    # inside pixels take levels 1..8, outside 0; pairs touching 0 are dropped
    coded = np.where(mask, quantize(channel) + 1, 0).astype(np.uint8)
    glcm = graycomatrix(coded, distances=[1], angles=[a for _, a in GLCM_DIRECTIONS],
                        levels=GLCM_LEVELS + 1, symmetric=True, normed=False)
    features = []
    for k in range(len(GLCM_DIRECTIONS)):
        counts = glcm[1:, 1:, 0, k].astype(np.float64)
        total = counts.sum()
        if total == 0:
            features += [0.0] * len(GLCM_PROPS)
            continue
        P = (counts / total)[:, :, None, None]
        features += [
            float(graycoprops(P, "contrast")[0, 0]),
            float(graycoprops(P, "correlation")[0, 0]),
            float(graycoprops(P, "energy")[0, 0]),
            float(graycoprops(P, "homogeneity")[0, 0]),
            float(stats.entropy(P.ravel(), base=2)),
            float(graycoprops(P, "dissimilarity")[0, 0]),
        ]
    return features


def channel_features(channel: np.ndarray, mask: BinaryMask, band: BorderBand) -> List[float]:
    """The 62 features of one color channel"""
    inside = channel[mask.bits]
    ring = channel[band.ring.bits]
    return (_first_order(inside) + _first_order(ring) + _contrast(inside, ring)
            + _normalized_histogram(inside).tolist() + _gradient(channel, mask.bits)
            + _cooccurrence(channel, mask.bits))


# ============================================================================
# SHAPE FEATURES
# ============================================================================

def shape_features(mask: BinaryMask, radius: int) -> List[float]:
    """The 14 channel-independent mask features"""
    area = mask.area
    if area == 0:
        return [0.0] * len(SHAPE)
    diag = mask.diagonal
    h, w = mask.shape
    perim = perimeter(mask)
    hull = fill_holes(close(mask, disk(radius))).area
    smooth_perim = perimeter(close(mask, disk(3 * radius)))
    region = regionprops(mask.bits.astype(np.uint8))[0]
    cy, cx = region.centroid
    theta = region.orientation
    values = [
        area / (w * h),
        perim / diag,
        4.0 * math.pi * area / perim ** 2,
        area / hull,
        float(region.extent),
        float(region.eccentricity),
        float(region.equivalent_diameter_area) / diag,
        float(region.axis_major_length) / diag,
        float(region.axis_minor_length) / diag,
        math.sin(2.0 * theta),
        math.cos(2.0 * theta),
        (cx - (w - 1) / 2.0) / w,
        (cy - (h - 1) / 2.0) / h,
        perim / smooth_perim if smooth_perim else 0.0,
    ]
    # second moments of tiny regions can come out NaN
    return [v if math.isfinite(v) else 0.0 for v in values]


def extract(img: RgbImage, mask: BinaryMask) -> FeatureVector200:
    """
    Compute the 200 features of an image and its lesion mask.

    Args:
        img: RGB image at working resolution
        mask: Lesion mask of the same size; may be empty

    Returns:
        FeatureVector200 in feature_names() order
    """
    check_same_dims(img, mask, "image and mask")
    band = border_band(mask)
    values: List[float] = []
    for c in range(len(CHANNELS)):
        values += channel_features(img.channel(c), mask, band)
    values += shape_features(mask, band.radius)
    return FeatureVector200(np.array(values))


def extract_batch(pairs: List[Tuple[RgbImage, BinaryMask]]) -> np.ndarray:
    return np.vstack([extract(img, mask).values for img, mask in pairs])
