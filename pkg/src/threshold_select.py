#!/usr/bin/env python3
"""
Adaptive per-image threshold selection.

Every grid threshold yields a raw mask (posterior >= t) and its cleaned
version. Each candidate is described by 12 truth-free features, an
epsilon-SVR predicts the Jaccard index the cleaned mask would score, and the
candidate with the highest prediction wins.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DataError
from .evaluation import jaccard
from .morphology import cleanup, cleanup_radius, close, count_components, dilate, disk, fill_holes
from .raster import BinaryMask, ScalarMap, check_same_dims, perimeter
from .svm_core import Kernel, Scaler, SvrModel, fit_scaler, scale_gamma, svr_fit

logger = logging.getLogger(__name__)

N_FEATURES = 12
MAX_COMPONENTS = 32
FEATURE_NAMES = (
    "threshold", "area_fraction", "mean_inside", "mean_outside", "inside_minus_outside",
    "std_inside", "raw_components", "perimeter_per_sqrt_area", "solidity",
    "compactness", "border_touch", "mean_ring",
)


@dataclass(frozen=True)
class ThresholdGrid:
    """Strictly ascending candidate thresholds in (0,1)"""
    values: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise DataError("threshold grid must not be empty")
        if any(not 0.0 < v < 1.0 for v in values):
            raise DataError("grid thresholds must lie in (0,1)")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise DataError("grid thresholds must be strictly ascending")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    def to_dict(self) -> Dict:
        return {"values": list(self.values)}

    @classmethod
    def from_dict(cls, data: Dict) -> 'ThresholdGrid':
        return cls(tuple(data["values"]))


def default_grid() -> ThresholdGrid:
    """0.05, 0.075, ..., 0.95 (37 values)"""
    return ThresholdGrid(tuple(np.round(0.05 + 0.025 * np.arange(37), 6)))


@dataclass(frozen=True, eq=False)
class ThresholdCandidate:
    threshold: float
    raw_mask: BinaryMask
    cleaned_mask: BinaryMask
    features: np.ndarray
    true_jaccard: Optional[float] = None
    predicted_jaccard: Optional[float] = None


def _region_mean(values: np.ndarray, region: np.ndarray) -> float:
    return float(values[region].mean()) if region.any() else 0.0


def candidate_features(pmap: ScalarMap, t: float, cleaned: BinaryMask, raw: BinaryMask) -> np.ndarray:
    """
    The 12 candidate descriptors, in FEATURE_NAMES order.

    Empty regions contribute 0 to means, std, perimeter ratio, compactness and
    border touch; the solidity proxy is 1 when its denominator is empty.
    """
    check_same_dims(pmap, cleaned, "posterior map and cleaned mask")
    check_same_dims(pmap, raw, "posterior map and raw mask")
    p = pmap.values
    inside = cleaned.bits
    outside = ~inside
    area = cleaned.area
    size = inside.size

    mean_in = _region_mean(p, inside)
    mean_out = _region_mean(p, outside)
    std_in = float(p[inside].std()) if area else 0.0
    components = min(count_components(raw), MAX_COMPONENTS) / MAX_COMPONENTS

    perim = perimeter(cleaned)
    perim_ratio = perim / math.sqrt(area) if area else 0.0
    compactness = 4.0 * math.pi * area / perim ** 2 if area and perim else 0.0

    se = disk(cleanup_radius(pmap.diagonal))
    hull = fill_holes(close(raw, se)).area
    solidity = area / hull if hull else 1.0

    if area:
        edge = np.zeros_like(inside)
        edge[0, :] = edge[-1, :] = True
        edge[:, 0] = edge[:, -1] = True
        border_touch = np.count_nonzero(inside & edge) / area
    else:
        border_touch = 0.0

    ring = dilate(cleaned, se).bits & outside
    mean_ring = _region_mean(p, ring)

    return np.array([
        t, area / size, mean_in, mean_out, mean_in - mean_out, std_in, components,
        perim_ratio, solidity, compactness, border_touch, mean_ring,
    ], dtype=np.float64)


def sweep(pmap: ScalarMap, grid: ThresholdGrid) -> List[ThresholdCandidate]:
    """One candidate per grid value: raw = (pmap >= t), cleaned = cleanup(raw)"""
    candidates = []
    for t in grid.values:
        raw = BinaryMask(pmap.values >= t)
        cleaned = cleanup(raw, pmap.diagonal)
        candidates.append(ThresholdCandidate(t, raw, cleaned, candidate_features(pmap, t, cleaned, raw)))
    return candidates


@dataclass(frozen=True)
class SvrConfig:
    """Settings of the threshold regressor"""
    C: float = 10.0
    epsilon: float = 0.02
    kernel: str = "rbf"
    gamma: Optional[float] = None
    tol: float = 1e-3
    max_iter: int = 100000
    cache_mb: int = 256
    max_samples: int = 6000
    seed: int = 42


@dataclass(frozen=True, eq=False)
class ThresholdRegressor:
    """Scaler + epsilon-SVR predicting a candidate's Jaccard index"""
    svr: SvrModel
    scaler: Scaler
    grid: ThresholdGrid = field(default_factory=default_grid)

    def predict(self, features) -> np.ndarray:
        """Predicted Jaccard clamped to [0,1] for each feature row"""
        scaled = self.scaler.transform(np.atleast_2d(features))
        return np.clip(self.svr.predict(scaled), 0.0, 1.0)

    def to_dict(self) -> Dict:
        return {"svr": self.svr.to_dict(), "scaler": self.scaler.to_dict(), "grid": self.grid.to_dict()}

    @classmethod
    def from_dict(cls, data: Dict) -> 'ThresholdRegressor':
        return cls(
            svr=SvrModel.from_dict(data["svr"]),
            scaler=Scaler.from_dict(data["scaler"]),
            grid=ThresholdGrid.from_dict(data["grid"]),
        )


def candidate_dataset(training: Sequence[Tuple[ScalarMap, BinaryMask]],
                      grid: ThresholdGrid) -> Tuple[np.ndarray, np.ndarray]:
    """Feature rows and cleaned-mask Jaccard targets over images x grid"""
    rows = []
    targets = []
    for i, (pmap, truth) in enumerate(training):
        check_same_dims(pmap, truth, f"posterior map {i} and its truth mask")
        for candidate in sweep(pmap, grid):
            rows.append(candidate.features)
            targets.append(jaccard(candidate.cleaned_mask, truth))
    return np.vstack(rows), np.asarray(targets)


def train_threshold_svr(training: Sequence[Tuple[ScalarMap, BinaryMask]],
                        grid: Optional[ThresholdGrid] = None,
                        svr_cfg: SvrConfig = SvrConfig()) -> ThresholdRegressor:
    """
    Train the Jaccard regressor on swept candidates of the training images.

    Args:
        training: (posterior map, truth mask) pairs at working resolution
        grid: Candidate thresholds; the default grid when None
        svr_cfg: Regressor settings

    Returns:
        ThresholdRegressor
    """
    if not training:
        raise DataError("no training images for the threshold regressor")
    grid = grid or default_grid()
    features, targets = candidate_dataset(training, grid)

    if features.shape[0] > svr_cfg.max_samples:
        rng = np.random.default_rng(svr_cfg.seed)
        keep = np.sort(rng.choice(features.shape[0], size=svr_cfg.max_samples, replace=False))
        logger.info("Subsampling %d of %d threshold candidates", keep.size, features.shape[0])
        features, targets = features[keep], targets[keep]

    scaler = fit_scaler(features)
    scaled = scaler.transform(features)
    if svr_cfg.kernel == "rbf":
        kernel = Kernel("rbf", svr_cfg.gamma if svr_cfg.gamma is not None else scale_gamma(scaled))
    else:
        kernel = Kernel("linear")
    svr = svr_fit(scaled, targets, kernel, C=svr_cfg.C, epsilon=svr_cfg.epsilon,
                  tol=svr_cfg.tol, max_iter=svr_cfg.max_iter, cache_mb=svr_cfg.cache_mb)
    logger.info("Threshold SVR: %d candidates from %d images, %d support vectors",
                features.shape[0], len(training), svr.dual_coefs.size)
    return ThresholdRegressor(svr, scaler, grid)


def select_threshold(model, pmap: ScalarMap,
                     grid: Optional[ThresholdGrid] = None) -> Tuple[float, BinaryMask]:
    """
    Pick the candidate with the highest predicted Jaccard.

    Args:
        model: Anything with predict(features) -> array, usually a ThresholdRegressor
        pmap: Posterior map at working resolution
        grid: Candidate thresholds; defaults to the model's grid

    Returns:
        (threshold, cleaned mask at working resolution); ties keep the smaller threshold
    """
    grid = grid or getattr(model, "grid", None) or default_grid()
    candidates = rank_candidates(model, sweep(pmap, grid))
    best = candidates[0]
    return best.threshold, best.cleaned_mask


def rank_candidates(model, candidates: Sequence[ThresholdCandidate]) -> List[ThresholdCandidate]:
    """Candidates with predictions attached, best first (prediction desc, threshold asc)"""
    if not candidates:
        raise DataError("no threshold candidates")
    predictions = np.asarray(model.predict(np.vstack([c.features for c in candidates])), dtype=np.float64)
    scored = [replace(c, predicted_jaccard=float(p)) for c, p in zip(candidates, predictions)]
    return sorted(scored, key=lambda c: (-c.predicted_jaccard, c.threshold))
