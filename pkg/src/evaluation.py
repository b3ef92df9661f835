#!/usr/bin/env python3
"""
Scoring for both tasks.

Segmentation: Jaccard overlap with challenge zeroing below 0.65, score
histograms and showcase selection. Diagnosis: 7x7 confusion matrices,
per-class one-vs-rest metrics, class-averaged recall, stratified k-fold and
odd/even splits.
"""
import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.metrics import confusion_matrix

from .errors import DataError
from .raster import BinaryMask, check_same_dims

CLASSES = ("MEL", "NV", "BCC", "AKIEC", "BKL", "DF", "VASC")
OVERLAP_THRESHOLD = 0.65
SHOWCASE_HIGH = 0.90

_TRAILING_NUMBER = re.compile(r"(\d+)$")


# ============================================================================
# SEGMENTATION SCORING
# ============================================================================

def jaccard(a: BinaryMask, b: BinaryMask) -> float:
    """|a ∩ b| / |a ∪ b|; two empty masks score 1"""
    check_same_dims(a, b, "masks")
    union = np.count_nonzero(a.bits | b.bits)
    if union == 0:
        return 1.0
    return np.count_nonzero(a.bits & b.bits) / union


@dataclass(frozen=True)
class OverlapReport:
    """Per-image Jaccard scores and their challenge-style summary"""
    per_image: Tuple[Tuple[str, float], ...]
    mean_raw: float
    mean_thresholded: float
    frac_below: float
    threshold: float = OVERLAP_THRESHOLD

    @property
    def scores(self) -> np.ndarray:
        return np.array([j for _, j in self.per_image])

    def to_dict(self) -> Dict:
        return {
            "n_images": len(self.per_image),
            "mean_raw": self.mean_raw,
            "mean_thresholded": self.mean_thresholded,
            "frac_below": self.frac_below,
            "threshold": self.threshold,
        }


def report_from_scores(scores: Sequence[Tuple[str, float]], threshold: float = OVERLAP_THRESHOLD) -> OverlapReport:
    """Summarize precomputed (id, jaccard) pairs; scores below threshold count as 0"""
    per_image = tuple((str(i), float(j)) for i, j in scores)
    if not per_image:
        raise DataError("overlap report needs at least one image")
    values = np.array([j for _, j in per_image])
    below = values < threshold
    return OverlapReport(
        per_image=per_image,
        mean_raw=float(np.mean(values)),
        mean_thresholded=float(np.mean(np.where(below, 0.0, values))),
        frac_below=float(np.mean(below)),
        threshold=float(threshold),
    )


def overlap_report(pairs: Sequence[Tuple[BinaryMask, BinaryMask]], threshold: float = OVERLAP_THRESHOLD,
                   ids: Optional[Sequence[str]] = None) -> OverlapReport:
    """
    Score (prediction, truth) pairs.

    Args:
        pairs: (predicted mask, truth mask) per image
        threshold: Zeroing threshold; j < threshold contributes 0 to mean_thresholded
        ids: Image ids in pair order; positions are used when None
    """
    if ids is None:
        ids = [str(k) for k in range(len(pairs))]
    if len(ids) != len(pairs):
        raise DataError(f"{len(ids)} ids for {len(pairs)} mask pairs")
    return report_from_scores([(i, jaccard(pred, truth)) for i, (pred, truth) in zip(ids, pairs)], threshold)


def score_histogram(report: OverlapReport, bins: int = 20) -> List[Tuple[float, float, int]]:
    """Equal-width bins over [0,1]; the last bin is closed on the right"""
    if bins < 1:
        raise DataError(f"bins must be >= 1, got {bins}")
    counts, edges = np.histogram(report.scores, bins=bins, range=(0.0, 1.0))
    return [(float(lo), float(hi), int(c)) for lo, hi, c in zip(edges[:-1], edges[1:], counts)]


def select_showcase(report: OverlapReport, n: int = 2) -> Dict[str, List[str]]:
    """
    Pick cases worth overlaying: the best scorers above 0.90 and the worst
    scorers below the zeroing threshold, n of each.
    """
    ranked = sorted(report.per_image, key=lambda item: (-item[1], item[0]))
    high = [i for i, j in ranked if j > SHOWCASE_HIGH][:n]
    failed = [i for i, j in reversed(ranked) if j < report.threshold][:n]
    return {"high": high, "failed": failed}


# ============================================================================
# CLASSIFICATION SCORING
# ============================================================================

@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """7x7 counts, rows = truth, columns = prediction, fixed class order"""
    counts: np.ndarray
    classes: Tuple[str, ...] = CLASSES

    def __post_init__(self):
        if tuple(self.classes) != CLASSES:
            raise DataError(f"class order must be {', '.join(CLASSES)}")
        counts = np.asarray(self.counts)
        if counts.shape != (len(CLASSES), len(CLASSES)):
            raise DataError(f"confusion matrix must be 7x7, got {counts.shape}")
        if not np.all(np.isfinite(counts)) or np.any(counts != np.round(counts)):
            raise DataError("confusion counts must be integers")
        if np.any(counts < 0):
            raise DataError("confusion counts must be non-negative")
        counts = counts.astype(np.int64)
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def row_sums(self) -> np.ndarray:
        """Per-class truth counts"""
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def __add__(self, other: 'ConfusionMatrix') -> 'ConfusionMatrix':
        return ConfusionMatrix(self.counts + other.counts)


def confusion(truth: Sequence[str], pred: Sequence[str]) -> ConfusionMatrix:
    """Count (truth, prediction) label pairs"""
    truth, pred = list(truth), list(pred)
    if len(truth) != len(pred):
        raise DataError(f"{len(truth)} truth labels but {len(pred)} predictions")
    if not truth:
        raise DataError("confusion matrix needs at least one sample")
    unknown = sorted((set(truth) | set(pred)) - set(CLASSES))
    if unknown:
        raise DataError(f"unknown class labels: {unknown}")
    return ConfusionMatrix(confusion_matrix(truth, pred, labels=list(CLASSES)))


@dataclass(frozen=True)
class ClassMetrics:
    tp: int
    fn: int
    fp: int
    tn: int
    accuracy: float
    error_rate: float
    sensitivity: float
    specificity: float
    precision: float
    recall: float


@dataclass(frozen=True)
class MetricsReport:
    per_class: Dict[str, ClassMetrics]
    class_averaged_recall: float
    overall_accuracy: float


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def metrics_from_confusion(cm: ConfusionMatrix) -> MetricsReport:
    """One-vs-rest metrics per class; zero denominators give 0"""
    total = cm.total
    if total <= 0:
        raise DataError("confusion matrix is empty")
    per_class = {}
    for k, name in enumerate(CLASSES):
        tp = int(cm.counts[k, k])
        fn = int(cm.row_sums[k]) - tp
        fp = int(cm.col_sums[k]) - tp
        tn = total - tp - fn - fp
        accuracy = (tp + tn) / total
        sensitivity = _ratio(tp, tp + fn)
        per_class[name] = ClassMetrics(
            tp=tp, fn=fn, fp=fp, tn=tn,
            accuracy=accuracy,
            error_rate=1.0 - accuracy,
            sensitivity=sensitivity,
            specificity=_ratio(tn, tn + fp),
            precision=_ratio(tp, tp + fp),
            recall=sensitivity,
        )
    return MetricsReport(
        per_class=per_class,
        class_averaged_recall=float(np.mean([m.recall for m in per_class.values()])),
        overall_accuracy=overall_accuracy(cm),
    )


def overall_accuracy(cm: ConfusionMatrix) -> float:
    """trace / total"""
    if cm.total <= 0:
        raise DataError("confusion matrix is empty")
    return float(np.trace(cm.counts)) / cm.total


# ============================================================================
# SPLITS
# ============================================================================

def stratified_kfold(labels: Sequence[str], k: int = 5, seed: int = 42) -> List[np.ndarray]:
    """
    Partition indices into k folds, balanced per class to within one item.

    Each class's indices are shuffled with the seeded generator and dealt
    round-robin; the dealing position carries over from one class to the next.

    Returns:
        k sorted index arrays
    """
    labels = list(labels)
    n = len(labels)
    if k < 2:
        raise DataError(f"k must be >= 2, got {k}")
    if k > n:
        raise DataError(f"k={k} exceeds the number of samples ({n})")

    rng = np.random.default_rng(seed)
    label_array = np.asarray(labels)
    folds: List[List[int]] = [[] for _ in range(k)]
    offset = 0
    for name in sorted(set(labels)):
        members = np.flatnonzero(label_array == name)
        rng.shuffle(members)
        for position, index in enumerate(members):
            folds[(offset + position) % k].append(int(index))
        offset += members.size
    return [np.array(sorted(f), dtype=np.int64) for f in folds]


def trailing_number(image_id: str) -> Optional[int]:
    match = _TRAILING_NUMBER.search(image_id)
    return int(match.group(1)) if match else None


def odd_even_split(ids: Sequence[str]) -> Tuple[List[str], List[str]]:
    """(odd-numbered ids for training, even-numbered ids for testing)"""
    offenders = [i for i in ids if trailing_number(i) is None]
    if offenders:
        raise DataError(f"ids without a trailing number: {offenders}")
    train = [i for i in ids if trailing_number(i) % 2 == 1]
    test = [i for i in ids if trailing_number(i) % 2 == 0]
    return train, test
