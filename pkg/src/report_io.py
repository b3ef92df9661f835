#!/usr/bin/env python3
"""
CSV readers and writers for labels, features, predictions and reports
"""
import logging
import os
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import DataError
from .evaluation import CLASSES, ConfusionMatrix, MetricsReport, OverlapReport
from .features200 import N_FEATURES

logger = logging.getLogger(__name__)

FEATURE_COLUMNS = [f"f{k:03d}" for k in range(N_FEATURES)]
METRIC_COLUMNS = ["accuracy", "error_rate", "sensitivity", "specificity", "precision", "recall"]
AVG_RECALL_ROW = "AVG_RECALL"


def _ensure_parent(path: str):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def _read_csv(path: str, what: str) -> pd.DataFrame:
    try:
        return pd.read_csv(path, dtype={"image": str})
    except FileNotFoundError:
        raise DataError(f"{what} file not found: {path}")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError(f"cannot parse {what} file {path}: {e}")


# ============================================================================
# LABELS
# ============================================================================

def read_labels_csv(path: str) -> Dict[str, str]:
    """
    Decode a one-hot ground-truth CSV (`image,MEL,NV,BCC,AKIEC,BKL,DF,VASC`).

    Returns:
        Dictionary image id -> class name
    """
    frame = _read_csv(path, "labels")
    expected = ["image", *CLASSES]
    if list(frame.columns) != expected:
        raise DataError(f"labels header must be {','.join(expected)}, got {','.join(map(str, frame.columns))}")

    labels = {}
    for image_id, cells in zip(frame["image"], frame[list(CLASSES)].itertuples(index=False)):
        try:
            row = np.asarray(cells, dtype=np.float64)
        except (TypeError, ValueError):
            raise DataError(f"label row for {image_id} has non-numeric values: {list(cells)}")
        if not (np.all(np.isin(row, (0.0, 1.0))) and row.sum() == 1.0):
            raise DataError(f"label row for {image_id} is not one-hot: {row.tolist()}")
        labels[image_id] = CLASSES[int(np.argmax(row))]
    return labels


def write_labels_csv(path: str, labels: Dict[str, str]):
    rows = [[image_id] + [1.0 if c == label else 0.0 for c in CLASSES] for image_id, label in labels.items()]
    _ensure_parent(path)
    pd.DataFrame(rows, columns=["image", *CLASSES]).to_csv(path, index=False, float_format="%.1f")


# ============================================================================
# FEATURES AND PREDICTIONS
# ============================================================================

def write_features_csv(path: str, ids: Sequence[str], features: np.ndarray):
    """`image,f000..f199` at full round-trip precision"""
    features = np.atleast_2d(features)
    if features.shape != (len(ids), N_FEATURES):
        raise DataError(f"expected {len(ids)}x{N_FEATURES} features, got {features.shape}")
    frame = pd.DataFrame(features, columns=FEATURE_COLUMNS)
    frame.insert(0, "image", list(ids))
    _ensure_parent(path)
    frame.to_csv(path, index=False)


def read_features_csv(path: str) -> Tuple[List[str], np.ndarray]:
    frame = _read_csv(path, "features")
    columns = list(frame.columns)
    if not columns or columns[0] != "image":
        raise DataError(f"features file {path} must start with an image column")
    if columns[1:] != FEATURE_COLUMNS:
        raise DataError(f"features file {path} has {len(columns) - 1} feature columns, expected {N_FEATURES}")
    values = frame[FEATURE_COLUMNS].to_numpy(dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise DataError(f"features file {path} has non-finite values")
    return frame["image"].tolist(), values


def write_predictions_csv(path: str, ids: Sequence[str], scores: np.ndarray):
    """`image,MEL,...,VASC` with scores at 6 decimals"""
    frame = pd.DataFrame(np.atleast_2d(scores), columns=list(CLASSES))
    frame.insert(0, "image", list(ids))
    _ensure_parent(path)
    frame.to_csv(path, index=False, float_format="%.6f")


# ============================================================================
# SEGMENTATION REPORTS
# ============================================================================

def write_overlap_csv(path: str, report: OverlapReport):
    frame = pd.DataFrame(list(report.per_image), columns=["image", "jaccard"])
    _ensure_parent(path)
    frame.to_csv(path, index=False, float_format="%.6f")


def write_histogram_csv(path: str, histogram: Sequence[Tuple[float, float, int]]):
    frame = pd.DataFrame(list(histogram), columns=["bin_low", "bin_high", "count"])
    _ensure_parent(path)
    frame.to_csv(path, index=False, float_format="%.4f")


def write_split_csv(path: str, rows: Sequence[Tuple[str, object]], column: str):
    frame = pd.DataFrame(list(rows), columns=["image", column])
    _ensure_parent(path)
    frame.to_csv(path, index=False)


# ============================================================================
# CONFUSION AND METRICS
# ============================================================================

def write_confusion_csv(path: str, cm: ConfusionMatrix):
    """Rows = truth, columns = prediction, class names on both axes"""
    frame = pd.DataFrame(cm.counts, index=pd.Index(CLASSES, name="class"), columns=list(CLASSES))
    _ensure_parent(path)
    frame.to_csv(path)


def read_confusion_csv(path: str) -> ConfusionMatrix:
    frame = _read_csv(path, "confusion")
    columns = list(map(str, frame.columns))
    if columns != ["class", *CLASSES]:
        raise DataError(f"confusion header must be class,{','.join(CLASSES)}; got {','.join(columns)}")
    if [str(c) for c in frame["class"]] != list(CLASSES):
        raise DataError(f"confusion rows must be ordered {','.join(CLASSES)}")
    try:
        counts = frame[list(CLASSES)].to_numpy(dtype=np.float64)
    except ValueError as e:
        raise DataError(f"confusion counts must be numeric: {e}")
    return ConfusionMatrix(counts)


def write_metrics_csv(path: str, report: MetricsReport):
    """Per-class metrics at 4 decimals plus a final AVG_RECALL row"""
    rows = []
    for name in CLASSES:
        m = report.per_class[name]
        rows.append([name] + [f"{getattr(m, col):.4f}" for col in METRIC_COLUMNS])
    rows.append([AVG_RECALL_ROW] + [""] * (len(METRIC_COLUMNS) - 1) + [f"{report.class_averaged_recall:.4f}"])
    _ensure_parent(path)
    pd.DataFrame(rows, columns=["class", *METRIC_COLUMNS]).to_csv(path, index=False)
