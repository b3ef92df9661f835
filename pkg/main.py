#!/usr/bin/env python3
"""
Main orchestrator for the skin lesion segmentation and diagnosis pipeline
"""
import json
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from src import config
from src.bayes_seg import TissueColorModel, posterior_map, train_tissue_model
from src.config import PipelineConfig
from src.dataset import (WorkingImage, find_mask, load_working_image, load_working_mask,
                         mask_file_name)
from src.errors import DataError, LesionPipelineError, UsageError
from src.evaluation import (CLASSES, MetricsReport, OverlapReport, confusion, jaccard,
                            metrics_from_confusion, odd_even_split, report_from_scores,
                            score_histogram, select_showcase, stratified_kfold)
from src.features200 import extract
from src.gmm import EmConfig
from src.model_store import load_model, save_model
from src.models import DatasetEntry, DatasetIndex, RunStats
from src.raster import (BinaryMask, ScalarMap, read_mask, read_rgb, render_overlay,
                        resize_mask_nearest, write_mask, write_rgb, write_scalar_png)
from src.report_io import (read_confusion_csv, read_features_csv, read_labels_csv,
                           write_confusion_csv, write_features_csv, write_histogram_csv,
                           write_metrics_csv, write_overlap_csv, write_predictions_csv,
                           write_split_csv)
from src.svm_core import SvcMulticlass, SvmConfig, multiclass_fit, multiclass_predict_batch
from src.synthetic import make_dataset, write_dataset
from src.threshold_select import SvrConfig, ThresholdRegressor, default_grid, select_threshold, train_threshold_svr

logger = logging.getLogger("pipeline")

MASK_FILE_PATTERN = re.compile(r"^(ISIC_\d+)_segmentation\.png$")


# ============================================================================
# SHARED HELPERS
# ============================================================================

def ordered_map(func: Callable, items: Iterable, threads: int = 1, desc: str = "") -> Iterator:
    """
    Apply func to every item, yielding results in input order.

    With threads > 1 the work runs in a thread pool; the caller consumes
    results sequentially, so all file writes stay on one thread.
    """
    items = list(items)
    if threads <= 1:
        for item in tqdm(items, desc=desc, disable=not desc):
            yield func(item)
        return
    with ThreadPoolExecutor(max_workers=threads) as executor:
        yield from tqdm(executor.map(func, items), total=len(items), desc=desc, disable=not desc)


def _capture(func: Callable) -> Callable:
    """Wrap func so pipeline errors come back as values instead of propagating"""
    def wrapped(item):
        try:
            return func(item), None
        except LesionPipelineError as e:
            return None, e
    return wrapped


def em_config(cfg: PipelineConfig) -> EmConfig:
    return EmConfig(n_components=cfg.n_components, max_iters=cfg.em_max_iters,
                    rel_tol=cfg.em_rel_tol, cov_regularizer=cfg.cov_regularizer, seed=cfg.seed)


def svr_config(cfg: PipelineConfig) -> SvrConfig:
    return SvrConfig(C=cfg.svr_c, epsilon=cfg.svr_epsilon, gamma=cfg.gamma, tol=cfg.smo_tol,
                     max_iter=cfg.smo_max_iter, cache_mb=cfg.kernel_cache_mb,
                     max_samples=cfg.svr_max_samples, seed=cfg.seed)


def svm_config(cfg: PipelineConfig) -> SvmConfig:
    return SvmConfig(C=cfg.svc_c, gamma=cfg.gamma, tol=cfg.smo_tol, max_iter=cfg.smo_max_iter,
                     cache_mb=cfg.kernel_cache_mb, seed=cfg.seed, threads=cfg.threads)


def _write_json(path: str, data: Dict):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def print_overlap_summary(report: OverlapReport):
    print("\n" + "="*60)
    print("SEGMENTATION OVERLAP")
    print("="*60)
    print(f"Images: {len(report.per_image)}")
    print(f"Mean Jaccard: {report.mean_raw:.4f}")
    print(f"Mean Jaccard (zeroed below {report.threshold:.2f}): {report.mean_thresholded:.4f}")
    print(f"Fraction below {report.threshold:.2f}: {report.frac_below:.4f}")
    print("="*60 + "\n")


def print_metrics_table(report: MetricsReport):
    print("\n" + "="*60)
    print("DIAGNOSIS METRICS")
    print("="*60)
    print(f"{'class':<8}{'acc':>8}{'err':>8}{'sens':>8}{'spec':>8}{'prec':>8}{'recall':>8}")
    for name in CLASSES:
        m = report.per_class[name]
        print(f"{name:<8}{m.accuracy:>8.4f}{m.error_rate:>8.4f}{m.sensitivity:>8.4f}"
              f"{m.specificity:>8.4f}{m.precision:>8.4f}{m.recall:>8.4f}")
    print(f"Class-averaged recall: {report.class_averaged_recall:.4f}")
    print(f"Overall accuracy: {report.overall_accuracy:.4f}")
    print("="*60 + "\n")


# ============================================================================
# SEGMENTATION
# ============================================================================

@dataclass(frozen=True, eq=False)
class SegmentationModels:
    tissue: TissueColorModel
    threshold: ThresholdRegressor


@dataclass(frozen=True, eq=False)
class SegmentationResult:
    image_id: str
    posterior: ScalarMap
    threshold: float
    working_mask: BinaryMask
    mask: BinaryMask


def train_segmentation(index: DatasetIndex, cfg: PipelineConfig) -> SegmentationModels:
    """Fit the tissue color model, then the threshold regressor on its posterior maps"""
    if not len(index):
        raise DataError("no training images")
    index.require_masks("segmentation training")

    def load_pair(entry: DatasetEntry) -> Tuple[WorkingImage, BinaryMask]:
        working = load_working_image(entry, cfg.max_side)
        return working, load_working_mask(entry.mask_path, working)

    pairs = list(ordered_map(load_pair, index.entries, cfg.threads, "Loading training images"))
    images = [w.image for w, _ in pairs]
    masks = [m for _, m in pairs]

    tissue = train_tissue_model(images, masks, em_config(cfg), cfg.fixed_prior(), cfg.pixels_per_class)
    logger.info("Tissue model: prior(lesion)=%.4f", tissue.prior_lesion)

    posteriors = list(ordered_map(lambda img: posterior_map(tissue, img), images, cfg.threads,
                                  "Posterior maps"))
    threshold = train_threshold_svr(list(zip(posteriors, masks)), default_grid(), svr_config(cfg))
    return SegmentationModels(tissue, threshold)


def segment_image(models: SegmentationModels, working: WorkingImage) -> SegmentationResult:
    pmap = posterior_map(models.tissue, working.image)
    t, cleaned = select_threshold(models.threshold, pmap)
    full = resize_mask_nearest(cleaned, *working.original_size)
    return SegmentationResult(working.image_id, pmap, t, cleaned, full)


def save_segmentation_models(models: SegmentationModels, out_dir: str, cfg: PipelineConfig) -> Dict[str, str]:
    echo = cfg.to_dict()
    return {
        "tissue_model": save_model(os.path.join(out_dir, config.TISSUE_MODEL_FILE),
                                   "tissue_color_model", models.tissue, echo),
        "threshold_model": save_model(os.path.join(out_dir, config.THRESHOLD_MODEL_FILE),
                                      "threshold_svr", models.threshold, echo),
    }


def load_segmentation_models(models_dir: str) -> SegmentationModels:
    return SegmentationModels(
        tissue=load_model(os.path.join(models_dir, config.TISSUE_MODEL_FILE),
                          "tissue_color_model", TissueColorModel),
        threshold=load_model(os.path.join(models_dir, config.THRESHOLD_MODEL_FILE),
                             "threshold_svr", ThresholdRegressor),
    )


def cmd_train_seg(index: DatasetIndex, out_dir: str, cfg: PipelineConfig) -> RunStats:
    """Train both segmentation models and write their containers to out_dir"""
    stats = RunStats(command="train-seg", total_images=len(index))
    print("Step 1: Training tissue color model and threshold regressor...")
    models = train_segmentation(index, cfg)
    print("Step 2: Saving model containers...")
    stats.outputs.update(save_segmentation_models(models, out_dir, cfg))
    stats.processed = len(index)
    stats.finish()
    stats.print_summary()
    return stats


def cmd_segment(models_dir: str, index: DatasetIndex, out_dir: str, cfg: PipelineConfig,
                posteriors: bool = False, overlays: bool = False) -> RunStats:
    """
    Segment every indexed image and write `<id>_segmentation.png` masks.

    Unreadable images are logged and skipped; the returned stats record them.
    """
    if overlays and not index.has_masks():
        raise UsageError("--overlays needs truth masks (--masks)")
    models = load_segmentation_models(models_dir)
    os.makedirs(out_dir, exist_ok=True)
    stats = RunStats(command="segment", total_images=len(index))

    def run(entry: DatasetEntry) -> SegmentationResult:
        return segment_image(models, load_working_image(entry, cfg.max_side))

    results = ordered_map(_capture(run), index.entries, cfg.threads, "Segmenting")
    for entry, (result, error) in zip(index.entries, results):
        if error is not None:
            logger.error("Skipping %s: %s", entry.image_id, error)
            stats.record_failure(entry.image_id)
            continue
        write_mask(os.path.join(out_dir, mask_file_name(entry.image_id)), result.mask)
        if posteriors:
            write_scalar_png(os.path.join(out_dir, f"{entry.image_id}_posterior.png"), result.posterior)
        if overlays:
            overlay = render_overlay(read_rgb(entry.image_path), result.mask, read_mask(entry.mask_path))
            write_rgb(os.path.join(out_dir, f"{entry.image_id}_overlay.png"), overlay)
        stats.processed += 1

    stats.outputs["masks"] = out_dir
    stats.finish()
    stats.print_summary()
    return stats


def _mask_ids(directory: str) -> Dict[str, str]:
    if not os.path.isdir(directory):
        raise DataError(f"mask directory not found: {directory}")
    found = {}
    for name in sorted(os.listdir(directory)):
        match = MASK_FILE_PATTERN.match(name)
        if match:
            found[match.group(1)] = os.path.join(directory, name)
    return found


def write_overlap_outputs(report: OverlapReport, out_prefix: str, bins: int = config.HIST_BINS) -> Dict[str, str]:
    paths = {
        "report": f"{out_prefix}_overlap.csv",
        "histogram": f"{out_prefix}_histogram.csv",
        "summary": f"{out_prefix}_summary.json",
    }
    write_overlap_csv(paths["report"], report)
    write_histogram_csv(paths["histogram"], score_histogram(report, bins))
    _write_json(paths["summary"], report.to_dict())
    return paths


def cmd_eval_seg(pred_dir: str, truth_dir: str, out_prefix: str,
                 threshold: float = config.OVERLAP_THRESHOLD, bins: int = config.HIST_BINS,
                 threads: int = 1) -> OverlapReport:
    """Score predicted masks against truth masks with matching ids"""
    predicted = _mask_ids(pred_dir)
    truth = _mask_ids(truth_dir)
    unmatched = sorted(set(predicted) ^ set(truth))
    if unmatched:
        raise DataError(f"ids present in only one of the mask directories: {unmatched}")
    if not predicted:
        raise DataError(f"no masks found in {pred_dir}")

    ids = sorted(predicted)
    scores = list(ordered_map(lambda i: jaccard(read_mask(predicted[i]), read_mask(truth[i])),
                              ids, threads, "Scoring"))
    report = report_from_scores(list(zip(ids, scores)), threshold)
    for name, path in write_overlap_outputs(report, out_prefix, bins).items():
        logger.info("Wrote %s: %s", name, path)
    print_overlap_summary(report)
    return report


def cmd_odd_even(index: DatasetIndex, out_dir: str, cfg: PipelineConfig, showcase: int = 2) -> OverlapReport:
    """
    Train segmentation on odd-numbered cases, test on even-numbered ones.

    Writes models, predicted masks, the overlap report, histogram, summary and
    overlays for the best and the failed cases.
    """
    index.require_masks("odd-even experiment")
    train_ids, test_ids = odd_even_split(index.ids)
    if not train_ids or not test_ids:
        raise DataError("odd-even experiment needs both odd and even ids")
    print(f"Step 1: Training on {len(train_ids)} odd cases...")
    models = train_segmentation(index.subset(train_ids), cfg)
    save_segmentation_models(models, os.path.join(out_dir, "models"), cfg)

    print(f"Step 2: Segmenting {len(test_ids)} even cases...")
    test_index = index.subset(test_ids)
    masks_dir = os.path.join(out_dir, "masks")
    os.makedirs(masks_dir, exist_ok=True)
    results = ordered_map(lambda e: segment_image(models, load_working_image(e, cfg.max_side)),
                          test_index.entries, cfg.threads, "Segmenting")
    predicted: Dict[str, BinaryMask] = {}
    scores = []
    for entry, result in zip(test_index.entries, results):
        write_mask(os.path.join(masks_dir, mask_file_name(entry.image_id)), result.mask)
        predicted[entry.image_id] = result.mask
        scores.append((entry.image_id, jaccard(result.mask, read_mask(entry.mask_path))))

    print("Step 3: Scoring...")
    report = report_from_scores(scores)
    write_overlap_outputs(report, os.path.join(out_dir, "odd_even"))
    overlay_dir = os.path.join(out_dir, "overlays")
    os.makedirs(overlay_dir, exist_ok=True)
    for category, ids in select_showcase(report, showcase).items():
        for image_id in ids:
            entry = test_index.get(image_id)
            overlay = render_overlay(read_rgb(entry.image_path), predicted[image_id], read_mask(entry.mask_path))
            write_rgb(os.path.join(overlay_dir, f"{category}_{image_id}.png"), overlay)
    print_overlap_summary(report)
    return report


# ============================================================================
# DIAGNOSIS
# ============================================================================

def cmd_extract(index: DatasetIndex, out_csv: str, cfg: PipelineConfig,
                masks_dir: Optional[str] = None) -> RunStats:
    """
    Write the 200-feature CSV for every indexed image.

    Masks come from masks_dir (predicted `<id>_segmentation.png`) when given,
    otherwise from the index's truth masks.
    """
    mask_paths = {}
    missing = []
    for entry in index.entries:
        path = find_mask(masks_dir, entry.image_id) if masks_dir else entry.mask_path
        if path is None:
            missing.append(entry.image_id)
        mask_paths[entry.image_id] = path
    if missing:
        raise DataError(f"no mask for: {missing}")

    def run(entry: DatasetEntry) -> np.ndarray:
        working = load_working_image(entry, cfg.max_side)
        return extract(working.image, load_working_mask(mask_paths[entry.image_id], working)).values

    stats = RunStats(command="extract-features", total_images=len(index))
    rows = list(ordered_map(run, index.entries, cfg.threads, "Extracting features"))
    write_features_csv(out_csv, index.ids, np.vstack(rows))
    stats.processed = len(rows)
    stats.outputs["features"] = out_csv
    stats.finish()
    stats.print_summary()
    return stats


def _join_labels(ids: List[str], labels: Dict[str, str]) -> List[str]:
    no_label = [i for i in ids if i not in labels]
    no_features = sorted(set(labels) - set(ids))
    if no_label or no_features:
        raise DataError(f"features and labels do not join; without label: {no_label}; "
                        f"without features: {no_features}")
    return [labels[i] for i in ids]


def cmd_train_cls(features_csv: str, labels_csv: str, out_path: str, cfg: PipelineConfig) -> RunStats:
    """Train the one-vs-rest diagnosis classifier and save it"""
    ids, features = read_features_csv(features_csv)
    labels = _join_labels(ids, read_labels_csv(labels_csv))
    stats = RunStats(command="train-cls", total_images=len(ids))

    model = multiclass_fit(features, labels, svm_config(cfg))
    predicted, _ = multiclass_predict_batch(model, features)
    stats.summary["training_accuracy"] = float(np.mean([p == t for p, t in zip(predicted, labels)]))
    stats.outputs["model"] = save_model(out_path, "diagnosis_svm", model, cfg.to_dict())
    stats.processed = len(ids)
    stats.finish()
    stats.print_summary()
    return stats


def cmd_classify(model_path: str, features_csv: str, out_csv: str) -> RunStats:
    """Write per-class scores for every feature row"""
    model = load_model(model_path, "diagnosis_svm", SvcMulticlass)
    ids, features = read_features_csv(features_csv)
    if features.shape[1] != model.scaler.dim:
        raise DataError(f"model expects {model.scaler.dim} features, file has {features.shape[1]}")
    stats = RunStats(command="classify", total_images=len(ids))
    _, scores = multiclass_predict_batch(model, features)
    write_predictions_csv(out_csv, ids, scores)
    stats.processed = len(ids)
    stats.outputs["predictions"] = out_csv
    stats.finish()
    stats.print_summary()
    return stats


def segment_and_extract(models: SegmentationModels, index: DatasetIndex, cfg: PipelineConfig,
                        desc: str = "Segment + features") -> np.ndarray:
    """Feature matrix of every indexed image, using masks from the given segmenter"""
    def run(entry: DatasetEntry) -> np.ndarray:
        working = load_working_image(entry, cfg.max_side)
        return extract(working.image, segment_image(models, working).working_mask).values

    return np.vstack(list(ordered_map(run, index.entries, cfg.threads, desc)))


def cmd_crossval(index: DatasetIndex, out_dir: str, cfg: PipelineConfig, k: int = config.CV_FOLDS,
                 seg_models_dir: Optional[str] = None) -> MetricsReport:
    """
    Stratified k-fold evaluation of the full pipeline.

    Without seg_models_dir every fold retrains the segmenter on its training
    cases; with it, one global segmenter is reused for all folds.
    """
    index.require_labels("crossval")
    if seg_models_dir is None:
        index.require_masks("crossval without --seg-models")
    labels = index.labels
    folds = stratified_kfold(labels, k, cfg.seed)
    all_classes = set(labels)
    for f, fold in enumerate(folds):
        train_classes = {labels[i] for i in np.setdiff1d(np.arange(len(labels)), fold)}
        absent = sorted(all_classes - train_classes, key=CLASSES.index)
        if absent:
            raise DataError(f"classes {absent} are absent from the training part of fold {f}; use a smaller k")

    shared_features = None
    if seg_models_dir is not None:
        print("Step 0: Segmenting all cases with the shared segmenter...")
        shared_features = segment_and_extract(load_segmentation_models(seg_models_dir), index, cfg)

    predicted: List[Optional[str]] = [None] * len(index)
    scores = np.zeros((len(index), len(CLASSES)))
    for f, test_idx in enumerate(folds):
        train_idx = np.setdiff1d(np.arange(len(index)), test_idx)
        print(f"Fold {f + 1}/{k}: {len(train_idx)} training, {len(test_idx)} held-out cases")
        if shared_features is None:
            models = train_segmentation(index.subset([index.ids[i] for i in train_idx]), cfg)
            features = segment_and_extract(models, index, cfg, f"Fold {f + 1} features")
        else:
            features = shared_features
        classifier = multiclass_fit(features[train_idx], [labels[i] for i in train_idx], svm_config(cfg))
        fold_pred, fold_scores = multiclass_predict_batch(classifier, features[test_idx])
        for i, label, row in zip(test_idx, fold_pred, fold_scores):
            predicted[i] = label
            scores[i] = row

    cm = confusion(labels, predicted)
    report = metrics_from_confusion(cm)
    os.makedirs(out_dir, exist_ok=True)
    write_confusion_csv(os.path.join(out_dir, "confusion.csv"), cm)
    write_metrics_csv(os.path.join(out_dir, "metrics.csv"), report)
    write_predictions_csv(os.path.join(out_dir, "predictions.csv"), index.ids, scores)
    write_split_csv(os.path.join(out_dir, "folds.csv"),
                    [(index.ids[i], f) for f, fold in enumerate(folds) for i in fold], "fold")
    print_metrics_table(report)
    return report


def cmd_metrics(confusion_csv: str, out_csv: str) -> MetricsReport:
    """Derive the per-class metrics CSV from a confusion CSV"""
    report = metrics_from_confusion(read_confusion_csv(confusion_csv))
    write_metrics_csv(out_csv, report)
    print_metrics_table(report)
    return report


def cmd_split(index: DatasetIndex, out_csv: str, mode: str = "odd-even",
              k: int = config.CV_FOLDS, seed: int = config.SEED) -> List[Tuple[str, object]]:
    """List odd/even membership or stratified fold numbers per image"""
    if mode == "odd-even":
        train, test = odd_even_split(index.ids)
        membership = {**{i: "train" for i in train}, **{i: "test" for i in test}}
        rows = [(i, membership[i]) for i in index.ids]
        column = "split"
    elif mode == "kfold":
        index.require_labels("k-fold split")
        fold_of = {}
        for f, fold in enumerate(stratified_kfold(index.labels, k, seed)):
            for i in fold:
                fold_of[index.ids[i]] = f
        rows = [(i, fold_of[i]) for i in index.ids]
        column = "fold"
    else:
        raise UsageError(f"unknown split mode {mode!r}")
    write_split_csv(out_csv, rows, column)
    logger.info("Wrote %s split of %d images to %s", mode, len(rows), out_csv)
    return rows


def cmd_make_synthetic(out_dir: str, n: int = 100, seed: int = config.SEED, size: int = 128) -> Dict[str, str]:
    """Write an ISIC-layout synthetic dataset"""
    if n < 1:
        raise UsageError("n must be >= 1")
    return write_dataset(out_dir, make_dataset(n, seed=seed, size=size))
