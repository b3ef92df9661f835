#!/usr/bin/env python3
"""
Command-line entry point for the lesion pipeline

Usage:
    python scripts/run_pipeline.py train-seg --images data/train --masks data/train_masks --out runs/seg
    python scripts/run_pipeline.py segment --models runs/seg --images data/test --out runs/masks
    python scripts/run_pipeline.py eval-seg --pred runs/masks --truth data/test_masks --out-prefix runs/eval
    python scripts/run_pipeline.py crossval --images data/train --masks data/train_masks --labels data/labels.csv --out runs/cv
    python scripts/run_pipeline.py metrics --confusion runs/cv/confusion.csv --out runs/cv/metrics.csv
    python scripts/run_pipeline.py train-seg --config config/default.json ...

Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numerical failure.
"""
import sys
import os
import argparse
import logging
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import main as pipeline
from src import config
from src.config import build_config, set_output_directory
from src.dataset import ingest
from src.errors import DataError, LesionPipelineError, UsageError
from src.log_setup import setup_logging

MIN_MAX_SIDE = 16

# ============================================================================
# ARGUMENT PARSING
# ============================================================================


def _common_flags() -> argparse.ArgumentParser:
    """Flags accepted by every verb; None means "not given" so config files can supply them"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, help='Flat JSON config file (flags override it)')
    common.add_argument('--seed', type=int, default=None, help=f'Random seed (default: {config.SEED})')
    common.add_argument('--threads', type=int, default=None,
                        help=f'Worker threads (default: {config.NUM_THREADS})')
    common.add_argument('--max-side', type=int, default=None,
                        help=f'Working resolution, longest side in pixels (default: {config.MAX_SIDE})')
    common.add_argument('--log-dir', type=str, default=None,
                        help='Base directory for run logs (default: lesion_runs/)')
    common.add_argument('--verbose', action='store_true', help='Show debug messages on the console')
    return common


def parse_arguments(argv=None):
    """Parse command line arguments"""
    common = _common_flags()
    parser = argparse.ArgumentParser(
        description='Skin lesion segmentation (GMM + adaptive threshold) and 7-class diagnosis (SVM)',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Segmentation experiment on a synthetic dataset:
  python scripts/run_pipeline.py make-synthetic --out data/synthetic --n 100
  python scripts/run_pipeline.py odd-even --images data/synthetic/images --masks data/synthetic/masks --out runs/odd_even

  # Cross-validated diagnosis reusing one segmenter:
  python scripts/run_pipeline.py crossval --images data/train --labels data/labels.csv --seg-models runs/seg --out runs/cv
        """
    )
    verbs = parser.add_subparsers(dest='command', required=True)

    p = verbs.add_parser('train-seg', parents=[common], help='Train the tissue color model and threshold SVR')
    p.add_argument('--images', required=True, help='Directory of ISIC_<id>.jpg/png images')
    p.add_argument('--masks', required=True, help='Directory of ISIC_<id>_segmentation.png masks')
    p.add_argument('--out', required=True, help='Directory for the model containers')

    p = verbs.add_parser('segment', parents=[common], help='Segment images with trained models')
    p.add_argument('--models', required=True, help='Directory written by train-seg')
    p.add_argument('--images', required=True)
    p.add_argument('--masks', default=None, help='Truth masks (required for --overlays)')
    p.add_argument('--out', required=True, help='Output directory for predicted masks')
    p.add_argument('--posteriors', action='store_true', help='Also write posterior map PNGs')
    p.add_argument('--overlays', action='store_true', help='Also write truth/prediction contour overlays')

    p = verbs.add_parser('eval-seg', parents=[common], help='Score predicted masks against truth')
    p.add_argument('--pred', required=True, help='Directory of predicted masks')
    p.add_argument('--truth', required=True, help='Directory of truth masks')
    p.add_argument('--out-prefix', required=True, help='Prefix for the report, histogram and summary files')
    p.add_argument('--threshold', type=float, default=config.OVERLAP_THRESHOLD)
    p.add_argument('--bins', type=int, default=config.HIST_BINS)

    p = verbs.add_parser('extract-features', parents=[common], help='Write the 200-feature CSV')
    p.add_argument('--images', required=True)
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument('--masks', help='Truth mask directory')
    source.add_argument('--pred-masks', help='Predicted mask directory')
    p.add_argument('--out', required=True, help='Output CSV')

    p = verbs.add_parser('train-cls', parents=[common], help='Train the diagnosis classifier')
    p.add_argument('--features', required=True)
    p.add_argument('--labels', required=True, help='One-hot ground truth CSV')
    p.add_argument('--out', required=True, help='Output model container')

    p = verbs.add_parser('classify', parents=[common], help='Score feature rows with a trained classifier')
    p.add_argument('--model', required=True)
    p.add_argument('--features', required=True)
    p.add_argument('--out', required=True, help='Output predictions CSV')

    p = verbs.add_parser('crossval', parents=[common], help='Stratified k-fold evaluation of the full pipeline')
    p.add_argument('--images', required=True)
    p.add_argument('--masks', default=None, help='Truth masks (needed unless --seg-models is given)')
    p.add_argument('--labels', required=True)
    p.add_argument('--out', required=True, help='Output directory')
    p.add_argument('--k', type=int, default=config.CV_FOLDS)
    p.add_argument('--seg-models', '--reuse-seg-models', dest='seg_models', default=None,
                   help='Reuse one trained segmenter for every fold')

    p = verbs.add_parser('metrics', parents=[common], help='Derive metrics from a confusion CSV')
    p.add_argument('--confusion', required=True)
    p.add_argument('--out', required=True)

    p = verbs.add_parser('split', parents=[common], help='List odd/even or k-fold membership')
    p.add_argument('--images', required=True)
    p.add_argument('--labels', default=None, help='Required for --mode kfold')
    p.add_argument('--mode', choices=['odd-even', 'kfold'], default='odd-even')
    p.add_argument('--k', type=int, default=config.CV_FOLDS)
    p.add_argument('--out', required=True)

    p = verbs.add_parser('odd-even', parents=[common], help='Train on odd cases, evaluate on even cases')
    p.add_argument('--images', required=True)
    p.add_argument('--masks', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--showcase', type=int, default=2, help='Overlays per category (high / failed)')

    p = verbs.add_parser('make-synthetic', parents=[common], help='Write a synthetic ISIC-layout dataset')
    p.add_argument('--out', required=True)
    p.add_argument('--n', type=int, default=100)
    p.add_argument('--size', type=int, default=128)

    return parser.parse_args(argv)


# ============================================================================
# DISPATCH
# ============================================================================

def run(args) -> int:
    """Execute one verb; returns the exit code"""
    if args.max_side is not None and args.max_side < MIN_MAX_SIDE:
        raise UsageError(f"--max-side must be >= {MIN_MAX_SIDE}")
    cfg = build_config(args.config, seed=args.seed, threads=args.threads, max_side=args.max_side)
    logging.getLogger(__name__).info("Configuration: %s", cfg.to_dict())

    command = args.command
    if command == 'train-seg':
        pipeline.cmd_train_seg(ingest(args.images, args.masks), args.out, cfg)
    elif command == 'segment':
        stats = pipeline.cmd_segment(args.models, ingest(args.images, args.masks), args.out, cfg,
                                     posteriors=args.posteriors, overlays=args.overlays)
        if stats.failed:
            return DataError.exit_code
    elif command == 'eval-seg':
        pipeline.cmd_eval_seg(args.pred, args.truth, args.out_prefix, args.threshold, args.bins, cfg.threads)
    elif command == 'extract-features':
        if args.pred_masks:
            pipeline.cmd_extract(ingest(args.images), args.out, cfg, masks_dir=args.pred_masks)
        else:
            pipeline.cmd_extract(ingest(args.images, args.masks), args.out, cfg)
    elif command == 'train-cls':
        pipeline.cmd_train_cls(args.features, args.labels, args.out, cfg)
    elif command == 'classify':
        pipeline.cmd_classify(args.model, args.features, args.out)
    elif command == 'crossval':
        pipeline.cmd_crossval(ingest(args.images, args.masks, args.labels), args.out, cfg,
                              k=args.k, seg_models_dir=args.seg_models)
    elif command == 'metrics':
        pipeline.cmd_metrics(args.confusion, args.out)
    elif command == 'split':
        pipeline.cmd_split(ingest(args.images, labels_csv=args.labels), args.out, args.mode, args.k, cfg.seed)
    elif command == 'odd-even':
        pipeline.cmd_odd_even(ingest(args.images, args.masks), args.out, cfg, showcase=args.showcase)
    elif command == 'make-synthetic':
        paths = pipeline.cmd_make_synthetic(args.out, args.n, cfg.seed, args.size)
        for name, path in paths.items():
            print(f"  - {name}: {path}")
    return 0


def main(argv=None) -> int:
    args = parse_arguments(argv)
    if args.log_dir:
        set_output_directory(args.log_dir)
    log_file = setup_logging(config.LOGS_DIR, logging.DEBUG if args.verbose else logging.INFO,
                             run_name=args.command.replace('-', '_'))
    try:
        code = run(args)
    except LesionPipelineError as e:
        logging.getLogger(__name__).error("%s: %s", type(e).__name__, e)
        code = e.exit_code
    finally:
        print("\n" + "="*60)
        print(f"Full log: {log_file}")
        print("="*60)
    return code


if __name__ == '__main__':
    sys.exit(main())
