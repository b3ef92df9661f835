"""
Skin Lesion Segmentation and Diagnosis - Core Package
"""
from .config import PipelineConfig, build_config
from .errors import LesionPipelineError, UsageError, DataError, NumericalError
from .models import DatasetEntry, DatasetIndex, RunStats
from .bayes_seg import TissueColorModel, train_tissue_model, posterior_map
from .threshold_select import ThresholdRegressor, train_threshold_svr, select_threshold
from .features200 import extract
from .svm_core import SvcMulticlass, multiclass_fit, multiclass_predict
from .evaluation import CLASSES, jaccard, overlap_report, confusion, metrics_from_confusion

__version__ = "1.0.0"
__all__ = [
    'PipelineConfig',
    'build_config',
    'LesionPipelineError',
    'UsageError',
    'DataError',
    'NumericalError',
    'DatasetEntry',
    'DatasetIndex',
    'RunStats',
    'TissueColorModel',
    'train_tissue_model',
    'posterior_map',
    'ThresholdRegressor',
    'train_threshold_svr',
    'select_threshold',
    'extract',
    'SvcMulticlass',
    'multiclass_fit',
    'multiclass_predict',
    'CLASSES',
    'jaccard',
    'overlap_report',
    'confusion',
    'metrics_from_confusion',
]
