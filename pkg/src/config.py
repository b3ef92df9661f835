#!/usr/bin/env python3
"""
Configuration for the skin lesion segmentation and diagnosis pipeline
"""
import os
import json
from dataclasses import dataclass, asdict, fields
from typing import Dict, Optional

import jsonschema
from dotenv import load_dotenv

from .errors import UsageError

# Load environment variables from .env file
load_dotenv()


def _env(name: str, default, cast=float):
    """Read a LESION_* override from the environment"""
    value = os.getenv(f"LESION_{name}")
    if value is None or value == "":
        return default
    try:
        return cast(value)
    except ValueError:
        raise UsageError(f"LESION_{name}={value!r} is not a valid {cast.__name__}")


# Working resolution
MAX_SIDE = _env("MAX_SIDE", 512, int)  # longest image side used for segmentation and features

# Tissue color model (EM)
N_COMPONENTS = _env("N_COMPONENTS", 5, int)  # Gaussians per tissue class
EM_MAX_ITERS = _env("EM_MAX_ITERS", 200, int)
EM_REL_TOL = _env("EM_REL_TOL", 1e-6)
COV_REGULARIZER = _env("COV_REGULARIZER", 1e-6)  # trace-scaled ridge added after every M-step
PIXELS_PER_CLASS = _env("PIXELS_PER_CLASS", 2000, int)  # per image, per tissue class
PRIOR_MODE = os.getenv("LESION_PRIOR_MODE", "estimated")  # "estimated" or a fixed value like "0.5"

# Kernel machines
SVC_C = _env("SVC_C", 10.0)
SVR_C = _env("SVR_C", 10.0)
SVR_EPSILON = _env("SVR_EPSILON", 0.02)
SMO_TOL = _env("SMO_TOL", 1e-3)
SMO_MAX_ITER = _env("SMO_MAX_ITER", 100000, int)
SVR_MAX_SAMPLES = _env("SVR_MAX_SAMPLES", 6000, int)  # candidate rows used to fit the threshold SVR
KERNEL_CACHE_MB = _env("KERNEL_CACHE_MB", 256, int)

# Evaluation
OVERLAP_THRESHOLD = 0.65  # official scoring zeroes Jaccard below this
HIST_BINS = 20
CV_FOLDS = _env("CV_FOLDS", 5, int)

# Reproducibility and threading
SEED = _env("SEED", 42, int)
NUM_THREADS = _env("THREADS", 1, int)

# Directory structure (defaults)
PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DEFAULT_BASE_DIR = os.path.join(PROJECT_ROOT, 'lesion_runs')
LOGS_DIR = os.path.join(DEFAULT_BASE_DIR, 'logs')

# Model container file names written by train-seg
TISSUE_MODEL_FILE = "model_tissue.json"
THRESHOLD_MODEL_FILE = "model_threshold.json"
DIAGNOSIS_MODEL_FILE = "model_diagnosis.json"


@dataclass
class PipelineConfig:
    """Every tunable of a run; echoed into each model container"""
    max_side: int = MAX_SIDE
    n_components: int = N_COMPONENTS
    em_max_iters: int = EM_MAX_ITERS
    em_rel_tol: float = EM_REL_TOL
    cov_regularizer: float = COV_REGULARIZER
    pixels_per_class: int = PIXELS_PER_CLASS
    prior_mode: str = PRIOR_MODE
    svc_c: float = SVC_C
    svr_c: float = SVR_C
    svr_epsilon: float = SVR_EPSILON
    smo_tol: float = SMO_TOL
    smo_max_iter: int = SMO_MAX_ITER
    svr_max_samples: int = SVR_MAX_SAMPLES
    kernel_cache_mb: int = KERNEL_CACHE_MB
    gamma: Optional[float] = None  # None = "scale" heuristic 1/(d·Var(X))
    seed: int = SEED
    threads: int = NUM_THREADS

    def __post_init__(self):
        if self.max_side < 1:
            raise UsageError(f"max_side must be >= 1, got {self.max_side}")
        if self.n_components < 1:
            raise UsageError(f"n_components must be >= 1, got {self.n_components}")
        if self.em_rel_tol <= 0:
            raise UsageError("em_rel_tol must be > 0")
        if self.cov_regularizer < 0:
            raise UsageError("cov_regularizer must be >= 0")
        if self.threads < 1:
            raise UsageError("threads must be >= 1")
        if self.gamma is not None and self.gamma <= 0:
            raise UsageError("gamma must be > 0")
        self.fixed_prior()

    def fixed_prior(self) -> Optional[float]:
        """Return the fixed lesion prior, or None when priors are estimated"""
        if self.prior_mode == "estimated":
            return None
        try:
            value = float(self.prior_mode)
        except ValueError:
            raise UsageError(f"prior_mode must be 'estimated' or a number, got {self.prior_mode!r}")
        if not 0.0 < value < 1.0:
            raise UsageError(f"fixed lesion prior must be in (0,1), got {value}")
        return value

    def to_dict(self) -> Dict:
        """Convert to dictionary"""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> 'PipelineConfig':
        """Create instance from dictionary"""
        return cls(**data)

    def updated(self, **overrides) -> 'PipelineConfig':
        """Copy with the non-None overrides applied"""
        data = self.to_dict()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return PipelineConfig.from_dict(data)


CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "max_side": {"type": "integer", "minimum": 16},
        "n_components": {"type": "integer", "minimum": 1},
        "em_max_iters": {"type": "integer", "minimum": 1},
        "em_rel_tol": {"type": "number", "exclusiveMinimum": 0},
        "cov_regularizer": {"type": "number", "minimum": 0},
        "pixels_per_class": {"type": "integer", "minimum": 1},
        "prior_mode": {"type": "string"},
        "svc_c": {"type": "number", "exclusiveMinimum": 0},
        "svr_c": {"type": "number", "exclusiveMinimum": 0},
        "svr_epsilon": {"type": "number", "minimum": 0},
        "smo_tol": {"type": "number", "exclusiveMinimum": 0},
        "smo_max_iter": {"type": "integer", "minimum": 1},
        "svr_max_samples": {"type": "integer", "minimum": 2},
        "kernel_cache_mb": {"type": "integer", "minimum": 1},
        "gamma": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "seed": {"type": "integer"},
        "threads": {"type": "integer", "minimum": 1},
        "description": {"type": "string"},
    },
}


def load_config_file(path: str) -> Dict:
    """
    Load a flat JSON config file and validate it.

    Args:
        path: Path to the JSON file (relative paths resolve against PROJECT_ROOT
              when they do not exist relative to the working directory)

    Returns:
        Dictionary of config keys (without the free-text description)
    """
    if not os.path.exists(path) and not os.path.isabs(path):
        path = os.path.join(PROJECT_ROOT, path)
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise UsageError(f"config file {path} is not valid JSON: {e}")

    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        raise UsageError(f"config file {path}: {e.message}")

    data.pop("description", None)
    return data


def build_config(config_file: Optional[str] = None, **flags) -> PipelineConfig:
    """
    Resolve the run configuration.

    Precedence: module defaults (with LESION_* env overrides) < config file < flags.
    Flags left at None do not override anything.
    """
    config = PipelineConfig()
    if config_file:
        config = config.updated(**load_config_file(config_file))
    known = {f.name for f in fields(PipelineConfig)}
    return config.updated(**{k: v for k, v in flags.items() if k in known})


def set_output_directory(custom_dir: str) -> Dict[str, str]:
    """
    Set a custom base directory for run logs.

    Args:
        custom_dir: Path to custom directory (relative or absolute)
                   If relative, will be relative to PROJECT_ROOT

    Returns:
        Dictionary with the configured paths
    """
    global LOGS_DIR

    if not os.path.isabs(custom_dir):
        custom_dir = os.path.join(PROJECT_ROOT, custom_dir)
    LOGS_DIR = os.path.join(custom_dir, 'logs')
    os.makedirs(LOGS_DIR, exist_ok=True)
    return {'base_dir': custom_dir, 'logs_dir': LOGS_DIR}
