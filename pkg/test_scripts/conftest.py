#!/usr/bin/env python3
"""
Shared fixtures: a small synthetic ISIC-layout dataset and fast run settings
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import pytest

from src.config import PipelineConfig
from src.synthetic import make_dataset, write_dataset

N_CASES = 14
CASE_SIZE = 48


@pytest.fixture(scope="session")
def synthetic_cases():
    """Two cases per class, no hair"""
    return make_dataset(N_CASES, seed=7, size=CASE_SIZE, hair_fraction=0.0)


@pytest.fixture(scope="session")
def synthetic_dir(tmp_path_factory, synthetic_cases):
    """Paths of images/, masks/ and labels.csv"""
    out = tmp_path_factory.mktemp("synthetic")
    return write_dataset(str(out), synthetic_cases)


@pytest.fixture
def quick_config():
    return PipelineConfig(max_side=CASE_SIZE, n_components=2, em_max_iters=30,
                          pixels_per_class=300, svr_max_samples=400, seed=7, threads=1)
