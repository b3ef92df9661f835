#!/usr/bin/env python3
"""
Synthetic dermoscopy-like cases with known truth.

Each case is an elliptical lesion on a skin background. Lesion and skin
colors are drawn per pixel from two-component Gaussian mixtures; the
lesion mixture and the ellipse elongation depend on the diagnosis class so
that the classifier has something to learn. Some images get thin dark
hair strokes across the field.
"""
import logging
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from skimage.draw import ellipse, line

from .evaluation import CLASSES
from .raster import BinaryMask, RgbImage, write_mask, write_rgb
from .report_io import write_labels_csv

logger = logging.getLogger(__name__)

NOISE_SIGMA = 0.03
COMPONENT_SPREAD = 0.02
HAIR_FRACTION = 0.2
HAIR_COLOR = (0.10, 0.08, 0.06)
DEFAULT_SIZE = 128

SKIN_COLORS = ((0.85, 0.65, 0.55), (0.80, 0.60, 0.52))

# (lesion base color, minor/major axis ratio)
CLASS_STYLES = {
    "MEL": ((0.35, 0.20, 0.15), 0.60),
    "NV": ((0.45, 0.25, 0.15), 0.90),
    "BCC": ((0.60, 0.40, 0.45), 0.75),
    "AKIEC": ((0.65, 0.35, 0.30), 0.55),
    "BKL": ((0.50, 0.40, 0.25), 0.80),
    "DF": ((0.55, 0.30, 0.25), 0.95),
    "VASC": ((0.70, 0.20, 0.30), 0.70),
}


@dataclass(frozen=True, eq=False)
class SyntheticCase:
    image_id: str
    image: RgbImage
    mask: BinaryMask
    label: str
    has_hair: bool = False


def case_id(number: int) -> str:
    return f"ISIC_{number:07d}"


def _mixture_pixels(rng: np.random.Generator, colors: Sequence, count: int) -> np.ndarray:
    colors = np.asarray(colors, dtype=np.float64)
    which = rng.integers(0, len(colors), size=count)
    offsets = rng.normal(0.0, COMPONENT_SPREAD, size=(len(colors), 3))
    return colors[which] + offsets[which]


def make_case(number: int, label: str, seed: int, size: int = DEFAULT_SIZE,
              hair: bool = False) -> SyntheticCase:
    """
    Draw one synthetic case.

    Args:
        number: Trailing number of the ISIC-style id
        label: Diagnosis class controlling lesion color and elongation
        seed: RNG seed of this case
        size: Image side in pixels
        hair: Draw 1-px dark strokes over the image
    """
    rng = np.random.default_rng(seed)
    base, ratio = CLASS_STYLES[label]
    lesion_colors = (base, tuple(0.85 * c for c in base))

    center_r = size / 2 + rng.uniform(-0.1, 0.1) * size
    center_c = size / 2 + rng.uniform(-0.1, 0.1) * size
    major = rng.uniform(0.22, 0.32) * size
    minor = major * ratio
    rows, cols = ellipse(center_r, center_c, minor, major, shape=(size, size),
                         rotation=rng.uniform(0, np.pi))
    truth = np.zeros((size, size), dtype=bool)
    truth[rows, cols] = True

    pixels = np.empty((size, size, 3))
    pixels[truth] = _mixture_pixels(rng, lesion_colors, int(truth.sum()))
    pixels[~truth] = _mixture_pixels(rng, SKIN_COLORS, int((~truth).sum()))
    pixels += rng.normal(0.0, NOISE_SIGMA, size=pixels.shape)

    if hair:
        for _ in range(int(rng.integers(1, 4))):
            r0, c0, r1, c1 = rng.integers(0, size, size=4)
            rr, cc = line(int(r0), int(c0), int(r1), int(c1))
            pixels[rr, cc] = HAIR_COLOR

    return SyntheticCase(case_id(number), RgbImage(np.clip(pixels, 0.0, 1.0)),
                         BinaryMask(truth), label, hair)


def make_dataset(n: int, seed: int = 42, size: int = DEFAULT_SIZE,
                 hair_fraction: float = HAIR_FRACTION,
                 classes: Optional[Sequence[str]] = None) -> List[SyntheticCase]:
    """
    n cases numbered 1..n, labels cycling through classes.

    Hair is drawn on round(hair_fraction * n) cases chosen by the seed.
    """
    classes = list(classes or CLASSES)
    rng = np.random.default_rng(seed)
    hairy = set(rng.choice(n, size=int(round(hair_fraction * n)), replace=False).tolist()) if n else set()
    case_seeds = rng.integers(0, 2 ** 31 - 1, size=n)
    return [make_case(k + 1, classes[k % len(classes)], int(case_seeds[k]), size, k in hairy)
            for k in range(n)]


def write_dataset(out_dir: str, cases: Sequence[SyntheticCase]) -> Dict[str, str]:
    """
    Write cases in ISIC layout.

    Returns:
        Paths of the images dir, masks dir and labels CSV
    """
    images_dir = os.path.join(out_dir, "images")
    masks_dir = os.path.join(out_dir, "masks")
    labels_csv = os.path.join(out_dir, "labels.csv")
    os.makedirs(images_dir, exist_ok=True)
    os.makedirs(masks_dir, exist_ok=True)

    for case in cases:
        write_rgb(os.path.join(images_dir, f"{case.image_id}.png"), case.image.to_uint8())
        write_mask(os.path.join(masks_dir, f"{case.image_id}_segmentation.png"), case.mask)
    write_labels_csv(labels_csv, {case.image_id: case.label for case in cases})
    logger.info("Wrote %d synthetic cases to %s", len(cases), out_dir)
    return {"images_dir": images_dir, "masks_dir": masks_dir, "labels_csv": labels_csv}
