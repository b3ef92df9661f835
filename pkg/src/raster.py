#!/usr/bin/env python3
"""
Raster types shared by every stage of the pipeline.

RgbImage, ScalarMap and BinaryMask wrap read-only numpy arrays stored
row-major as (height, width[, 3]). Images are normalized RGB in [0,1].
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import DataError

CROSS = ndimage.generate_binary_structure(2, 1)


def _frozen(array: np.ndarray, dtype) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


def round_half_up(value: float) -> int:
    """Round to nearest integer, halves away from zero for positive values"""
    return int(math.floor(value + 0.5))


@dataclass(frozen=True, eq=False)
class RgbImage:
    """RGB image with channel values in [0,1]"""
    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise DataError(f"RGB image must have shape (h, w, 3), got {pixels.shape}")
        if pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise DataError("RGB image must be at least 1x1")
        if not np.all(np.isfinite(pixels)) or pixels.min() < 0.0 or pixels.max() > 1.0:
            raise DataError("RGB channel values must be finite and within [0,1]")
        object.__setattr__(self, "pixels", _frozen(pixels, np.float64))

    @classmethod
    def from_uint8(cls, array: np.ndarray) -> 'RgbImage':
        """Decode 8-bit RGB as v/255"""
        return cls(np.asarray(array, dtype=np.float64) / 255.0)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def channel(self, c: int) -> np.ndarray:
        return self.pixels[:, :, c]

    def to_uint8(self) -> np.ndarray:
        return np.clip(np.floor(self.pixels * 255.0 + 0.5), 0, 255).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class ScalarMap:
    """Real-valued raster (posterior maps, gradient magnitudes)"""
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 2 or values.size == 0:
            raise DataError(f"scalar map must be a nonempty 2-D array, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DataError("scalar map values must be finite")
        object.__setattr__(self, "values", _frozen(values, np.float64))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Binary raster; True marks lesion"""
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2 or bits.size == 0:
            raise DataError(f"mask must be a nonempty 2-D array, got shape {bits.shape}")
        object.__setattr__(self, "bits", _frozen(bits != 0, bool))

    @classmethod
    def empty(cls, width: int, height: int) -> 'BinaryMask':
        return cls(np.zeros((height, width), dtype=bool))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def shape(self):
        return self.bits.shape

    @property
    def area(self) -> int:
        return int(np.count_nonzero(self.bits))

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def is_empty(self) -> bool:
        return not self.bits.any()

    def same_as(self, other: 'BinaryMask') -> bool:
        return self.bits.shape == other.bits.shape and bool(np.array_equal(self.bits, other.bits))


def check_same_dims(a, b, what: str = "rasters"):
    """Raise DataError unless the two rasters share width and height"""
    if (a.width, a.height) != (b.width, b.height):
        raise DataError(f"dimension mismatch between {what}: "
                        f"{a.width}x{a.height} vs {b.width}x{b.height}")


def working_size(width: int, height: int, max_side: int):
    """Target (w, h) with the longest side equal to max_side, aspect preserved"""
    scale = max_side / max(width, height)
    return max(1, round_half_up(width * scale)), max(1, round_half_up(height * scale))


def resize_area_average(img: RgbImage, max_side: int) -> RgbImage:
    """
    Shrink an image so its longest side equals max_side.

    Each output pixel is the area-weighted mean of the input pixels it covers.
    Images already within max_side are returned unchanged.
    """
    if max_side < 1:
        raise DataError(f"max_side must be >= 1, got {max_side}")
    if max(img.width, img.height) <= max_side:
        return img

    target = working_size(img.width, img.height, max_side)
    channels = []
    for c in range(3):
        plane = Image.fromarray(img.channel(c).astype(np.float32))
        plane = plane.resize(target, resample=Image.Resampling.BOX)
        channels.append(np.asarray(plane, dtype=np.float64))
    return RgbImage(np.clip(np.stack(channels, axis=-1), 0.0, 1.0))


def resize_mask_nearest(mask: BinaryMask, target_w: int, target_h: int) -> BinaryMask:
    """Nearest-neighbor resample of a mask to (target_w, target_h)"""
    if target_w < 1 or target_h < 1:
        raise DataError(f"target dims must be >= 1, got {target_w}x{target_h}")
    if (mask.width, mask.height) == (target_w, target_h):
        return mask
    plane = Image.fromarray(mask.bits.astype(np.uint8) * 255)
    plane = plane.resize((target_w, target_h), resample=Image.Resampling.NEAREST)
    return BinaryMask(np.asarray(plane) > 127)


def sample_pixels(img: RgbImage, mask: BinaryMask, inside: bool, n: int, seed: int) -> np.ndarray:
    """
    Uniform sample without replacement of min(n, available) region pixels.

    Args:
        img: Source image
        mask: Region selector, same dims as img
        inside: Sample where mask is set (True) or clear (False)
        n: Requested sample count
        seed: RNG seed

    Returns:
        Array of shape (k, 3) with the sampled RGB vectors
    """
    check_same_dims(img, mask, "image and mask")
    if n < 1:
        raise DataError(f"sample count must be >= 1, got {n}")
    region = mask.bits if inside else ~mask.bits
    candidates = np.flatnonzero(region)
    if candidates.size == 0:
        raise DataError("empty region")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(candidates, size=min(n, candidates.size), replace=False)
    return img.pixels.reshape(-1, 3)[chosen]


def contour(mask: BinaryMask) -> BinaryMask:
    """Foreground pixels with a 4-neighbor in the background (outside counts as background)"""
    inner = ndimage.binary_erosion(mask.bits, structure=CROSS, border_value=0)
    return BinaryMask(mask.bits & ~inner)


def perimeter(mask: BinaryMask) -> int:
    """Number of contour pixels"""
    return contour(mask).area


# ============================================================================
# FILE I/O
# ============================================================================

def read_rgb(path: str) -> RgbImage:
    """Read a PNG/JPEG file as a normalized RGB image"""
    try:
        with Image.open(path) as im:
            array = np.asarray(im.convert("RGB"))
    except (OSError, ValueError) as e:
        raise DataError(f"cannot read image {path}: {e}")
    return RgbImage.from_uint8(array)


def read_mask(path: str) -> BinaryMask:
    """Read an ISIC mask (8-bit grayscale, lesion > 127)"""
    try:
        with Image.open(path) as im:
            array = np.asarray(im.convert("L"))
    except (OSError, ValueError) as e:
        raise DataError(f"cannot read mask {path}: {e}")
    return BinaryMask(array > 127)


def write_mask(path: str, mask: BinaryMask):
    """Write a mask as 8-bit grayscale PNG with values {0,255}"""
    Image.fromarray(mask.bits.astype(np.uint8) * 255).save(path, format="PNG")


def write_scalar_png(path: str, smap: ScalarMap):
    """Write a [0,1] map as 8-bit grayscale, value = round(255·p)"""
    levels = np.clip(np.floor(smap.values * 255.0 + 0.5), 0, 255).astype(np.uint8)
    Image.fromarray(levels).save(path, format="PNG")


TRUTH_COLOR = (255, 0, 0)
PREDICTION_COLOR = (0, 255, 0)


def render_overlay(img: RgbImage, pred: BinaryMask, truth: Optional[BinaryMask] = None) -> np.ndarray:
    """
    Draw 1-px contours over an image.

    Truth is drawn red and the prediction green; the prediction is drawn last.

    Returns:
        uint8 array of shape (h, w, 3)
    """
    check_same_dims(img, pred, "image and predicted mask")
    canvas = img.to_uint8().copy()
    if truth is not None:
        check_same_dims(img, truth, "image and truth mask")
        canvas[contour(truth).bits] = TRUTH_COLOR
    canvas[contour(pred).bits] = PREDICTION_COLOR
    return canvas


def write_rgb(path: str, array: np.ndarray):
    """Write a uint8 RGB array as PNG"""
    Image.fromarray(np.asarray(array, dtype=np.uint8)).save(path, format="PNG")
