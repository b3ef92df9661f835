#!/usr/bin/env python3
"""
Binary morphology used to clean thresholded lesion masks.

Erosion and dilation treat pixels outside the image as background.
Closing is evaluated on a canvas padded by the element radius so it stays
extensive for masks touching the border.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import ndimage

from .errors import DataError
from .raster import BinaryMask, round_half_up

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)
FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True, eq=False)
class StructuringElement:
    """Disk-shaped neighborhood given as integer (dx, dy) offsets"""
    radius: int
    offsets: Tuple[Tuple[int, int], ...]
    shape: str = "disk"

    @property
    def footprint(self) -> np.ndarray:
        """(2r+1)x(2r+1) boolean array centered on (0,0)"""
        r = self.radius
        grid = np.zeros((2 * r + 1, 2 * r + 1), dtype=bool)
        for dx, dy in self.offsets:
            grid[dy + r, dx + r] = True
        return grid


def disk(radius: int) -> StructuringElement:
    """All offsets with dx² + dy² <= radius²"""
    if radius < 1:
        raise DataError(f"structuring element radius must be >= 1, got {radius}")
    offsets = tuple((dx, dy)
                    for dy in range(-radius, radius + 1)
                    for dx in range(-radius, radius + 1)
                    if dx * dx + dy * dy <= radius * radius)
    return StructuringElement(radius=radius, offsets=offsets)


def cleanup_radius(img_diag: float) -> int:
    """Disk radius used by cleanup: 1% of the image diagonal, at least 1"""
    return max(1, round_half_up(0.01 * img_diag))


def erode(mask: BinaryMask, se: StructuringElement) -> BinaryMask:
    return BinaryMask(ndimage.binary_erosion(mask.bits, structure=se.footprint, border_value=0))


def dilate(mask: BinaryMask, se: StructuringElement) -> BinaryMask:
    return BinaryMask(ndimage.binary_dilation(mask.bits, structure=se.footprint, border_value=0))


def complement(mask: BinaryMask) -> BinaryMask:
    return BinaryMask(~mask.bits)


def open(mask: BinaryMask, se: StructuringElement) -> BinaryMask:  # noqa: A001
    """Erosion then dilation; removes specks smaller than the element"""
    return dilate(erode(mask, se), se)


def close(mask: BinaryMask, se: StructuringElement) -> BinaryMask:
    """Dilation then erosion; bridges gaps narrower than the element"""
    r = se.radius
    padded = np.pad(mask.bits, r, mode="constant", constant_values=False)
    grown = ndimage.binary_dilation(padded, structure=se.footprint, border_value=0)
    closed = ndimage.binary_erosion(grown, structure=se.footprint, border_value=0)
    return BinaryMask(closed[r:-r, r:-r])


def fill_holes(mask: BinaryMask) -> BinaryMask:
    """Set background regions (4-connected) that do not reach the border"""
    return BinaryMask(ndimage.binary_fill_holes(mask.bits, structure=FOUR_CONNECTED))


def label_components(mask: BinaryMask):
    """8-connected labeling; labels follow row-major order of first pixel"""
    return ndimage.label(mask.bits, structure=EIGHT_CONNECTED)


def count_components(mask: BinaryMask) -> int:
    return int(label_components(mask)[1])


def largest_component(mask: BinaryMask) -> BinaryMask:
    """Keep the largest 8-connected component; ties keep the earliest in row-major order"""
    labels, count = label_components(mask)
    if count == 0:
        return BinaryMask(np.zeros_like(mask.bits))
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    keep = int(np.argmax(sizes))
    return BinaryMask(labels == keep)


def cleanup(mask: BinaryMask, img_diag: float) -> BinaryMask:
    """Open, close, fill holes, keep the largest component"""
    se = disk(cleanup_radius(img_diag))
    cleaned = open(mask, se)
    cleaned = close(cleaned, se)
    cleaned = fill_holes(cleaned)
    return largest_component(cleaned)
