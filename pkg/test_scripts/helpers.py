#!/usr/bin/env python3
"""
Small raster builders shared by the tests
"""
import numpy as np

from src.raster import BinaryMask, RgbImage, ScalarMap


def square_mask(size, top, left, side):
    bits = np.zeros((size, size), dtype=bool)
    bits[top:top + side, left:left + side] = True
    return BinaryMask(bits)


def disk_mask(size, radius, center=None):
    cy, cx = center if center is not None else (size // 2, size // 2)
    yy, xx = np.mgrid[:size, :size]
    return BinaryMask((yy - cy) ** 2 + (xx - cx) ** 2 <= radius ** 2)


def gray_image(size, value=0.5):
    return RgbImage(np.full((size, size, 3), value))


def blob_posterior(size=40, sigma=8.0):
    """Gaussian bump centered in the image, peak 1"""
    yy, xx = np.mgrid[:size, :size]
    r2 = (yy - size / 2) ** 2 + (xx - size / 2) ** 2
    return ScalarMap(np.exp(-r2 / (2.0 * sigma ** 2)))
