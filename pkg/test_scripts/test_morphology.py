#!/usr/bin/env python3
"""
Test binary morphology against brute-force definitions
"""
import sys
import os
from collections import deque
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest

from src import morphology
from src.errors import DataError
from src.morphology import (cleanup, cleanup_radius, close, count_components, dilate, disk, erode,
                            fill_holes, largest_component)
from src.raster import BinaryMask
from test_scripts.helpers import disk_mask, square_mask


def brute_erode(bits, se):
    h, w = bits.shape
    out = np.zeros_like(bits)
    for y in range(h):
        for x in range(w):
            out[y, x] = all(0 <= y + dy < h and 0 <= x + dx < w and bits[y + dy, x + dx]
                            for dx, dy in se.offsets)
    return out


def brute_dilate(bits, se):
    h, w = bits.shape
    out = np.zeros_like(bits)
    for y in range(h):
        for x in range(w):
            out[y, x] = any(0 <= y - dy < h and 0 <= x - dx < w and bits[y - dy, x - dx]
                            for dx, dy in se.offsets)
    return out


def random_mask(seed, size=12, density=0.5):
    return BinaryMask(np.random.default_rng(seed).random((size, size)) < density)


# Test cases
disk_cases = [
    {"name": "radius 1 is a cross", "radius": 1, "count": 5},
    {"name": "radius 2", "radius": 2, "count": 13},
    {"name": "radius 3", "radius": 3, "count": 29},
]

radius_cases = [
    {"name": "tiny image", "diag": 20.0, "expected": 1},
    {"name": "1% of diagonal", "diag": 1000.0, "expected": 10},
    {"name": "rounds half up", "diag": 250.0, "expected": 3},
]


@pytest.mark.parametrize("case", disk_cases, ids=lambda c: c["name"])
def test_disk_offsets(case):
    se = disk(case["radius"])
    assert len(se.offsets) == case["count"]
    assert se.footprint.sum() == case["count"]


def test_disk_rejects_zero_radius():
    with pytest.raises(DataError):
        disk(0)


@pytest.mark.parametrize("case", radius_cases, ids=lambda c: c["name"])
def test_cleanup_radius(case):
    assert cleanup_radius(case["diag"]) == case["expected"]


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("radius", [1, 2])
def test_erode_and_dilate_match_definition(seed, radius):
    mask = random_mask(seed)
    se = disk(radius)
    assert np.array_equal(erode(mask, se).bits, brute_erode(mask.bits, se))
    assert np.array_equal(dilate(mask, se).bits, brute_dilate(mask.bits, se))


@pytest.mark.parametrize("seed", [3, 4, 5])
def test_open_close_laws(seed):
    mask = random_mask(seed, size=16, density=0.6)
    se = disk(1)
    opened = morphology.open(mask, se)
    closed = close(mask, se)
    assert not np.any(opened.bits & ~mask.bits)
    assert not np.any(mask.bits & ~closed.bits)
    assert morphology.open(opened, se).same_as(opened)
    assert close(closed, se).same_as(closed)


def test_close_is_extensive_at_the_border():
    mask = square_mask(10, 0, 0, 4)
    assert not np.any(mask.bits & ~close(mask, disk(2)).bits)


def test_fill_holes_fills_enclosed_background():
    ring = square_mask(9, 1, 1, 7).bits & ~square_mask(9, 3, 3, 3).bits
    filled = fill_holes(BinaryMask(ring))
    assert filled.same_as(square_mask(9, 1, 1, 7))


def test_fill_holes_leaves_border_background():
    bits = np.ones((5, 5), dtype=bool)
    bits[0, 2] = False
    bits[1, 2] = False
    assert fill_holes(BinaryMask(bits)).area == 23


def test_components_are_eight_connected():
    bits = np.zeros((4, 4), dtype=bool)
    bits[0, 0] = bits[1, 1] = True
    bits[3, 3] = True
    assert count_components(BinaryMask(bits)) == 2


def test_largest_component_ties_keep_first():
    bits = np.zeros((6, 6), dtype=bool)
    bits[0, 0:2] = True
    bits[4, 3:5] = True
    kept = largest_component(BinaryMask(bits))
    assert kept.area == 2
    assert kept.bits[0, 0]


def test_largest_component_of_empty_mask():
    assert largest_component(BinaryMask(np.zeros((3, 3)))).is_empty()


def test_cleanup_removes_specks_and_holes():
    bits = disk_mask(64, 15).bits.copy()
    bits[32, 32] = False
    bits[2, 60] = True
    cleaned = cleanup(BinaryMask(bits), BinaryMask(bits).diagonal)
    assert count_components(cleaned) == 1
    assert cleaned.bits[32, 32]
    assert not cleaned.bits[2, 60]


def test_cleanup_keeps_a_large_disk():
    mask = disk_mask(64, 20)
    cleaned = cleanup(mask, mask.diagonal)
    assert np.count_nonzero(cleaned.bits ^ mask.bits) <= perimeter_band(mask)


def perimeter_band(mask):
    return int(np.count_nonzero(dilate(mask, disk(1)).bits & ~erode(mask, disk(1)).bits))


def test_cleanup_of_empty_mask_is_empty():
    empty = BinaryMask(np.zeros((8, 8)))
    assert cleanup(empty, empty.diagonal).is_empty()


# ============================================================================
# FLOOD-FILL ORACLES ON RANDOM MASKS
# ============================================================================

NEIGHBORS_4 = ((-1, 0), (1, 0), (0, -1), (0, 1))
NEIGHBORS_8 = tuple((dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0))


def flood(bits, starts, steps):
    h, w = bits.shape
    seen = np.zeros_like(bits, dtype=bool)
    queue = deque()
    for y, x in starts:
        if bits[y, x] and not seen[y, x]:
            seen[y, x] = True
            queue.append((y, x))
    while queue:
        y, x = queue.popleft()
        for dy, dx in steps:
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w and bits[ny, nx] and not seen[ny, nx]:
                seen[ny, nx] = True
                queue.append((ny, nx))
    return seen


def bfs_fill_holes(bits):
    h, w = bits.shape
    border = [(y, x) for y in range(h) for x in range(w) if y in (0, h - 1) or x in (0, w - 1)]
    outside = flood(~bits, border, NEIGHBORS_4)
    return ~outside


def bfs_components(bits):
    """8-connected components in raster order of their first pixel"""
    taken = np.zeros_like(bits, dtype=bool)
    components = []
    for y, x in zip(*np.nonzero(bits)):
        if not taken[y, x]:
            component = flood(bits, [(y, x)], NEIGHBORS_8)
            taken |= component
            components.append(component)
    return components


def oracle_mask(seed, size=16):
    rng = np.random.default_rng(1000 + seed)
    return BinaryMask(rng.random((size, size)) < rng.uniform(0.3, 0.7))


@pytest.mark.parametrize("seed", range(200))
def test_fill_and_components_match_flood_fill(seed):
    mask = oracle_mask(seed)
    assert np.array_equal(fill_holes(mask).bits, bfs_fill_holes(mask.bits))

    components = bfs_components(mask.bits)
    assert count_components(mask) == len(components)
    if components:
        sizes = [int(c.sum()) for c in components]
        expected = components[sizes.index(max(sizes))]
        assert np.array_equal(largest_component(mask).bits, expected)
    else:
        assert largest_component(mask).is_empty()


@pytest.mark.parametrize("seed", range(200))
def test_cleanup_leaves_at_most_one_component(seed):
    mask = oracle_mask(seed)
    assert count_components(cleanup(mask, mask.diagonal)) <= 1


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("radius", [1, 2, 3])
def test_erode_and_dilate_are_dual_away_from_the_border(seed, radius):
    mask = oracle_mask(seed)
    se = disk(radius)
    dilated = dilate(mask, se).bits
    dual = ~erode(BinaryMask(~mask.bits), se).bits
    inner = (slice(radius, -radius), slice(radius, -radius))
    assert np.array_equal(dilated[inner], dual[inner])
    assert np.array_equal(erode(mask, se).bits, brute_erode(mask.bits, se))
    assert np.array_equal(dilated, brute_dilate(mask.bits, se))
