#!/usr/bin/env python3
"""
ISIC-layout dataset ingestion and working-resolution loading
"""
import logging
import os
import re
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from .errors import DataError
from .models import DatasetEntry, DatasetIndex
from .raster import (BinaryMask, RgbImage, read_mask, read_rgb, resize_area_average,
                     resize_mask_nearest)
from .report_io import read_labels_csv

logger = logging.getLogger(__name__)

IMAGE_PATTERN = re.compile(r"^(ISIC_\d+)\.(jpg|jpeg|png)$", re.IGNORECASE)
MASK_SUFFIX = "_segmentation.png"


def mask_file_name(image_id: str) -> str:
    return f"{image_id}{MASK_SUFFIX}"


def find_mask(masks_dir: str, image_id: str) -> Optional[str]:
    path = os.path.join(masks_dir, mask_file_name(image_id))
    return path if os.path.isfile(path) else None


def ingest(images_dir: str, masks_dir: Optional[str] = None,
           labels_csv: Optional[str] = None) -> DatasetIndex:
    """
    Index an ISIC-layout dataset.

    Args:
        images_dir: Directory of `ISIC_<id>.(jpg|png)` images
        masks_dir: Directory of `ISIC_<id>_segmentation.png` masks; every image needs one
        labels_csv: One-hot ground truth `image,MEL,NV,BCC,AKIEC,BKL,DF,VASC`

    Returns:
        DatasetIndex ordered by image id
    """
    if not os.path.isdir(images_dir):
        raise DataError(f"images directory not found: {images_dir}")
    if masks_dir is not None and not os.path.isdir(masks_dir):
        raise DataError(f"masks directory not found: {masks_dir}")

    images: Dict[str, str] = {}
    for name in sorted(os.listdir(images_dir)):
        match = IMAGE_PATTERN.match(name)
        if not match:
            continue
        image_id = match.group(1)
        if image_id in images:
            raise DataError(f"image {image_id} present in more than one format")
        images[image_id] = os.path.join(images_dir, name)
    if not images:
        raise DataError(f"no ISIC images found in {images_dir}")

    labels = read_labels_csv(labels_csv) if labels_csv else {}
    if labels_csv:
        unlabeled = sorted(set(images) - set(labels))
        if unlabeled:
            raise DataError(f"no label row for: {unlabeled}")

    entries = []
    missing_masks = []
    for image_id, image_path in images.items():
        mask_path = None
        if masks_dir is not None:
            mask_path = find_mask(masks_dir, image_id)
            if mask_path is None:
                missing_masks.append(image_id)
        entries.append(DatasetEntry(image_id, image_path, mask_path, labels.get(image_id)))
    if missing_masks:
        raise DataError(f"missing masks for: {missing_masks}")

    logger.info("Indexed %d images%s%s from %s", len(entries),
                " with masks" if masks_dir else "", " and labels" if labels_csv else "", images_dir)
    return DatasetIndex(tuple(entries))


@dataclass(frozen=True, eq=False)
class WorkingImage:
    """An image at working resolution with its original size"""
    image_id: str
    image: RgbImage
    original_size: Tuple[int, int]


def load_working_image(entry: DatasetEntry, max_side: int) -> WorkingImage:
    img = read_rgb(entry.image_path)
    return WorkingImage(entry.image_id, resize_area_average(img, max_side), (img.width, img.height))


def load_working_mask(path: str, working: WorkingImage) -> BinaryMask:
    """Read a mask and resample it to the working image's size"""
    mask = read_mask(path)
    if (mask.width, mask.height) != working.original_size:
        raise DataError(f"mask {path} is {mask.width}x{mask.height}, image {working.image_id} is "
                        f"{working.original_size[0]}x{working.original_size[1]}")
    return resize_mask_nearest(mask, working.image.width, working.image.height)
