"""Coordinate plumbing between region crops and the matching resolution."""

from __future__ import annotations

import numpy as np


def crop_matching_coords(crop, resolution: int):
    """All mask pixels of a crop as (feature_ids, matching coords, view dirs).

    Coordinates come from the stored exact sub-pixel projections, so a
    noiseless match round-trips to the source geometry exactly.
    """
    rr, cc = np.nonzero(crop.mask)
    local = np.stack(
        [crop.px[rr, cc, 0] - crop.col0, crop.px[rr, cc, 1] - crop.row0], axis=1
    )
    return (
        crop.feature_ids[rr, cc],
        crop.pad_map(resolution).to_norm(local),
        crop.view_local[rr, cc],
    )


def matching_to_image_coords(crop, xy: np.ndarray, resolution: int) -> np.ndarray:
    """Matching-res coords -> continuous (u, v) in the crop's source image."""
    local = crop.pad_map(resolution).from_norm(xy)
    return local + np.array([crop.col0, crop.row0], dtype=float)


def matching_to_source_pixels(crop, xy: np.ndarray, resolution: int):
    """Matching-res coords -> nearest integer crop pixel (rows, cols, valid)."""
    local = crop.pad_map(resolution).from_norm(xy)
    cols = np.floor(local[:, 0] + 0.5).astype(int)
    rows = np.floor(local[:, 1] + 0.5).astype(int)
    h, w = crop.shape
    valid = (rows >= 0) & (rows < h) & (cols >= 0) & (cols < w)
    return rows, cols, valid
