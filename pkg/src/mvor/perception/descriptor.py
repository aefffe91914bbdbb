"""Global region descriptors.

The retrieval contract is: descriptors are unit vectors, ranked by dot
product, computed after pad-and-resize scale normalization so that the same
object seen at different distances lands on nearly the same descriptor.

The backend here aggregates the fixed per-point descriptors of the
simulator's feature images holistically, combining global and local
structure: a whole-crop pooled block (a randomized histogram of the point
identities, robust to viewpoint change) is concatenated with per-cell
pooled blocks over a coarse spatial grid of the normalized crop (sensitive
to arrangement, sharpening the ranking among views of one object) and a
soft binned encoding of the observation direction. The concatenation goes
through a fixed seeded random projection and is normalized. Swappable:
anything with an ``extract(region) -> (d,) unit vector`` method stands in.
"""

from __future__ import annotations

import numpy as np

from ..errors import EmptyRegion
from .regions import ObjectRegion


class GridPooledDescriptor:
    def __init__(
        self,
        library,
        dim: int = 512,
        norm_resolution: int = 64,
        pool_grid: int = 4,
        grid_weight: float = 0.4,
        obs_bins: int = 8,
        obs_weight: float = 0.1,
        projection_seed: int = 20240,
    ):
        self.library = library
        self.dim = dim
        self.norm_resolution = norm_resolution
        self.pool_grid = pool_grid
        self.grid_weight = grid_weight
        self.obs_bins = obs_bins
        self.obs_weight = obs_weight
        d_pt = library.models[0].point_descriptors.shape[1]
        in_dim = d_pt + pool_grid * pool_grid * d_pt + obs_bins
        rng = np.random.default_rng(projection_seed)
        self.projection = rng.normal(size=(in_dim, dim)) / np.sqrt(in_dim)
        self._bin_centers = 2.0 * np.pi * np.arange(obs_bins) / obs_bins

    def _pooled_appearance(self, region: ObjectRegion) -> np.ndarray:
        res, g = self.norm_resolution, self.pool_grid
        rr, cc, valid = region.crop.pad_map(res).source_index_grid()
        h, w = region.crop.shape
        fids = np.where(
            valid, region.crop.feature_ids[rr.clip(0, h - 1), cc.clip(0, w - 1)], -1
        )
        hit = fids >= 0
        if not hit.any():
            raise EmptyRegion("region mask has no filled pixels")
        desc = self.library.descriptors_for(fids[hit])
        d_pt = desc.shape[1]

        whole = desc.sum(axis=0)
        whole /= np.linalg.norm(whole)

        cell = (np.nonzero(hit)[0] // (res // g)) * g + np.nonzero(hit)[1] // (res // g)
        cells = np.zeros((g * g, d_pt))
        np.add.at(cells, cell, desc)
        cells = cells.ravel()
        cells *= self.grid_weight / np.linalg.norm(cells)
        return np.concatenate([whole, cells])

    def _obs_encoding(self, obs_dir: np.ndarray) -> np.ndarray:
        az = np.arctan2(obs_dir[1], obs_dir[0])
        enc = np.maximum(0.0, np.cos(az - self._bin_centers)) ** 2
        n = np.linalg.norm(enc)
        return (enc / n if n > 0 else enc) * self.obs_weight

    def extract(self, region: ObjectRegion) -> np.ndarray:
        if region.obs_dir is None:
            raise ValueError("observation direction must be set before the descriptor")
        x = np.concatenate([self._pooled_appearance(region), self._obs_encoding(region.obs_dir)])
        y = x @ self.projection
        return y / np.linalg.norm(y)
