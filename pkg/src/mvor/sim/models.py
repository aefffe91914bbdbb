"""Procedural tabletop object models.

Each model is a point-sampled surface: local-frame points with outward
normals, a globally unique feature id per point, and a fixed random unit
descriptor per point. The feature ids and descriptors are what the
perception stack can observe and match on; geometry is what it must infer.

Models sit on the table plane: local z spans [0, height], the footprint
center is the local origin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Feature ids are model_id * FEATURE_ID_STRIDE + point index, so they are
# unique across the library and the owning model is recoverable by division.
FEATURE_ID_STRIDE = 1_000_000


@dataclass
class ObjectModel:
    model_id: int
    family: str
    points: np.ndarray  # (M,3)
    normals: np.ndarray  # (M,3), unit rows
    point_feature_ids: np.ndarray  # (M,) int64
    point_descriptors: np.ndarray  # (M,d_pt), unit rows
    footprint_radius: float

    @property
    def num_points(self) -> int:
        return self.points.shape[0]


@dataclass
class ModelLibrary:
    models: list[ObjectModel]
    seed: int

    def __len__(self) -> int:
        return len(self.models)

    def model(self, model_id: int) -> ObjectModel:
        return self.models[model_id]

    def descriptors_for(self, feature_ids: np.ndarray) -> np.ndarray:
        """Look up the fixed per-point descriptors for an array of feature ids."""
        feature_ids = np.asarray(feature_ids)
        model_ids = feature_ids // FEATURE_ID_STRIDE
        local = feature_ids % FEATURE_ID_STRIDE
        d = self.models[0].point_descriptors.shape[1]
        out = np.empty((feature_ids.shape[0], d))
        for mid in np.unique(model_ids):
            sel = model_ids == mid
            out[sel] = self.models[int(mid)].point_descriptors[local[sel]]
        return out

    def max_footprint_radius(self) -> float:
        return max(m.footprint_radius for m in self.models)


def _unit_rows(a):
    return a / np.linalg.norm(a, axis=1, keepdims=True)


def _allocate(total: int, areas: np.ndarray) -> np.ndarray:
    """Split ``total`` samples across faces proportionally to area, >=1 each."""
    areas = np.asarray(areas, dtype=float)
    counts = np.maximum(1, np.round(total * areas / areas.sum()).astype(int))
    counts[-1] = max(1, total - int(counts[:-1].sum()))
    return counts


def _sample_rect_face(rng, origin, eu, ev, normal, count):
    u = rng.uniform(0.0, 1.0, count)
    v = rng.uniform(0.0, 1.0, count)
    pts = origin + u[:, None] * eu + v[:, None] * ev
    nrm = np.tile(normal, (count, 1))
    return pts, nrm


def _sample_box(rng, w, d, h, total):
    hw, hd = w / 2.0, d / 2.0
    faces = [
        # origin, edge-u, edge-v, normal, area  (bottom face omitted: rests on table)
        ([hw, -hd, 0], [0, d, 0], [0, 0, h], [1, 0, 0], d * h),
        ([-hw, -hd, 0], [0, d, 0], [0, 0, h], [-1, 0, 0], d * h),
        ([-hw, hd, 0], [w, 0, 0], [0, 0, h], [0, 1, 0], w * h),
        ([-hw, -hd, 0], [w, 0, 0], [0, 0, h], [0, -1, 0], w * h),
        ([-hw, -hd, h], [w, 0, 0], [0, d, 0], [0, 0, 1], w * d),
    ]
    counts = _allocate(total, [f[4] for f in faces])
    pts, nrms = [], []
    for (origin, eu, ev, normal, _), c in zip(faces, counts):
        p, n = _sample_rect_face(
            rng, np.array(origin, float), np.array(eu, float), np.array(ev, float), np.array(normal, float), c
        )
        pts.append(p)
        nrms.append(n)
    radius = float(np.hypot(hw, hd))
    return np.vstack(pts), np.vstack(nrms), radius


def _sample_cylinder(rng, r, h, total):
    lateral_area = 2 * np.pi * r * h
    top_area = np.pi * r * r
    n_lat, n_top = _allocate(total, [lateral_area, top_area])
    phi = rng.uniform(0.0, 2 * np.pi, n_lat)
    z = rng.uniform(0.0, h, n_lat)
    lat = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    lat_n = np.stack([np.cos(phi), np.sin(phi), np.zeros(n_lat)], axis=1)
    rad = r * np.sqrt(rng.uniform(0.0, 1.0, n_top))
    ang = rng.uniform(0.0, 2 * np.pi, n_top)
    top = np.stack([rad * np.cos(ang), rad * np.sin(ang), np.full(n_top, h)], axis=1)
    top_n = np.tile([0.0, 0.0, 1.0], (n_top, 1))
    return np.vstack([lat, top]), np.vstack([lat_n, top_n]), float(r)


def _sample_l_prism(rng, a, b, ta, tb, h, total):
    # L cross-section: union of [0,a]x[0,tb] and [0,ta]x[0,b], both in xy,
    # recentered so the bounding-box center is the origin.
    verts = np.array(
        [[0, 0], [a, 0], [a, tb], [ta, tb], [ta, b], [0, b]], dtype=float
    )
    center = np.array([a / 2.0, b / 2.0])
    verts -= center

    edges = [(verts[i], verts[(i + 1) % 6]) for i in range(6)]
    side_areas = [np.linalg.norm(q - p) * h for p, q in edges]
    top_area = a * tb + ta * b - ta * tb
    counts = _allocate(total, side_areas + [top_area])

    pts, nrms = [], []
    for (p, q), c in zip(edges, counts[:-1]):
        t = rng.uniform(0.0, 1.0, c)
        z = rng.uniform(0.0, h, c)
        xy = p + t[:, None] * (q - p)
        pts.append(np.column_stack([xy, z]))
        d = q - p
        # CCW polygon: outward normal is the edge direction rotated -90 deg
        n = np.array([d[1], -d[0], 0.0])
        n /= np.linalg.norm(n)
        nrms.append(np.tile(n, (c, 1)))

    # top face by rejection inside the L
    need = counts[-1]
    top = np.empty((need, 2))
    got = 0
    while got < need:
        cand = rng.uniform([0.0, 0.0], [a, b], size=(need * 2, 2))
        inside = (cand[:, 1] <= tb) | (cand[:, 0] <= ta)
        cand = cand[inside][: need - got]
        top[got : got + len(cand)] = cand
        got += len(cand)
    top -= center
    pts.append(np.column_stack([top, np.full(need, h)]))
    nrms.append(np.tile([0.0, 0.0, 1.0], (need, 1)))

    radius = float(np.max(np.linalg.norm(verts, axis=1)))
    return np.vstack(pts), np.vstack(nrms), radius


def generate_model_library(config) -> ModelLibrary:
    """Build the fixed model set used by every scene of a run.

    Deterministic in config.library_seed. Families cycle box / cylinder /
    L-prism so the set contains both rotationally symmetric geometry
    (cylinders, identifiable only through surface features) and asymmetric
    geometry.
    """
    rng = np.random.default_rng(config.library_seed)
    models = []
    for mid in range(config.library_size):
        family = ("box", "cylinder", "l_prism")[mid % 3]
        if family == "box":
            w, d = rng.uniform(0.05, 0.09, 2)
            h = rng.uniform(0.04, 0.08)
            pts, nrms, radius = _sample_box(rng, w, d, h, config.model_points)
        elif family == "cylinder":
            r = rng.uniform(0.025, 0.045)
            h = rng.uniform(0.04, 0.08)
            pts, nrms, radius = _sample_cylinder(rng, r, h, config.model_points)
        else:
            a, b = rng.uniform(0.06, 0.09, 2)
            ta, tb = rng.uniform(0.025, 0.04, 2)
            h = rng.uniform(0.035, 0.07)
            pts, nrms, radius = _sample_l_prism(rng, a, b, ta, tb, h, config.model_points)
        m = pts.shape[0]
        descriptors = _unit_rows(rng.normal(size=(m, config.point_descriptor_dim)))
        models.append(
            ObjectModel(
                model_id=mid,
                family=family,
                points=pts,
                normals=nrms,
                point_feature_ids=np.arange(m, dtype=np.int64) + mid * FEATURE_ID_STRIDE,
                point_descriptors=descriptors,
                footprint_radius=radius,
            )
        )
    return ModelLibrary(models=models, seed=config.library_seed)
