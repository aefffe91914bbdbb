"""Point-splat rendering with a per-pixel z-buffer, plus ground-truth
instance segmentation with optional corruption.

A rendered Frame keeps, for every hit pixel, the winning point's feature id,
instance id, exact sub-pixel projection and exact depth. Back-projecting the
stored (u, v, depth) therefore recovers the point's world position to
floating-point precision, which is what makes the downstream matching and
pose-recovery paths testable against exact ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..errors import EmptyFrame
from ..geometry import CameraIntrinsics, Pose3, invert, project_points, rot_z
from .models import ModelLibrary
from .scene import SceneState


@dataclass
class Frame:
    feature_ids: np.ndarray  # (H,W) int64, -1 where empty
    instance_ids: np.ndarray  # (H,W) int32, -1 where empty
    px: np.ndarray  # (H,W,2) float64 exact (u,v) of the winning point, NaN empty
    depth: np.ndarray  # (H,W) float64 camera-frame z, NaN where empty
    view_local: np.ndarray  # (H,W,3) unit point->camera direction in the
    # observed object's local frame; appearance similarity proxy for matchers
    viewpoint: Pose3  # camera-in-world
    intrinsics: CameraIntrinsics
    frame_id: int = 0

    @property
    def filled(self) -> np.ndarray:
        return self.feature_ids >= 0

    def instance_list(self) -> np.ndarray:
        ids = np.unique(self.instance_ids)
        return ids[ids >= 0]


def empty_frame(viewpoint: Pose3, intr: CameraIntrinsics, frame_id: int = 0) -> Frame:
    h, w = intr.height, intr.width
    return Frame(
        feature_ids=np.full((h, w), -1, dtype=np.int64),
        instance_ids=np.full((h, w), -1, dtype=np.int32),
        px=np.full((h, w, 2), np.nan),
        depth=np.full((h, w), np.nan),
        view_local=np.full((h, w, 3), np.nan),
        viewpoint=viewpoint,
        intrinsics=intr,
        frame_id=frame_id,
    )


def render(
    scene: SceneState,
    viewpoint: Pose3,
    intr: CameraIntrinsics,
    library: ModelLibrary,
    frame_id: int = 0,
) -> Frame:
    """Render all model points visible from ``viewpoint``.

    A point is visible iff its outward normal faces the camera and it wins
    the z-buffer at its pixel; occlusion between objects emerges from the
    depth comparison. Raises EmptyFrame when nothing projects into the image.
    """
    w2c = invert(viewpoint)
    cam_center = viewpoint.translation

    uv_all, z_all, fid_all, inst_all, view_all = [], [], [], [], []
    for idx, placement in enumerate(scene.placements):
        model = library.model(placement.model_id)
        rz = rot_z(placement.pose.yaw)
        shift = np.array([placement.pose.tx, placement.pose.ty, 0.0])
        pw = model.points @ rz.T + shift
        nw = model.normals @ rz.T
        facing = np.einsum("ij,ij->i", cam_center - pw, nw) > 0.0
        if not facing.any():
            continue
        pw = pw[facing]
        uv, z = project_points(intr, w2c, pw)
        ok = (
            (z > 1e-6)
            & (uv[:, 0] >= -0.5)
            & (uv[:, 0] < intr.width - 0.5)
            & (uv[:, 1] >= -0.5)
            & (uv[:, 1] < intr.height - 0.5)
        )
        if not ok.any():
            continue
        rays = cam_center - pw[ok]
        rays /= np.linalg.norm(rays, axis=1, keepdims=True)
        uv_all.append(uv[ok])
        z_all.append(z[ok])
        fid_all.append(model.point_feature_ids[facing][ok])
        inst_all.append(np.full(int(ok.sum()), idx, dtype=np.int32))
        view_all.append(rays @ rz)  # world->object-local rotation

    if not uv_all:
        raise EmptyFrame("no model points project into the image")

    uv = np.vstack(uv_all)
    z = np.concatenate(z_all)
    fid = np.concatenate(fid_all)
    inst = np.concatenate(inst_all)
    view = np.vstack(view_all)

    cols = np.floor(uv[:, 0] + 0.5).astype(np.int64)
    rows = np.floor(uv[:, 1] + 0.5).astype(np.int64)
    flat = rows * intr.width + cols
    # nearest depth wins each pixel; feature id breaks exact depth ties
    order = np.lexsort((fid, z, flat))
    flat_sorted = flat[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = flat_sorted[1:] != flat_sorted[:-1]
    win = order[first]

    frame = empty_frame(viewpoint, intr, frame_id)
    r, c = rows[win], cols[win]
    frame.feature_ids[r, c] = fid[win]
    frame.instance_ids[r, c] = inst[win]
    frame.px[r, c, 0] = uv[win, 0]
    frame.px[r, c, 1] = uv[win, 1]
    frame.depth[r, c] = z[win]
    frame.view_local[r, c] = view[win]
    return frame


def segment(
    frame: Frame,
    p_drop: float = 0.0,
    erode_radius: int = 0,
    rng=None,
) -> list[tuple[int, np.ndarray]]:
    """Ground-truth instance masks, optionally corrupted.

    Each mask is independently dropped with probability p_drop and eroded by
    erode_radius pixels (3x3 square structuring element per step). Masks are
    disjoint by construction. Returns [] for an empty frame.
    """
    if p_drop > 0.0 and rng is None:
        rng = np.random.default_rng(0)
    out = []
    for inst in frame.instance_list():
        if p_drop > 0.0 and rng.uniform() < p_drop:
            continue
        mask = frame.instance_ids == inst
        if erode_radius > 0:
            mask = ndimage.binary_erosion(
                mask, structure=np.ones((3, 3), dtype=bool), iterations=erode_radius
            )
        if mask.any():
            out.append((int(inst), mask))
    return out


def ground_truth_segmenter(p_drop: float = 0.0, erode_radius: int = 0, rng=None):
    """Segmenter factory matching the build_database callable contract."""

    def run(frame: Frame):
        return segment(frame, p_drop=p_drop, erode_radius=erode_radius, rng=rng)

    return run
