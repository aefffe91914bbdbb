"""Scene state, rearrangement instance generation, and simulated pick-and-place.

Collision model: every object occupies a vertical disc of its model's
footprint radius. A scene is valid when no two discs overlap and every
disc lies inside the table bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import CollisionAtTarget, PlacementFailure
from ..geometry import PlanarTransform, Pose3, planar_compose, planar_invert
from .config import SimConfig
from .models import ModelLibrary


@dataclass(frozen=True)
class Rect:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def contains_disc(self, x: float, y: float, r: float) -> bool:
        return (
            self.xmin + r <= x <= self.xmax - r
            and self.ymin + r <= y <= self.ymax - r
        )

    def shrunk(self, by: float) -> "Rect":
        return Rect(self.xmin + by, self.ymin + by, self.xmax - by, self.ymax - by)


@dataclass(frozen=True)
class Placement:
    model_id: int
    pose: PlanarTransform


@dataclass(frozen=True)
class SceneState:
    table_bounds: Rect
    placements: tuple[Placement, ...]

    @property
    def num_objects(self) -> int:
        return len(self.placements)

    def with_placement(self, index: int, pose: PlanarTransform) -> "SceneState":
        new = list(self.placements)
        new[index] = replace(new[index], pose=pose)
        return SceneState(self.table_bounds, tuple(new))

    def footprints(self, library: ModelLibrary) -> list[tuple[float, float, float]]:
        """(x, y, radius) per object."""
        return [
            (p.pose.tx, p.pose.ty, library.model(p.model_id).footprint_radius)
            for p in self.placements
        ]

    def has_collisions(self, library: ModelLibrary) -> bool:
        fps = self.footprints(library)
        for i, (x, y, r) in enumerate(fps):
            if not self.table_bounds.contains_disc(x, y, r):
                return True
            for x2, y2, r2 in fps[i + 1 :]:
                if np.hypot(x - x2, y - y2) < r + r2:
                    return True
        return False


@dataclass
class RearrangementInstance:
    initial: SceneState
    goal: SceneState
    true_offsets: list[PlanarTransform]  # per object: goal = offset o initial
    home_viewpoint: Pose3
    ring_viewpoints: list[Pose3]
    seed: int
    config: SimConfig


def _table_rect(config: SimConfig) -> Rect:
    return Rect(
        -config.table_width / 2.0,
        -config.table_depth / 2.0,
        config.table_width / 2.0,
        config.table_depth / 2.0,
    )


class _PlacementSampler:
    """Rejection sampler with a shared attempt budget per instance."""

    def __init__(self, config: SimConfig, rng):
        self.config = config
        self.rng = rng
        self.attempts_left = config.placement_attempts

    def sample(self, area: Rect, radius: float, placed, yaw=None) -> PlanarTransform:
        clearance = self.config.min_clearance
        lo_x, hi_x = area.xmin + radius, area.xmax - radius
        lo_y, hi_y = area.ymin + radius, area.ymax - radius
        if lo_x > hi_x or lo_y > hi_y:
            raise PlacementFailure(f"footprint radius {radius:.3f} exceeds placement area")
        while self.attempts_left > 0:
            self.attempts_left -= 1
            x = self.rng.uniform(lo_x, hi_x)
            y = self.rng.uniform(lo_y, hi_y)
            ok = all(
                np.hypot(x - px, y - py) >= radius + pr + clearance
                for px, py, pr in placed
            )
            if ok:
                theta = self.rng.uniform(-np.pi, np.pi) if yaw is None else yaw
                return PlanarTransform(theta, x, y)
        raise PlacementFailure(
            f"no collision-free placement within {self.config.placement_attempts} attempts"
        )


def generate_instance(
    config: SimConfig, library: ModelLibrary, seed: int | None = None
) -> RearrangementInstance:
    """Sample one rearrangement task.

    The goal scene is placed first; the initial scene re-places every object
    at a fresh collision-free position with a yaw offset drawn from the
    configured rotation regime. Deterministic in (config, seed).
    """
    config.validate()
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    bounds = _table_rect(config)
    area = bounds.shrunk(config.placement_margin)
    sampler = _PlacementSampler(config, rng)

    n = int(rng.integers(config.object_count_min, config.object_count_max + 1))
    if n > len(library):
        raise PlacementFailure(f"scene needs {n} distinct models, library has {len(library)}")
    model_ids = [int(m) for m in rng.choice(len(library), size=n, replace=False)]
    radii = [library.model(m).footprint_radius for m in model_ids]

    goal_placed: list[tuple[float, float, float]] = []
    goal_poses: list[PlanarTransform] = []
    for r in radii:
        pose = sampler.sample(area, r, goal_placed)
        goal_poses.append(pose)
        goal_placed.append((pose.tx, pose.ty, r))

    yaw_lo, yaw_hi = config.yaw_range()
    init_placed: list[tuple[float, float, float]] = []
    init_poses: list[PlanarTransform] = []
    offsets: list[PlanarTransform] = []
    for r, goal_pose in zip(radii, goal_poses):
        dyaw = rng.uniform(yaw_lo, yaw_hi)
        pose = sampler.sample(area, r, init_placed, yaw=goal_pose.yaw - dyaw)
        init_poses.append(pose)
        init_placed.append((pose.tx, pose.ty, r))
        offsets.append(planar_compose(goal_pose, planar_invert(pose)))

    mk = lambda poses: SceneState(
        bounds,
        tuple(Placement(m, p) for m, p in zip(model_ids, poses)),
    )
    return RearrangementInstance(
        initial=mk(init_poses),
        goal=mk(goal_poses),
        true_offsets=offsets,
        home_viewpoint=config.home_viewpoint(),
        ring_viewpoints=config.ring_viewpoints(),
        seed=seed,
        config=config,
    )


def apply_move(
    scene: SceneState,
    library: ModelLibrary,
    object_index: int,
    target: PlanarTransform,
    sigma: float = 0.0,
    rng=None,
) -> SceneState:
    """Pick-and-place the object at ``object_index`` to ``target``.

    The target must be collision-free against all other objects and inside
    the table bounds; callers are expected to collision-check first. With
    sigma > 0 the final placement is the target perturbed by zero-mean
    Gaussian noise in (yaw, tx, ty), which may land short of the ideal pose
    (callers budget margins accordingly).
    """
    if not 0 <= object_index < scene.num_objects:
        raise CollisionAtTarget(f"object index {object_index} not in scene")
    radius = library.model(scene.placements[object_index].model_id).footprint_radius
    if not scene.table_bounds.contains_disc(target.tx, target.ty, radius):
        raise CollisionAtTarget("target footprint leaves the table")
    for j, (x, y, r) in enumerate(scene.footprints(library)):
        if j == object_index:
            continue
        if np.hypot(target.tx - x, target.ty - y) < radius + r:
            raise CollisionAtTarget(f"target overlaps object {j}")
    final = target
    if sigma > 0.0:
        if rng is None:
            rng = np.random.default_rng(0)
        noise = rng.normal(0.0, sigma, size=3)
        final = PlanarTransform(target.yaw + noise[0], target.tx + noise[1], target.ty + noise[2])
    return scene.with_placement(object_index, final)
