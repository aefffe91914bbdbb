"""Iterative rearrangement execution.

The loop processes objects in a fixed order (index ascending). Per object
and outer pass: refresh the tracked pose (dead-reckoned, or re-observed
from the home viewpoint when a reobserver is supplied), recompute the
remaining offset from the tracked pose, skip objects already within the
success thresholds, collision-check the move, execute on success, and on
repeated failure relocate the blocker to a random collision-free buffer
pose. The loop ends when nothing remains or the outer-iteration budget
(2x object count by default) is exhausted.

The planner operates on estimated offsets only. Absolute targets handed to
the simulator are "apply the offset to the object wherever it currently
is": the tracked pose initialized from the initial scene stands in for the
robot's perception of the current scene.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NoBufferSpace, ReobservationFailed, UnknownObject
from .geometry import (
    PlanarTransform,
    Pose3,
    lift,
    planar_compose,
    planar_invert,
    wrap_angle,
)
from .sim.models import ModelLibrary
from .sim.scene import RearrangementInstance, SceneState, apply_move


@dataclass
class PlannerConfig:
    thres_fail: int = 3  # failures tolerated before a buffer relocation
    outer_factor: int = 2  # outer-iteration budget = factor * object count
    collision_margin: float = 0.01  # meters added around footprints
    success_yaw_deg: float = 5.0
    success_t_cm: float = 2.0
    buffer_attempts: int = 1000
    actuation_sigma: float = 0.0
    seed: int = 0


@dataclass
class PlanState:
    remaining: list[int]
    failure_counts: dict[int, int]
    outer_iterations: int
    tracked_poses: dict[int, PlanarTransform]


@dataclass
class MoveRecord:
    step: int
    object_index: int
    kind: str  # 'goal-move' | 'buffer-move'
    target: PlanarTransform
    collision: bool  # pre-move check outcome (True means the move was blocked)
    executed: bool
    failure_count: int

    def as_dict(self) -> dict:
        return {
            "step": self.step,
            "object": self.object_index,
            "kind": self.kind,
            "yaw_deg": float(np.degrees(self.target.yaw)),
            "tx": self.target.tx,
            "ty": self.target.ty,
            "collision": self.collision,
            "executed": self.executed,
            "failure_count": self.failure_count,
        }


@dataclass
class ExecutionResult:
    moves: list[MoveRecord]
    completed: bool
    outer_iterations: int
    final_scene: SceneState
    goal_moves: dict[int, int] = field(default_factory=dict)
    buffer_moves: dict[int, int] = field(default_factory=dict)

    def manipulations(self, object_index: int) -> int:
        return self.goal_moves.get(object_index, 0) + self.buffer_moves.get(object_index, 0)

    @property
    def total_manipulations(self) -> int:
        return sum(self.goal_moves.values()) + sum(self.buffer_moves.values())


def _pose_to_planar(pose: Pose3) -> PlanarTransform:
    return PlanarTransform(
        float(np.arctan2(pose.rotation[1, 0], pose.rotation[0, 0])),
        float(pose.translation[0]),
        float(pose.translation[1]),
    )


def check_collision(
    scene: SceneState,
    library: ModelLibrary,
    object_index: int,
    target: PlanarTransform,
    margin: float = 0.01,
) -> bool:
    """True iff placing the object at ``target`` (footprint inflated by
    ``margin``) would intersect another object or leave the table."""
    if not 0 <= object_index < scene.num_objects:
        raise UnknownObject(f"object index {object_index}")
    radius = library.model(scene.placements[object_index].model_id).footprint_radius
    grown = radius + margin
    if not scene.table_bounds.contains_disc(target.tx, target.ty, grown):
        return True
    for j, (x, y, r) in enumerate(scene.footprints(library)):
        if j == object_index:
            continue
        if np.hypot(target.tx - x, target.ty - y) < grown + r:
            return True
    return False


def correct_pose(
    object_index: int, state: PlanState, goal_placement: PlanarTransform
) -> Pose3:
    """Offset still needed to bring the object to its believed goal,
    recomputed from the tracked current pose (so buffer moves and prior
    actuation error are absorbed)."""
    tracked = state.tracked_poses[object_index]
    return lift(planar_compose(goal_placement, planar_invert(tracked)))


def find_buffer_pose(
    scene: SceneState,
    library: ModelLibrary,
    object_index: int,
    rng,
    margin: float = 0.01,
    attempts: int = 1000,
) -> PlanarTransform:
    """Random collision-free placement for a blocking object."""
    b = scene.table_bounds
    for _ in range(attempts):
        pose = PlanarTransform(
            rng.uniform(-np.pi, np.pi),
            rng.uniform(b.xmin, b.xmax),
            rng.uniform(b.ymin, b.ymax),
        )
        if not check_collision(scene, library, object_index, pose, margin):
            return pose
    raise NoBufferSpace(f"no buffer pose within {attempts} attempts")


def _within_success(current: PlanarTransform, goal: PlanarTransform, config: PlannerConfig) -> bool:
    dyaw = abs(np.degrees(wrap_angle(current.yaw - goal.yaw)))
    dt = np.hypot(current.tx - goal.tx, current.ty - goal.ty) * 100.0
    return dyaw < config.success_yaw_deg and dt < config.success_t_cm


def plan_and_execute(
    instance: RearrangementInstance,
    estimates: dict,
    library: ModelLibrary,
    config: PlannerConfig | None = None,
    reobserve=None,
) -> ExecutionResult:
    """Run the full rearrangement loop against the simulator.

    ``estimates`` maps object index -> PoseEstimate (planar relative pose);
    objects with a not-accepted estimate are never moved toward a goal and
    accrue failures instead. ``reobserve(scene, object_index, tracked_guess)``
    may return a fresh tracked pose (or raise ReobservationFailed); without
    it the planner dead-reckons. Deterministic for a fixed config seed.
    """
    config = config or PlannerConfig()
    rng = np.random.default_rng(config.seed)
    scene = instance.initial
    k = scene.num_objects
    order = sorted(estimates.keys())

    state = PlanState(
        remaining=[i for i in order],
        failure_counts={i: 0 for i in order},
        outer_iterations=0,
        tracked_poses={i: instance.initial.placements[i].pose for i in order},
    )
    # believed goal placement, fixed once from the initial estimate
    goal_beliefs = {}
    usable = {}
    for i in order:
        est = estimates[i]
        usable[i] = est.accepted
        if est.accepted:
            goal_beliefs[i] = planar_compose(_pose_to_planar(est.T), state.tracked_poses[i])

    moves: list[MoveRecord] = []
    goal_moves: dict[int, int] = {i: 0 for i in order}
    buffer_moves: dict[int, int] = {i: 0 for i in order}
    step = 0
    thres_outer = config.outer_factor * max(1, k)

    while True:
        state.outer_iterations += 1
        for i in list(state.remaining):
            if not usable[i]:
                state.failure_counts[i] += 1
                if state.failure_counts[i] > config.thres_fail:
                    scene, step = _buffer_relocate(
                        scene, library, i, state, config, rng, moves, buffer_moves, step
                    )
                continue
            if reobserve is not None:
                try:
                    state.tracked_poses[i] = reobserve(scene, i, state.tracked_poses[i])
                except ReobservationFailed:
                    state.failure_counts[i] += 1
                    continue
            offset = correct_pose(i, state, goal_beliefs[i])
            target = planar_compose(_pose_to_planar(offset), state.tracked_poses[i])
            if _within_success(state.tracked_poses[i], goal_beliefs[i], config):
                state.remaining.remove(i)
                continue
            collision = check_collision(scene, library, i, target, config.collision_margin)
            step += 1
            moves.append(
                MoveRecord(step, i, "goal-move", target, collision, not collision,
                           state.failure_counts[i])
            )
            if not collision:
                scene = apply_move(scene, library, i, target, config.actuation_sigma, rng)
                state.tracked_poses[i] = target
                goal_moves[i] += 1
                state.remaining.remove(i)
            else:
                state.failure_counts[i] += 1
                if state.failure_counts[i] > config.thres_fail:
                    scene, step = _buffer_relocate(
                        scene, library, i, state, config, rng, moves, buffer_moves, step
                    )
        if not state.remaining or state.outer_iterations > thres_outer:
            break

    return ExecutionResult(
        moves=moves,
        completed=not state.remaining,
        outer_iterations=state.outer_iterations,
        final_scene=scene,
        goal_moves=goal_moves,
        buffer_moves=buffer_moves,
    )


def _buffer_relocate(scene, library, i, state, config, rng, moves, buffer_moves, step):
    try:
        pose = find_buffer_pose(
            scene, library, i, rng, config.collision_margin, config.buffer_attempts
        )
    except NoBufferSpace:
        return scene, step  # logged implicitly by the missing record; try next round
    step += 1
    moves.append(MoveRecord(step, i, "buffer-move", pose, False, True, state.failure_counts[i]))
    scene = apply_move(scene, library, i, pose, config.actuation_sigma, rng)
    state.tracked_poses[i] = pose
    buffer_moves[i] += 1
    return scene, step


def replay_moves(
    instance: RearrangementInstance, moves: list[MoveRecord], library: ModelLibrary
) -> SceneState:
    """Re-execute the logged moves noiselessly; raises CollisionAtTarget if
    the log was ever unsafe."""
    scene = instance.initial
    for m in moves:
        if m.executed:
            scene = apply_move(scene, library, m.object_index, m.target, 0.0, None)
    return scene
