"""Close the loop: perceive the scene, then move objects until it matches
the goal image.

Uses a deliberately entangled two-object swap on top of a generated scene,
so the planner has to relocate a blocker to a buffer pose before the
direct moves succeed.
"""

import numpy as np

from mvor import geometry as geo
from mvor.bench import estimates_by_object
from mvor.geometry import PlanarTransform
from mvor.localization import LocalizationConfig, PoseEstimate, estimate_all
from mvor.perception import PerceptionConfig, build_database
from mvor.planner import plan_and_execute
from mvor.sim import (
    Placement,
    Rect,
    SceneState,
    SimConfig,
    generate_model_library,
    ground_truth_segmenter,
    render,
)
from mvor.sim.scene import RearrangementInstance

config = SimConfig(seed=12)
perception = PerceptionConfig()
localization = LocalizationConfig()
library = generate_model_library(config)
backend = perception.make_backend(library)
segmenter = ground_truth_segmenter()
intr = config.intrinsics()

# objects 0 and 1 trade places (non-monotone: someone must yield first);
# objects 2 and 3 have plain independent moves
bounds = Rect(-0.5, -0.5, 0.5, 0.5)
initial_scene = SceneState(
    bounds,
    (
        Placement(0, PlanarTransform(0.0, -0.15, 0.00)),
        Placement(1, PlanarTransform(0.5, 0.15, 0.00)),
        Placement(2, PlanarTransform(1.0, -0.25, -0.30)),
        Placement(3, PlanarTransform(-0.8, 0.25, -0.30)),
    ),
)
goal_scene = SceneState(
    bounds,
    (
        Placement(0, PlanarTransform(0.9, 0.15, 0.00)),
        Placement(1, PlanarTransform(-0.4, -0.15, 0.00)),
        Placement(2, PlanarTransform(0.2, 0.25, 0.30)),
        Placement(3, PlanarTransform(1.4, -0.25, 0.30)),
    ),
)
instance = RearrangementInstance(
    initial=initial_scene,
    goal=goal_scene,
    true_offsets=[
        geo.planar_compose(g.pose, geo.planar_invert(i.pose))
        for i, g in zip(initial_scene.placements, goal_scene.placements)
    ],
    home_viewpoint=config.home_viewpoint(),
    ring_viewpoints=config.ring_viewpoints(),
    seed=12,
    config=config,
)
frames = [
    render(instance.initial, vp, intr, library, frame_id=i)
    for i, vp in enumerate(instance.ring_viewpoints)
]
db = build_database(frames, segmenter, backend, perception)
goal_frame = render(instance.goal, instance.home_viewpoint, intr, library, frame_id=99)
matcher = localization.make_matcher(library)
by_object = estimates_by_object(
    instance, db,
    estimate_all(goal_frame, db, matcher, backend, segmenter, localization, perception),
)
estimates = {
    i: by_object.get(i, PoseEstimate(T=geo.Pose3.identity(), accepted=False))
    for i in range(instance.initial.num_objects)
}

result = plan_and_execute(instance, estimates, library)
print(f"completed: {result.completed} in {result.outer_iterations} outer iterations")
print(f"manipulations: {result.total_manipulations} "
      f"({sum(result.goal_moves.values())} goal, {sum(result.buffer_moves.values())} buffer)\n")
print("move log:")
for m in result.moves:
    status = "ok" if m.executed else "BLOCKED"
    print(
        f"  step {m.step:>2d}: object {m.object_index} {m.kind:<11s} -> "
        f"({m.target.tx * 100:+6.1f}, {m.target.ty * 100:+6.1f}) cm @ "
        f"{np.degrees(m.target.yaw):+7.1f} deg  [{status}]"
    )

print("\nfinal placement error per object:")
for i, p in enumerate(result.final_scene.placements):
    g = instance.goal.placements[i].pose
    dyaw = abs(np.degrees(geo.wrap_angle(p.pose.yaw - g.yaw)))
    dt = np.hypot(p.pose.tx - g.tx, p.pose.ty - g.ty) * 100
    print(f"  object {i}: {dyaw:.4f} deg, {dt:.4f} cm")
