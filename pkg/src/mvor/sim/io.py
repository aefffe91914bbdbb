"""Instance and dataset files.

An instance file is a single JSON document carrying the table bounds, a
model-library reference (seed + size), initial and goal placements, the
per-object true planar offsets, the viewpoint poses as 4x4 row-major
matrices, and a full config echo. Floats round-trip bit-exactly through
JSON because Python serializes them via repr.
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import ConfigParseError
from ..geometry import PlanarTransform, Pose3
from ..serialize import dump_json, from_dict, load_json, to_dict
from .config import SimConfig
from .scene import Placement, RearrangementInstance, Rect, SceneState

INSTANCE_FORMAT = "mvor-instance"
DATASET_FORMAT = "mvor-dataset"
FORMAT_VERSION = 1


def _pose_to_rows(p: Pose3):
    return [[float(v) for v in row] for row in p.matrix]


def _placements_to_list(scene: SceneState):
    return [
        {"model_id": p.model_id, "yaw": p.pose.yaw, "tx": p.pose.tx, "ty": p.pose.ty}
        for p in scene.placements
    ]


def _placements_from_list(items, bounds: Rect) -> SceneState:
    return SceneState(
        bounds,
        tuple(
            Placement(int(i["model_id"]), PlanarTransform(i["yaw"], i["tx"], i["ty"]))
            for i in items
        ),
    )


def instance_to_dict(inst: RearrangementInstance) -> dict:
    b = inst.initial.table_bounds
    return {
        "format": INSTANCE_FORMAT,
        "version": FORMAT_VERSION,
        "seed": inst.seed,
        "library": {"seed": inst.config.library_seed, "size": inst.config.library_size},
        "table_bounds": [b.xmin, b.ymin, b.xmax, b.ymax],
        "initial": _placements_to_list(inst.initial),
        "goal": _placements_to_list(inst.goal),
        "true_offsets": [
            {"yaw": o.yaw, "tx": o.tx, "ty": o.ty} for o in inst.true_offsets
        ],
        "home_viewpoint": _pose_to_rows(inst.home_viewpoint),
        "ring_viewpoints": [_pose_to_rows(p) for p in inst.ring_viewpoints],
        "config": to_dict(inst.config),
    }


def instance_from_dict(data: dict) -> RearrangementInstance:
    if data.get("format") != INSTANCE_FORMAT:
        raise ConfigParseError(f"not an instance file (format={data.get('format')!r})")
    if data.get("version") != FORMAT_VERSION:
        raise ConfigParseError(f"unsupported instance version {data.get('version')!r}")
    config = from_dict(SimConfig, data["config"], "config")
    bounds = Rect(*data["table_bounds"])
    return RearrangementInstance(
        initial=_placements_from_list(data["initial"], bounds),
        goal=_placements_from_list(data["goal"], bounds),
        true_offsets=[
            PlanarTransform(o["yaw"], o["tx"], o["ty"]) for o in data["true_offsets"]
        ],
        home_viewpoint=Pose3.from_matrix(np.array(data["home_viewpoint"])),
        ring_viewpoints=[Pose3.from_matrix(np.array(m)) for m in data["ring_viewpoints"]],
        seed=int(data["seed"]),
        config=config,
    )


def save_instance(inst: RearrangementInstance, path) -> None:
    dump_json(instance_to_dict(inst), path)


def load_instance(path) -> RearrangementInstance:
    return instance_from_dict(load_json(path))


def save_dataset(instances: list[RearrangementInstance], out_dir, config: SimConfig) -> None:
    """Write one instance file per scene plus a manifest."""
    os.makedirs(out_dir, exist_ok=True)
    files = []
    for inst in instances:
        name = f"instance_{inst.seed:08d}.json"
        save_instance(inst, os.path.join(out_dir, name))
        files.append(name)
    dump_json(
        {
            "format": DATASET_FORMAT,
            "version": FORMAT_VERSION,
            "count": len(instances),
            "seeds": [inst.seed for inst in instances],
            "files": files,
            "config": to_dict(config),
        },
        os.path.join(out_dir, "manifest.json"),
    )


def load_dataset(out_dir) -> list[RearrangementInstance]:
    manifest = load_json(os.path.join(out_dir, "manifest.json"))
    if manifest.get("format") != DATASET_FORMAT:
        raise ConfigParseError(f"{out_dir}: not a dataset directory")
    return [load_instance(os.path.join(out_dir, name)) for name in manifest["files"]]
