"""Command-line interface.

Subcommands mirror the pipeline stages: ``gen`` (dataset), ``build-db``,
``localize``, ``rearrange``, ``bench-pose``, ``bench-completion``. Every
command takes ``--config`` (a JSON file mirroring BenchConfig), ``--seed``
and ``--out``; the MVOR_OUT environment variable supplies the default
output directory. Machine-readable outputs are byte-deterministic for a
fixed (config, seed).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .bench import (
    BenchConfig,
    MetricsReport,
    best_effort_error,
    estimates_by_object,
    make_reobserver,
    match_instances_to_objects,
    run_completion_bench,
    run_pose_bench,
    write_report,
)
from .errors import MvorError
from .geometry import wrap_angle
from .localization import estimate_all
from .perception import build_database, load_database, save_database
from .planner import plan_and_execute
from .serialize import dump_json, from_dict, load_json
from .sim import (
    generate_instance,
    generate_model_library,
    ground_truth_segmenter,
    load_instance,
    render,
    save_dataset,
    save_instance,
)


def load_config(path: str | None, seed: int | None) -> BenchConfig:
    cfg = from_dict(BenchConfig, load_json(path)) if path else BenchConfig()
    if seed is not None:
        cfg = replace(cfg, base_seed=seed)
    return cfg


def _out_dir(args, default_name: str) -> str:
    if args.out:
        return args.out
    return os.path.join(os.environ.get("MVOR_OUT", "."), default_name)


def _load_or_generate_instance(cfg: BenchConfig, args):
    if getattr(args, "instance", None):
        return load_instance(args.instance)
    library = generate_model_library(cfg.sim)
    return generate_instance(cfg.sim, library, seed=cfg.base_seed)


def cmd_gen(args) -> int:
    cfg = load_config(args.config, args.seed)
    count = args.count or cfg.scenes
    library = generate_model_library(cfg.sim)
    instances = [
        generate_instance(cfg.sim, library, seed=cfg.base_seed + i) for i in range(count)
    ]
    out = _out_dir(args, "dataset")
    save_dataset(instances, out, cfg.sim)
    print(f"wrote {count} instances to {out}")
    return 0


def cmd_build_db(args) -> int:
    cfg = load_config(args.config, args.seed)
    inst = _load_or_generate_instance(cfg, args)
    library = generate_model_library(inst.config)
    intr = inst.config.intrinsics()
    if args.view == "home":
        frames = [render(inst.initial, inst.home_viewpoint, intr, library, frame_id=0)]
    else:
        frames = [
            render(inst.initial, vp, intr, library, frame_id=i)
            for i, vp in enumerate(inst.ring_viewpoints)
        ]
    backend = cfg.perception.make_backend(library)
    db = build_database(frames, ground_truth_segmenter(), backend, cfg.perception)
    out = args.out or os.path.join(os.environ.get("MVOR_OUT", "."), "db.npz")
    save_database(
        db,
        out,
        extra_meta={
            "library_seed": inst.config.library_seed,
            "library_size": inst.config.library_size,
            "view": args.view,
            "instance_seed": inst.seed,
        },
    )
    print(f"wrote database ({db.num_instances} instances, {db.num_regions} regions) to {out}")
    return 0


def _pose_report_rows(inst, db, out):
    mapping = match_instances_to_objects(db, inst.initial)
    rows = []
    for u in sorted(out.keys()):
        est = out[u]
        yaw = float(np.degrees(np.arctan2(est.T.rotation[1, 0], est.T.rotation[0, 0])))
        row = {
            "instance": u,
            "accepted": bool(est.accepted),
            "yaw_deg": yaw,
            "tx_cm": float(est.T.translation[0] * 100),
            "ty_cm": float(est.T.translation[1] * 100),
            "T": [[float(v) for v in r] for r in est.T.matrix],
            "inliers": est.inlier_count,
            "inlier_ratio": est.inlier_ratio,
            "correspondences": est.num_correspondences,
            "candidates_visited": est.candidates_visited,
            "matcher_invocations": est.matcher_invocations,
            "note": est.note,
        }
        if u in mapping:
            i = mapping[u]
            row["matched_object"] = i
            dtheta, dt = best_effort_error(est, inst.true_offsets[i])
            row["dtheta_deg"] = dtheta
            row["dt_cm"] = dt
        rows.append(row)
    return rows


def cmd_localize(args) -> int:
    cfg = load_config(args.config, args.seed)
    db, header = load_database(args.db)
    inst = load_instance(args.instance)
    if header.get("library_seed") != inst.config.library_seed:
        raise MvorError(
            f"database built against library seed {header.get('library_seed')}, "
            f"instance uses {inst.config.library_seed}"
        )
    library = generate_model_library(inst.config)
    intr = inst.config.intrinsics()
    backend = cfg.perception.make_backend(library)
    goal_frame = render(inst.goal, inst.home_viewpoint, intr, library, frame_id=99)
    matcher = cfg.localization.make_matcher(library)
    out = estimate_all(
        goal_frame, db, matcher, backend, ground_truth_segmenter(),
        cfg.localization, cfg.perception,
    )
    path = args.out or os.path.join(os.environ.get("MVOR_OUT", "."), "poses.json")
    dump_json({"instance_seed": inst.seed, "objects": _pose_report_rows(inst, db, out)}, path)
    accepted = sum(1 for e in out.values() if e.accepted)
    print(f"estimated {len(out)} objects ({accepted} accepted); report at {path}")
    return 0


def cmd_rearrange(args) -> int:
    cfg = load_config(args.config, args.seed)
    inst = _load_or_generate_instance(cfg, args)
    library = generate_model_library(inst.config)
    intr = inst.config.intrinsics()
    backend = cfg.perception.make_backend(library)
    segmenter = ground_truth_segmenter()
    frames = [
        render(inst.initial, vp, intr, library, frame_id=i)
        for i, vp in enumerate(inst.ring_viewpoints)
    ]
    db = build_database(frames, segmenter, backend, cfg.perception)
    matcher = cfg.localization.make_matcher(library)
    goal_frame = render(inst.goal, inst.home_viewpoint, intr, library, frame_id=99)
    out = estimate_all(goal_frame, db, matcher, backend, segmenter, cfg.localization, cfg.perception)
    by_object = estimates_by_object(inst, db, out)
    from .localization import PoseEstimate
    from .geometry import Pose3

    estimates = {
        i: by_object.get(i, PoseEstimate(T=Pose3.identity(), accepted=False))
        for i in range(inst.initial.num_objects)
    }
    planner_cfg = replace(cfg.planner, actuation_sigma=cfg.sim.actuation_sigma, seed=inst.seed)
    reobserve = None
    if cfg.sim.actuation_sigma > 0:
        mapping = match_instances_to_objects(db, inst.initial)
        reobserve = make_reobserver(
            inst, library, db, backend, matcher, cfg.localization, cfg.perception,
            {i: u for u, i in mapping.items()},
        )
    result = plan_and_execute(inst, estimates, library, planner_cfg, reobserve)
    out_dir = _out_dir(args, "rearrange")
    os.makedirs(out_dir, exist_ok=True)
    save_instance(inst, os.path.join(out_dir, "instance.json"))
    dump_json([m.as_dict() for m in result.moves], os.path.join(out_dir, "moves.json"))
    finals = []
    for i, p in enumerate(result.final_scene.placements):
        g = inst.goal.placements[i].pose
        finals.append(
            {
                "object": i,
                "final_dtheta_deg": abs(float(np.degrees(wrap_angle(p.pose.yaw - g.yaw)))),
                "final_dt_cm": float(np.hypot(p.pose.tx - g.tx, p.pose.ty - g.ty) * 100),
                "goal_moves": result.goal_moves.get(i, 0),
                "buffer_moves": result.buffer_moves.get(i, 0),
            }
        )
    dump_json(
        {
            "completed": result.completed,
            "outer_iterations": result.outer_iterations,
            "total_manipulations": result.total_manipulations,
            "objects": finals,
        },
        os.path.join(out_dir, "result.json"),
    )
    print(
        f"rearrangement {'completed' if result.completed else 'INCOMPLETE'} in "
        f"{result.total_manipulations} manipulations; outputs in {out_dir}"
    )
    return 0


def cmd_bench_pose(args) -> int:
    cfg = load_config(args.config, args.seed)
    report = run_pose_bench(cfg)
    out = _out_dir(args, "bench_pose")
    write_report(report, out)
    _print_report(report, out)
    return 0


def cmd_bench_completion(args) -> int:
    cfg = load_config(args.config, args.seed)
    report = run_completion_bench(cfg)
    out = _out_dir(args, "bench_completion")
    write_report(report, out)
    _print_report(report, out)
    return 0


def _print_report(report: MetricsReport, out: str) -> None:
    from .bench import format_report

    print(format_report(report), end="")
    print(f"outputs in {out}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mvor", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help):
        sp.add_argument("--config", help="JSON config file (BenchConfig schema)")
        sp.add_argument("--seed", type=int, help="override the base seed")
        sp.add_argument("--out", help=out_help)

    sp = sub.add_parser("gen", help="generate a dataset of rearrangement instances")
    common(sp, "output dataset directory")
    sp.add_argument("--count", type=int, help="number of instances (default: config scenes)")
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("build-db", help="build a region database for an instance")
    common(sp, "output .npz path")
    sp.add_argument("--instance", help="instance JSON (default: generate from config+seed)")
    sp.add_argument("--view", choices=["ring", "home"], default="ring")
    sp.set_defaults(func=cmd_build_db)

    sp = sub.add_parser("localize", help="estimate object poses from a goal frame")
    common(sp, "output report JSON path")
    sp.add_argument("--db", required=True, help="database .npz from build-db")
    sp.add_argument("--instance", required=True, help="instance JSON")
    sp.set_defaults(func=cmd_localize)

    sp = sub.add_parser("rearrange", help="run the full perceive-and-rearrange loop")
    common(sp, "output directory")
    sp.add_argument("--instance", help="instance JSON (default: generate from config+seed)")
    sp.set_defaults(func=cmd_rearrange)

    sp = sub.add_parser("bench-pose", help="pose-estimation benchmark")
    common(sp, "output directory")
    sp.set_defaults(func=cmd_bench_pose)

    sp = sub.add_parser("bench-completion", help="task-completion benchmark")
    common(sp, "output directory")
    sp.set_defaults(func=cmd_bench_completion)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MvorError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
