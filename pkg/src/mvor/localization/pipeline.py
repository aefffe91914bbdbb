"""Object pose estimation against the region database.

For each goal region: retrieve a candidate instance by descriptor vote,
walk its regions in similarity order, locally match, lift matches to 2D-3D
pairs through the candidate's stored geometry, and solve PnP. Rejected
candidates prune their angular neighborhood (a rejection usually means the
wrong orientation was retrieved, so nearby viewing directions are skipped).

The recovered extrinsics W map current-scene world points into the goal
camera, and the goal camera's pose is known, so the object's relative pose
is T = goal_viewpoint o W.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import (
    DegenerateGeometry,
    NoCandidates,
    NonPlanarEstimate,
    TooFewCorrespondences,
)
from ..geometry import Pose3, angular_distance, compose, planar_of_pose
from ..perception.database import Database, PerceptionConfig, prepare_goal_regions
from ..perception.regions import ObjectRegion
from .coords import matching_to_image_coords, matching_to_source_pixels
from .matching import Correspondences2D, DescriptorNNMatcher, FeatureIdMatcher
from .pnp import ransac_pnp


@dataclass
class LocalizationConfig:
    # retrieval and traversal
    top_n: int = 10
    theta_prune: float = np.pi / 6
    instance_fallback: bool = True
    # matching
    matcher: str = "feature_id"  # or "descriptor_nn"
    match_resolution: int = 256
    min_correspondences: int = 4
    drop_rate: float = 0.0
    sigma_px: float = 0.0  # matching-resolution pixels
    outlier_rate: float = 0.0
    max_view_angle_deg: float = 35.0
    ratio_test: float = 0.8
    max_matches: int = 2000
    matcher_seed: int = 0
    # pose solving
    ransac_iterations: int = 1000
    reproj_threshold_px: float = 2.0
    ransac_confidence: float = 0.999
    ransac_seed: int = 0
    refine_iters: int = 20
    min_inliers: int = 12
    min_inlier_ratio: float = 0.3
    # planar sanity filter on accepted poses
    planar_filter: bool = True
    planar_max_tilt_deg: float = 10.0
    planar_max_dz: float = 0.02

    def make_matcher(self, library=None, rng=None):
        if self.matcher == "feature_id":
            return FeatureIdMatcher(
                drop_rate=self.drop_rate,
                sigma_px=self.sigma_px,
                outlier_rate=self.outlier_rate,
                max_view_angle_deg=self.max_view_angle_deg,
                rng=rng if rng is not None else np.random.default_rng(self.matcher_seed),
            )
        if self.matcher == "descriptor_nn":
            if library is None:
                raise ValueError("descriptor_nn matcher needs the model library")
            return DescriptorNNMatcher(
                library,
                ratio=self.ratio_test,
                max_points=self.max_matches,
                max_view_angle_deg=self.max_view_angle_deg,
            )
        raise ValueError(f"unknown matcher {self.matcher!r}")


@dataclass
class CandidateList:
    instance_id: int
    region_indices: list[int]  # db region indices, similarity-descending
    scores: np.ndarray
    pruned: np.ndarray = field(init=False)
    visited: np.ndarray = field(init=False)

    def __post_init__(self):
        self.pruned = np.zeros(len(self.region_indices), dtype=bool)
        self.visited = np.zeros(len(self.region_indices), dtype=bool)

    def next_unvisited(self) -> int | None:
        for i in range(len(self.region_indices)):
            if not self.pruned[i] and not self.visited[i]:
                return i
        return None


@dataclass
class Correspondences3D:
    goal_px: np.ndarray  # (N,2) goal-image coords
    world: np.ndarray  # (N,3) current-scene world points

    def __len__(self) -> int:
        return len(self.goal_px)


@dataclass
class PoseEstimate:
    T: Pose3
    inlier_count: int = 0
    inlier_ratio: float = 0.0
    num_correspondences: int = 0
    candidate_region: int | None = None
    instance_id: int | None = None
    accepted: bool = False
    candidates_visited: int = 0
    matcher_invocations: int = 0
    note: str = ""


def retrieve_candidates(
    goal_region: ObjectRegion,
    db: Database,
    top_n: int = 10,
    exclude: frozenset = frozenset(),
) -> CandidateList:
    """Vote an instance from the top-ranked regions, then return all of that
    instance's regions ordered by the original similarity."""
    if db.num_regions == 0:
        raise NoCandidates("database is empty")
    sims = db.descriptor_matrix @ goal_region.descriptor
    if exclude:
        sims = sims.copy()
        for u in exclude:
            sims[db.region_instance == u] = -np.inf
    order = np.argsort(-sims, kind="stable")
    order = order[np.isfinite(sims[order])]
    if len(order) == 0:
        raise NoCandidates("all instances excluded")
    top = order[:top_n]
    counts: dict[int, int] = {}
    for i in top:
        u = int(db.region_instance[i])
        counts[u] = counts.get(u, 0) + 1
    most = max(counts.values())
    tied = {u for u, c in counts.items() if c == most}
    if len(tied) == 1:
        winner = tied.pop()
    else:
        # tie: prefer the instance holding the single best-scoring region
        winner = next(int(db.region_instance[i]) for i in top if int(db.region_instance[i]) in tied)
    members = [int(i) for i in order if int(db.region_instance[i]) == winner]
    return CandidateList(winner, members, sims[members])


def prune_after_rejection(
    cands: CandidateList, rejected_pos: int, db: Database, theta_prune: float
) -> CandidateList:
    """Mark the rejected candidate and every unvisited candidate whose
    observation direction lies within theta_prune of it."""
    e_rej = db.regions[cands.region_indices[rejected_pos]].obs_dir
    cands.pruned[rejected_pos] = True
    for pos, idx in enumerate(cands.region_indices):
        if cands.visited[pos] or cands.pruned[pos]:
            continue
        if angular_distance(db.regions[idx].obs_dir, e_rej) < theta_prune:
            cands.pruned[pos] = True
    return cands


def lift_to_3d(
    m2d: Correspondences2D,
    goal_region: ObjectRegion,
    cand_region: ObjectRegion,
    resolution: int,
    min_correspondences: int = 4,
) -> Correspondences3D:
    """2D-2D matches -> (goal pixel, candidate world point) pairs.

    Candidate-side coordinates select the nearest source pixel and take its
    stored world point (pixels without depth drop out); goal-side
    coordinates are rescaled back to goal-image pixels. Duplicate goal
    pixels keep their first occurrence.
    """
    if len(m2d) == 0:
        raise TooFewCorrespondences("no 2D matches")
    rows, cols, valid = matching_to_source_pixels(cand_region.crop, m2d.cand_px, resolution)
    world = np.full((len(m2d), 3), np.nan)
    world[valid] = cand_region.crop.world[rows[valid], cols[valid]]
    valid &= np.isfinite(world).all(axis=1)
    goal_px = matching_to_image_coords(goal_region.crop, m2d.goal_px, resolution)

    goal_px, world = goal_px[valid], world[valid]
    if len(goal_px):
        _, first = np.unique(goal_px, axis=0, return_index=True)
        keep = np.sort(first)
        goal_px, world = goal_px[keep], world[keep]
    if len(goal_px) < min_correspondences:
        raise TooFewCorrespondences(f"{len(goal_px)} 2D-3D pairs")
    return Correspondences3D(goal_px, world)


def solve_pose(
    m3d: Correspondences3D,
    intr,
    goal_viewpoint: Pose3,
    config: LocalizationConfig,
) -> PoseEstimate:
    """RANSAC PnP on the lifted correspondences, composed into the object's
    relative pose. Acceptance needs enough inliers, enough inlier ratio,
    and (by default) an approximately planar result."""
    if len(m3d) < 4:
        raise TooFewCorrespondences(f"{len(m3d)} correspondences")
    r, t, mask = ransac_pnp(
        m3d.world,
        m3d.goal_px,
        intr,
        iterations=config.ransac_iterations,
        threshold_px=config.reproj_threshold_px,
        confidence=config.ransac_confidence,
        refine_iters=config.refine_iters,
        seed=config.ransac_seed,
    )
    T = compose(goal_viewpoint, Pose3(r, t))
    count = int(mask.sum())
    ratio = count / len(m3d)
    accepted = count >= config.min_inliers and ratio >= config.min_inlier_ratio
    note = ""
    if accepted and config.planar_filter:
        try:
            planar_of_pose(T, config.planar_max_tilt_deg, config.planar_max_dz)
        except NonPlanarEstimate as e:
            accepted = False
            note = f"non-planar solution ({e})"
    return PoseEstimate(
        T=T,
        inlier_count=count,
        inlier_ratio=ratio,
        num_correspondences=len(m3d),
        accepted=accepted,
        note=note,
    )


def estimate_object(
    goal_region: ObjectRegion,
    db: Database,
    matcher,
    intr,
    config: LocalizationConfig,
    excluded: frozenset = frozenset(),
) -> PoseEstimate:
    """Candidate traversal for one goal region.

    Walks the retrieved instance's regions in similarity order; the first
    accepted PnP solution wins. On rejection the candidate's angular
    neighborhood is pruned. If the instance exhausts, optionally falls back
    to the next most frequent instance in the retrieval vote. With nothing
    accepted, returns the highest-inlier attempt (or an identity pose)
    flagged not accepted.
    """
    if db.num_regions == 0:
        raise NoCandidates("database is empty")
    excluded = set(excluded)
    visited = 0
    match_calls = 0
    best: PoseEstimate | None = None
    for _ in range(db.num_instances):
        try:
            cands = retrieve_candidates(goal_region, db, config.top_n, frozenset(excluded))
        except NoCandidates:
            break
        while (pos := cands.next_unvisited()) is not None:
            cands.visited[pos] = True
            visited += 1
            region_idx = cands.region_indices[pos]
            cand_region = db.regions[region_idx]
            match_calls += 1
            m2d = matcher.match(goal_region.crop, cand_region.crop, config.match_resolution)
            est = None
            try:
                m3d = lift_to_3d(
                    m2d, goal_region, cand_region, config.match_resolution,
                    config.min_correspondences,
                )
                est = solve_pose(m3d, intr, goal_region.viewpoint, config)
            except (TooFewCorrespondences, DegenerateGeometry) as e:
                est = PoseEstimate(T=Pose3.identity(), note=str(e))
            est.candidate_region = region_idx
            est.instance_id = cands.instance_id
            if best is None or est.inlier_count > best.inlier_count:
                best = est
            if est.accepted:
                est.candidates_visited = visited
                est.matcher_invocations = match_calls
                return est
            prune_after_rejection(cands, pos, db, config.theta_prune)
        excluded.add(cands.instance_id)
        if not config.instance_fallback:
            break
    if best is None:
        best = PoseEstimate(T=Pose3.identity(), note="no candidates evaluated")
    best.candidates_visited = visited
    best.matcher_invocations = match_calls
    return best


def estimate_all(
    goal_frame,
    db: Database,
    matcher,
    descriptor_backend,
    segmenter,
    config: LocalizationConfig,
    perception_config: PerceptionConfig | None = None,
) -> dict[int, PoseEstimate]:
    """Estimate every object in the goal frame; returns instance -> estimate.

    Two goal regions claiming the same instance are resolved by inlier
    ratio; the loser re-runs with that instance excluded.
    """
    perception_config = perception_config or PerceptionConfig()
    goal_regions = prepare_goal_regions(goal_frame, segmenter, descriptor_backend, perception_config)
    results: dict[int, tuple[int, PoseEstimate]] = {}
    pending: list[tuple[int, frozenset]] = [(i, frozenset()) for i in range(len(goal_regions))]
    while pending:
        ridx, excl = pending.pop(0)
        if len(excl) >= db.num_instances:
            continue
        est = estimate_object(goal_regions[ridx], db, matcher, goal_frame.intrinsics, config, excl)
        u = est.instance_id
        if u is None:
            continue
        if u not in results:
            results[u] = (ridx, est)
            continue
        held_ridx, held = results[u]
        challenger_wins = (est.inlier_ratio, est.inlier_count) > (
            held.inlier_ratio,
            held.inlier_count,
        )
        if challenger_wins:
            results[u] = (ridx, est)
            pending.append((held_ridx, excl | frozenset({u})))
        else:
            pending.append((ridx, excl | frozenset({u})))
    return {u: est for u, (_, est) in results.items()}
