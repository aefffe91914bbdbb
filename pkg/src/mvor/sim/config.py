"""Simulator configuration. One SimConfig (plus its seed) fully determines
the model library, every generated scene, and every rendered frame."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import CameraIntrinsics, Pose3, look_at

ROTATION_REGIMES = ("minor", "full")


@dataclass
class SimConfig:
    # scene content
    object_count_min: int = 1
    object_count_max: int = 9
    table_width: float = 1.0
    table_depth: float = 1.0
    min_clearance: float = 0.02  # extra gap between footprint discs
    placement_margin: float = 0.10  # keep-out band along the table edge
    placement_attempts: int = 10000
    rotation_regime: str = "full"  # 'minor': +/-60 deg, 'full': +/-180 deg

    # viewpoints
    ring_count: int = 8
    ring_radius: float = 0.85
    ring_elevation_deg: float = 45.0
    home_azimuth_deg: float = -90.0
    home_radius: float = 0.95
    home_elevation_deg: float = 50.0

    # camera
    image_width: int = 640
    image_height: int = 480
    focal_px: float = 460.0

    # model library
    library_size: int = 12
    library_seed: int = 7
    model_points: int = 1600
    point_descriptor_dim: int = 256

    # actuation
    actuation_sigma: float = 0.0

    seed: int = 0

    def validate(self) -> None:
        if not (1 <= self.object_count_min <= self.object_count_max):
            raise ValueError("object count range is empty")
        if self.rotation_regime not in ROTATION_REGIMES:
            raise ValueError(f"unknown rotation regime {self.rotation_regime!r}")
        if self.ring_count < 1 or self.library_size < 1:
            raise ValueError("ring_count and library_size must be positive")

    def yaw_range(self) -> tuple[float, float]:
        if self.rotation_regime == "minor":
            return (-np.pi / 3.0, np.pi / 3.0)
        return (-np.pi, np.pi)

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(
            fx=self.focal_px,
            fy=self.focal_px,
            cx=(self.image_width - 1) / 2.0,
            cy=(self.image_height - 1) / 2.0,
            width=self.image_width,
            height=self.image_height,
        )

    def _viewpoint(self, azimuth_deg: float, radius: float, elevation_deg: float) -> Pose3:
        az = np.radians(azimuth_deg)
        eye = np.array(
            [
                radius * np.cos(az),
                radius * np.sin(az),
                radius * np.tan(np.radians(elevation_deg)),
            ]
        )
        return look_at(eye, np.zeros(3))

    def home_viewpoint(self) -> Pose3:
        return self._viewpoint(self.home_azimuth_deg, self.home_radius, self.home_elevation_deg)

    def ring_viewpoints(self) -> list[Pose3]:
        step = 360.0 / self.ring_count
        return [
            self._viewpoint(k * step, self.ring_radius, self.ring_elevation_deg)
            for k in range(self.ring_count)
        ]
