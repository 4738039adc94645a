"""Surrogate arm motion model.

The arm is reduced to a 5-DoF camera configuration: position relative to the
trolley base plus yaw and pitch (camera roll is free and discarded). This is
enough to provide everything the planner consumes: configuration distances,
trajectory execution times, reachability, and point-wise collision checks
against the occupancy map.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import Box, Pose, quat_rotate, wrap_angle, yaw_pitch_of
from .voxel_map import OccupancyMap


@dataclass(frozen=True)
class ArmConfig:
    """Camera placement in the trolley frame plus view direction angles."""

    p: np.ndarray  # (3,) meters, trolley frame
    yaw: float
    pitch: float

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=np.float64))


@dataclass(frozen=True)
class MotionParams:
    v_lin: float = 0.1        # m/s
    v_ang: float = 0.5        # rad/s
    clearance: float = 0.03   # m, collision margin around the camera
    n_checks: int = 20        # interpolation samples per edge
    w_ang: float = 0.2        # m/rad, angle weight in config distance

    def __post_init__(self):
        if min(self.v_lin, self.v_ang, self.clearance) <= 0 or self.n_checks <= 0:
            raise ValueError("motion parameters must be positive")


def pose_reachable(workspace: Box, pose: Pose) -> bool:
    """True iff the pose position lies inside the workspace box."""
    return workspace.contains(pose.position)


def config_of(pose: Pose, trolley_base: Pose, workspace: Box | None = None) -> ArmConfig:
    """Trolley-frame configuration of a camera pose (roll discarded).

    If a workspace is given the pose must lie inside it.
    """
    if workspace is not None and not pose_reachable(workspace, pose):
        raise ValueError("pose outside segment workspace")
    base_yaw, _ = yaw_pitch_of(trolley_base.orientation)
    d = pose.position - trolley_base.position
    c = math.cos(-base_yaw)
    s = math.sin(-base_yaw)
    p_local = np.array([c * d[0] - s * d[1], s * d[0] + c * d[1], d[2]])
    yaw, pitch = yaw_pitch_of(pose.orientation)
    return ArmConfig(p_local, wrap_angle(yaw - base_yaw), pitch)


def config_distance(a: ArmConfig, b: ArmConfig,
                    params: MotionParams | None = None) -> float:
    """Translation plus weighted wrapped-angle distance; zero iff equal."""
    w = (params or MotionParams()).w_ang
    dp = float(np.linalg.norm(a.p - b.p))
    return dp + w * (abs(wrap_angle(a.yaw - b.yaw)) + abs(a.pitch - b.pitch))


def execution_time(a: ArmConfig, b: ArmConfig,
                   params: MotionParams | None = None) -> float:
    """Seconds to move between configs: translation and rotation run in
    parallel, the slower one dominates."""
    params = params or MotionParams()
    dp = float(np.linalg.norm(a.p - b.p))
    da = max(abs(wrap_angle(a.yaw - b.yaw)), abs(a.pitch - b.pitch))
    return max(dp / params.v_lin, da / params.v_ang)


def trajectory_collision_free(grid: OccupancyMap, a: Pose, b: Pose,
                              params: MotionParams | None = None) -> bool:
    """Point-wise check of the straight camera path from a to b.

    Interpolated positions are tested with a clearance sphere against
    occupied/ROI cells; unknown and free space do not block.
    """
    params = params or MotionParams()
    u = np.linspace(0.0, 1.0, params.n_checks)[:, None]
    samples = a.position[None, :] * (1.0 - u) + b.position[None, :] * u
    return not _kernels.sphere_path_blocked(grid.state, grid.origin,
                                            grid.resolution, samples,
                                            params.clearance)
