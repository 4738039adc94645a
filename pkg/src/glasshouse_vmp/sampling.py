"""Target-position sampling on frontiers and view-pose candidate generation.

Targets live on frontier cells of the current map; the three target types
trade off completing partially seen fruit regions (ROI), inspecting plants
that may carry unseen fruit (occupied), and exploring open space (free).
View poses around a chosen target are produced either by sampling a distance
band around the target (range mode) or by sampling positions inside the arm
workspace (workspace mode); in both modes a candidate is kept only if it is
reachable and has an unobstructed sight ray to its target.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import Box, Pose, look_at
from .motion import pose_reachable
from .voxel_map import FrontierType, OccupancyMap


class TargetType(Enum):
    ROI = "roi"
    OCCUPIED = "occupied"
    FREE = "free"

    @property
    def frontier_type(self) -> FrontierType:
        return _TARGET_TO_FRONTIER[self]


_TARGET_TO_FRONTIER = {
    TargetType.ROI: FrontierType.ROI,
    TargetType.OCCUPIED: FrontierType.OCCUPIED,
    TargetType.FREE: FrontierType.FREE,
}


@dataclass(frozen=True)
class TargetSample:
    position: np.ndarray
    type: TargetType


@dataclass(frozen=True)
class SamplerConfig:
    p_roi: float = 0.5
    p_occ: float = 0.3
    p_free: float = 0.2
    d_min: float = 0.25
    d_max: float = 0.6
    n_candidates: int = 10
    mode: str = "workspace"          # "range" or "workspace"
    max_targets: int = 100           # cap per resample call
    use_distance_band: bool = False  # optional band in workspace mode

    def __post_init__(self):
        probs = (self.p_roi, self.p_occ, self.p_free)
        if min(probs) < 0 or abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError("type probabilities must be nonnegative and sum to 1")
        if not 0 < self.d_min < self.d_max:
            raise ValueError("need 0 < d_min < d_max")
        if self.mode not in ("range", "workspace"):
            raise ValueError(f"unknown sampling mode {self.mode!r}")


def resample_targets(grid: OccupancyMap, config: SamplerConfig,
                     rng: np.random.Generator,
                     region: Box | None = None) -> list[TargetSample]:
    """Draw up to `config.max_targets` frontier targets.

    Each draw first picks a type by the configured probabilities and then a
    frontier cell of that type uniformly without replacement; when the drawn
    type has no cells left the type is redrawn among the nonempty ones.
    """
    types = (TargetType.ROI, TargetType.OCCUPIED, TargetType.FREE)
    probs = np.array([config.p_roi, config.p_occ, config.p_free])
    pools = {}
    remaining = {}
    for t in types:
        keys = grid.frontier_keys(t.frontier_type, region)
        pools[t] = keys
        remaining[t] = keys.shape[0]
    out: list[TargetSample] = []
    while len(out) < config.max_targets:
        nonempty = [t for t in types if remaining[t] > 0]
        if not nonempty:
            break
        t = types[rng.choice(3, p=probs)]
        if remaining[t] == 0:
            mask = np.array([remaining[tt] > 0 for tt in types], dtype=float)
            wsum = float(np.sum(mask * probs))
            p = mask * probs / wsum if wsum > 0 else mask / mask.sum()
            t = types[rng.choice(3, p=p)]
        pool = pools[t]
        n = remaining[t]
        pick = int(rng.integers(n))
        key = pool[pick].copy()
        pool[[pick, n - 1]] = pool[[n - 1, pick]]
        remaining[t] = n - 1
        out.append(TargetSample(grid.center_of(tuple(key)), t))
    return out


def pick_target(targets: list[TargetSample],
                rng: np.random.Generator) -> TargetSample:
    if not targets:
        raise ValueError("cannot pick from an empty target list")
    return targets[int(rng.integers(len(targets)))]


def _screen(pose: Pose, target: TargetSample, grid: OccupancyMap,
            workspace: Box) -> bool:
    return (pose_reachable(workspace, pose)
            and grid.sight_clear(pose.position, target.position))


def sample_viewposes_range(target: TargetSample, grid: OccupancyMap,
                           workspace: Box, config: SamplerConfig,
                           rng: np.random.Generator) -> list[Pose]:
    """Range mode: position on a random direction at a random distance in
    [d_min, d_max] from the target, looking at the target."""
    out: list[Pose] = []
    for _ in range(config.n_candidates):
        d = rng.normal(size=3)
        n = np.linalg.norm(d)
        if n < 1e-12:
            continue
        dist = rng.uniform(config.d_min, config.d_max)
        position = target.position + (dist / n) * d
        pose = look_at(position, target.position)
        if _screen(pose, target, grid, workspace):
            out.append(pose)
    return out


def sample_viewposes_workspace(target: TargetSample, grid: OccupancyMap,
                               workspace: Box, config: SamplerConfig,
                               rng: np.random.Generator) -> list[Pose]:
    """Workspace mode: position uniform in the workspace box, looking at the
    target; the distance band applies only when enabled."""
    out: list[Pose] = []
    for _ in range(config.n_candidates):
        position = workspace.sample(rng)
        dist = float(np.linalg.norm(position - target.position))
        if dist < 1e-9:
            continue
        if config.use_distance_band and not (config.d_min <= dist <= config.d_max):
            continue
        pose = look_at(position, target.position)
        if _screen(pose, target, grid, workspace):
            out.append(pose)
    return out


def sample_viewposes(target: TargetSample, grid: OccupancyMap, workspace: Box,
                     config: SamplerConfig, rng: np.random.Generator) -> list[Pose]:
    if config.mode == "range":
        return sample_viewposes_range(target, grid, workspace, config, rng)
    return sample_viewposes_workspace(target, grid, workspace, config, rng)
