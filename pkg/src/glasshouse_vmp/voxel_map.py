"""Probabilistic voxel occupancy map with a region-of-interest (ROI) layer.

The map holds two log-odds values per cell (occupancy and ROI) over a fixed
axis-aligned bound at fixed resolution, fuses labeled point clouds with
standard additive log-odds updates, extracts frontier cells, and counts
cells visible from a camera pose by casting rays.

Cells never observed are Unknown; a cell key is bijective with its world
center via ``origin + (key + 0.5) * resolution``. Unknown cells are
transparent to rays (so space behind unexplored regions can still score
visibility gain) while occupied and ROI cells terminate rays.

Storage is a dense grid (desk-scale bounds make this a few MB), which keeps
the hot loops vectorizable; the observation semantics are those of a sparse
cell table with "absent = Unknown".
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import _kernels
from .geometry import Box, Pose

CellKey = tuple[int, int, int]


class CellState(IntEnum):
    UNKNOWN = 0
    FREE = 1
    OCCUPIED = 2
    ROI = 3


class FrontierType(IntEnum):
    """Observed cells bordering unknown space, by the observed cell's state."""

    ROI = CellState.ROI
    OCCUPIED = CellState.OCCUPIED
    FREE = CellState.FREE


@dataclass(frozen=True)
class MapParams:
    """Log-odds update model. Values are common occupancy-mapping defaults."""

    l_hit: float = 0.85
    l_miss: float = -0.4
    r_hit: float = 0.85
    r_miss: float = -0.4
    clamp_lo: float = -2.0
    clamp_hi: float = 3.5
    occ_threshold: float = 0.0
    roi_threshold: float = 0.0


@dataclass(frozen=True)
class CellBelief:
    occ_logodds: float
    roi_logodds: float


@dataclass
class RayResult:
    """Outcome of a single ray walk."""

    terminal: CellKey | None
    terminal_state: CellState | None
    traversed_unknown: list[CellKey]


@dataclass
class VisibilityCount:
    """Aggregated ray-grid visibility from one pose.

    ``unknown_cells`` are deduplicated across rays; ``n_free`` counts distinct
    free cells traversed; ``n_occupied``/``n_roi`` count rays terminated on a
    cell of that state.
    """

    unknown_cells: set[CellKey]
    n_free: int
    n_occupied: int
    n_roi: int
    rays_cast: int


class OccupancyMap:
    def __init__(self, bounds: Box, resolution: float = 0.02,
                 params: MapParams | None = None):
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        self.resolution = float(resolution)
        self.params = params or MapParams()
        self.origin = np.asarray(bounds.lo, dtype=np.float64)
        dims = np.ceil((bounds.hi - bounds.lo) / self.resolution - 1e-9).astype(int)
        dims = np.maximum(dims, 1)
        self.dims = tuple(int(d) for d in dims)
        self.bounds = Box(self.origin, self.origin + dims * self.resolution)
        self.occ = np.zeros(self.dims, dtype=np.float32)
        self.roi = np.zeros(self.dims, dtype=np.float32)
        self.state = np.zeros(self.dims, dtype=np.uint8)
        # per-cloud dedup stamps for batched fusion
        self._free_stamp = np.zeros(self.dims, dtype=np.int32)
        self._hit_stamp = np.zeros(self.dims, dtype=np.int32)
        self._fruit_stamp = np.zeros(self.dims, dtype=np.int32)
        self._done_stamp = np.zeros(self.dims, dtype=np.int32)
        self._cloud_counter = 0

    # -- key/world transforms ------------------------------------------------

    def key_of(self, point: np.ndarray) -> CellKey:
        k = np.floor((np.asarray(point, dtype=np.float64) - self.origin)
                     / self.resolution).astype(int)
        return (int(k[0]), int(k[1]), int(k[2]))

    def center_of(self, key: CellKey) -> np.ndarray:
        return self.origin + (np.asarray(key, dtype=np.float64) + 0.5) * self.resolution

    def in_bounds(self, key: CellKey) -> bool:
        return (0 <= key[0] < self.dims[0] and 0 <= key[1] < self.dims[1]
                and 0 <= key[2] < self.dims[2])

    def linear_index(self, key: CellKey) -> int:
        return (key[0] * self.dims[1] + key[1]) * self.dims[2] + key[2]

    def key_from_linear(self, lin: int) -> CellKey:
        nz = self.dims[2]
        ny = self.dims[1]
        k = lin % nz
        j = (lin // nz) % ny
        i = lin // (nz * ny)
        return (int(i), int(j), int(k))

    @property
    def observed_count(self) -> int:
        return int(np.count_nonzero(self.state))

    # -- fusion ---------------------------------------------------------------

    def integrate_point_cloud(self, sensor_origin: np.ndarray,
                              points: np.ndarray,
                              fruit_flags: np.ndarray) -> None:
        """Fuse one labeled cloud observed from `sensor_origin`.

        Cells strictly between the origin and each point get a free-space
        update, endpoint cells get an occupancy hit plus an ROI update
        (positive iff any point in that cell is fruit-labeled). Within one
        cloud each cell is updated at most once per role and a hit suppresses
        a miss on the same cell. Points outside the bounds carve free space
        up to the boundary only.
        """
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if points.shape[0] == 0:
            return
        fruit_flags = np.asarray(fruit_flags, dtype=np.bool_).reshape(-1)
        origin = np.asarray(sensor_origin, dtype=np.float64)
        if not self.bounds.contains(origin):
            raise ValueError("sensor origin outside map bounds")
        self._cloud_counter += 1
        p = self.params
        _kernels.integrate_batch(
            self.occ, self.roi, self.state,
            self._free_stamp, self._hit_stamp, self._fruit_stamp,
            self._done_stamp, self._cloud_counter,
            origin, points, fruit_flags, self.origin, self.resolution,
            p.l_hit, p.l_miss, p.r_hit, p.r_miss,
            p.clamp_lo, p.clamp_hi, p.occ_threshold, p.roi_threshold)

    # -- queries --------------------------------------------------------------

    def cell_state(self, key: CellKey) -> CellState:
        if not self.in_bounds(key):
            return CellState.UNKNOWN
        return CellState(int(self.state[key]))

    def belief(self, key: CellKey) -> CellBelief | None:
        """Stored log-odds for an observed cell, None if never observed."""
        if not self.in_bounds(key) or self.state[key] == 0:
            return None
        return CellBelief(float(self.occ[key]), float(self.roi[key]))

    def frontier_keys(self, ftype: FrontierType,
                      region: Box | None = None) -> np.ndarray:
        """(m,3) int array of frontier cell keys, lexicographically sorted.

        A frontier cell has the given observed state and at least one of its
        six neighbors unknown (cells beyond the map bounds count as unknown).
        `region` restricts the scan to a world-space window.
        """
        dims = np.array(self.dims)
        if region is None:
            lo = np.zeros(3, dtype=int)
            hi = dims.copy()
        else:
            lo = np.maximum(np.floor((region.lo - self.origin) / self.resolution), 0).astype(int)
            hi = np.minimum(np.ceil((region.hi - self.origin) / self.resolution), dims).astype(int)
            if np.any(hi <= lo):
                return np.empty((0, 3), dtype=int)
        shape = tuple(hi - lo + 2)
        unkp = np.ones(shape, dtype=bool)
        src_lo = np.maximum(lo - 1, 0)
        src_hi = np.minimum(hi + 1, dims)
        dst_lo = src_lo - (lo - 1)
        dst_hi = dst_lo + (src_hi - src_lo)
        unkp[dst_lo[0]:dst_hi[0], dst_lo[1]:dst_hi[1], dst_lo[2]:dst_hi[2]] = (
            self.state[src_lo[0]:src_hi[0], src_lo[1]:src_hi[1], src_lo[2]:src_hi[2]] == 0)
        nbr = (unkp[:-2, 1:-1, 1:-1] | unkp[2:, 1:-1, 1:-1]
               | unkp[1:-1, :-2, 1:-1] | unkp[1:-1, 2:, 1:-1]
               | unkp[1:-1, 1:-1, :-2] | unkp[1:-1, 1:-1, 2:])
        core = self.state[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
        mask = (core == int(ftype)) & nbr
        return np.argwhere(mask) + lo

    def extract_frontiers(self, ftype: FrontierType,
                          region: Box | None = None) -> np.ndarray:
        """(m,3) world centers of frontier cells of the given type."""
        keys = self.frontier_keys(ftype, region)
        return self.origin + (keys + 0.5) * self.resolution

    # -- ray casting ----------------------------------------------------------

    def cast_ray(self, origin: np.ndarray, direction: np.ndarray,
                 max_range: float) -> RayResult:
        """Walk one ray; terminate at the first occupied/ROI cell, the range
        limit, or the map bounds. Unknown cells are recorded, not blocking."""
        direction = np.asarray(direction, dtype=np.float64)
        n = np.linalg.norm(direction)
        if n < 1e-12:
            raise ValueError("ray direction must be nonzero")
        if abs(n - 1.0) > 1e-9:
            direction = direction / n
        if max_range <= 0:
            raise ValueError("max_range must be positive")
        p0 = np.asarray(origin, dtype=np.float64).reshape(1, 3)
        term_lin, term_state, unk, _, _, _ = _kernels.cast_ray_batch(
            self.state, self.origin, self.resolution, p0,
            direction.reshape(1, 3), float(max_range), False)
        terminal = None
        tstate = None
        if term_lin[0] >= 0:
            terminal = self.key_from_linear(int(term_lin[0]))
            tstate = CellState(int(term_state[0]))
        return RayResult(terminal, tstate,
                         [self.key_from_linear(int(v)) for v in unk])

    def sight_clear(self, origin: np.ndarray, target: np.ndarray) -> bool:
        """True iff the segment origin->target crosses no occupied/ROI cell
        before entering the target's own cell (unknown is transparent)."""
        origin = np.asarray(origin, dtype=np.float64)
        target = np.asarray(target, dtype=np.float64)
        d = target - origin
        dist = np.linalg.norm(d)
        if dist < 1e-12:
            return True
        res = self.cast_ray(origin, d / dist, dist + 1e-9)
        return res.terminal is None or res.terminal == self.key_of(target)

    def count_visible_raw(self, pose: Pose, camera) -> tuple:
        """Fast path: (unique unknown linear indices, n_free, n_occ, n_roi, rays)."""
        dirs_local = camera.gain_ray_grid()
        dirs = dirs_local @ pose.rotation_matrix().T
        p0 = np.broadcast_to(pose.position, dirs.shape).copy()
        term_lin, term_state, unk, _, free, _ = _kernels.cast_ray_batch(
            self.state, self.origin, self.resolution, p0, dirs,
            float(camera.max_range), True)
        unk_unique = np.unique(unk)
        n_free = int(np.unique(free).size)
        n_occ = int(np.count_nonzero(term_state == int(CellState.OCCUPIED)))
        n_roi = int(np.count_nonzero(term_state == int(CellState.ROI)))
        return unk_unique, n_free, n_occ, n_roi, dirs.shape[0]

    def count_visible_cells(self, pose: Pose, camera) -> VisibilityCount:
        """Cast the camera's gain ray grid from `pose` and aggregate results."""
        unk, n_free, n_occ, n_roi, rays = self.count_visible_raw(pose, camera)
        cells = {self.key_from_linear(int(v)) for v in unk}
        return VisibilityCount(cells, n_free, n_occ, n_roi, rays)

    # -- serialization ---------------------------------------------------------

    FORMAT_HEADER = "glasshouse-voxmap v1"

    def dump(self, stream: io.TextIOBase) -> None:
        """Versioned text cell dump: header, then one line per observed cell."""
        o = self.origin
        b = self.bounds
        stream.write(self.FORMAT_HEADER + "\n")
        stream.write(f"resolution {self.resolution!r}\n")
        stream.write(f"origin {o[0]!r} {o[1]!r} {o[2]!r}\n")
        stream.write(f"bounds {b.lo[0]!r} {b.lo[1]!r} {b.lo[2]!r} "
                     f"{b.hi[0]!r} {b.hi[1]!r} {b.hi[2]!r}\n")
        keys = np.argwhere(self.state != 0)
        stream.write(f"cells {keys.shape[0]}\n")
        for i, j, k in keys:
            stream.write(f"{i} {j} {k} {float(self.occ[i, j, k])!r} "
                         f"{float(self.roi[i, j, k])!r}\n")

    def dump_to_file(self, path) -> None:
        with open(path, "w") as f:
            self.dump(f)

    @classmethod
    def load(cls, stream: io.TextIOBase,
             params: MapParams | None = None) -> "OccupancyMap":
        header = stream.readline().strip()
        if header != cls.FORMAT_HEADER:
            raise ValueError(f"unrecognized map header: {header!r}")
        res = float(stream.readline().split()[1])
        origin = np.array([float(v) for v in stream.readline().split()[1:]])
        bvals = [float(v) for v in stream.readline().split()[1:]]
        m = cls(Box(np.array(bvals[:3]), np.array(bvals[3:])), res, params)
        if not np.allclose(m.origin, origin):
            raise ValueError("inconsistent origin in map dump")
        n = int(stream.readline().split()[1])
        for _ in range(n):
            parts = stream.readline().split()
            i, j, k = int(parts[0]), int(parts[1]), int(parts[2])
            m.occ[i, j, k] = np.float32(float(parts[3]))
            m.roi[i, j, k] = np.float32(float(parts[4]))
            p = m.params
            if m.occ[i, j, k] >= p.occ_threshold:
                m.state[i, j, k] = (CellState.ROI if m.roi[i, j, k] >= p.roi_threshold
                                    else CellState.OCCUPIED)
            else:
                m.state[i, j, k] = CellState.FREE
        return m

    @classmethod
    def load_from_file(cls, path, params: MapParams | None = None) -> "OccupancyMap":
        with open(path) as f:
            return cls.load(f, params)
