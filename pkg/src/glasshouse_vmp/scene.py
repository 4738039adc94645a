"""Ground-truth glasshouse scenes and a simulated fruit-labeling depth camera.

A scene is a set of spherical fruits plus foliage (vertical cylinder stems and
thin oriented-box leaves) inside an axis-aligned bound. The simulated RGB-D
camera casts one ray per sensor pixel and returns exact analytic first
intersections, labeling points on fruit surfaces.

Scenes are immutable after construction and safe to share across episodes.

Built-in scenarios:

* ``scenario1`` - two plant rows on one level, 12 plants, 47 fruits, 8 trolley
  segments (4 per row, 1 m apart).
* ``scenario2`` - the same layout stacked on two vertical levels, 24 plants,
  94 fruits, 16 segments, denser foliage and a shallower arm workspace.
* ``micro`` - 2 plants, 5 fruits, 1 segment; intended for fast tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .geometry import Box, Pose, quat_from_yaw_pitch, quat_to_matrix, vec3

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@dataclass(frozen=True)
class CameraModel:
    """Pinhole frustum parameters for sensing and for gain evaluation."""

    hfov: float = math.radians(70.0)
    vfov: float = math.radians(50.0)
    gain_rays: tuple[int, int] = (16, 16)
    sensor_rays: tuple[int, int] = (80, 60)
    max_range: float = 1.0
    min_range: float = 0.1

    def __post_init__(self):
        if not (0 < self.hfov < math.pi and 0 < self.vfov < math.pi):
            raise ValueError("fov must be in (0, pi)")
        if min(self.gain_rays) < 2 or min(self.sensor_rays) < 2:
            raise ValueError("ray grids must be at least 2x2")
        if not 0 < self.min_range < self.max_range:
            raise ValueError("need 0 < min_range < max_range")

    def gain_ray_grid(self) -> np.ndarray:
        return _ray_grid(self.hfov, self.vfov, *self.gain_rays)

    def sensor_ray_grid(self) -> np.ndarray:
        return _ray_grid(self.hfov, self.vfov, *self.sensor_rays)


@lru_cache(maxsize=32)
def _ray_grid(hfov: float, vfov: float, nx: int, ny: int) -> np.ndarray:
    """(nx*ny, 3) unit directions in the camera frame (+x forward, +z up),
    one per pixel center of the tangent-plane grid."""
    az = -hfov / 2.0 + (np.arange(nx) + 0.5) * (hfov / nx)
    el = -vfov / 2.0 + (np.arange(ny) + 0.5) * (vfov / ny)
    ty = np.tan(az)
    tz = np.tan(el)
    yy, zz = np.meshgrid(ty, tz)
    d = np.stack([np.ones(yy.size), yy.ravel(), zz.ravel()], axis=1)
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    d.setflags(write=False)
    return d


# --------------------------------------------------------------------------
# scene primitives
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Fruit:
    id: int
    center: np.ndarray
    radius: float


@dataclass(frozen=True)
class Leaf:
    """Thin oriented box; extents are half-extents in the local frame."""

    center: np.ndarray
    orientation: np.ndarray  # quaternion [x,y,z,w]
    half_extents: np.ndarray


@dataclass(frozen=True)
class Stem:
    """Vertical cylinder (side surface only), centered at `center`."""

    center: np.ndarray
    radius: float
    height: float


class Scene:
    def __init__(self, fruits: list[Fruit], leaves: list[Leaf],
                 stems: list[Stem], bounds: Box):
        ids = [f.id for f in fruits]
        if len(set(ids)) != len(ids):
            raise ValueError("fruit ids must be unique")
        for f in fruits:
            if not (0.0 < f.radius <= 0.1):
                raise ValueError("fruit radius must lie in (0, 0.1]")
        self.fruits = list(fruits)
        self.leaves = list(leaves)
        self.stems = list(stems)
        self.bounds = bounds
        self._fruit_centers = (np.array([f.center for f in fruits], dtype=np.float64)
                               if fruits else np.zeros((0, 3)))
        self._fruit_radii = np.array([f.radius for f in fruits], dtype=np.float64)
        self._stem_data = (np.array([[s.center[0], s.center[1], s.center[2],
                                      s.radius, s.height] for s in stems])
                           if stems else np.zeros((0, 5)))
        self._leaf_centers = (np.array([lf.center for lf in leaves], dtype=np.float64)
                              if leaves else np.zeros((0, 3)))
        self._leaf_rots = (np.array([quat_to_matrix(lf.orientation) for lf in leaves])
                           if leaves else np.zeros((0, 3, 3)))
        self._leaf_exts = (np.array([lf.half_extents for lf in leaves], dtype=np.float64)
                           if leaves else np.zeros((0, 3)))

    def fruit_by_id(self, fruit_id: int) -> Fruit:
        for f in self.fruits:
            if f.id == fruit_id:
                return f
        raise KeyError(f"no fruit with id {fruit_id}")


# -- per-primitive ray intersection (vectorized over rays) -------------------

def _ray_sphere(o, dirs, center, radius):
    oc = center - o
    b = dirs @ oc
    c0 = float(oc @ oc) - radius * radius
    disc = b * b - c0
    t = np.full(dirs.shape[0], np.inf)
    ok = disc >= 0.0
    sq = np.sqrt(np.maximum(disc, 0.0))
    t1 = b - sq
    t2 = b + sq
    near = np.where(t1 > 1e-9, t1, np.where(t2 > 1e-9, t2, np.inf))
    t[ok] = near[ok]
    return t


def _ray_vcylinder(o, dirs, cx, cy, z0, z1, radius):
    dx = dirs[:, 0]
    dy = dirs[:, 1]
    ox = o[0] - cx
    oy = o[1] - cy
    a = dx * dx + dy * dy
    b = dx * ox + dy * oy
    c0 = ox * ox + oy * oy - radius * radius
    disc = b * b - a * c0
    t = np.full(dirs.shape[0], np.inf)
    ok = (disc >= 0.0) & (a > 1e-18)
    sq = np.sqrt(np.maximum(disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (-b - sq) / a
        t2 = (-b + sq) / a
    for cand in (t1, t2):
        z = o[2] + cand * dirs[:, 2]
        good = ok & (cand > 1e-9) & (cand < t) & (z >= z0) & (z <= z1)
        t[good] = cand[good]
    return t


def _ray_box(o, dirs, center, rot, half_extents):
    # slab test in the box frame
    ol = rot.T @ (o - center)
    dl = dirs @ rot  # == (rot.T @ dirs.T).T
    with np.errstate(divide="ignore"):
        inv = 1.0 / dl
    t1 = (-half_extents - ol) * inv
    t2 = (half_extents - ol) * inv
    tn = np.nanmax(np.minimum(t1, t2), axis=1)
    tf = np.nanmin(np.maximum(t1, t2), axis=1)
    t = np.where((tn <= tf) & (tf > 1e-9),
                 np.where(tn > 1e-9, tn, tf), np.inf)
    return t


def _foliage_hits(scene: Scene, o: np.ndarray, dirs: np.ndarray,
                  reach: float) -> np.ndarray:
    """Per-ray distance to the nearest leaf/stem hit (inf if none)."""
    t = np.full(dirs.shape[0], np.inf)
    sd = scene._stem_data
    for s in range(sd.shape[0]):
        cx, cy, cz, r, h = sd[s]
        if (o[0] - cx) ** 2 + (o[1] - cy) ** 2 > (reach + r) ** 2:
            continue
        t = np.minimum(t, _ray_vcylinder(o, dirs, cx, cy,
                                         cz - h / 2.0, cz + h / 2.0, r))
    lc = scene._leaf_centers
    for m in range(lc.shape[0]):
        rad = float(np.max(scene._leaf_exts[m]))
        if np.dot(lc[m] - o, lc[m] - o) > (reach + rad) ** 2:
            continue
        t = np.minimum(t, _ray_box(o, dirs, lc[m], scene._leaf_rots[m],
                                   scene._leaf_exts[m]))
    return t


def render_depth(scene: Scene, pose: Pose,
                 camera: CameraModel) -> tuple[np.ndarray, np.ndarray]:
    """Simulate one depth frame.

    Returns (points, fruit_flags): world-space first-intersection points for
    every sensor pixel whose nearest surface lies within the camera's range
    band, and a boolean fruit label per point. Surfaces nearer than min_range
    blind the pixel (they are not seen through).
    """
    dirs = camera.sensor_ray_grid() @ pose.rotation_matrix().T
    o = pose.position
    reach = camera.max_range
    t_best = _foliage_hits(scene, o, dirs, reach)
    fruit_best = np.zeros(dirs.shape[0], dtype=bool)
    fc = scene._fruit_centers
    fr = scene._fruit_radii
    for f in range(fc.shape[0]):
        if np.dot(fc[f] - o, fc[f] - o) > (reach + fr[f]) ** 2:
            continue
        tf_ = _ray_sphere(o, dirs, fc[f], fr[f])
        better = tf_ < t_best
        t_best[better] = tf_[better]
        fruit_best[better] = True
    keep = (t_best >= camera.min_range) & (t_best <= camera.max_range)
    points = o + t_best[keep, None] * dirs[keep]
    return points, fruit_best[keep]


def occluded_fraction(scene: Scene, fruit_id: int, pose: Pose,
                      camera: CameraModel, n_samples: int = 256) -> float:
    """Fraction of sight rays toward the fruit's visible disc that foliage
    blocks, sampled on a deterministic sunflower pattern (range ignored)."""
    fruit = scene.fruit_by_id(fruit_id)
    o = pose.position
    u = fruit.center - o
    dist = np.linalg.norm(u)
    if dist < 1e-9:
        return 0.0
    u = u / dist
    alt = np.array([0.0, 0.0, 1.0]) if abs(u[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(u, alt)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(u, e1)
    idx = np.arange(n_samples)
    rr = np.sqrt((idx + 0.5) / n_samples) * fruit.radius * 0.999
    th = idx * GOLDEN_ANGLE
    targets = (fruit.center[None, :] + rr[:, None] * np.cos(th)[:, None] * e1[None, :]
               + rr[:, None] * np.sin(th)[:, None] * e2[None, :])
    dirs = targets - o[None, :]
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    t_fol = _foliage_hits(scene, o, dirs, reach=np.inf)
    t_sph = _ray_sphere(o, dirs, fruit.center, fruit.radius)
    blocked = t_fol < t_sph
    return float(np.count_nonzero(blocked)) / n_samples


# --------------------------------------------------------------------------
# trolley segments
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SegmentPlacement:
    """One trolley stop: base pose, arm workspace (box in the trolley frame,
    forward = +x toward the plant row), and this segment's time budget."""

    segment_index: int
    trolley_base: Pose
    workspace: Box
    time_budget: float = 60.0

    @property
    def world_workspace(self) -> Box:
        r = quat_to_matrix(self.trolley_base.orientation)
        corners = np.array([[x, y, z]
                            for x in (self.workspace.lo[0], self.workspace.hi[0])
                            for y in (self.workspace.lo[1], self.workspace.hi[1])
                            for z in (self.workspace.lo[2], self.workspace.hi[2])])
        world = corners @ r.T + self.trolley_base.position
        return Box(world.min(axis=0), world.max(axis=0))

    def initial_camera_pose(self) -> Pose:
        yaw = math.atan2(self.trolley_base.forward[1], self.trolley_base.forward[0])
        return Pose(self.world_workspace.center, quat_from_yaw_pitch(yaw, 0.0))


# --------------------------------------------------------------------------
# scenario construction
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioSpec:
    name: str = "scenario1"
    scene_file: str | None = None
    scene_seed: int = 1234
    time_budget: float = 60.0


@dataclass(frozen=True)
class _PlantStyle:
    n_leaves: int
    leaf_half_extents: tuple[float, float, float]
    fruit_offset: tuple[float, float]
    fruit_radius: tuple[float, float]


_ROW_Y = 0.72
_ROW_X0 = 0.0
_ROW_LEN = 4.0
_PLANTS_PER_ROW = 6
_LEVEL_HEIGHT = 1.30

_STYLE_OPEN = _PlantStyle(n_leaves=9, leaf_half_extents=(0.055, 0.042, 0.0015),
                          fruit_offset=(0.05, 0.12), fruit_radius=(0.03, 0.045))
_STYLE_DENSE = _PlantStyle(n_leaves=15, leaf_half_extents=(0.062, 0.048, 0.0015),
                           fruit_offset=(0.04, 0.10), fruit_radius=(0.03, 0.045))


def _make_plant(rng: np.random.Generator, x: float, y: float, z0: float,
                n_fruits: int, style: _PlantStyle, next_id: int):
    stem = Stem(vec3(x, y, z0 + 0.05 + 0.525), radius=0.018, height=1.05)
    leaves = []
    for _ in range(style.n_leaves):
        az = rng.uniform(0.0, 2.0 * math.pi)
        rad = rng.uniform(0.05, 0.14)
        h = rng.uniform(z0 + 0.22, z0 + 1.02)
        c = vec3(x + rad * math.cos(az), y + rad * math.sin(az), h)
        q = quat_from_yaw_pitch(rng.uniform(-math.pi, math.pi),
                                rng.uniform(-0.7, 0.7))
        leaves.append(Leaf(c, q, np.array(style.leaf_half_extents)))
    fruits = []
    centers: list[np.ndarray] = []
    tries = 0
    while len(fruits) < n_fruits and tries < 400:
        tries += 1
        az = rng.uniform(0.0, 2.0 * math.pi)
        rad = rng.uniform(*style.fruit_offset)
        h = rng.uniform(z0 + 0.30, z0 + 0.95)
        c = vec3(x + rad * math.cos(az), y + rad * math.sin(az), h)
        r = rng.uniform(*style.fruit_radius)
        if any(np.linalg.norm(c - pc) < 0.12 for pc in centers):
            continue
        fruits.append(Fruit(next_id + len(fruits), c, r))
        centers.append(c)
    if len(fruits) < n_fruits:
        raise RuntimeError("could not place requested fruit count")
    return fruits, leaves, [stem]


def _fruit_counts(rng: np.random.Generator, n_plants: int, total: int) -> list[int]:
    counts = [total // n_plants] * n_plants
    extra = total - sum(counts)
    for p in rng.choice(n_plants, size=extra, replace=False):
        counts[p] += 1
    return counts


def _row_segments(level: int, row_sign: int, z0: float, start_index: int,
                  time_budget: float, workspace: Box,
                  reverse: bool) -> list[SegmentPlacement]:
    xs = [0.5, 1.5, 2.5, 3.5]
    if reverse:
        xs = xs[::-1]
    yaw = math.pi / 2.0 if row_sign > 0 else -math.pi / 2.0
    out = []
    for n, x in enumerate(xs):
        base = Pose(vec3(x, 0.0, z0), quat_from_yaw_pitch(yaw, 0.0))
        out.append(SegmentPlacement(start_index + n, base, workspace, time_budget))
    return out


def _build_levels(n_levels: int, total_fruits: int, style: _PlantStyle,
                  workspace: Box, spec: ScenarioSpec,
                  z_top: float) -> tuple[Scene, list[SegmentPlacement]]:
    rng = np.random.default_rng(spec.scene_seed)
    n_plants = n_levels * 2 * _PLANTS_PER_ROW
    counts = _fruit_counts(rng, n_plants, total_fruits)
    fruits: list[Fruit] = []
    leaves: list[Leaf] = []
    stems: list[Stem] = []
    plant = 0
    for level in range(n_levels):
        z0 = level * _LEVEL_HEIGHT
        for row_sign in (1, -1):
            for p in range(_PLANTS_PER_ROW):
                x = _ROW_X0 + (p + 0.5) * (_ROW_LEN / _PLANTS_PER_ROW)
                f, l, s = _make_plant(rng, x, row_sign * _ROW_Y, z0,
                                      counts[plant], style, len(fruits))
                fruits += f
                leaves += l
                stems += s
                plant += 1
    bounds = Box(vec3(-0.3, -1.15, 0.0), vec3(4.3, 1.15, z_top))
    scene = Scene(fruits, leaves, stems, bounds)
    segments: list[SegmentPlacement] = []
    for level in range(n_levels):
        z0 = level * _LEVEL_HEIGHT
        segments += _row_segments(level, 1, z0, len(segments),
                                  spec.time_budget, workspace, reverse=False)
        segments += _row_segments(level, -1, z0, len(segments),
                                  spec.time_budget, workspace, reverse=True)
    return scene, segments


def _build_scenario1(spec: ScenarioSpec):
    workspace = Box(vec3(0.08, -0.55, 0.15), vec3(0.50, 0.55, 1.15))
    return _build_levels(1, 47, _STYLE_OPEN, workspace, spec, z_top=1.5)


def _build_scenario2(spec: ScenarioSpec):
    workspace = Box(vec3(0.08, -0.55, 0.15), vec3(0.42, 0.55, 1.15))
    return _build_levels(2, 94, _STYLE_DENSE, workspace, spec, z_top=2.8)


def _build_micro(spec: ScenarioSpec):
    rng = np.random.default_rng(spec.scene_seed)
    style = _PlantStyle(n_leaves=3, leaf_half_extents=(0.05, 0.04, 0.0015),
                        fruit_offset=(0.05, 0.11), fruit_radius=(0.03, 0.045))
    fruits: list[Fruit] = []
    leaves: list[Leaf] = []
    stems: list[Stem] = []
    for x, n in ((0.32, 3), (0.98, 2)):
        f, l, s = _make_plant(rng, x, 0.7, 0.0, n, style, len(fruits))
        fruits += f
        leaves += l
        stems += s
    bounds = Box(vec3(-0.25, -0.35, 0.0), vec3(1.55, 1.1, 1.35))
    scene = Scene(fruits, leaves, stems, bounds)
    base = Pose(vec3(0.65, 0.0, 0.0), quat_from_yaw_pitch(math.pi / 2.0, 0.0))
    workspace = Box(vec3(0.08, -0.55, 0.15), vec3(0.50, 0.55, 1.15))
    return scene, [SegmentPlacement(0, base, workspace, spec.time_budget)]


_BUILTINS = {
    "scenario1": _build_scenario1,
    "scenario2": _build_scenario2,
    "micro": _build_micro,
}


def build_scenario(spec: ScenarioSpec) -> tuple[Scene, list[SegmentPlacement]]:
    """Construct a built-in scenario, or load `spec.scene_file` if given."""
    if spec.scene_file:
        scene = load_scene(spec.scene_file)
        return scene, derive_segments(scene, spec.time_budget)
    try:
        builder = _BUILTINS[spec.name]
    except KeyError:
        raise ValueError(f"unknown scenario {spec.name!r}; "
                         f"choose from {sorted(_BUILTINS)}") from None
    return builder(spec)


# --------------------------------------------------------------------------
# scene file format
# --------------------------------------------------------------------------

SCENE_HEADER = "scene v1"


def save_scene(scene: Scene, path) -> None:
    """Write the text scene format: one record per primitive.

    ``fruit id cx cy cz r`` / ``leaf cx cy cz qx qy qz qw ex ey ez`` (ex..ez
    are half-extents) / ``stem cx cy cz r h``.
    """
    with open(path, "w") as f:
        f.write(SCENE_HEADER + "\n")
        for fr in scene.fruits:
            c = fr.center
            f.write(f"fruit {fr.id} {c[0]!r} {c[1]!r} {c[2]!r} {fr.radius!r}\n")
        for lf in scene.leaves:
            c = lf.center
            q = lf.orientation
            e = lf.half_extents
            f.write(f"leaf {c[0]!r} {c[1]!r} {c[2]!r} "
                    f"{q[0]!r} {q[1]!r} {q[2]!r} {q[3]!r} "
                    f"{e[0]!r} {e[1]!r} {e[2]!r}\n")
        for st in scene.stems:
            c = st.center
            f.write(f"stem {c[0]!r} {c[1]!r} {c[2]!r} {st.radius!r} {st.height!r}\n")


def load_scene(path) -> Scene:
    fruits: list[Fruit] = []
    leaves: list[Leaf] = []
    stems: list[Stem] = []
    with open(path) as f:
        header = f.readline().strip()
        if header != SCENE_HEADER:
            raise ValueError(f"unrecognized scene header: {header!r}")
        for line in f:
            parts = line.split()
            if not parts:
                continue
            kind = parts[0]
            vals = [float(v) for v in parts[1:]]
            if kind == "fruit":
                fruits.append(Fruit(int(vals[0]), np.array(vals[1:4]), vals[4]))
            elif kind == "leaf":
                leaves.append(Leaf(np.array(vals[0:3]), np.array(vals[3:7]),
                                   np.array(vals[7:10])))
            elif kind == "stem":
                stems.append(Stem(np.array(vals[0:3]), vals[3], vals[4]))
            else:
                raise ValueError(f"unknown scene record {kind!r}")
    pts = ([f.center for f in fruits] + [l.center for l in leaves]
           + [s.center for s in stems])
    if not pts:
        raise ValueError("scene file holds no primitives")
    arr = np.array(pts)
    bounds = Box(arr.min(axis=0) - 0.4, arr.max(axis=0) + 0.4)
    bounds = Box(np.minimum(bounds.lo, [bounds.lo[0], bounds.lo[1], 0.0]), bounds.hi)
    return Scene(fruits, leaves, stems, bounds)


def derive_segments(scene: Scene, time_budget: float) -> list[SegmentPlacement]:
    """Segment schedule for a loaded scene: rows are detected from stem y
    signs, levels from stem base heights, bases laid 1 m apart along x."""
    if not scene.stems:
        raise ValueError("cannot derive segments for a scene without stems")
    xs = np.array([s.center[0] for s in scene.stems])
    extent = float(xs.max() - xs.min())
    n_per_row = max(1, int(round(extent)) + 1)
    cx = 0.5 * float(xs.max() + xs.min())
    bases = [cx + (k - (n_per_row - 1) / 2.0) for k in range(n_per_row)]
    rows = sorted({1 if s.center[1] > 0 else -1 for s in scene.stems}, reverse=True)
    z_bases = sorted({_LEVEL_HEIGHT * round((s.center[2] - s.height / 2.0 - 0.05)
                                            / _LEVEL_HEIGHT) for s in scene.stems})
    workspace = Box(vec3(0.08, -0.55, 0.15), vec3(0.50, 0.55, 1.15))
    segments: list[SegmentPlacement] = []
    for z0 in z_bases:
        for row_sign in rows:
            yaw = math.pi / 2.0 if row_sign > 0 else -math.pi / 2.0
            seq = bases if row_sign > 0 else bases[::-1]
            for x in seq:
                base = Pose(vec3(x, 0.0, z0), quat_from_yaw_pitch(yaw, 0.0))
                segments.append(SegmentPlacement(len(segments), base,
                                                 workspace, time_budget))
    return segments
