"""Small 3D geometry toolbox: axis-aligned boxes, quaternions, camera poses.

Conventions used throughout the package:

* world frame is right-handed, z up
* a camera at identity orientation looks along +x
* quaternions are stored as ``[x, y, z, w]`` arrays
* camera roll is fixed so that the world up vector stays up; orientation is
  therefore fully described by yaw (about z) and pitch (positive = up)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def vec3(x: float, y: float, z: float) -> np.ndarray:
    return np.array([x, y, z], dtype=np.float64)


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by its two corners (inclusive faces)."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=np.float64))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=np.float64))

    def contains(self, p: np.ndarray) -> bool:
        p = np.asarray(p, dtype=np.float64)
        return bool(np.all(p >= self.lo) and np.all(p <= self.hi))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def size(self) -> np.ndarray:
        return self.hi - self.lo

    def is_empty(self) -> bool:
        return bool(np.any(self.hi <= self.lo))

    def expanded(self, margin: float) -> "Box":
        return Box(self.lo - margin, self.hi + margin)

    def union(self, other: "Box") -> "Box":
        return Box(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.lo + rng.random(3) * (self.hi - self.lo)


# --------------------------------------------------------------------------
# quaternions  [x, y, z, w]
# --------------------------------------------------------------------------

def quat_identity() -> np.ndarray:
    return np.array([0.0, 0.0, 0.0, 1.0])


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ax, ay, az, aw = a
    bx, by, bz, bw = b
    return np.array([
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
        aw * bw - ax * bx - ay * by - az * bz,
    ])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    return np.asarray(q, dtype=np.float64) / np.linalg.norm(q)


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector v by quaternion q."""
    u = q[:3]
    w = q[3]
    return v + 2.0 * np.cross(u, np.cross(u, v) + w * v)


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([-q[0], -q[1], -q[2], q[3]])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    x, y, z, w = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def quat_from_yaw_pitch(yaw: float, pitch: float) -> np.ndarray:
    """Roll-free orientation: yaw about world z, then pitch (positive = up).

    The resulting forward axis is
    ``(cos(yaw) cos(pitch), sin(yaw) cos(pitch), sin(pitch))``.
    """
    qz = np.array([0.0, 0.0, math.sin(yaw / 2.0), math.cos(yaw / 2.0)])
    qy = np.array([0.0, math.sin(-pitch / 2.0), 0.0, math.cos(-pitch / 2.0)])
    return quat_multiply(qz, qy)


def yaw_pitch_of(q: np.ndarray) -> tuple[float, float]:
    """Extract yaw/pitch from the forward axis of q (roll discarded)."""
    f = quat_rotate(q, np.array([1.0, 0.0, 0.0]))
    pitch = math.asin(max(-1.0, min(1.0, f[2])))
    yaw = math.atan2(f[1], f[0])
    return yaw, pitch


@dataclass(frozen=True)
class Pose:
    """A 6-DoF camera pose; the camera looks along the rotated +x axis."""

    position: np.ndarray
    orientation: np.ndarray = field(default_factory=quat_identity)

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64))
        object.__setattr__(self, "orientation", np.asarray(self.orientation, dtype=np.float64))

    @property
    def forward(self) -> np.ndarray:
        return quat_rotate(self.orientation, np.array([1.0, 0.0, 0.0]))

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)


def look_at(position: np.ndarray, target: np.ndarray) -> Pose:
    """Pose at `position` whose forward axis points at `target`, roll-free."""
    position = np.asarray(position, dtype=np.float64)
    d = np.asarray(target, dtype=np.float64) - position
    n = np.linalg.norm(d)
    if n < 1e-12:
        raise ValueError("look_at target coincides with position")
    f = d / n
    yaw = math.atan2(f[1], f[0])
    pitch = math.asin(max(-1.0, min(1.0, f[2])))
    return Pose(position, quat_from_yaw_pitch(yaw, pitch))
