"""Geometric primitives, containment tests, and orientation helpers.

All primitives are defined in world coordinates (metres). Containment
tests are vectorized over an (N, 3) array of points and return boolean
masks, which is how scene voxelization and keypoint volume models query
them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import InvalidArgumentError

# Containment slack: cell centers that land exactly on a primitive
# boundary (lattice-aligned radii and box faces) resolve inclusively
# instead of by floating-point rounding luck.
_EPS = 1e-12


def _as_point(p) -> np.ndarray:
    a = np.asarray(p, dtype=np.float64)
    if a.shape != (3,):
        raise InvalidArgumentError(f"expected a 3D point, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box given by its min and max corners."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", _as_point(self.lo))
        object.__setattr__(self, "hi", _as_point(self.hi))

    @property
    def extent(self) -> np.ndarray:
        return self.hi - self.lo

    def is_degenerate(self) -> bool:
        return bool(np.any(self.extent <= 0.0))

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        return np.all((p >= self.lo - _EPS) & (p <= self.hi + _EPS), axis=1)

    def expanded(self, margin: float) -> "Aabb":
        return Aabb(self.lo - margin, self.hi + margin)


@dataclass(frozen=True)
class Box:
    """Axis-aligned solid box."""

    center: np.ndarray
    half_extents: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", _as_point(self.center))
        object.__setattr__(self, "half_extents", _as_point(self.half_extents))
        if np.any(self.half_extents <= 0.0):
            raise InvalidArgumentError("box half_extents must be positive")

    def aabb(self) -> Aabb:
        return Aabb(self.center - self.half_extents, self.center + self.half_extents)

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        return np.all(np.abs(p - self.center) <= self.half_extents + _EPS, axis=1)


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _as_point(self.center))
        if self.radius <= 0.0:
            raise InvalidArgumentError("sphere radius must be positive")

    def aabb(self) -> Aabb:
        return Aabb(self.center - self.radius, self.center + self.radius)

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        d2 = np.sum((p - self.center) ** 2, axis=1)
        return d2 <= self.radius * self.radius + _EPS


def _segment_params(a: np.ndarray, b: np.ndarray):
    axis = b - a
    length2 = float(np.dot(axis, axis))
    if length2 <= 0.0:
        raise InvalidArgumentError("segment endpoints must be distinct")
    return axis, length2


@dataclass(frozen=True)
class Capsule:
    """Segment from a to b swept by a sphere of the given radius."""

    a: np.ndarray
    b: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "a", _as_point(self.a))
        object.__setattr__(self, "b", _as_point(self.b))
        if self.radius <= 0.0:
            raise InvalidArgumentError("capsule radius must be positive")
        _segment_params(self.a, self.b)

    def aabb(self) -> Aabb:
        lo = np.minimum(self.a, self.b) - self.radius
        hi = np.maximum(self.a, self.b) + self.radius
        return Aabb(lo, hi)

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        axis, length2 = _segment_params(self.a, self.b)
        t = np.clip((p - self.a) @ axis / length2, 0.0, 1.0)
        closest = self.a + t[:, None] * axis
        d2 = np.sum((p - closest) ** 2, axis=1)
        return d2 <= self.radius * self.radius + _EPS


@dataclass(frozen=True)
class Cylinder:
    """Finite solid cylinder with flat caps at a and b."""

    a: np.ndarray
    b: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "a", _as_point(self.a))
        object.__setattr__(self, "b", _as_point(self.b))
        if self.radius <= 0.0:
            raise InvalidArgumentError("cylinder radius must be positive")
        _segment_params(self.a, self.b)

    def aabb(self) -> Aabb:
        lo = np.minimum(self.a, self.b) - self.radius
        hi = np.maximum(self.a, self.b) + self.radius
        return Aabb(lo, hi)

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        axis, length2 = _segment_params(self.a, self.b)
        t = (p - self.a) @ axis / length2
        inside_span = (t >= -_EPS) & (t <= 1.0 + _EPS)
        closest = self.a + np.clip(t, 0.0, 1.0)[:, None] * axis
        d2 = np.sum((p - closest) ** 2, axis=1)
        return inside_span & (d2 <= self.radius * self.radius + _EPS)


Primitive = Box | Sphere | Capsule | Cylinder


def normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = float(np.linalg.norm(v))
    if n <= 0.0:
        raise InvalidArgumentError("cannot normalize a zero vector")
    return v / n


def quat_wxyz_to_matrix(quat: np.ndarray) -> np.ndarray:
    """Rotation matrix for a unit quaternion stored as (w, x, y, z)."""
    q = np.asarray(quat, dtype=np.float64)
    return Rotation.from_quat([q[1], q[2], q[3], q[0]]).as_matrix()


def matrix_to_quat_wxyz(mat: np.ndarray) -> np.ndarray:
    x, y, z, w = Rotation.from_matrix(mat).as_quat()
    q = np.array([w, x, y, z], dtype=np.float64)
    # Canonical sign: w >= 0 keeps serialized poses reproducible.
    if q[0] < 0.0 or (q[0] == 0.0 and q[(np.abs(q) > 0).argmax()] < 0.0):
        q = -q
    return q


def look_at_quat(forward: np.ndarray, up_hint=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Quaternion (w, x, y, z) orienting the sensor frame.

    The sensor convention is x forward, y left, z up. The roll is fixed by
    keeping the sensor z axis as close to up_hint as possible; when forward
    is parallel to up_hint the world x axis is used instead.
    """
    f = normalize(forward)
    hint = np.asarray(up_hint, dtype=np.float64)
    right = np.cross(f, hint)
    if np.linalg.norm(right) < 1e-9:
        right = np.cross(f, np.array([1.0, 0.0, 0.0]))
    right = normalize(right)
    up = np.cross(right, f)
    mat = np.column_stack([f, -right, up])
    return matrix_to_quat_wxyz(mat)


def rotate_about_axis(v: np.ndarray, axis: np.ndarray, angle_deg: float) -> np.ndarray:
    rot = Rotation.from_rotvec(np.deg2rad(angle_deg) * normalize(axis))
    return rot.apply(np.asarray(v, dtype=np.float64))


def yaw_quat_about_z(base_forward: np.ndarray, yaw_deg: float) -> np.ndarray:
    """Orientation looking along base_forward rotated by yaw_deg about world z."""
    return look_at_quat(rotate_about_axis(base_forward, np.array([0.0, 0.0, 1.0]), yaw_deg))
