"""Sensor simulation against a ground-truth grid.

Every sensing operation is a pure function of (truth grid, pose, spec,
seed) returning a fresh estimate grid: cells the sensor observed empty
are FREE, cells it reports matter in are OCCUPIED, and everything it
cannot see stays UNKNOWN. Range sensors are simulated by casting rays
that are blocked by occupied space, so occlusion falls out of the
traversal; range noise perturbs the measured distance of each hit but
never lets a ray reach behind the obstacle that blocked it.

Sensor frame convention: x forward, y left, z up.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import InvalidArgumentError
from .geometry import quat_wxyz_to_matrix
from .grid import CellState, FREE, OCCUPIED, VoxelGrid, occupied_distance_field, traverse, Ray
from .scene import HumanSkeleton

# Hard cap on the simulated pixel lattice; the stride is normally chosen
# so adjacent rays are no farther apart than one voxel at max range.
RAY_CAP_H = 320
RAY_CAP_V = 180

CAMERA_INTERPRETATIONS = ("zone", "pc", "pc_spheres", "pc_cylinders", "pc_box")
INTERPRETATIONS = CAMERA_INTERPRETATIONS + ("pad", "proximity")


@dataclass(frozen=True)
class SensorPose:
    position: np.ndarray
    quat_wxyz: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64))
        q = np.asarray(self.quat_wxyz, dtype=np.float64)
        if abs(float(np.linalg.norm(q)) - 1.0) > 1e-9:
            raise InvalidArgumentError("sensor orientation quaternion must be normalized")
        object.__setattr__(self, "quat_wxyz", q)

    def rotation(self) -> np.ndarray:
        return quat_wxyz_to_matrix(self.quat_wxyz)


@dataclass(frozen=True)
class CameraSpec:
    fov_h_deg: float
    fov_v_deg: float
    res_h: int
    res_v: int
    range_min: float
    range_max: float
    noise_sigma: float = 0.0
    depth_enabled: bool = True

    def __post_init__(self):
        if not (0.0 < self.fov_h_deg < 180.0 and 0.0 < self.fov_v_deg < 180.0):
            raise InvalidArgumentError("camera FoV must be in (0, 180) degrees per axis")
        if self.res_h < 1 or self.res_v < 1:
            raise InvalidArgumentError("camera pixel counts must be positive")
        if not (0.0 <= self.range_min < self.range_max):
            raise InvalidArgumentError("require 0 <= range_min < range_max")
        if self.noise_sigma < 0.0:
            raise InvalidArgumentError("noise_sigma must be non-negative")


@dataclass(frozen=True)
class LidarSpec:
    fov_h_deg: float
    fov_v_deg: float
    ang_res_h_deg: float
    ang_res_v_deg: float
    range_min: float
    range_max: float
    noise_sigma: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.fov_h_deg <= 360.0) or self.fov_v_deg <= 0.0:
            raise InvalidArgumentError("lidar FoV out of range")
        if self.ang_res_h_deg <= 0.0 or self.ang_res_v_deg <= 0.0:
            raise InvalidArgumentError("angular resolution must be positive")
        if round(self.fov_h_deg / self.ang_res_h_deg) < 1 or round(self.fov_v_deg / self.ang_res_v_deg) < 0:
            raise InvalidArgumentError("angular resolution too coarse for the FoV")
        if not (0.0 <= self.range_min < self.range_max):
            raise InvalidArgumentError("require 0 <= range_min < range_max")
        if self.noise_sigma < 0.0:
            raise InvalidArgumentError("noise_sigma must be non-negative")


@dataclass(frozen=True)
class PadSpec:
    center_xy: tuple[float, float]
    dims_xy: tuple[float, float]
    floor_z: float = 0.0
    contact_band: float = 0.05

    def __post_init__(self):
        if self.dims_xy[0] <= 0.0 or self.dims_xy[1] <= 0.0:
            raise InvalidArgumentError("pad dimensions must be positive")
        if self.contact_band <= 0.0:
            raise InvalidArgumentError("contact band must be positive")


@dataclass(frozen=True)
class ProximitySpec:
    inflation: float
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.inflation <= 0.0:
            raise InvalidArgumentError("proximity inflation must be positive")
        if self.noise_sigma < 0.0:
            raise InvalidArgumentError("noise_sigma must be non-negative")


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# Ray bundles


def camera_ray_count(spec: CameraSpec, resolution: float, full: bool = False) -> tuple[int, int]:
    """Simulated pixel lattice size.

    The lattice is strided down from the sensor resolution so that the
    spacing between adjacent rays at range_max stays below one voxel,
    capped at RAY_CAP_H x RAY_CAP_V; full mode casts one ray per pixel.
    """
    if full:
        return spec.res_h, spec.res_v
    width = 2.0 * spec.range_max * math.tan(math.radians(spec.fov_h_deg) / 2.0)
    height = 2.0 * spec.range_max * math.tan(math.radians(spec.fov_v_deg) / 2.0)
    n_h = min(spec.res_h, RAY_CAP_H, int(math.ceil(width / resolution)) + 1)
    n_v = min(spec.res_v, RAY_CAP_V, int(math.ceil(height / resolution)) + 1)
    return max(n_h, 1), max(n_v, 1)


@lru_cache(maxsize=32)
def camera_ray_dirs(spec: CameraSpec, n_h: int, n_v: int) -> np.ndarray:
    """(N, 3) unit directions in the sensor frame, row-major over (v, h)."""
    tan_h = math.tan(math.radians(spec.fov_h_deg) / 2.0)
    tan_v = math.tan(math.radians(spec.fov_v_deg) / 2.0)
    us = np.linspace(-tan_h, tan_h, n_h) if n_h > 1 else np.zeros(1)
    vs = np.linspace(-tan_v, tan_v, n_v) if n_v > 1 else np.zeros(1)
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    dirs = np.stack([np.ones_like(uu), uu, vv], axis=-1).reshape(-1, 3)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    dirs.setflags(write=False)
    return dirs


@lru_cache(maxsize=32)
def lidar_ray_dirs(spec: LidarSpec) -> np.ndarray:
    """(N, 3) unit directions of the scan arc in the sensor frame.

    A full 360 degree sweep spaces round(360 / ang_res) azimuths around
    the circle; a partial arc includes both ends. Elevation always spans
    [-fov_v/2, +fov_v/2] inclusive.
    """
    if spec.fov_h_deg >= 360.0:
        n_az = int(round(360.0 / spec.ang_res_h_deg))
        az = np.arange(n_az) / n_az * 2.0 * math.pi - math.pi
    else:
        n_az = int(round(spec.fov_h_deg / spec.ang_res_h_deg)) + 1
        az = np.deg2rad(np.linspace(-spec.fov_h_deg / 2.0, spec.fov_h_deg / 2.0, n_az))
    n_el = int(round(spec.fov_v_deg / spec.ang_res_v_deg)) + 1
    el = np.deg2rad(np.linspace(-spec.fov_v_deg / 2.0, spec.fov_v_deg / 2.0, n_el))
    aa, ee = np.meshgrid(az, el, indexing="ij")
    dirs = np.stack(
        [np.cos(ee) * np.cos(aa), np.cos(ee) * np.sin(aa), np.sin(ee)], axis=-1
    ).reshape(-1, 3)
    dirs.setflags(write=False)
    return dirs


# ---------------------------------------------------------------------------
# Range sensing core


def _sense_range_frame(
    truth: VoxelGrid,
    origin: np.ndarray,
    dirs: np.ndarray,
    range_min: float,
    range_max: float,
    noise_sigma: float,
    rng: np.random.Generator,
) -> VoxelGrid:
    """Cast one ray bundle and integrate the measurements.

    Per ray: the first occupied cell blocks it. A block entered before
    range_min blinds the ray (nothing is marked). Otherwise the measured
    distance is the block's entry distance plus Gaussian noise, clamped
    to the range window; the marked endpoint never falls behind the
    blocking cell. Unblocked rays carve free space out to range_max.
    """
    n = dirs.shape[0]
    origins = np.broadcast_to(origin, (n, 3)).astype(np.float64).copy()
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    noise = rng.normal(0.0, noise_sigma, n) if noise_sigma > 0.0 else np.zeros(n)
    estimate = truth.filled_like(CellState.UNKNOWN)
    _kernels.sense_batch(
        truth.cells, estimate.cells, truth.origin, truth.resolution,
        origins, dirs, noise, range_min, range_max,
    )
    return estimate


def sense_rgbd(
    truth: VoxelGrid,
    pose: SensorPose,
    spec: CameraSpec,
    seed,
    full_rays: bool = False,
) -> VoxelGrid:
    """Depth camera frame: one ray per simulated pixel through the
    pinhole frustum."""
    if not spec.depth_enabled:
        raise InvalidArgumentError("sense_rgbd needs a depth-enabled camera")
    n_h, n_v = camera_ray_count(spec, truth.resolution, full=full_rays)
    dirs = camera_ray_dirs(spec, n_h, n_v) @ pose.rotation().T
    return _sense_range_frame(
        truth, pose.position, dirs, spec.range_min, spec.range_max, spec.noise_sigma, _rng(seed)
    )


def sense_lidar(truth: VoxelGrid, pose: SensorPose, spec: LidarSpec, seed) -> VoxelGrid:
    """Lidar scan: an arc of rays at the configured angular steps."""
    dirs = lidar_ray_dirs(spec) @ pose.rotation().T
    return _sense_range_frame(
        truth, pose.position, dirs, spec.range_min, spec.range_max, spec.noise_sigma, _rng(seed)
    )


# ---------------------------------------------------------------------------
# Keypoint detection (idealized, geometric)


def _in_frustum(spec: CameraSpec, local: np.ndarray) -> bool:
    x = local[0]
    if x <= 0.0:
        return False
    tan_h = math.tan(math.radians(spec.fov_h_deg) / 2.0)
    tan_v = math.tan(math.radians(spec.fov_v_deg) / 2.0)
    return abs(local[1]) <= x * tan_h and abs(local[2]) <= x * tan_v


def detect_keypoints(
    truth: VoxelGrid,
    skeletons: list[HumanSkeleton],
    pose: SensorPose,
    spec: CameraSpec,
) -> list[dict[str, np.ndarray]]:
    """Visible joints per human, with their true 3D positions.

    A joint is visible when it projects inside the frustum, its distance
    lies in the range window, and no occupied cell blocks the line of
    sight before the joint's own cell. Occupied cells within the body
    radius of the joint itself (the head uses its head radius) do not
    count as blockers, so a joint is not occluded by the flesh around it.
    """
    rot_wt = pose.rotation().T
    out: list[dict[str, np.ndarray]] = []
    for skel in skeletons:
        visible: dict[str, np.ndarray] = {}
        for joint, kp in skel.keypoints.items():
            rel = kp - pose.position
            dist = float(np.linalg.norm(rel))
            if dist < spec.range_min or dist > spec.range_max or dist <= 0.0:
                continue
            if not _in_frustum(spec, rot_wt @ rel):
                continue
            if not _line_of_sight(truth, pose.position, kp, self_radius=_excuse_radius(skel, joint, truth)):
                continue
            visible[joint] = kp.copy()
        out.append(visible)
    return out


def _excuse_radius(skel: HumanSkeleton, joint: str, grid: VoxelGrid) -> float:
    # Half a cell diagonal of slack: the joint sits inside its own flesh,
    # and blocker tests run on voxel centers.
    body = skel.head_radius if joint == "head" else skel.limb_radius
    return body + 0.5 * math.sqrt(3.0) * grid.resolution


def _line_of_sight(truth: VoxelGrid, eye: np.ndarray, target: np.ndarray, self_radius: float) -> bool:
    target_cell = truth.world_to_index(target)
    dist = float(np.linalg.norm(target - eye))
    if dist <= 0.0:
        return True
    ray = Ray(eye, (target - eye) / dist, max_range=max(dist, 1e-6))
    for ix, iy, iz, t_in, _ in traverse(truth, ray):
        if (ix, iy, iz) == target_cell or t_in >= dist:
            return True
        if truth.cells[ix, iy, iz] == OCCUPIED:
            center = truth.index_to_center((ix, iy, iz))
            if float(np.linalg.norm(center - target)) > self_radius:
                return False
    return True


# ---------------------------------------------------------------------------
# Feature-based augmentation and the zone representation


def apply_keypoint_rep(
    estimate: VoxelGrid,
    visible: dict[str, np.ndarray],
    rep: str,
    radius: float | None = None,
) -> VoxelGrid:
    """Mark the keypoint volume occupied on top of an existing estimate."""
    from .scene import keypoint_volume

    mask = keypoint_volume(estimate, visible, rep, radius)
    estimate.cells[mask] = OCCUPIED
    return estimate


def sense_rgb_zone(
    truth: VoxelGrid,
    skeletons: list[HumanSkeleton],
    pose: SensorPose,
    spec: CameraSpec,
    zone,
    min_visible: int = 1,
) -> VoxelGrid:
    """Zone representation: detection of any human floods the zone as
    occupied; no detection declares it free. The zone interior is never
    actually observed, and cells outside it stay unknown."""
    detections = detect_keypoints(truth, skeletons, pose, spec)
    triggered = any(len(v) >= min_visible for v in detections)
    estimate = truth.filled_like(CellState.UNKNOWN)
    estimate.cells[zone.mask(truth)] = OCCUPIED if triggered else FREE
    return estimate


# ---------------------------------------------------------------------------
# Pressure pad and proximity cover


def _pad_masks(truth: VoxelGrid, spec: PadSpec, ceiling_z: float):
    cx, cy = spec.center_xy
    dx, dy = spec.dims_xy
    lo = np.array([cx - dx / 2.0, cy - dy / 2.0])
    hi = np.array([cx + dx / 2.0, cy + dy / 2.0])
    b = truth.bounds
    if lo[0] < b.lo[0] - 1e-9 or lo[1] < b.lo[1] - 1e-9 or hi[0] > b.hi[0] + 1e-9 or hi[1] > b.hi[1] + 1e-9:
        raise InvalidArgumentError("pad rectangle extends outside the workspace footprint")
    nx, ny, nz = truth.dims
    r = truth.resolution
    xs = truth.origin[0] + (np.arange(nx) + 0.5) * r
    ys = truth.origin[1] + (np.arange(ny) + 0.5) * r
    zs = truth.origin[2] + (np.arange(nz) + 0.5) * r
    rect = ((xs >= lo[0]) & (xs <= hi[0]))[:, None] & ((ys >= lo[1]) & (ys <= hi[1]))[None, :]
    prism = rect[:, :, None] & ((zs >= spec.floor_z) & (zs <= ceiling_z))[None, None, :]
    band = rect[:, :, None] & ((zs >= spec.floor_z) & (zs <= spec.floor_z + spec.contact_band))[None, None, :]
    return prism, band


def sense_pad(truth: VoxelGrid, spec: PadSpec, ceiling_z: float) -> VoxelGrid:
    """Pressure pad: contact in the band right above the pad marks the
    whole prism above it occupied; an idle pad declares the prism free."""
    if spec.contact_band < truth.resolution - 1e-12:
        raise InvalidArgumentError("contact band must cover at least one voxel")
    prism, band = _pad_masks(truth, spec, ceiling_z)
    active = bool(np.any(truth.cells[band] == OCCUPIED))
    estimate = truth.filled_like(CellState.UNKNOWN)
    estimate.cells[prism] = OCCUPIED if active else FREE
    return estimate


def sense_proximity(truth: VoxelGrid, robot: VoxelGrid, spec: ProximitySpec, seed) -> VoxelGrid:
    """Proximity cover: a shell of one inflation radius around the robot.

    Occupied truth cells inside the shell are detected when their
    distance from the robot surface, perturbed by Gaussian noise, stays
    within the inflation; all other shell cells read free. Cells outside
    the shell (including the robot itself) are unknown to this sensor.
    """
    if not robot.same_geometry(truth):
        raise InvalidArgumentError("robot grid and truth grid differ in geometry")
    robot_mask = robot.cells == OCCUPIED
    if not robot_mask.any():
        raise InvalidArgumentError("proximity cover needs a non-empty robot cell set")
    dist = occupied_distance_field(robot)
    # Integer-exact shell membership at lattice radii (see grid.inflate).
    d2_cells = np.rint((dist / truth.resolution) ** 2)
    shell = (d2_cells <= (spec.inflation / truth.resolution) ** 2 + 1e-9) & ~robot_mask

    estimate = truth.filled_like(CellState.UNKNOWN)
    estimate.cells[shell] = FREE
    candidates = shell & (truth.cells == OCCUPIED)
    k = int(np.count_nonzero(candidates))
    if k:
        rng = _rng(seed)
        noise = rng.normal(0.0, spec.noise_sigma, k) if spec.noise_sigma > 0.0 else np.zeros(k)
        detected = (dist[candidates] + noise) <= spec.inflation + 1e-12
        idx = np.argwhere(candidates)[detected]
        estimate.cells[idx[:, 0], idx[:, 1], idx[:, 2]] = OCCUPIED
    return estimate


def add_robot_prior(estimate: VoxelGrid, robot: VoxelGrid) -> VoxelGrid:
    """Stamp the known robot volume into an estimate (known, not sensed)."""
    if not robot.same_geometry(estimate):
        raise InvalidArgumentError("robot grid and estimate grid differ in geometry")
    estimate.cells[robot.cells == OCCUPIED] = OCCUPIED
    return estimate
