"""Scene models, voxelization, regions of interest, and keypoint volumes.

Scenes are declarative: a workspace box, static primitives, one robot
built from primitives, and zero or more humans given as 15-joint
skeletons. Ground truth is produced by voxelizing the scene; the human
body volume is generated as capsules along the skeleton bones plus a
head sphere, so the ground truth and the keypoint representations are
mutually consistent.

Scene documents are JSON; see README for the schema. A dynamic scene is
a sequence of snapshots sharing the workspace and the static primitives.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import InvalidArgumentError, SceneFormatError
from .geometry import _EPS, Aabb, Box, Capsule, Cylinder, Primitive, Sphere
from .grid import CellState, OCCUPIED, FREE, VoxelGrid, new_grid

JOINT_NAMES = (
    "head", "neck", "pelvis",
    "l_shoulder", "r_shoulder", "l_elbow", "r_elbow", "l_wrist", "r_wrist",
    "l_hip", "r_hip", "l_knee", "r_knee", "l_ankle", "r_ankle",
)

# Fixed bone tree over the 15 joints (14 edges).
BONES = (
    ("head", "neck"),
    ("neck", "l_shoulder"), ("neck", "r_shoulder"),
    ("l_shoulder", "l_elbow"), ("l_elbow", "l_wrist"),
    ("r_shoulder", "r_elbow"), ("r_elbow", "r_wrist"),
    ("neck", "pelvis"),
    ("pelvis", "l_hip"), ("pelvis", "r_hip"),
    ("l_hip", "l_knee"), ("l_knee", "l_ankle"),
    ("r_hip", "r_knee"), ("r_knee", "r_ankle"),
)

DEFAULT_LIMB_RADIUS = 0.07
DEFAULT_HEAD_RADIUS = 0.11


@dataclass(frozen=True)
class HumanSkeleton:
    """Named 3D joints plus the radii used to generate the body volume."""

    keypoints: dict[str, np.ndarray]
    limb_radius: float = DEFAULT_LIMB_RADIUS
    head_radius: float = DEFAULT_HEAD_RADIUS

    def __post_init__(self):
        missing = [j for j in JOINT_NAMES if j not in self.keypoints]
        if missing:
            raise SceneFormatError(f"skeleton missing joints: {', '.join(missing)}")
        extra = [j for j in self.keypoints if j not in JOINT_NAMES]
        if extra:
            raise SceneFormatError(f"skeleton has unknown joints: {', '.join(extra)}")
        if self.limb_radius <= 0.0 or self.head_radius <= 0.0:
            raise SceneFormatError("skeleton radii must be positive")
        pts = {k: np.asarray(v, dtype=np.float64) for k, v in self.keypoints.items()}
        for name, p in pts.items():
            if p.shape != (3,):
                raise SceneFormatError(f"joint {name!r} is not a 3D point")
        object.__setattr__(self, "keypoints", pts)

    def joint_array(self) -> np.ndarray:
        return np.stack([self.keypoints[j] for j in JOINT_NAMES])

    def body_primitives(self) -> list[Primitive]:
        prims: list[Primitive] = [Sphere(self.keypoints["head"], self.head_radius)]
        for a, b in BONES:
            prims.append(Capsule(self.keypoints[a], self.keypoints[b], self.limb_radius))
        return prims


def _max_point_distance(prim: Primitive, origin: np.ndarray) -> float:
    if isinstance(prim, Sphere):
        return float(np.linalg.norm(prim.center - origin)) + prim.radius
    if isinstance(prim, Box):
        corners = prim.center + prim.half_extents * np.array(
            [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]
        )
        return float(np.max(np.linalg.norm(corners - origin, axis=1)))
    # Capsule and cylinder: endpoint distance plus radius bounds the hull.
    far = max(float(np.linalg.norm(prim.a - origin)), float(np.linalg.norm(prim.b - origin)))
    return far + prim.radius


@dataclass(frozen=True)
class RobotModel:
    base_position: np.ndarray
    base_quat_wxyz: np.ndarray
    links: tuple[Primitive, ...]
    reach: float

    def __post_init__(self):
        object.__setattr__(self, "base_position", np.asarray(self.base_position, dtype=np.float64))
        object.__setattr__(self, "base_quat_wxyz", np.asarray(self.base_quat_wxyz, dtype=np.float64))
        object.__setattr__(self, "links", tuple(self.links))
        if self.reach <= 0.0:
            raise SceneFormatError("robot reach must be positive")
        for i, link in enumerate(self.links):
            if _max_point_distance(link, self.base_position) > self.reach + 1e-9:
                raise SceneFormatError(f"robot link {i} extends beyond reach {self.reach}")


@dataclass(frozen=True)
class SceneModel:
    workspace: Aabb
    robot: RobotModel
    statics: tuple[Primitive, ...] = ()
    humans: tuple[HumanSkeleton, ...] = ()
    name: str = "scene"

    def __post_init__(self):
        object.__setattr__(self, "statics", tuple(self.statics))
        object.__setattr__(self, "humans", tuple(self.humans))
        if self.workspace.is_degenerate():
            raise SceneFormatError("workspace must have positive extent")
        ws = self.workspace
        for label, prim in self._all_primitives():
            bb = prim.aabb()
            if np.any(bb.lo < ws.lo - 1e-9) or np.any(bb.hi > ws.hi + 1e-9):
                raise SceneFormatError(f"{label} lies outside the workspace")
        for hi, human in enumerate(self.humans):
            pts = human.joint_array()
            if not np.all(ws.contains(pts)):
                raise SceneFormatError(f"humans[{hi}] has keypoints outside the workspace")

    def _all_primitives(self):
        for i, p in enumerate(self.statics):
            yield f"statics[{i}]", p
        for i, p in enumerate(self.robot.links):
            yield f"robot.links[{i}]", p
        for hi, human in enumerate(self.humans):
            for j, p in enumerate(human.body_primitives()):
                yield f"humans[{hi}].body[{j}]", p


@dataclass(frozen=True)
class DynamicScene:
    snapshots: tuple[SceneModel, ...]
    name: str = "dynamic"

    def __post_init__(self):
        object.__setattr__(self, "snapshots", tuple(self.snapshots))
        if not self.snapshots:
            raise SceneFormatError("dynamic scene needs at least one snapshot")
        ws = self.snapshots[0].workspace
        for i, snap in enumerate(self.snapshots[1:], start=1):
            if np.any(snap.workspace.lo != ws.lo) or np.any(snap.workspace.hi != ws.hi):
                raise SceneFormatError(f"snapshot {i} has a different workspace box")


# ---------------------------------------------------------------------------
# Regions of interest


@dataclass(frozen=True)
class RobotSphereRoi:
    """Upper semi-sphere of the robot's reach, clipped below floor_z."""

    center: np.ndarray
    radius: float
    floor_z: float
    roi_id: str = "robot"

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        if self.radius <= 0.0:
            raise InvalidArgumentError("ROI radius must be positive")

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        d2 = np.sum((p - self.center) ** 2, axis=1)
        return (d2 <= self.radius * self.radius + _EPS) & (p[:, 2] >= self.floor_z - _EPS)

    def mask(self, grid: VoxelGrid) -> np.ndarray:
        xs, ys, zs = _axis_centers(grid)
        d2 = (
            (xs[:, None, None] - self.center[0]) ** 2
            + (ys[None, :, None] - self.center[1]) ** 2
            + (zs[None, None, :] - self.center[2]) ** 2
        )
        return (d2 <= self.radius * self.radius + _EPS) & (zs[None, None, :] >= self.floor_z - _EPS)


@dataclass(frozen=True)
class HumanBoxRoi:
    box: Aabb
    roi_id: str = "human"

    def __post_init__(self):
        if self.box.is_degenerate():
            raise InvalidArgumentError("ROI box must have positive extent")

    def contains(self, points: np.ndarray) -> np.ndarray:
        return self.box.contains(points)

    def mask(self, grid: VoxelGrid) -> np.ndarray:
        xs, ys, zs = _axis_centers(grid)
        mx = (xs >= self.box.lo[0] - _EPS) & (xs <= self.box.hi[0] + _EPS)
        my = (ys >= self.box.lo[1] - _EPS) & (ys <= self.box.hi[1] + _EPS)
        mz = (zs >= self.box.lo[2] - _EPS) & (zs <= self.box.hi[2] + _EPS)
        return mx[:, None, None] & my[None, :, None] & mz[None, None, :]


RegionOfInterest = RobotSphereRoi | HumanBoxRoi


def _axis_centers(grid: VoxelGrid):
    nx, ny, nz = grid.dims
    r = grid.resolution
    xs = grid.origin[0] + (np.arange(nx) + 0.5) * r
    ys = grid.origin[1] + (np.arange(ny) + 0.5) * r
    zs = grid.origin[2] + (np.arange(nz) + 0.5) * r
    return xs, ys, zs


def robot_roi(scene: SceneModel) -> RobotSphereRoi:
    """Semi-sphere of the robot's reach above its mounting plane."""
    base = scene.robot.base_position
    return RobotSphereRoi(center=base, radius=scene.robot.reach, floor_z=float(base[2]))


def human_roi(scene: SceneModel, human_index: int = 0, margin: float = 0.05) -> HumanBoxRoi:
    """Axis-aligned bounds of the human's keypoints, padded by
    limb_radius + margin on every side."""
    if human_index < 0 or human_index >= len(scene.humans):
        raise InvalidArgumentError(f"human index {human_index} out of range")
    human = scene.humans[human_index]
    pts = human.joint_array()
    pad = human.limb_radius + margin
    return HumanBoxRoi(Aabb(pts.min(axis=0) - pad, pts.max(axis=0) + pad))


# ---------------------------------------------------------------------------
# Voxelization


def _paint_primitive(grid: VoxelGrid, prim: Primitive, value=OCCUPIED) -> None:
    # Restrict the center test to the primitive's bounding subgrid.
    bb = prim.aabb()
    lo_idx = np.floor((bb.lo - grid.origin) / grid.resolution - 0.5).astype(np.int64)
    hi_idx = np.ceil((bb.hi - grid.origin) / grid.resolution + 0.5).astype(np.int64)
    lo_idx = np.maximum(lo_idx, 0)
    hi_idx = np.minimum(hi_idx, np.array(grid.dims))
    if np.any(lo_idx >= hi_idx):
        return
    sl = tuple(slice(int(a), int(b)) for a, b in zip(lo_idx, hi_idx))
    shape = tuple(int(b - a) for a, b in zip(lo_idx, hi_idx))
    ii = np.indices(shape, dtype=np.float64).reshape(3, -1).T + lo_idx
    centers = grid.origin + (ii + 0.5) * grid.resolution
    inside = prim.contains(centers).reshape(shape)
    grid.cells[sl][inside] = value


def voxelize(scene: SceneModel, resolution: float) -> VoxelGrid:
    """Ground-truth grid: a cell is occupied iff its center lies inside a
    static primitive, a robot link, or a human body volume. No cell is
    left unknown."""
    truth = new_grid(scene.workspace, resolution, CellState.FREE)
    for _, prim in scene._all_primitives():
        _paint_primitive(truth, prim)
    return truth


def robot_cells(scene: SceneModel, resolution: float) -> VoxelGrid:
    """Grid in which only the robot links are occupied (everything else free)."""
    g = new_grid(scene.workspace, resolution, CellState.FREE)
    for prim in scene.robot.links:
        _paint_primitive(g, prim)
    return g


# ---------------------------------------------------------------------------
# Keypoint volume models


def keypoint_volume(
    grid: VoxelGrid,
    keypoints: Mapping[str, np.ndarray],
    model: str,
    radius: float | None = None,
) -> np.ndarray:
    """Boolean cell mask for a feature-based volume model.

    model is one of "box" (axis-aligned hull of the points), "spheres"
    (a ball of the given radius per point) or "cylinders" (a cylinder of
    the given radius per bone edge whose joints are both present). An
    empty keypoint set yields an empty mask.
    """
    mask_grid = VoxelGrid(grid.origin, grid.resolution, np.zeros(grid.dims, dtype=np.uint8))
    pts = {k: np.asarray(v, dtype=np.float64) for k, v in keypoints.items()}
    if not pts:
        return mask_grid.cells.astype(bool)
    if model == "box":
        arr = np.stack(list(pts.values()))
        lo, hi = arr.min(axis=0), arr.max(axis=0)
        if np.all(hi > lo):
            _paint_primitive(mask_grid, Box((lo + hi) / 2.0, (hi - lo) / 2.0), np.uint8(1))
        else:
            # Degenerate hull (a single point or coplanar points): no volume.
            pass
    elif model == "spheres":
        if radius is None or radius <= 0.0:
            raise InvalidArgumentError("spheres model needs a positive radius")
        for p in pts.values():
            _paint_primitive(mask_grid, Sphere(p, radius), np.uint8(1))
    elif model == "cylinders":
        if radius is None or radius <= 0.0:
            raise InvalidArgumentError("cylinders model needs a positive radius")
        for a, b in BONES:
            if a in pts and b in pts:
                _paint_primitive(mask_grid, Cylinder(pts[a], pts[b], radius), np.uint8(1))
    else:
        raise InvalidArgumentError(f"unknown keypoint volume model {model!r}")
    return mask_grid.cells.astype(bool)


# ---------------------------------------------------------------------------
# JSON scene documents


def _req(obj: dict, key: str, ctx: str):
    if key not in obj:
        raise SceneFormatError(f"{ctx}: missing field {key!r}")
    return obj[key]


def _primitive_from_dict(d: dict, ctx: str) -> Primitive:
    kind = _req(d, "type", ctx)
    try:
        if kind == "box":
            return Box(_req(d, "center", ctx), _req(d, "half_extents", ctx))
        if kind == "sphere":
            return Sphere(_req(d, "center", ctx), float(_req(d, "radius", ctx)))
        if kind == "capsule":
            return Capsule(_req(d, "a", ctx), _req(d, "b", ctx), float(_req(d, "radius", ctx)))
        if kind == "cylinder":
            return Cylinder(_req(d, "a", ctx), _req(d, "b", ctx), float(_req(d, "radius", ctx)))
    except InvalidArgumentError as exc:
        raise SceneFormatError(f"{ctx}: {exc}") from exc
    raise SceneFormatError(f"{ctx}: unknown primitive type {kind!r}")


def _primitive_to_dict(p: Primitive) -> dict:
    if isinstance(p, Box):
        return {"type": "box", "center": p.center.tolist(), "half_extents": p.half_extents.tolist()}
    if isinstance(p, Sphere):
        return {"type": "sphere", "center": p.center.tolist(), "radius": p.radius}
    if isinstance(p, Capsule):
        return {"type": "capsule", "a": p.a.tolist(), "b": p.b.tolist(), "radius": p.radius}
    return {"type": "cylinder", "a": p.a.tolist(), "b": p.b.tolist(), "radius": p.radius}


def _human_from_dict(d: dict, ctx: str) -> HumanSkeleton:
    kp = _req(d, "keypoints", ctx)
    if not isinstance(kp, dict):
        raise SceneFormatError(f"{ctx}: keypoints must be a mapping")
    try:
        return HumanSkeleton(
            keypoints={k: np.asarray(v, dtype=np.float64) for k, v in kp.items()},
            limb_radius=float(d.get("limb_radius", DEFAULT_LIMB_RADIUS)),
            head_radius=float(d.get("head_radius", DEFAULT_HEAD_RADIUS)),
        )
    except SceneFormatError as exc:
        raise SceneFormatError(f"{ctx}: {exc}") from exc


def _human_to_dict(h: HumanSkeleton) -> dict:
    return {
        "limb_radius": h.limb_radius,
        "head_radius": h.head_radius,
        "keypoints": {k: v.tolist() for k, v in h.keypoints.items()},
    }


def _robot_from_dict(d: dict, ctx: str) -> RobotModel:
    base = _req(d, "base_pose", ctx)
    try:
        return RobotModel(
            base_position=_req(base, "position", f"{ctx}.base_pose"),
            base_quat_wxyz=np.asarray(base.get("orientation", [1.0, 0.0, 0.0, 0.0]), dtype=np.float64),
            links=tuple(
                _primitive_from_dict(p, f"{ctx}.links[{i}]") for i, p in enumerate(d.get("links", []))
            ),
            reach=float(_req(d, "reach", ctx)),
        )
    except SceneFormatError:
        raise
    except (TypeError, ValueError) as exc:
        raise SceneFormatError(f"{ctx}: {exc}") from exc


def _robot_to_dict(r: RobotModel) -> dict:
    return {
        "base_pose": {"position": r.base_position.tolist(), "orientation": r.base_quat_wxyz.tolist()},
        "reach": r.reach,
        "links": [_primitive_to_dict(p) for p in r.links],
    }


def _snapshot_scene(doc: dict, workspace: Aabb, statics, snap: dict, name: str, ctx: str) -> SceneModel:
    robot = _robot_from_dict(_req(snap, "robot", ctx), f"{ctx}.robot")
    humans = tuple(
        _human_from_dict(h, f"{ctx}.humans[{i}]") for i, h in enumerate(snap.get("humans", []))
    )
    return SceneModel(workspace=workspace, robot=robot, statics=statics, humans=humans, name=name)


def scene_from_dict(doc: dict) -> SceneModel | DynamicScene:
    if not isinstance(doc, dict):
        raise SceneFormatError("scene document must be a JSON object")
    ws_doc = _req(doc, "workspace", "scene")
    workspace = Aabb(_req(ws_doc, "min", "workspace"), _req(ws_doc, "max", "workspace"))
    statics = tuple(
        _primitive_from_dict(p, f"statics[{i}]") for i, p in enumerate(doc.get("statics", []))
    )
    name = doc.get("name", "scene")
    if "snapshots" in doc:
        snaps = doc["snapshots"]
        if not isinstance(snaps, list) or not snaps:
            raise SceneFormatError("snapshots must be a non-empty list")
        models = tuple(
            _snapshot_scene(doc, workspace, statics, s, f"{name}/{i:02d}", f"snapshots[{i}]")
            for i, s in enumerate(snaps)
        )
        return DynamicScene(snapshots=models, name=name)
    return _snapshot_scene(doc, workspace, statics, doc, name, "scene")


def scene_to_dict(scene: SceneModel | DynamicScene) -> dict:
    if isinstance(scene, DynamicScene):
        first = scene.snapshots[0]
        return {
            "name": scene.name,
            "workspace": {"min": first.workspace.lo.tolist(), "max": first.workspace.hi.tolist()},
            "statics": [_primitive_to_dict(p) for p in first.statics],
            "snapshots": [
                {
                    "robot": _robot_to_dict(s.robot),
                    "humans": [_human_to_dict(h) for h in s.humans],
                }
                for s in scene.snapshots
            ],
        }
    return {
        "name": scene.name,
        "workspace": {"min": scene.workspace.lo.tolist(), "max": scene.workspace.hi.tolist()},
        "statics": [_primitive_to_dict(p) for p in scene.statics],
        "robot": _robot_to_dict(scene.robot),
        "humans": [_human_to_dict(h) for h in scene.humans],
    }


def load_scene(text: str) -> SceneModel | DynamicScene:
    """Parse and fully validate a scene document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneFormatError(f"scene JSON parse error: {exc}") from exc
    return scene_from_dict(doc)


def load_scene_file(path) -> SceneModel | DynamicScene:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        return load_scene(text)
    except SceneFormatError as exc:
        raise SceneFormatError(f"{path}: {exc}") from exc
