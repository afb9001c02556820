"""Placement search: pose lattices, metric sweeps, sensor combinations.

The sweep engine evaluates sensor poses against scenes as a
deterministic parallel map: all per-scene state (ground-truth grids,
ROI masks) is computed up front and shared read-only across a thread
pool, per-pose noise streams are derived from (seed, scene, snapshot,
pose, sensor) so scheduling cannot reorder randomness, and the output
records are sorted on a canonical key before they are returned.
"""
from __future__ import annotations

import itertools
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, InvalidArgumentError, PerispaceError
from .geometry import Aabb, look_at_quat, normalize, rotate_about_axis
from .grid import CellState, VoxelGrid, fuse
from .metrics import ConfusionCounts, CoverageScores, confusion_on_indices, scores_from_counts
from .scene import (
    DynamicScene,
    RegionOfInterest,
    SceneModel,
    human_roi,
    robot_cells,
    robot_roi,
    voxelize,
)
from .sensors import (
    CAMERA_INTERPRETATIONS,
    CameraSpec,
    LidarSpec,
    PadSpec,
    ProximitySpec,
    SensorPose,
    add_robot_prior,
    apply_keypoint_rep,
    detect_keypoints,
    sense_lidar,
    sense_pad,
    sense_proximity,
    sense_rgbd,
)

_SENSOR_STREAM = {"rgbd": 0, "lidar": 1, "proximity": 2}

DEFAULT_SURFACES = ("x0", "x1", "y0", "y1", "ceiling")

# Surface name -> (inward normal, u axis, v axis); u and v index the
# lattice within the surface plane.
_SURFACE_FRAMES = {
    "x0": (np.array([1.0, 0.0, 0.0]), 1, 2),
    "x1": (np.array([-1.0, 0.0, 0.0]), 1, 2),
    "y0": (np.array([0.0, 1.0, 0.0]), 0, 2),
    "y1": (np.array([0.0, -1.0, 0.0]), 0, 2),
    "ceiling": (np.array([0.0, 0.0, -1.0]), 0, 1),
}

SURFACE_AXES = {name: (u, v) for name, (_, u, v) in _SURFACE_FRAMES.items()}


@dataclass(frozen=True)
class PoseLatticeSpec:
    surfaces: tuple[str, ...] = DEFAULT_SURFACES
    spacing: float = 0.75
    tilt_deg: float = 30.0
    # Aim target for the base orientation; None aims each pose at the
    # workspace center. Tilts pivot around the aim direction.
    focus: tuple[float, float, float] | None = None

    def __post_init__(self):
        if not self.surfaces:
            raise InvalidArgumentError("lattice needs at least one surface")
        for s in self.surfaces:
            if s not in _SURFACE_FRAMES:
                raise InvalidArgumentError(f"unknown surface {s!r}")
        if self.spacing <= 0.0:
            raise InvalidArgumentError("lattice spacing must be positive")


@dataclass(frozen=True)
class LatticePose:
    pose_id: int
    surface: str
    position: np.ndarray
    quat_wxyz: np.ndarray
    orientation_index: int

    def sensor_pose(self) -> SensorPose:
        return SensorPose(self.position, self.quat_wxyz)


def _lattice_coords(lo: float, hi: float, spacing: float) -> np.ndarray:
    # Boundary-inclusive count, centered within the surface extent.
    n = int(np.floor((hi - lo) / spacing + 1e-9)) + 1
    offset = (hi - lo - (n - 1) * spacing) / 2.0
    return lo + offset + np.arange(n) * spacing


def generate_lattice(workspace: Aabb, spec: PoseLatticeSpec) -> list[LatticePose]:
    """Sensor poses on the selected surfaces.

    Positions lie on a centered grid at the given spacing; each position
    carries five orientations aimed toward the workspace interior: the
    direction from the position to the focus point, plus four tilts of
    tilt_deg (up/down/left/right in the surface tangent frame).
    """
    if spec.spacing > float(np.min(workspace.extent)):
        raise InvalidArgumentError("lattice spacing exceeds the smallest wall dimension")
    focus = (
        np.asarray(spec.focus, dtype=np.float64)
        if spec.focus is not None
        else (workspace.lo + workspace.hi) / 2.0
    )
    poses: list[LatticePose] = []
    axes = np.eye(3)
    for surface in spec.surfaces:
        normal, u_axis, v_axis = _SURFACE_FRAMES[surface]
        plane_axis = int(np.argmax(np.abs(normal)))
        plane_coord = workspace.lo[plane_axis] if normal[plane_axis] > 0 else workspace.hi[plane_axis]
        us = _lattice_coords(workspace.lo[u_axis], workspace.hi[u_axis], spec.spacing)
        vs = _lattice_coords(workspace.lo[v_axis], workspace.hi[v_axis], spec.spacing)
        t = spec.tilt_deg
        for iv, v in enumerate(vs):
            for iu, u in enumerate(us):
                pos = np.zeros(3)
                pos[plane_axis] = plane_coord
                pos[u_axis] = u
                pos[v_axis] = v
                aim = focus - pos
                if np.linalg.norm(aim) < 1e-9:
                    aim = normal
                aim = normalize(aim)
                dirs = [
                    aim,
                    rotate_about_axis(aim, axes[u_axis], +t),
                    rotate_about_axis(aim, axes[u_axis], -t),
                    rotate_about_axis(aim, axes[v_axis], +t),
                    rotate_about_axis(aim, axes[v_axis], -t),
                ]
                for k, d in enumerate(dirs):
                    poses.append(
                        LatticePose(
                            pose_id=len(poses),
                            surface=surface,
                            position=pos.copy(),
                            quat_wxyz=look_at_quat(d),
                            orientation_index=k,
                        )
                    )
    return poses


def lattice_position_count(workspace: Aabb, spec: PoseLatticeSpec) -> int:
    total = 0
    for surface in spec.surfaces:
        _, u_axis, v_axis = _SURFACE_FRAMES[surface]
        nu = len(_lattice_coords(workspace.lo[u_axis], workspace.hi[u_axis], spec.spacing))
        nv = len(_lattice_coords(workspace.lo[v_axis], workspace.hi[v_axis], spec.spacing))
        total += nu * nv
    return total


# ---------------------------------------------------------------------------
# Records


@dataclass(frozen=True)
class SweepRecord:
    combo_id: str
    pose_id: int
    surface: str
    position: tuple[float, float, float]
    quat_wxyz: tuple[float, float, float, float]
    scene_id: str
    roi_id: str
    interp_id: str
    counts: ConfusionCounts
    scores: CoverageScores

    @property
    def f1(self) -> float:
        return self.scores.f1

    @property
    def kappa(self) -> float:
        return self.scores.kappa

    def metric(self, name: str) -> float:
        if name == "f1":
            return self.scores.f1
        if name == "kappa":
            return self.scores.kappa
        raise InvalidArgumentError(f"unknown metric {name!r}")

    def sort_key(self):
        return (self.combo_id, self.scene_id, self.pose_id, self.interp_id, self.roi_id)


def scene_base(scene_id: str) -> str:
    return scene_id.split("/", 1)[0]


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class ComboSensors:
    pad: PadSpec | None  # template; center_xy filled per position
    pad_positions: tuple[tuple[float, float], ...]
    inflations: tuple[float, ...]
    proximity_noise: float
    camera: CameraSpec | None
    camera_yaws_deg: tuple[float, ...]
    camera_mount_offset: tuple[float, float, float]
    camera_forward: tuple[float, float, float]

    def members(self) -> tuple[str, ...]:
        out = []
        if self.pad is not None:
            out.append("pad")
        if self.inflations:
            out.append("prox")
        if self.camera is not None:
            out.append("cam")
        return tuple(out)


@dataclass(frozen=True)
class SweepConfig:
    scenes: tuple[SceneModel | DynamicScene, ...]
    resolution: float
    seed: int
    rois: tuple[str, ...] = ("robot", "human")
    workers: int = 1
    mode: str = "lattice"  # "lattice" | "combo"
    sensor_type: str = "rgbd"
    camera: CameraSpec | None = None
    lidar: LidarSpec | None = None
    interpretations: tuple[str, ...] = ("pc",)
    lattice: PoseLatticeSpec = field(default_factory=PoseLatticeSpec)
    sphere_radius: float = 0.15
    cylinder_radius: float = 0.10
    zone_roi: str = "robot"
    min_visible: int = 1
    human_roi_margin: float = 0.05
    robot_prior: bool = False
    dynamic_aggregate: str = "mean"
    combo: ComboSensors | None = None
    full_rays: bool = False

    def __post_init__(self):
        if not self.scenes:
            raise ConfigError("config needs at least one scene")
        if self.resolution <= 0.0:
            raise ConfigError("resolution must be positive")
        if not self.rois:
            raise ConfigError("config needs at least one ROI")
        for r in self.rois:
            if r not in ("robot", "human"):
                raise ConfigError(f"unknown roi {r!r}")
        if self.mode not in ("lattice", "combo"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.dynamic_aggregate not in ("mean", "pooled"):
            raise ConfigError(f"unknown dynamic_aggregate {self.dynamic_aggregate!r}")
        if self.mode == "lattice":
            if not self.interpretations:
                raise ConfigError("config needs at least one interpretation")
            if self.sensor_type == "rgbd":
                if self.camera is None:
                    raise ConfigError("rgbd sweep needs a camera spec")
                for i in self.interpretations:
                    if i not in CAMERA_INTERPRETATIONS:
                        raise ConfigError(f"interpretation {i!r} is not valid for an rgbd camera")
                    if i != "zone" and not self.camera.depth_enabled:
                        raise ConfigError(f"interpretation {i!r} needs a depth-enabled camera")
            elif self.sensor_type == "lidar":
                if self.lidar is None:
                    raise ConfigError("lidar sweep needs a lidar spec")
                for i in self.interpretations:
                    if i != "pc":
                        raise ConfigError(f"interpretation {i!r} is not valid for a lidar")
            else:
                raise ConfigError(f"unknown sensor type {self.sensor_type!r}")
        else:
            if self.combo is None or not self.combo.members():
                raise ConfigError("combo mode needs at least one sensor")


# ---------------------------------------------------------------------------
# Scene preprocessing (read-only, shared across workers)


class _SceneContext:
    """Per-snapshot state shared read-only by all workers."""

    def __init__(self, scene_index: int, snap_index: int, scene: SceneModel, cfg: SweepConfig):
        self.scene_index = scene_index
        self.snap_index = snap_index
        self.scene = scene
        self.scene_id = scene.name
        self.truth = voxelize(scene, cfg.resolution)
        self.robot = robot_cells(scene, cfg.resolution)
        self.rois: dict[str, RegionOfInterest] = {}
        self.roi_indices: dict[str, np.ndarray] = {}
        for r in cfg.rois:
            if r == "robot":
                self.rois[r] = robot_roi(scene)
            else:
                if not scene.humans:
                    raise ConfigError(f"scene {scene.name!r} has no humans for the human ROI")
                self.rois[r] = human_roi(scene, 0, cfg.human_roi_margin)
            self.roi_indices[r] = np.flatnonzero(self.rois[r].mask(self.truth))
        if cfg.zone_roi == "robot":
            self.zone = robot_roi(scene)
        else:
            self.zone = self.rois.get("human") or human_roi(scene, 0, cfg.human_roi_margin)
        self.zone_mask = self.zone.mask(self.truth)


def _scene_contexts(cfg: SweepConfig) -> list[_SceneContext]:
    contexts: list[_SceneContext] = []
    ws = None
    for si, scene in enumerate(cfg.scenes):
        snaps = scene.snapshots if isinstance(scene, DynamicScene) else (scene,)
        for ki, snap in enumerate(snaps):
            if ws is None:
                ws = snap.workspace
            elif np.any(snap.workspace.lo != ws.lo) or np.any(snap.workspace.hi != ws.hi):
                raise ConfigError("all scenes in one sweep must share the workspace box")
            contexts.append(_SceneContext(si, ki, snap, cfg))
    return contexts


def _stream(cfg_seed: int, ctx: _SceneContext, pose_id: int, sensor: str) -> np.random.Generator:
    key = (cfg_seed, ctx.scene_index, ctx.snap_index, pose_id, _SENSOR_STREAM[sensor])
    return np.random.default_rng(np.random.SeedSequence(key))


def _parallel_map(fn, items, workers: int):
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Lattice sweep (one range sensor, several data interpretations)


def _camera_estimates(ctx: _SceneContext, pose: SensorPose, cfg: SweepConfig, rng) -> dict[str, VoxelGrid]:
    """One estimate per configured interpretation, sharing a single frame."""
    out: dict[str, VoxelGrid] = {}
    interps = cfg.interpretations
    need_frame = any(i != "zone" for i in interps)
    need_kp = any(i in ("zone", "pc_spheres", "pc_cylinders", "pc_box") for i in interps)
    frame = None
    if need_frame:
        frame = sense_rgbd(ctx.truth, pose, cfg.camera, rng, full_rays=cfg.full_rays)
    detections = (
        detect_keypoints(ctx.truth, list(ctx.scene.humans), pose, cfg.camera) if need_kp else []
    )
    for interp in interps:
        if interp == "zone":
            est = ctx.truth.filled_like(CellState.UNKNOWN)
            triggered = any(len(v) >= cfg.min_visible for v in detections)
            est.cells[ctx.zone_mask] = (
                np.uint8(CellState.OCCUPIED) if triggered else np.uint8(CellState.FREE)
            )
        elif interp == "pc":
            est = frame
        else:
            est = frame.copy()
            rep = {"pc_spheres": "spheres", "pc_cylinders": "cylinders", "pc_box": "box"}[interp]
            radius = {"pc_spheres": cfg.sphere_radius, "pc_cylinders": cfg.cylinder_radius}.get(interp)
            for visible in detections:
                apply_keypoint_rep(est, visible, rep, radius)
        out[interp] = est
    return out


def _score_records(
    ctx: _SceneContext,
    cfg: SweepConfig,
    estimates: dict[str, VoxelGrid],
    combo_id: str,
    pose_id: int,
    surface: str,
    position,
    quat,
) -> list[SweepRecord]:
    records = []
    for interp, est in estimates.items():
        grid = est
        if cfg.robot_prior:
            grid = add_robot_prior(est.copy(), ctx.robot)
        for roi_id in cfg.rois:
            c = confusion_on_indices(grid.cells, ctx.truth.cells, ctx.roi_indices[roi_id])
            records.append(
                SweepRecord(
                    combo_id=combo_id,
                    pose_id=pose_id,
                    surface=surface,
                    position=tuple(float(x) for x in position),
                    quat_wxyz=tuple(float(x) for x in quat),
                    scene_id=ctx.scene_id,
                    roi_id=roi_id,
                    interp_id=interp,
                    counts=c,
                    scores=scores_from_counts(c),
                )
            )
    return records


def _evaluate_lattice_item(args) -> list[SweepRecord]:
    ctx, lat_pose, cfg = args
    try:
        pose = lat_pose.sensor_pose()
        if cfg.sensor_type == "rgbd":
            rng = _stream(cfg.seed, ctx, lat_pose.pose_id, "rgbd")
            estimates = _camera_estimates(ctx, pose, cfg, rng)
        else:
            rng = _stream(cfg.seed, ctx, lat_pose.pose_id, "lidar")
            estimates = {"pc": sense_lidar(ctx.truth, pose, cfg.lidar, rng)}
        return _score_records(
            ctx, cfg, estimates, cfg.sensor_type, lat_pose.pose_id, lat_pose.surface,
            lat_pose.position, lat_pose.quat_wxyz,
        )
    except Exception as exc:
        raise PerispaceError(
            f"pose {lat_pose.pose_id} on scene {ctx.scene_id!r} failed: {exc}"
        ) from exc


def sweep(cfg: SweepConfig) -> list[SweepRecord]:
    """Evaluate the full (scene x pose x interpretation x ROI) cross
    product; output is sorted and independent of the worker count."""
    if cfg.mode != "lattice":
        raise ConfigError("sweep() requires a lattice-mode config")
    contexts = _scene_contexts(cfg)
    poses = generate_lattice(contexts[0].scene.workspace, cfg.lattice)
    items = [(ctx, pose, cfg) for ctx in contexts for pose in poses]
    chunks = _parallel_map(_evaluate_lattice_item, items, cfg.workers)
    records = [r for chunk in chunks for r in chunk]
    records.sort(key=SweepRecord.sort_key)
    return records


def evaluate_pose(
    scene: SceneModel,
    cfg: SweepConfig,
    pose: SensorPose,
    interpretation: str,
    pose_id: int = 0,
    scene_index: int = 0,
    snap_index: int = 0,
    surface: str = "-",
) -> list[SweepRecord]:
    """Score one sensor pose under one interpretation against every ROI.

    Matches the records the batch sweep would produce for the same
    (scene_index, snap_index, pose_id) stream key.
    """
    single = replace(cfg, interpretations=(interpretation,))
    ctx = _SceneContext(scene_index, snap_index, scene, single)
    if single.sensor_type == "rgbd":
        rng = _stream(single.seed, ctx, pose_id, "rgbd")
        estimates = _camera_estimates(ctx, pose, single, rng)
    else:
        rng = _stream(single.seed, ctx, pose_id, "lidar")
        estimates = {"pc": sense_lidar(ctx.truth, pose, single.lidar, rng)}
    return _score_records(
        ctx, single, estimates, single.sensor_type, pose_id, surface,
        pose.position, pose.quat_wxyz,
    )


# ---------------------------------------------------------------------------
# Sensor combination sweep


def combo_variants(combo: ComboSensors) -> list[tuple[str, list[tuple[str, int]]]]:
    """All non-empty sensor subsets with their parameter-variant index
    tuples, in deterministic order."""
    members = combo.members()
    param_counts = {
        "pad": len(combo.pad_positions),
        "prox": len(combo.inflations),
        "cam": len(combo.camera_yaws_deg),
    }
    out = []
    for r in range(1, len(members) + 1):
        for subset in itertools.combinations(members, r):
            combo_id = "+".join(subset)
            variants = list(itertools.product(*[range(param_counts[m]) for m in subset]))
            out.append((combo_id, [list(zip(subset, v)) for v in variants]))
    return out


def _combo_member_estimates(ctx: _SceneContext, cfg: SweepConfig) -> dict[str, list]:
    combo = cfg.combo
    ceiling_z = float(ctx.scene.workspace.hi[2])
    est: dict[str, list] = {}
    if combo.pad is not None:
        est["pad"] = []
        for cx, cy in combo.pad_positions:
            spec = replace(combo.pad, center_xy=(cx, cy))
            est["pad"].append(sense_pad(ctx.truth, spec, ceiling_z))
    if combo.inflations:
        est["prox"] = []
        for j, infl in enumerate(combo.inflations):
            spec = ProximitySpec(inflation=infl, noise_sigma=combo.proximity_noise)
            rng = _stream(cfg.seed, ctx, j, "proximity")
            est["prox"].append(sense_proximity(ctx.truth, ctx.robot, spec, rng))
    if combo.camera is not None:
        est["cam"] = []
        base = ctx.scene.robot.base_position
        mount = base + np.asarray(combo.camera_mount_offset)
        fwd = np.asarray(combo.camera_forward, dtype=np.float64)
        for j, yaw in enumerate(combo.camera_yaws_deg):
            quat = look_at_quat(rotate_about_axis(normalize(fwd), np.array([0.0, 0.0, 1.0]), yaw))
            pose = SensorPose(mount, quat)
            rng = _stream(cfg.seed, ctx, j, "rgbd")
            est["cam"].append((pose, sense_rgbd(ctx.truth, pose, combo.camera, rng, cfg.full_rays)))
    return est


def _combo_pose_columns(ctx, combo: ComboSensors, picks: list[tuple[str, int]]):
    chosen = dict(picks)
    if "cam" in chosen:
        yaw = combo.camera_yaws_deg[chosen["cam"]]
        base = ctx.scene.robot.base_position
        mount = base + np.asarray(combo.camera_mount_offset)
        quat = look_at_quat(
            rotate_about_axis(normalize(np.asarray(combo.camera_forward)), np.array([0.0, 0.0, 1.0]), yaw)
        )
        return mount, quat
    if "pad" in chosen:
        cx, cy = combo.pad_positions[chosen["pad"]]
        return np.array([cx, cy, combo.pad.floor_z]), np.array([1.0, 0.0, 0.0, 0.0])
    return ctx.scene.robot.base_position, np.array([1.0, 0.0, 0.0, 0.0])


def combo_sweep(cfg: SweepConfig) -> list[SweepRecord]:
    """Evaluate every non-empty combination of the declared sensors over
    the cross product of their parameter grids, fusing member estimates
    (plus the robot prior when configured) before scoring."""
    if cfg.mode != "combo":
        raise ConfigError("combo_sweep() requires a combo-mode config")
    contexts = _scene_contexts(cfg)
    records: list[SweepRecord] = []
    plans = combo_variants(cfg.combo)

    def eval_scene(ctx: _SceneContext) -> list[SweepRecord]:
        members = _combo_member_estimates(ctx, cfg)
        out: list[SweepRecord] = []
        for combo_id, variants in plans:
            for pose_id, picks in enumerate(variants):
                grids = []
                for name, j in picks:
                    grids.append(members[name][j][1] if name == "cam" else members[name][j])
                fused = fuse(grids)
                if cfg.robot_prior:
                    add_robot_prior(fused, ctx.robot)
                pos, quat = _combo_pose_columns(ctx, cfg.combo, picks)
                for roi_id in cfg.rois:
                    c = confusion_on_indices(fused.cells, ctx.truth.cells, ctx.roi_indices[roi_id])
                    out.append(
                        SweepRecord(
                            combo_id=combo_id,
                            pose_id=pose_id,
                            surface="-",
                            position=tuple(float(x) for x in pos),
                            quat_wxyz=tuple(float(x) for x in quat),
                            scene_id=ctx.scene_id,
                            roi_id=roi_id,
                            interp_id=combo_id,
                            counts=c,
                            scores=scores_from_counts(c),
                        )
                    )
        return out

    chunks = _parallel_map(eval_scene, contexts, cfg.workers)
    records = [r for chunk in chunks for r in chunk]
    records.sort(key=SweepRecord.sort_key)
    return records


# ---------------------------------------------------------------------------
# Aggregation, heatmaps, ranking


@dataclass(frozen=True)
class AggregateRow:
    combo_id: str
    pose_id: int
    surface: str
    position: tuple[float, float, float]
    scene_id: str
    roi_id: str
    interp_id: str
    f1: float
    kappa: float
    snapshots: int

    def metric(self, name: str) -> float:
        return self.f1 if name == "f1" else self.kappa


def aggregate_dynamic(records: list[SweepRecord], mode: str = "mean") -> list[AggregateRow]:
    """Collapse snapshot records to one row per (pose, ROI, interpretation).

    mean averages the per-snapshot scores; pooled sums the confusion
    counts first and scores once. Every pose must carry the same number
    of snapshots or the data is incomplete.
    """
    if mode not in ("mean", "pooled"):
        raise InvalidArgumentError(f"unknown aggregation mode {mode!r}")
    groups: dict[tuple, list[SweepRecord]] = {}
    snaps_per_scene: dict[str, set[str]] = {}
    for r in records:
        base = scene_base(r.scene_id)
        snaps_per_scene.setdefault(base, set()).add(r.scene_id)
        key = (r.combo_id, base, r.pose_id, r.surface, r.position, r.roi_id, r.interp_id)
        groups.setdefault(key, []).append(r)
    rows = []
    for key, group in sorted(groups.items()):
        combo_id, base, pose_id, surface, position, roi_id, interp_id = key
        expected = len(snaps_per_scene[base])
        if len(group) != expected:
            raise InvalidArgumentError(
                f"incomplete data: pose {pose_id} of {base!r} has {len(group)} of {expected} snapshots"
            )
        if mode == "mean":
            f1v = sum(g.scores.f1 for g in group) / len(group)
            kv = sum(g.scores.kappa for g in group) / len(group)
        else:
            pooled = ConfusionCounts(
                tp=sum(g.counts.tp for g in group),
                fp=sum(g.counts.fp for g in group),
                fn=sum(g.counts.fn for g in group),
                tn=sum(g.counts.tn for g in group),
                uo=sum(g.counts.uo for g in group),
                uf=sum(g.counts.uf for g in group),
            )
            s = scores_from_counts(pooled)
            f1v, kv = s.f1, s.kappa
        rows.append(
            AggregateRow(
                combo_id=combo_id, pose_id=pose_id, surface=surface, position=position,
                scene_id=base, roi_id=roi_id, interp_id=interp_id,
                f1=f1v, kappa=kv, snapshots=len(group),
            )
        )
    return rows


@dataclass(frozen=True)
class HeatmapSurface:
    surface: str
    u_coords: np.ndarray
    v_coords: np.ndarray
    values: np.ndarray  # (len(v_coords), len(u_coords)), NaN where no record


def build_heatmap(rows, metric: str) -> dict[str, HeatmapSurface]:
    """Per-position best score over everything that shares the position
    (in particular the orientation set), keyed by surface."""
    per_surface: dict[str, dict[tuple[float, float], float]] = {}
    for r in rows:
        if r.surface not in SURFACE_AXES:
            raise InvalidArgumentError(f"record surface {r.surface!r} is not a lattice surface")
        u_ax, v_ax = SURFACE_AXES[r.surface]
        u = round(r.position[u_ax], 6)
        v = round(r.position[v_ax], 6)
        val = r.metric(metric)
        cur = per_surface.setdefault(r.surface, {})
        if (u, v) not in cur or val > cur[(u, v)]:
            cur[(u, v)] = val
    out: dict[str, HeatmapSurface] = {}
    for surface, cells in sorted(per_surface.items()):
        us = sorted({uv[0] for uv in cells})
        vs = sorted({uv[1] for uv in cells})
        grid = np.full((len(vs), len(us)), np.nan)
        ui = {u: i for i, u in enumerate(us)}
        vi = {v: i for i, v in enumerate(vs)}
        for (u, v), val in cells.items():
            grid[vi[v], ui[u]] = val
        out[surface] = HeatmapSurface(surface, np.array(us), np.array(vs), grid)
    return out


def rank(rows, metric: str, k: int) -> list:
    """Top-k rows by the metric, descending; ties resolve on
    (surface, position, pose_id) so the order is reproducible."""
    if k < 1:
        raise InvalidArgumentError("k must be at least 1")
    ordered = sorted(rows, key=lambda r: (-r.metric(metric), r.surface, r.position, r.pose_id))
    return ordered[:k]


def summarize_records(records: list[SweepRecord], top_k: int = 5) -> dict:
    """Per (scene, roi, interpretation) metric spread plus top-k poses."""
    groups: dict[tuple[str, str, str], list[SweepRecord]] = {}
    for r in records:
        groups.setdefault((r.scene_id, r.roi_id, r.interp_id), []).append(r)
    out = []
    for (scene_id, roi_id, interp_id), group in sorted(groups.items()):
        entry = {"scene": scene_id, "roi": roi_id, "interp": interp_id, "records": len(group)}
        for metric in ("f1", "kappa"):
            vals = [g.metric(metric) for g in group]
            entry[metric] = {
                "min": min(vals),
                "median": statistics.median(vals),
                "max": max(vals),
            }
            entry[f"top{top_k}_{metric}"] = [
                {"pose_id": g.pose_id, "surface": g.surface, "value": g.metric(metric)}
                for g in rank(group, metric, min(top_k, len(group)))
            ]
        out.append(entry)
    return {"groups": out}


def combo_relative_maxima(records: list[SweepRecord], metric: str) -> list[dict]:
    """Per-combination maxima normalized by the full sensor set's maximum,
    grouped by (scene, ROI)."""
    groups: dict[tuple[str, str], list[SweepRecord]] = {}
    for r in records:
        groups.setdefault((r.scene_id, r.roi_id), []).append(r)
    rows: list[dict] = []
    for (scene_id, roi_id), group in sorted(groups.items()):
        maxima: dict[str, float] = {}
        for r in group:
            maxima[r.combo_id] = max(maxima.get(r.combo_id, -np.inf), r.metric(metric))
        full = max(maxima, key=lambda c: (c.count("+"), c))
        full_max = maxima[full]
        for combo_id in sorted(maxima, key=lambda c: (-c.count("+"), c)):
            rel = maxima[combo_id] / full_max if full_max > 0 else 0.0
            rows.append(
                {
                    "scene": scene_id, "roi": roi_id, "metric": metric, "combo": combo_id,
                    "max": maxima[combo_id], "relative": rel, "is_full_set": combo_id == full,
                }
            )
    return rows
