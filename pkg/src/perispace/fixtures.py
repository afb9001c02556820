"""Bundled desk-scale scenes and the skeleton posing helpers that build them.

All four scenes share a 5 x 4 x 3 m room with a table-mounted
manipulator: a human reaching toward the robot, a human leaning on the
table, a leaning human hiding a second person who sits with no floor
contact, and a walking sequence of 27 snapshots. The numbers here are
this repository's own ground truth; regenerate the JSON files with
``python -m perispace.fixtures``.
"""
from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .geometry import Aabb, Box, Primitive
from .scene import DynamicScene, HumanSkeleton, RobotModel, SceneModel, scene_to_dict

ROOM = Aabb(np.array([0.0, 0.0, 0.0]), np.array([5.0, 4.0, 3.0]))
TABLE_TOP_Z = 0.75
ROBOT_BASE = np.array([2.5, 2.0, TABLE_TOP_Z])
ROBOT_REACH = 0.9

# Local standing pose, person facing +x, z up, pelvis at the origin column.
_STAND = {
    "pelvis": (0.00, 0.00, 0.98),
    "neck": (0.00, 0.00, 1.50),
    "head": (0.02, 0.00, 1.66),
    "l_shoulder": (0.00, 0.19, 1.45),
    "r_shoulder": (0.00, -0.19, 1.45),
    "l_elbow": (0.02, 0.22, 1.18),
    "r_elbow": (0.02, -0.22, 1.18),
    "l_wrist": (0.04, 0.23, 0.94),
    "r_wrist": (0.04, -0.23, 0.94),
    "l_hip": (0.00, 0.11, 0.94),
    "r_hip": (0.00, -0.11, 0.94),
    "l_knee": (0.01, 0.12, 0.50),
    "r_knee": (0.01, -0.12, 0.50),
    "l_ankle": (0.02, 0.13, 0.09),
    "r_ankle": (0.02, -0.13, 0.09),
}

_UPPER_JOINTS = ("head", "neck", "l_shoulder", "r_shoulder", "l_elbow", "r_elbow", "l_wrist", "r_wrist")


def make_skeleton(
    x: float,
    y: float,
    yaw_deg: float,
    lean_deg: float = 0.0,
    local_overrides: dict[str, tuple[float, float, float]] | None = None,
) -> HumanSkeleton:
    """Standing skeleton at (x, y) facing yaw_deg (0 = +x).

    lean_deg pitches the upper body forward about the pelvis; overrides
    replace local joint coordinates after the lean (used for arms placed
    on or over furniture).
    """
    joints = {k: np.array(v, dtype=np.float64) for k, v in _STAND.items()}
    if lean_deg:
        th = math.radians(lean_deg)
        pivot = joints["pelvis"]
        rot = np.array(
            [[math.cos(th), 0.0, math.sin(th)], [0.0, 1.0, 0.0], [-math.sin(th), 0.0, math.cos(th)]]
        )
        for j in _UPPER_JOINTS:
            joints[j] = pivot + rot @ (joints[j] - pivot)
    for j, p in (local_overrides or {}).items():
        joints[j] = np.array(p, dtype=np.float64)
    return _place(joints, x, y, yaw_deg)


def make_sitting_skeleton(x: float, y: float, yaw_deg: float, seat_z: float = 0.52) -> HumanSkeleton:
    """Seated skeleton with the feet hanging clear of the floor."""
    pz = seat_z + 0.10
    joints = {
        "pelvis": (0.00, 0.00, pz),
        "neck": (0.02, 0.00, pz + 0.52),
        "head": (0.04, 0.00, pz + 0.68),
        "l_shoulder": (0.02, 0.19, pz + 0.47),
        "r_shoulder": (0.02, -0.19, pz + 0.47),
        "l_elbow": (0.25, 0.20, pz + 0.33),
        "r_elbow": (0.25, -0.20, pz + 0.33),
        "l_wrist": (0.45, 0.15, pz + 0.23),
        "r_wrist": (0.45, -0.15, pz + 0.23),
        "l_hip": (0.00, 0.11, pz - 0.04),
        "r_hip": (0.00, -0.11, pz - 0.04),
        "l_knee": (0.38, 0.12, pz - 0.06),
        "r_knee": (0.38, -0.12, pz - 0.06),
        "l_ankle": (0.42, 0.13, 0.25),
        "r_ankle": (0.42, -0.13, 0.25),
    }
    return _place({k: np.array(v, dtype=np.float64) for k, v in joints.items()}, x, y, yaw_deg)


def _place(joints: dict[str, np.ndarray], x: float, y: float, yaw_deg: float) -> HumanSkeleton:
    th = math.radians(yaw_deg)
    c, s = math.cos(th), math.sin(th)
    placed = {}
    for name, p in joints.items():
        placed[name] = np.array([x + c * p[0] - s * p[1], y + s * p[0] + c * p[1], p[2]])
    return HumanSkeleton(keypoints=placed)


def desk_table() -> list[Primitive]:
    """Table top slab on four legs, centered under the robot."""
    top = Box(center=(2.5, 2.0, 0.7125), half_extents=(0.8, 0.4, 0.0375))
    legs = [
        Box(center=(2.5 + sx * 0.72, 2.0 + sy * 0.32, 0.3375), half_extents=(0.04, 0.04, 0.3375))
        for sx in (-1, 1)
        for sy in (-1, 1)
    ]
    return [top, *legs]


def desk_robot(arm_yaw_deg: float = -90.0) -> RobotModel:
    """Table-mounted arm; arm_yaw_deg swings the upper links about the base z."""
    from .geometry import Capsule, Cylinder

    phi = math.radians(arm_yaw_deg)
    shoulder = ROBOT_BASE + np.array([0.0, 0.0, 0.20])
    elbow = ROBOT_BASE + np.array([0.25 * math.cos(phi), 0.25 * math.sin(phi), 0.55])
    psi = phi + math.radians(40.0)
    wrist = ROBOT_BASE + np.array([0.12 * math.cos(psi), 0.12 * math.sin(psi), 0.80])
    links = (
        Cylinder(a=ROBOT_BASE, b=shoulder, radius=0.07),
        Capsule(a=shoulder, b=elbow, radius=0.06),
        Capsule(a=elbow, b=wrist, radius=0.05),
    )
    return RobotModel(
        base_position=ROBOT_BASE,
        base_quat_wxyz=np.array([1.0, 0.0, 0.0, 0.0]),
        links=links,
        reach=ROBOT_REACH,
    )


def scene_reach() -> SceneModel:
    """A standing human reaches over the table edge toward the robot."""
    human = make_skeleton(
        2.5, 1.05, yaw_deg=90.0,
        local_overrides={"r_elbow": (0.28, -0.20, 1.30), "r_wrist": (0.52, -0.12, 1.15)},
    )
    return SceneModel(
        workspace=ROOM, robot=desk_robot(), statics=tuple(desk_table()), humans=(human,),
        name="reach",
    )


def scene_lean() -> SceneModel:
    """A human leans on the table with one hand; a cabinet sits by a wall."""
    human = make_skeleton(
        2.1, 1.15, yaw_deg=90.0, lean_deg=28.0,
        local_overrides={"r_elbow": (0.30, -0.18, 1.05), "r_wrist": (0.52, -0.14, 0.80)},
    )
    cabinet = Box(center=(4.55, 0.55, 0.6), half_extents=(0.3, 0.3, 0.6))
    return SceneModel(
        workspace=ROOM, robot=desk_robot(), statics=tuple(desk_table()) + (cabinet,),
        humans=(human,), name="lean",
    )


def scene_occlude() -> SceneModel:
    """A leaning human hides a seated worker whose feet never touch the floor."""
    leaner = make_skeleton(
        1.95, 1.0, yaw_deg=90.0, lean_deg=28.0,
        local_overrides={"r_elbow": (0.30, -0.18, 1.05), "r_wrist": (0.52, -0.14, 0.80)},
    )
    sitter = make_sitting_skeleton(3.05, 1.0, yaw_deg=90.0)
    stool = Box(center=(3.05, 0.97, 0.26), half_extents=(0.18, 0.18, 0.26))
    return SceneModel(
        workspace=ROOM, robot=desk_robot(), statics=tuple(desk_table()) + (stool,),
        humans=(leaner, sitter), name="occlude",
    )


def scene_walk(n_snapshots: int = 27) -> DynamicScene:
    """A worker stays at the table while a second human walks around it;
    the robot arm sweeps as they move."""
    snapshots = []
    for i in range(n_snapshots):
        t = i / n_snapshots
        reach = 0.45 + 0.10 * math.sin(2.0 * math.pi * t)
        worker = make_skeleton(
            2.5, 1.05, yaw_deg=90.0,
            local_overrides={"r_elbow": (0.28, -0.20, 1.30), "r_wrist": (reach, -0.12, 1.15)},
        )
        ang = 2.0 * math.pi * t
        wx = 2.5 + 1.55 * math.cos(ang)
        wy = 2.0 + 1.55 * math.sin(ang)
        walker = make_skeleton(wx, wy, yaw_deg=math.degrees(ang) + 90.0)
        robot = desk_robot(arm_yaw_deg=-90.0 + 35.0 * math.sin(2.0 * math.pi * t))
        snapshots.append(
            SceneModel(
                workspace=ROOM, robot=robot, statics=tuple(desk_table()),
                humans=(worker, walker), name=f"walk/{i:02d}",
            )
        )
    return DynamicScene(snapshots=tuple(snapshots), name="walk")


def pad_demo_scene() -> SceneModel:
    """Open floor, one human standing with an arm stretched sideways;
    used with two floor pads (active under the feet, idle under the arm)."""
    human = make_skeleton(
        1.2, 2.0, yaw_deg=0.0,
        local_overrides={"r_elbow": (0.30, -0.20, 1.42), "r_wrist": (0.62, -0.16, 1.40)},
    )
    robot = RobotModel(
        base_position=np.array([4.5, 3.5, 0.0]),
        base_quat_wxyz=np.array([1.0, 0.0, 0.0, 0.0]),
        links=(),
        reach=0.5,
    )
    return SceneModel(workspace=ROOM, robot=robot, humans=(human,), name="pad_demo")


SCENE_BUILDERS = {
    "reach": scene_reach,
    "lean": scene_lean,
    "occlude": scene_occlude,
    "walk": scene_walk,
}

BUNDLED_SCENES = tuple(SCENE_BUILDERS)


def bundled_scene_path(name: str) -> Path:
    """Path of a packaged scene JSON file."""
    ref = resources.files("perispace").joinpath(f"data/scenes/{name}.json")
    return Path(str(ref))


def write_bundled_scenes(out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, builder in SCENE_BUILDERS.items():
        path = out_dir / f"{name}.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(scene_to_dict(builder()), fh, indent=1)
            fh.write("\n")
        written.append(path)
    return written


if __name__ == "__main__":
    target = Path(__file__).parent / "data" / "scenes"
    for p in write_bundled_scenes(target):
        print(p)
