"""Occupancy-based workspace coverage scoring and sensor placement search.

The package models the space around a robot as a three-state voxel grid
(occupied / free / unknown), simulates heterogeneous safety sensors
against a scene's ground truth, scores how well each setup covers a
region of interest with F1 and Cohen's kappa, and searches mounting
poses and sensor combinations for the best coverage.
"""

from .errors import ConfigError, InvalidArgumentError, PerispaceError, SceneFormatError
from .geometry import Aabb, Box, Capsule, Cylinder, Sphere
from .grid import (
    CellState,
    Ray,
    RayHit,
    VoxelGrid,
    cast_ray,
    count_states,
    dump_text,
    fuse,
    inflate,
    integrate_ray,
    new_grid,
    parse_text,
    traverse,
)
from .metrics import ConfusionCounts, CoverageScores, confusion, f1, kappa, score
from .placement import (
    PoseLatticeSpec,
    SweepConfig,
    SweepRecord,
    aggregate_dynamic,
    build_heatmap,
    combo_sweep,
    evaluate_pose,
    generate_lattice,
    rank,
    sweep,
)
from .scene import (
    DynamicScene,
    HumanSkeleton,
    HumanBoxRoi,
    RobotModel,
    RobotSphereRoi,
    SceneModel,
    human_roi,
    keypoint_volume,
    load_scene,
    load_scene_file,
    robot_roi,
    voxelize,
)
from .sensors import (
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
    sense_rgb_zone,
    sense_rgbd,
)

__version__ = "0.1.0"
