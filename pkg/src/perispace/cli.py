"""Command-line front-end.

Subcommands: voxelize (scene -> grid dump), sweep (run config ->
records.csv + summary.json), heatmap (records -> per-surface CSV, PGM,
and PNG), report (records -> rankings, with figures when --out is set).

Exit codes: 0 success, 1 runtime failure, 2 usage or parse error. The
default output directory comes from the PERISPACE_OUT environment
variable when --out is omitted.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvalidArgumentError, PerispaceError, SceneFormatError
from .grid import dump_text
from .metrics import ConfusionCounts, CoverageScores
from .placement import (
    ComboSensors,
    PoseLatticeSpec,
    SweepConfig,
    SweepRecord,
    aggregate_dynamic,
    build_heatmap,
    combo_relative_maxima,
    rank,
    scene_base,
    summarize_records,
    sweep,
    combo_sweep,
)
from .scene import DynamicScene, load_scene_file, voxelize
from .sensors import CameraSpec, LidarSpec, PadSpec

CSV_HEADER = "combo_id,pose_id,surface,px,py,pz,qw,qx,qy,qz,scene,roi,interp,tp,fp,fn,tn,uo,uf,f1,kappa"

_USAGE_ERRORS = (ConfigError, SceneFormatError, InvalidArgumentError, FileNotFoundError)


# ---------------------------------------------------------------------------
# Records CSV


def records_to_csv(records: list[SweepRecord]) -> str:
    lines = [CSV_HEADER]
    for r in records:
        px, py, pz = r.position
        qw, qx, qy, qz = r.quat_wxyz
        c = r.counts
        lines.append(
            f"{r.combo_id},{r.pose_id},{r.surface},"
            f"{px:.6f},{py:.6f},{pz:.6f},{qw:.6f},{qx:.6f},{qy:.6f},{qz:.6f},"
            f"{r.scene_id},{r.roi_id},{r.interp_id},"
            f"{c.tp},{c.fp},{c.fn},{c.tn},{c.uo},{c.uf},"
            f"{r.scores.f1:.6f},{r.scores.kappa:.6f}"
        )
    return "\n".join(lines) + "\n"


def records_from_csv(text: str) -> list[SweepRecord]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ConfigError("records CSV is missing the expected header")
    records = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 21:
            raise ConfigError(f"records CSV line {i}: expected 21 fields, got {len(parts)}")
        try:
            counts = ConfusionCounts(
                tp=int(parts[13]), fp=int(parts[14]), fn=int(parts[15]),
                tn=int(parts[16]), uo=int(parts[17]), uf=int(parts[18]),
            )
            records.append(
                SweepRecord(
                    combo_id=parts[0],
                    pose_id=int(parts[1]),
                    surface=parts[2],
                    position=(float(parts[3]), float(parts[4]), float(parts[5])),
                    quat_wxyz=(float(parts[6]), float(parts[7]), float(parts[8]), float(parts[9])),
                    scene_id=parts[10],
                    roi_id=parts[11],
                    interp_id=parts[12],
                    counts=counts,
                    scores=CoverageScores(f1=float(parts[19]), kappa=float(parts[20])),
                )
            )
        except ValueError as exc:
            raise ConfigError(f"records CSV line {i}: {exc}") from exc
    return records


# ---------------------------------------------------------------------------
# Run configuration


def _cfg_get(doc: dict, key: str, required: bool = False, default=None):
    if key not in doc:
        if required:
            raise ConfigError(f"config: missing required field {key!r}")
        return default
    return doc[key]


def _camera_from_cfg(d: dict, ctx: str) -> CameraSpec:
    try:
        fov = d["fov_deg"]
        res = d["res_px"]
        rng = d["range_m"]
        return CameraSpec(
            fov_h_deg=float(fov[0]), fov_v_deg=float(fov[1]),
            res_h=int(res[0]), res_v=int(res[1]),
            range_min=float(rng[0]), range_max=float(rng[1]),
            noise_sigma=float(d.get("noise_sigma", 0.0)),
            depth_enabled=bool(d.get("depth_enabled", True)),
        )
    except (KeyError, TypeError, IndexError, InvalidArgumentError) as exc:
        raise ConfigError(f"config: bad camera spec in {ctx}: {exc}") from exc


def load_config(path: Path, overrides: dict | None = None) -> SweepConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: config JSON parse error: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    doc = dict(doc)
    doc.update({k: v for k, v in (overrides or {}).items() if v is not None})

    scene_paths = _cfg_get(doc, "scenes", required=True)
    if not isinstance(scene_paths, list) or not scene_paths:
        raise ConfigError("config: scenes must be a non-empty list of paths")
    base = Path(path).parent
    scenes = []
    for sp in scene_paths:
        p = Path(sp)
        if not p.is_absolute():
            p = base / p
        scenes.append(load_scene_file(p))

    seed = _cfg_get(doc, "seed", required=True)
    resolution = _cfg_get(doc, "resolution", required=True)
    mode = _cfg_get(doc, "mode", default="lattice")

    kwargs = dict(
        scenes=tuple(scenes),
        resolution=float(resolution),
        seed=int(seed),
        rois=tuple(_cfg_get(doc, "rois", default=["robot", "human"])),
        workers=int(_cfg_get(doc, "workers", default=1)),
        mode=mode,
        human_roi_margin=float(_cfg_get(doc, "human_roi_margin", default=0.05)),
        robot_prior=bool(_cfg_get(doc, "robot_prior", default=False)),
        dynamic_aggregate=_cfg_get(doc, "dynamic_aggregate", default="mean"),
        full_rays=bool(_cfg_get(doc, "full_rays", default=False)),
    )

    if mode == "lattice":
        sensor = _cfg_get(doc, "sensor", required=True)
        stype = sensor.get("type")
        kwargs["sensor_type"] = stype
        if stype == "rgbd":
            kwargs["camera"] = _camera_from_cfg(sensor, "sensor")
        elif stype == "lidar":
            try:
                fov = sensor["fov_deg"]
                ares = sensor["ang_res_deg"]
                rng = sensor["range_m"]
                kwargs["lidar"] = LidarSpec(
                    fov_h_deg=float(fov[0]), fov_v_deg=float(fov[1]),
                    ang_res_h_deg=float(ares[0]), ang_res_v_deg=float(ares[1]),
                    range_min=float(rng[0]), range_max=float(rng[1]),
                    noise_sigma=float(sensor.get("noise_sigma", 0.0)),
                )
            except (KeyError, TypeError, IndexError, InvalidArgumentError) as exc:
                raise ConfigError(f"config: bad lidar spec: {exc}") from exc
        else:
            raise ConfigError(f"config: unknown sensor type {stype!r}")
        kwargs["interpretations"] = tuple(_cfg_get(doc, "interpretations", required=True))
        lat = _cfg_get(doc, "lattice", default={})
        try:
            kwargs["lattice"] = PoseLatticeSpec(
                surfaces=tuple(lat.get("surfaces", ("x0", "x1", "y0", "y1", "ceiling"))),
                spacing=float(lat.get("spacing", 0.75)),
                tilt_deg=float(lat.get("tilt_deg", 30.0)),
            )
        except InvalidArgumentError as exc:
            raise ConfigError(f"config: bad lattice: {exc}") from exc
        kp = _cfg_get(doc, "keypoint_radii", default={})
        kwargs["sphere_radius"] = float(kp.get("spheres", 0.15))
        kwargs["cylinder_radius"] = float(kp.get("cylinders", 0.10))
        kwargs["zone_roi"] = _cfg_get(doc, "zone_roi", default="robot")
        kwargs["min_visible"] = int(_cfg_get(doc, "min_visible", default=1))
    elif mode == "combo":
        combo = _cfg_get(doc, "combo", required=True)
        pad_doc = combo.get("pad")
        pad = None
        pad_positions: tuple = ()
        if pad_doc:
            try:
                dims = pad_doc["dims"]
                pad = PadSpec(
                    center_xy=(0.0, 0.0),
                    dims_xy=(float(dims[0]), float(dims[1])),
                    floor_z=float(pad_doc.get("floor_z", 0.0)),
                    contact_band=float(pad_doc.get("contact_band", 0.05)),
                )
            except (KeyError, TypeError, IndexError, InvalidArgumentError) as exc:
                raise ConfigError(f"config: bad pad spec: {exc}") from exc
            ws = scenes[0].snapshots[0].workspace if isinstance(scenes[0], DynamicScene) else scenes[0].workspace
            gx, gy = pad_doc.get("grid", [6, 4])
            xs = np.linspace(ws.lo[0] + pad.dims_xy[0] / 2, ws.hi[0] - pad.dims_xy[0] / 2, int(gx))
            ys = np.linspace(ws.lo[1] + pad.dims_xy[1] / 2, ws.hi[1] - pad.dims_xy[1] / 2, int(gy))
            pad_positions = tuple((float(x), float(y)) for y in ys for x in xs)
        prox_doc = combo.get("proximity", {})
        inflations = tuple(float(v) for v in prox_doc.get("inflations", ()))
        cam_doc = combo.get("camera")
        camera = _camera_from_cfg(cam_doc, "combo.camera") if cam_doc else None
        yaws: tuple = ()
        if cam_doc:
            lo, hi = cam_doc.get("yaw_range_deg", [-40.0, 40.0])
            step = float(cam_doc.get("yaw_step_deg", 10.0))
            n = int(round((hi - lo) / step)) + 1
            yaws = tuple(float(lo + i * step) for i in range(n))
        kwargs["combo"] = ComboSensors(
            pad=pad,
            pad_positions=pad_positions,
            inflations=inflations,
            proximity_noise=float(prox_doc.get("noise_sigma", 0.0)),
            camera=camera,
            camera_yaws_deg=yaws,
            camera_mount_offset=tuple(cam_doc.get("mount_offset", [0.0, -0.2, 0.25])) if cam_doc else (0.0, 0.0, 0.0),
            camera_forward=tuple(cam_doc.get("forward", [0.0, -1.0, 0.0])) if cam_doc else (0.0, -1.0, 0.0),
        )
    else:
        raise ConfigError(f"config: unknown mode {mode!r}")
    return SweepConfig(**kwargs)


# ---------------------------------------------------------------------------
# Subcommands


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("PERISPACE_OUT") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _safe_name(name: str) -> str:
    return name.replace("/", "_")


def cmd_voxelize(args) -> int:
    if args.resolution is None or args.resolution <= 0.0:
        raise ConfigError("voxelize needs a positive --resolution")
    scene = load_scene_file(args.scene)
    out = _out_dir(args)
    snaps = scene.snapshots if isinstance(scene, DynamicScene) else (scene,)
    for snap in snaps:
        truth = voxelize(snap, args.resolution)
        path = out / f"{_safe_name(snap.name)}.grid.txt"
        path.write_text(dump_text(truth), encoding="utf-8")
        occ = int(np.count_nonzero(truth.cells == 2))
        free = int(np.count_nonzero(truth.cells == 1))
        print(f"scene={snap.name} occupied={occ} free={free} cells={truth.cells.size} dump={path}")
    return 0


def cmd_sweep(args) -> int:
    overrides = {"seed": args.seed, "resolution": args.resolution, "workers": args.workers}
    cfg = load_config(Path(args.config), overrides)
    out = _out_dir(args)
    records_path = out / "records.csv"
    summary_path = out / "summary.json"
    try:
        records = combo_sweep(cfg) if cfg.mode == "combo" else sweep(cfg)
        records_path.write_text(records_to_csv(records), encoding="utf-8")
        summary = {
            "seed": cfg.seed,
            "resolution": cfg.resolution,
            "mode": cfg.mode,
            "scenes": sorted({scene_base(r.scene_id) for r in records}),
            "records": len(records),
        }
        summary.update(summarize_records(records))
        if any(r.scene_id != scene_base(r.scene_id) for r in records):
            agg = aggregate_dynamic(records, cfg.dynamic_aggregate)
            summary["dynamic_aggregate"] = {
                "mode": cfg.dynamic_aggregate,
                "rows": [
                    {
                        "combo": a.combo_id, "pose_id": a.pose_id, "scene": a.scene_id,
                        "roi": a.roi_id, "interp": a.interp_id,
                        "f1": a.f1, "kappa": a.kappa, "snapshots": a.snapshots,
                    }
                    for a in agg
                ],
            }
        summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except Exception:
        for p in (records_path, summary_path):
            p.unlink(missing_ok=True)
        raise
    print(f"wrote {records_path} ({len(records)} records) and {summary_path}")
    return 0


def _grouped_rows(records: list[SweepRecord]):
    """Records grouped per (scene, roi, interp), snapshot rows aggregated."""
    dynamic = any(r.scene_id != scene_base(r.scene_id) for r in records)
    rows = aggregate_dynamic(records) if dynamic else records
    groups: dict[tuple[str, str, str], list] = {}
    for r in rows:
        groups.setdefault((scene_base(r.scene_id), r.roi_id, r.interp_id), []).append(r)
    return groups


def cmd_heatmap(args) -> int:
    from .plots import save_heatmap_png

    records = records_from_csv(Path(args.records).read_text(encoding="utf-8"))
    lattice_records = [r for r in records if r.surface != "-"]
    if not lattice_records:
        raise ConfigError("records carry no lattice surfaces; heatmaps need a lattice sweep")
    out = _out_dir(args)
    for (scene, roi, interp), rows in sorted(_grouped_rows(lattice_records).items()):
        surfaces = build_heatmap(rows, args.metric)
        stem = f"{_safe_name(scene)}_{roi}_{interp}_{args.metric}"
        for name, hm in surfaces.items():
            vals = np.nan_to_num(hm.values, nan=0.0)
            csv_path = out / f"{stem}_{name}.csv"
            with open(csv_path, "w", encoding="utf-8") as fh:
                for row in vals:
                    fh.write(",".join(f"{v:.6f}" for v in row) + "\n")
            pgm_path = out / f"{stem}_{name}.pgm"
            pixels = np.round(255.0 * np.clip(vals, 0.0, 1.0)).astype(np.uint8)
            with open(pgm_path, "wb") as fh:
                fh.write(f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n255\n".encode("ascii"))
                fh.write(pixels.tobytes())
        save_heatmap_png(surfaces, args.metric, out / f"{stem}.png", title=stem)
        print(f"heatmap {stem}: {len(surfaces)} surfaces")
    return 0


def cmd_report(args) -> int:
    records = records_from_csv(Path(args.records).read_text(encoding="utf-8"))
    if not records:
        raise ConfigError("records CSV has no rows")
    out = Path(args.out) if args.out else None
    is_combo = len({r.combo_id for r in records}) > 1 or any("+" in r.combo_id for r in records)
    if is_combo:
        all_rows = []
        for metric in ("f1", "kappa"):
            rows = combo_relative_maxima(records, metric)
            all_rows.extend(rows)
            print(f"# combination maxima relative to the full set ({metric})")
            for r in rows:
                print(
                    f"scene={r['scene']} roi={r['roi']} combo={r['combo']} "
                    f"max={r['max']:.6f} relative={r['relative']:.6f}"
                )
        if out:
            out.mkdir(parents=True, exist_ok=True)
            with open(out / "combo_report.csv", "w", encoding="utf-8") as fh:
                fh.write("scene,roi,metric,combo,max,relative\n")
                for r in all_rows:
                    fh.write(
                        f"{r['scene']},{r['roi']},{r['metric']},{r['combo']},"
                        f"{r['max']:.6f},{r['relative']:.6f}\n"
                    )
            from .plots import save_combo_bars_png

            save_combo_bars_png(all_rows, out / "combo_report.png")
    else:
        groups = _grouped_rows(records)
        report_rows = []
        for (scene, roi, interp), rows in sorted(groups.items()):
            for metric in ("f1", "kappa"):
                print(f"# top {args.top} by {metric}: scene={scene} roi={roi} interp={interp}")
                for r in rank(rows, metric, min(args.top, len(rows))):
                    val = r.metric(metric)
                    print(
                        f"pose_id={r.pose_id} surface={r.surface} "
                        f"position=({r.position[0]:.3f},{r.position[1]:.3f},{r.position[2]:.3f}) "
                        f"{metric}={val:.6f}"
                    )
                    report_rows.append((scene, roi, interp, metric, r.pose_id, r.surface, val))
        if out:
            out.mkdir(parents=True, exist_ok=True)
            with open(out / "ranking.csv", "w", encoding="utf-8") as fh:
                fh.write("scene,roi,interp,metric,pose_id,surface,value\n")
                for row in report_rows:
                    fh.write(",".join(str(x) for x in row[:5]) + f",{row[5]},{row[6]:.6f}\n")
            from .plots import save_interpretation_boxplot_png

            dynamic = any(r.scene_id != scene_base(r.scene_id) for r in records)
            rows = aggregate_dynamic(records) if dynamic else records
            for metric in ("f1", "kappa"):
                save_interpretation_boxplot_png(rows, metric, out / f"distribution_{metric}.png")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="perispace", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_vox = sub.add_parser("voxelize", help="voxelize a scene into a ground-truth grid dump")
    p_vox.add_argument("--scene", required=True)
    p_vox.add_argument("--resolution", type=float, required=True)
    p_vox.add_argument("--out", default=None)
    p_vox.set_defaults(fn=cmd_voxelize)

    p_sweep = sub.add_parser("sweep", help="run a placement sweep from a config file")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--resolution", type=float, default=None)
    p_sweep.add_argument("--workers", type=int, default=None)
    p_sweep.add_argument("--out", default=None)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_heat = sub.add_parser("heatmap", help="render per-surface heatmaps from records")
    p_heat.add_argument("--records", required=True)
    p_heat.add_argument("--metric", choices=("f1", "kappa"), default="f1")
    p_heat.add_argument("--out", default=None)
    p_heat.set_defaults(fn=cmd_heatmap)

    p_rep = sub.add_parser("report", help="print rankings (and figures with --out)")
    p_rep.add_argument("--records", required=True)
    p_rep.add_argument("--top", type=int, default=5)
    p_rep.add_argument("--out", default=None)
    p_rep.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PerispaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # unexpected runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
