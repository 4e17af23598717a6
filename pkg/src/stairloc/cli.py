"""Command-line pipeline: synthesize datasets, localize, evaluate, overlay.

    stairloc synth    --spec spec.json [--corruption c.json] --count N
                      --seed S --out DIR
    stairloc localize --dataset DIR [--config run.json] --out DIR
    stairloc eval     --poses poses.jsonl --manifest DIR/manifest.json
                      --out PREFIX
    stairloc overlay  --bundle DIR [--config run.json] --out IMAGE.png

All streams are newline-delimited JSON.  Exit codes: 0 success, 1 usage,
2 dataset unreadable, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .camera import (
    Intrinsics,
    project,
    read_intrinsics,
    read_pfm,
    write_intrinsics,
    write_pfm,
)
from .detection import FrameBundle, parse_detection_file, serialize_records
from .errors import JoinError, SpecError, StairlocError
from .localizer import ExtrinsicsConfig, LocalizeParams, StairPose, localize
from .registry import RegistryConfig, StairCandidate, StairRegistry
from .synth import (
    CorruptionSpec,
    StaircaseSpec,
    SyntheticScene,
    build_scene,
    corrupt,
    scene_detection_record,
)

DEFAULT_INTRINSICS = Intrinsics(fx=580.0, fy=580.0, cx=319.5, cy=239.5,
                                width=640, height=480)


# --- serialization helpers -------------------------------------------------

def pose_to_obj(frame: str, box_index: int, pose: StairPose) -> dict:
    return {
        "frame": frame,
        "box_index": box_index,
        "position": [float(x) for x in pose.position],
        "theta_rad": float(pose.angle),
        "quaternion": [float(x) for x in pose.quaternion],
        "height_m": float(pose.height),
        "direction": pose.direction,
        "n_points": pose.n_points,
        "n_lines": pose.n_lines,
        "residual_mse": float(pose.residual_mse),
    }


def node_to_obj(node) -> dict:
    return {
        "id": node.node_id,
        "position": [float(x) for x in node.position],
        "theta_rad": float(node.angle),
        "direction": node.direction,
        "n_candidates": node.n_candidates,
        "sigma_pos_m": float(node.sigma_pos),
        "sigma_theta_rad": float(node.sigma_theta),
    }


def _dump_jsonl(path, objs):
    with open(path, "w") as f:
        for obj in objs:
            f.write(json.dumps(obj, separators=(", ", ": ")) + "\n")


def _load_jsonl(path):
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]


# --- scene bundle IO -------------------------------------------------------

def write_scene_bundle(bundle_dir, scene: SyntheticScene, frame_id: str):
    os.makedirs(bundle_dir, exist_ok=True)
    write_intrinsics(os.path.join(bundle_dir, "intrinsics.txt"), scene.intrinsics)
    write_pfm(os.path.join(bundle_dir, "depth.pfm"), scene.depth)
    record = scene_detection_record(scene, frame_id)
    with open(os.path.join(bundle_dir, "detections.json"), "wb") as f:
        f.write(serialize_records([record]))
    truth = pose_to_obj(frame_id, -1, scene.truth_pose)
    with open(os.path.join(bundle_dir, "truth_pose.json"), "w") as f:
        json.dump(truth, f, separators=(", ", ": "))
        f.write("\n")


def read_scene_bundle(bundle_dir) -> FrameBundle:
    intrinsics = read_intrinsics(os.path.join(bundle_dir, "intrinsics.txt"))
    depth = read_pfm(os.path.join(bundle_dir, "depth.pfm"))
    with open(os.path.join(bundle_dir, "detections.json"), "rb") as f:
        records = parse_detection_file(f.read())
    if len(records) != 1:
        raise SpecError(f"{bundle_dir}: expected one detection record, got {len(records)}")
    color = os.path.join(bundle_dir, "color.png")
    return FrameBundle(
        depth=depth, intrinsics=intrinsics, record=records[0],
        color_path=color if os.path.exists(color) else None,
    )


# --- config parsing --------------------------------------------------------

def _intrinsics_from_obj(obj) -> Intrinsics:
    if obj is None:
        return DEFAULT_INTRINSICS
    return Intrinsics(fx=float(obj["fx"]), fy=float(obj["fy"]),
                      cx=float(obj["cx"]), cy=float(obj["cy"]),
                      width=int(obj["width"]), height=int(obj["height"]))


def _staircase_from_obj(obj) -> StaircaseSpec:
    yaw = float(obj.get("yaw_rad", math.radians(float(obj.get("yaw_deg", 0.0)))))
    return StaircaseSpec(
        steps=int(obj["steps"]), rise=float(obj["rise"]), run=float(obj["run"]),
        width=float(obj["width"]),
        position=tuple(float(x) for x in obj.get("position", (0.0, 0.5, 3.0))),
        yaw=yaw, direction=obj.get("direction", "up"),
    )


def _corruption_from_obj(obj) -> CorruptionSpec:
    if obj is None:
        return CorruptionSpec()
    return CorruptionSpec(
        depth_noise=float(obj.get("depth_noise", 0.0)),
        segment_jitter=float(obj.get("segment_jitter", 0.0)),
        outlier_count=int(obj.get("outlier_count", 0)),
        outlier_angle_range=tuple(obj.get("outlier_angle_range", (0.3, 1.2))),
        dropout=float(obj.get("dropout", 0.0)),
        occluders=tuple(tuple(o) for o in obj.get("occluders", ())),
    )


def _run_config_from_obj(obj):
    obj = obj or {}
    ext = obj.get("extrinsics", {})
    cfg = ExtrinsicsConfig(
        rotation=np.array(ext.get("rotation", np.eye(3).tolist()), dtype=float),
        translation=np.array(ext.get("translation", [0.0, -0.5, 0.0]), dtype=float),
        gravity_axis=np.array(ext.get("gravity_axis", [0.0, 1.0, 0.0]), dtype=float),
        epsilon=float(ext.get("epsilon", 0.15)),
    )
    params = LocalizeParams(**obj.get("params", {}))
    registry = RegistryConfig(**obj.get("registry", {}))
    return cfg, params, registry


def _load_json(path):
    if path is None:
        return None
    with open(path) as f:
        return json.load(f)


# --- subcommands -----------------------------------------------------------

def cmd_synth(args) -> int:
    spec_obj = _load_json(args.spec)
    if spec_obj is None:
        raise SpecError("synth requires --spec")
    configs = spec_obj["configs"] if "configs" in spec_obj else [spec_obj]
    corruption = _corruption_from_obj(_load_json(args.corruption))
    os.makedirs(args.out, exist_ok=True)
    bundles = []
    counter = 0
    for config in configs:
        name = config.get("name", "scene")
        spec = _staircase_from_obj(config)
        intrinsics = _intrinsics_from_obj(
            config.get("intrinsics", spec_obj.get("intrinsics")))
        base = build_scene(spec, intrinsics)
        for i in range(args.count):
            frame_id = f"{name}_{i:03d}"
            scene = corrupt(base, corruption, rng_seed=args.seed + counter)
            counter += 1
            write_scene_bundle(os.path.join(args.out, frame_id), scene, frame_id)
            bundles.append({
                "frame": frame_id,
                "dir": frame_id,
                "config": name,
                "truth_pose": pose_to_obj(frame_id, -1, scene.truth_pose),
            })
    manifest = {"schema": "stairloc/manifest/1", "seed": args.seed,
                "bundles": bundles}
    with open(os.path.join(args.out, "manifest.json"), "w") as f:
        json.dump(manifest, f, separators=(", ", ": "), indent=1)
        f.write("\n")
    return 0


def cmd_localize(args) -> int:
    manifest_path = os.path.join(args.dataset, "manifest.json")
    with open(manifest_path) as f:
        manifest = json.load(f)
    cfg, params, registry_cfg = _run_config_from_obj(_load_json(args.config))
    if args.seed is not None:
        params = LocalizeParams(**{**params.__dict__, "seed": args.seed})
    registry = StairRegistry(registry_cfg)
    poses, nodes, diagnostics = [], [], []
    for index, entry in enumerate(manifest["bundles"]):
        bundle = read_scene_bundle(os.path.join(args.dataset, entry["dir"]))
        result = localize(bundle, cfg, params)
        if not bundle.record.detections:
            diagnostics.append({"frame": entry["frame"], "box_index": None,
                                "error": "NoDetection", "message": "no boxes"})
        for diag in result.diagnostics:
            diagnostics.append({"frame": entry["frame"], **diag})
        for box_index, pose in result.poses:
            poses.append(pose_to_obj(entry["frame"], box_index, pose))
            event = registry.submit(StairCandidate(
                pose=pose, timestamp=float(index), frame=entry["frame"]))
            if event.kind == "published":
                nodes.append(node_to_obj(event.node))
    os.makedirs(args.out, exist_ok=True)
    _dump_jsonl(os.path.join(args.out, "poses.jsonl"), poses)
    _dump_jsonl(os.path.join(args.out, "nodes.jsonl"), nodes)
    _dump_jsonl(os.path.join(args.out, "diagnostics.jsonl"), diagnostics)
    return 0


def _wrap_deg_90(value: float) -> float:
    """Fold a degree value into [-90, 90) (undirected line angle)."""
    folded = math.fmod(value + 90.0, 180.0)
    if folded < 0:
        folded += 180.0
    return folded - 90.0


def _mean_std(values):
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    std = float(np.sqrt(np.sum((values - mean) ** 2) / (len(values) - 1))) \
        if len(values) > 1 else 0.0
    return mean, std


def evaluate(pose_objs, manifest) -> dict:
    """Join estimated poses against manifest truth and compute per-config
    signed-error statistics (mean +/- sample std)."""
    by_frame = {}
    for obj in pose_objs:
        by_frame.setdefault(obj["frame"], []).append(obj)
    rows = []
    matched_any = False
    configs = {}
    for entry in manifest["bundles"]:
        configs.setdefault(entry["config"], []).append(entry)
    for config, entries in configs.items():
        errors = {"x": [], "y": [], "z": [], "theta": []}
        detected = 0
        for entry in entries:
            candidates = by_frame.get(entry["frame"])
            if not candidates:
                continue
            matched_any = True
            detected += 1
            est = min(candidates, key=lambda o: o["box_index"])
            truth = entry["truth_pose"]
            for axis, idx in (("x", 0), ("y", 1), ("z", 2)):
                errors[axis].append(est["position"][idx] - truth["position"][idx])
            d = math.degrees(est["theta_rad"]) - math.degrees(truth["theta_rad"])
            errors["theta"].append(_wrap_deg_90(d))
        row = {"config": config, "frames": len(entries), "detected": detected,
               "detection_rate": detected / len(entries) if entries else 0.0}
        for axis in ("x", "y", "z", "theta"):
            if errors[axis]:
                mean, std = _mean_std(errors[axis])
            else:
                mean, std = float("nan"), float("nan")
            key = "theta_deg" if axis == "theta" else f"{axis}_m"
            row[f"{key}_mean"] = mean
            row[f"{key}_std"] = std
        rows.append(row)
    if not matched_any:
        raise JoinError("no pose frame matches the manifest")
    return {"schema": "stairloc/report/1", "rows": rows}


def format_report(report: dict) -> str:
    headers = ["config", "X error (m)", "Y error (m)", "Z error (m)",
               "theta error (deg)", "det rate", "frames"]
    lines = []
    table = []
    for row in report["rows"]:
        table.append([
            row["config"],
            f"{row['x_m_mean']:+.4f} ± {row['x_m_std']:.4f}",
            f"{row['y_m_mean']:+.4f} ± {row['y_m_std']:.4f}",
            f"{row['z_m_mean']:+.4f} ± {row['z_m_std']:.4f}",
            f"{row['theta_deg_mean']:+.4f} ± {row['theta_deg_std']:.4f}",
            f"{row['detection_rate']:.2f}",
            str(row["frames"]),
        ])
    widths = [max(len(headers[i]), *(len(r[i]) for r in table)) if table
              else len(headers[i]) for i in range(len(headers))]
    lines.append("  ".join(h.ljust(w) for h, w in zip(headers, widths)))
    lines.append("  ".join("-" * w for w in widths))
    for r in table:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    return "\n".join(lines) + "\n"


def cmd_eval(args) -> int:
    pose_objs = _load_jsonl(args.poses)
    with open(args.manifest) as f:
        manifest = json.load(f)
    report = evaluate(pose_objs, manifest)
    text = format_report(report)
    if args.out:
        with open(args.out + ".json", "w") as f:
            json.dump(report, f, separators=(", ", ": "), indent=1)
            f.write("\n")
        with open(args.out + ".txt", "w") as f:
            f.write(text)
    sys.stdout.write(text)
    return 0


# --- overlay ---------------------------------------------------------------

COLOR_BOX = (255, 220, 0)
COLOR_INLIER = (0, 255, 0)
COLOR_OUTLIER = (255, 0, 0)
COLOR_ARROW = (200, 0, 255)


def render_overlay(bundle: FrameBundle, cfg: ExtrinsicsConfig,
                   params: LocalizeParams):
    """Draw boxes, inlier/outlier segments, and the pose arrow over the
    depth raster (or the color image when available)."""
    from PIL import Image, ImageDraw

    if bundle.color_path:
        image = Image.open(bundle.color_path).convert("RGB")
    else:
        data = bundle.depth.data
        valid = data > 0
        top = data[valid].max() if valid.any() else 1.0
        grey = np.where(valid, 255.0 * (1.0 - data / max(top, 1e-6)), 0.0)
        image = Image.fromarray(grey.astype(np.uint8)).convert("RGB")
    draw = ImageDraw.Draw(image)

    result = localize(bundle, cfg, params)
    image_rect = (bundle.intrinsics.width, bundle.intrinsics.height)
    from .detection import to_full_frame

    for box_result, detection in zip(result.boxes, bundle.record.detections):
        box = detection.box
        draw.rectangle([box.x_min, box.y_min, box.x_max, box.y_max],
                       outline=COLOR_BOX, width=2)
        if box_result.pose is None:
            full = to_full_frame(detection.segments, image_rect)
            for seg in full:
                draw.line([seg.start, seg.end], fill=COLOR_OUTLIER, width=1)
            continue
        for seg in box_result.outliers or ():
            draw.line([seg.start, seg.end], fill=COLOR_OUTLIER, width=1)
        for seg in box_result.inliers or ():
            draw.line([seg.start, seg.end], fill=COLOR_INLIER, width=1)
        pose = box_result.pose
        (u0, v0), _ = project(pose.position, bundle.intrinsics)
        ascent = np.array([-math.sin(pose.angle), 0.0, math.cos(pose.angle)])
        tip = pose.position + 0.4 * ascent
        if tip[2] > 0:
            (u1, v1), _ = project(tip, bundle.intrinsics)
        else:
            u1, v1 = u0, v0 - 20.0
        draw.line([(u0, v0), (u1, v1)], fill=COLOR_ARROW, width=3)
        # arrow head
        direction = np.array([u1 - u0, v1 - v0])
        norm = np.linalg.norm(direction)
        if norm > 1e-6:
            direction /= norm
            left = np.array([-direction[1], direction[0]])
            for sign in (1.0, -1.0):
                base = np.array([u1, v1]) - 8.0 * direction + sign * 5.0 * left
                draw.line([(u1, v1), tuple(base)], fill=COLOR_ARROW, width=3)
        draw.ellipse([u0 - 3, v0 - 3, u0 + 3, v0 + 3], fill=COLOR_ARROW)
    return image


def cmd_overlay(args) -> int:
    bundle = read_scene_bundle(args.bundle)
    cfg, params, _ = _run_config_from_obj(_load_json(args.config))
    image = render_overlay(bundle, cfg, params)
    image.save(args.out)
    return 0


# --- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stairloc",
                                     description="staircase localization pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--spec", required=True, help="staircase spec JSON")
    p.add_argument("--corruption", help="corruption spec JSON")
    p.add_argument("--count", type=int, default=1, help="frames per config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("localize", help="run localization over a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--config", help="run config JSON")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("eval", help="compare poses against manifest truth")
    p.add_argument("--poses", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="report path prefix (.json/.txt)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("overlay", help="render an annotated frame")
    p.add_argument("--bundle", required=True)
    p.add_argument("--config", help="run config JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_overlay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StairlocError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
