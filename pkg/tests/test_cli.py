import json
import math
import os

import numpy as np
import pytest

from stairloc.cli import (
    _wrap_deg_90,
    evaluate,
    format_report,
    main,
    pose_to_obj,
    read_scene_bundle,
    render_overlay,
    write_scene_bundle,
)
from stairloc.camera import project
from stairloc.localizer import ExtrinsicsConfig, LocalizeParams, localize

from helpers import make_scene


def write_spec(tmp_path, configs, name="spec.json", intrinsics=None):
    obj = {"configs": configs}
    if intrinsics:
        obj["intrinsics"] = intrinsics
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


FRONTAL = {"name": "front3m", "steps": 5, "rise": 0.17, "run": 0.29,
           "width": 1.2, "position": [0.0, 0.5, 3.0]}


def run_cli(*argv):
    return main(list(argv))


class TestSynthCommand:
    def test_single_bundle(self, tmp_path):
        spec = write_spec(tmp_path, [FRONTAL])
        out = tmp_path / "data"
        assert run_cli("synth", "--spec", spec, "--count", "1",
                       "--seed", "0", "--out", str(out)) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["bundles"]) == 1
        truth = manifest["bundles"][0]["truth_pose"]
        assert truth["position"][2] == pytest.approx(3.0, abs=spec_depth_slack())
        bundle_dir = out / manifest["bundles"][0]["dir"]
        for name in ("intrinsics.txt", "depth.pfm", "detections.json",
                     "truth_pose.json"):
            assert (bundle_dir / name).exists()

    def test_determinism(self, tmp_path):
        spec = write_spec(tmp_path, [FRONTAL])
        for out in ("a", "b"):
            assert run_cli("synth", "--spec", spec, "--count", "2",
                           "--seed", "7", "--out", str(tmp_path / out)) == 0
        a = (tmp_path / "a" / "manifest.json").read_bytes()
        b = (tmp_path / "b" / "manifest.json").read_bytes()
        assert a == b

    def test_count_zero(self, tmp_path):
        spec = write_spec(tmp_path, [FRONTAL])
        out = tmp_path / "empty"
        assert run_cli("synth", "--spec", spec, "--count", "0",
                       "--seed", "0", "--out", str(out)) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["bundles"] == []

    def test_missing_spec_file(self, tmp_path):
        assert run_cli("synth", "--spec", str(tmp_path / "nope.json"),
                       "--out", str(tmp_path / "o")) == 2


def spec_depth_slack():
    # truth z is the mean over nosing samples spread across the steps
    return 5 * 0.29


class TestLocalizeCommand:
    def synth(self, tmp_path, count=10, corruption=None):
        spec = write_spec(tmp_path, [FRONTAL])
        data = tmp_path / "data"
        argv = ["synth", "--spec", spec, "--count", str(count),
                "--seed", "0", "--out", str(data)]
        if corruption:
            cpath = tmp_path / "corruption.json"
            cpath.write_text(json.dumps(corruption))
            argv += ["--corruption", str(cpath)]
        assert run_cli(*argv) == 0
        return data

    def test_noiseless_ten_frames_one_node(self, tmp_path):
        data = self.synth(tmp_path, count=10)
        out = tmp_path / "run"
        assert run_cli("localize", "--dataset", str(data),
                       "--out", str(out)) == 0
        poses = [json.loads(l) for l in (out / "poses.jsonl").read_text().splitlines()]
        nodes = [json.loads(l) for l in (out / "nodes.jsonl").read_text().splitlines()]
        assert len(poses) == 10
        assert len(nodes) == 1
        truth = json.loads((data / "manifest.json").read_text())["bundles"][0]["truth_pose"]
        for pose in poses:
            np.testing.assert_allclose(pose["position"], truth["position"],
                                       atol=1e-3)
        assert nodes[0]["n_candidates"] == 10
        assert nodes[0]["sigma_pos_m"] < 1e-9

    def test_all_dropout_rejected(self, tmp_path):
        data = self.synth(tmp_path, count=3, corruption={"dropout": 1.0})
        out = tmp_path / "run"
        assert run_cli("localize", "--dataset", str(data),
                       "--out", str(out)) == 0
        assert (out / "poses.jsonl").read_text() == ""
        diags = [json.loads(l)
                 for l in (out / "diagnostics.jsonl").read_text().splitlines()]
        assert len(diags) == 3
        assert all(d["error"] == "NoValidDepth" for d in diags)

    def test_unreadable_dataset_exit_2(self, tmp_path):
        assert run_cli("localize", "--dataset", str(tmp_path / "nope"),
                       "--out", str(tmp_path / "o")) == 2


class TestBundleIo:
    def test_round_trip(self, tmp_path, intrinsics):
        scene = make_scene(intrinsics)
        write_scene_bundle(str(tmp_path / "b0"), scene, "f0")
        bundle = read_scene_bundle(str(tmp_path / "b0"))
        assert bundle.intrinsics == intrinsics
        np.testing.assert_allclose(
            bundle.depth.data, scene.depth.data.astype(np.float32), rtol=1e-6)
        assert bundle.record.frame == "f0"
        assert len(bundle.record.detections) == 1


def manifest_for(truths, config="cfg"):
    return {"schema": "stairloc/manifest/1", "seed": 0, "bundles": [
        {"frame": f"f{i}", "dir": f"f{i}", "config": config, "truth_pose": t}
        for i, t in enumerate(truths)
    ]}


def truth_obj(position=(0.0, 0.0, 3.0), theta_deg=0.0):
    return {"position": list(position), "theta_rad": math.radians(theta_deg)}


def est_obj(frame, position=(0.0, 0.0, 3.0), theta_deg=0.0):
    return {"frame": frame, "box_index": 0, "position": list(position),
            "theta_rad": math.radians(theta_deg)}


class TestEvaluate:
    def test_exact_estimates_zero_errors(self):
        manifest = manifest_for([truth_obj(), truth_obj()])
        poses = [est_obj("f0"), est_obj("f1")]
        report = evaluate(poses, manifest)
        row = report["rows"][0]
        for key in ("x_m", "y_m", "z_m", "theta_deg"):
            assert row[f"{key}_mean"] == 0.0
            assert row[f"{key}_std"] == 0.0
        assert row["detection_rate"] == 1.0

    def test_sample_std(self):
        manifest = manifest_for([truth_obj(), truth_obj()])
        poses = [est_obj("f0", position=(0.1, 0.0, 3.0)),
                 est_obj("f1", position=(-0.1, 0.0, 3.0))]
        row = evaluate(poses, manifest)["rows"][0]
        assert row["x_m_mean"] == pytest.approx(0.0, abs=1e-15)
        # oracle: hand-computed sample (n-1) sigma of {+0.1, -0.1}
        assert row["x_m_std"] == pytest.approx(0.1 * math.sqrt(2), abs=1e-12)

    def test_theta_wrap(self):
        manifest = manifest_for([truth_obj(theta_deg=89.0)])
        poses = [est_obj("f0", theta_deg=-89.0)]
        row = evaluate(poses, manifest)["rows"][0]
        assert abs(row["theta_deg_mean"]) == pytest.approx(2.0, abs=1e-9)

    def test_join_error(self):
        from stairloc.errors import JoinError
        with pytest.raises(JoinError):
            evaluate([est_obj("other")], manifest_for([truth_obj()]))

    def test_detection_rate_partial(self):
        manifest = manifest_for([truth_obj(), truth_obj(), truth_obj()])
        row = evaluate([est_obj("f0")], manifest)["rows"][0]
        assert row["detection_rate"] == pytest.approx(1 / 3)

    def test_wrap_helper_bounds(self):
        for value in (-1000.0, -90.0, 0.0, 89.9, 90.0, 178.0, 1000.0):
            wrapped = _wrap_deg_90(value)
            assert -90.0 <= wrapped < 90.0
        assert _wrap_deg_90(178.0) == pytest.approx(-2.0)
        assert _wrap_deg_90(90.0) == pytest.approx(-90.0)

    def test_format_report_layout(self):
        manifest = manifest_for([truth_obj()])
        text = format_report(evaluate([est_obj("f0")], manifest))
        lines = text.splitlines()
        assert "X error (m)" in lines[0]
        assert "theta error (deg)" in lines[0]
        assert lines[2].startswith("cfg")


class TestEvalCommand:
    def test_end_to_end_determinism(self, tmp_path):
        spec = write_spec(tmp_path, [FRONTAL])
        cpath = tmp_path / "c.json"
        cpath.write_text(json.dumps({"depth_noise": 0.01, "segment_jitter": 1.0}))
        reports = []
        for tag in ("r1", "r2"):
            data = tmp_path / tag / "data"
            run = tmp_path / tag / "run"
            assert run_cli("synth", "--spec", spec, "--corruption", str(cpath),
                           "--count", "3", "--seed", "5", "--out", str(data)) == 0
            assert run_cli("localize", "--dataset", str(data),
                           "--out", str(run)) == 0
            assert run_cli("eval", "--poses", str(run / "poses.jsonl"),
                           "--manifest", str(data / "manifest.json"),
                           "--out", str(run / "report")) == 0
            reports.append((run / "report.json").read_bytes())
        assert reports[0] == reports[1]


class TestOverlay:
    def test_arrow_anchored_at_projection(self, tmp_path, intrinsics):
        scene = make_scene(intrinsics)
        write_scene_bundle(str(tmp_path / "b0"), scene, "f0")
        bundle = read_scene_bundle(str(tmp_path / "b0"))
        cfg = ExtrinsicsConfig()
        image = render_overlay(bundle, cfg, LocalizeParams())
        pose = localize(bundle, cfg, LocalizeParams()).poses[0][1]
        (u, v), _ = project(pose.position, intrinsics)
        pixels = np.asarray(image)
        arrow = np.all(pixels == (200, 0, 255), axis=-1)
        assert arrow.any()
        vs, us = np.nonzero(arrow)
        dist = np.min(np.hypot(us - u, vs - v))
        assert dist <= 2.0

    def test_inliers_and_outliers_distinct_colors(self, tmp_path, intrinsics):
        from stairloc.synth import CorruptionSpec, corrupt
        scene = corrupt(make_scene(intrinsics),
                        CorruptionSpec(outlier_count=2,
                                       outlier_angle_range=(0.6, 1.0)),
                        rng_seed=4)
        write_scene_bundle(str(tmp_path / "b0"), scene, "f0")
        bundle = read_scene_bundle(str(tmp_path / "b0"))
        image = np.asarray(render_overlay(bundle, ExtrinsicsConfig(),
                                          LocalizeParams()))
        green = np.all(image == (0, 255, 0), axis=-1)
        red = np.all(image == (255, 0, 0), axis=-1)
        assert green.any()
        assert red.any()

    def test_no_pose_box_only(self, tmp_path, intrinsics):
        from stairloc.synth import CorruptionSpec, corrupt
        scene = corrupt(make_scene(intrinsics), CorruptionSpec(dropout=1.0),
                        rng_seed=0)
        write_scene_bundle(str(tmp_path / "b0"), scene, "f0")
        bundle = read_scene_bundle(str(tmp_path / "b0"))
        image = np.asarray(render_overlay(bundle, ExtrinsicsConfig(),
                                          LocalizeParams()))
        box = np.all(image == (255, 220, 0), axis=-1)
        arrow = np.all(image == (200, 0, 255), axis=-1)
        assert box.any()
        assert not arrow.any()

    def test_overlay_command_writes_file(self, tmp_path, intrinsics):
        scene = make_scene(intrinsics)
        write_scene_bundle(str(tmp_path / "b0"), scene, "f0")
        out = tmp_path / "overlay.png"
        assert run_cli("overlay", "--bundle", str(tmp_path / "b0"),
                       "--out", str(out)) == 0
        assert out.exists()


class TestCliUsage:
    def test_unknown_command_exit_1(self, capsys):
        assert run_cli("frobnicate") == 1
        capsys.readouterr()

    def test_pose_serialization_fields(self, intrinsics):
        scene = make_scene(intrinsics)
        obj = pose_to_obj("f0", 0, scene.truth_pose)
        assert set(obj) == {"frame", "box_index", "position", "theta_rad",
                            "quaternion", "height_m", "direction", "n_points",
                            "n_lines", "residual_mse"}
        assert obj["direction"] == "up"
        assert len(obj["quaternion"]) == 4
