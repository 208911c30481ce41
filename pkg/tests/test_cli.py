import json
import os

import numpy as np
import pytest

from nightadapt import DetectorModel, ImagePlanes, SceneConfig, detect, generate_scenes
from nightadapt import fileio
from nightadapt.cli import main


@pytest.fixture()
def detection_files(tmp_path):
    cfg = SceneConfig(canvas_width=96, canvas_height=96, class_count=3,
                      mean_objects=4.0, min_size=10.0, max_size=40.0)
    scenes = generate_scenes(12, cfg, np.random.default_rng(100))
    teacher_model = DetectorModel(skill=0.7, loc_noise=0.08, fp_rate=1.0)
    proxy_model = DetectorModel(skill=0.65, loc_noise=0.08, fp_rate=1.0)
    rng_t = np.random.default_rng(101)
    rng_p = np.random.default_rng(102)
    teacher = {s.image_id: detect(teacher_model, s, rng_t, "teacher") for s in scenes}
    proxy = {s.image_id: detect(proxy_model, s, rng_p, "proxy") for s in scenes}
    gt = {s.image_id: s.gt for s in scenes}
    paths = {}
    for name, data in (("teacher", teacher), ("proxy", proxy), ("gt", gt)):
        paths[name] = str(tmp_path / f"{name}.json")
        fileio.save_detections(data, paths[name])
    return paths


class TestFuseCommand:
    def test_writes_pseudo_labels_with_provenance(self, detection_files, tmp_path):
        out = str(tmp_path / "fused.json")
        code = main(["fuse", "--teacher", detection_files["teacher"],
                     "--proxy", detection_files["proxy"], "--out", out])
        assert code == 0
        records = json.loads(open(out).read())
        assert records, "expected at least one pseudo-label"
        assert {r["provenance"] for r in records} <= {"initial", "extended"}

    def test_degenerate_band_matches_filter_only_byte_for_byte(self, detection_files, tmp_path):
        empty = str(tmp_path / "empty.json")
        fileio.atomic_write_text(empty, "[]")
        out_a = str(tmp_path / "a.json")
        out_b = str(tmp_path / "b.json")
        assert main(["fuse", "--teacher", detection_files["teacher"],
                     "--proxy", detection_files["proxy"],
                     "--tau-lb", "0.8", "--out", out_a]) == 0
        assert main(["fuse", "--teacher", detection_files["teacher"],
                     "--proxy", empty, "--out", out_b]) == 0
        assert open(out_a, "rb").read() == open(out_b, "rb").read()

    def test_missing_input_exits_1(self, tmp_path, capsys):
        code = main(["fuse", "--teacher", str(tmp_path / "nope.json"),
                     "--proxy", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "o.json")])
        assert code == 1
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"] == "validation"


class TestSweepCommand:
    def test_grid_row_count(self, detection_files, tmp_path):
        out = str(tmp_path / "sweep.csv")
        code = main(["ait-sweep", "--teacher", detection_files["teacher"],
                     "--proxy", detection_files["proxy"],
                     "--gt", detection_files["gt"], "--out", out,
                     "--tau-cls-grid", "0.7,0.8,0.9",
                     "--tau-loc-grid", "0.6,0.7,0.8",
                     "--gamma-grid", "0.0,0.05,0.1"])
        assert code == 0
        lines = open(out).read().strip().split("\n")
        assert len(lines) == 28  # header + 27 grid points
        assert lines[0].split(",")[:3] == ["tau_cls", "tau_loc", "gamma"]

    def test_bad_grid_exits_1(self, detection_files, tmp_path):
        code = main(["ait-sweep", "--teacher", detection_files["teacher"],
                     "--proxy", detection_files["proxy"],
                     "--gt", detection_files["gt"],
                     "--out", str(tmp_path / "s.csv"),
                     "--tau-loc-grid", "0.5,oops"])
        assert code == 1


class TestSimulateCommand:
    def write_config(self, tmp_path, seed=5):
        cfg = {
            "seed": seed,
            "plan": {"burn_in_iters": 1, "burn_up_iters": 5},
            "sim": {
                "n_scenes": 15,
                "scene": {"canvas_width": 96, "canvas_height": 96,
                          "mean_objects": 3.0, "max_size": 40.0},
            },
        }
        path = tmp_path / "run.json"
        path.write_text(json.dumps(cfg))
        return str(path)

    def test_outputs_and_determinism(self, tmp_path):
        cfg = self.write_config(tmp_path)
        out_a = str(tmp_path / "a")
        out_b = str(tmp_path / "b")
        assert main(["simulate", "--config", cfg, "--out", out_a]) == 0
        assert main(["simulate", "--config", cfg, "--out", out_b]) == 0
        for name in ("report.json", "traces.csv", "threshold_history.csv"):
            a = open(os.path.join(out_a, name), "rb").read()
            b = open(os.path.join(out_b, name), "rb").read()
            assert a == b, f"{name} differs between identical runs"
        report = json.loads(open(os.path.join(out_a, "report.json")).read())
        assert len(report["f1"]) == 6
        assert report["final_eval"]["map"] >= 0.0

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg = self.write_config(tmp_path, seed=5)
        out_a = str(tmp_path / "a")
        out_b = str(tmp_path / "b")
        assert main(["simulate", "--config", cfg, "--out", out_a, "--seed", "6"]) == 0
        assert main(["simulate", "--config", cfg, "--out", out_b]) == 0
        a = open(os.path.join(out_a, "report.json")).read()
        b = open(os.path.join(out_b, "report.json")).read()
        assert a != b

    def test_runtime_error_exits_2(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path)
        blocker = tmp_path / "blocked"
        blocker.write_text("not a directory")
        code = main(["simulate", "--config", cfg, "--out", str(blocker)])
        assert code == 2
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"] == "runtime"


class TestEvaluateCommand:
    def test_report_and_table(self, detection_files, tmp_path, capsys):
        out = str(tmp_path / "report.json")
        table = str(tmp_path / "table.txt")
        code = main(["evaluate", "--dets", detection_files["teacher"],
                     "--gt", detection_files["gt"], "--out", out,
                     "--table", table])
        assert code == 0
        report = json.loads(open(out).read())
        assert 0.0 <= report["map"] <= 1.0
        assert "mAP" in open(table).read()

    def test_self_evaluation_is_perfect(self, detection_files, tmp_path):
        out = str(tmp_path / "r.json")
        code = main(["evaluate", "--dets", detection_files["gt"],
                     "--gt", detection_files["gt"], "--out", out])
        assert code == 0
        assert json.loads(open(out).read())["map"] == 1.0


class TestImageCommands:
    @pytest.fixture()
    def image_dirs(self, tmp_path):
        rng = np.random.default_rng(9)
        day_dir = tmp_path / "day"
        night_dir = tmp_path / "night"
        day_dir.mkdir()
        night_dir.mkdir()
        for i in range(3):
            bright = ImagePlanes(np.clip(rng.random((3, 24, 24)) * 0.4 + 0.5, 0, 1))
            dark = ImagePlanes(rng.random((3, 24, 24)) * 0.25)
            fileio.write_image(bright, str(day_dir / f"day{i}.png"))
            fileio.write_image(dark, str(night_dir / f"night{i}.png"))
        return str(day_dir), str(night_dir)

    def test_stats_then_glt_pipeline(self, image_dirs, tmp_path):
        day_dir, night_dir = image_dirs
        prior = str(tmp_path / "prior.json")
        assert main(["stats", "--images", night_dir, "--out", prior]) == 0
        loaded = fileio.load_night_prior(prior)
        assert loaded.sample_count == 3
        assert float(np.max(loaded.stats.mean)) < 0.3

        out_dir = str(tmp_path / "enhanced")
        boxes = str(tmp_path / "boxes.json")
        fileio.atomic_write_text(boxes, json.dumps(
            [{"image_id": "day0", "category_id": 0, "bbox": [2, 2, 10, 10], "score": 1.0}]
        ))
        assert main(["glt", "--images", day_dir, "--prior", prior,
                     "--out", out_dir, "--boxes", boxes, "--seed", "4"]) == 0
        outputs = sorted(os.listdir(out_dir))
        assert outputs == ["day0.png", "day1.png", "day2.png"]
        enhanced = fileio.read_image(os.path.join(out_dir, "day0.png"))
        original = fileio.read_image(os.path.join(day_dir, "day0.png"))
        assert enhanced.planes.mean() < original.planes.mean()

    def test_glt_deterministic_per_seed(self, image_dirs, tmp_path):
        day_dir, night_dir = image_dirs
        prior = str(tmp_path / "prior.json")
        assert main(["stats", "--images", night_dir, "--out", prior]) == 0
        out_a = str(tmp_path / "a")
        out_b = str(tmp_path / "b")
        for out in (out_a, out_b):
            assert main(["glt", "--images", day_dir, "--prior", prior,
                         "--out", out, "--seed", "11"]) == 0
        for name in os.listdir(out_a):
            a = open(os.path.join(out_a, name), "rb").read()
            b = open(os.path.join(out_b, name), "rb").read()
            assert a == b

    def test_empty_image_dir_exits_1(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        code = main(["stats", "--images", str(empty), "--out", str(tmp_path / "p.json")])
        assert code == 1


def test_help_lists_all_subcommands(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    out = capsys.readouterr().out
    for cmd in ("glt", "stats", "fuse", "ait-sweep", "simulate", "evaluate"):
        assert cmd in out
