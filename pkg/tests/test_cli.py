import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from suppresskit.cli import main
from suppresskit.image import ImageBuffer, load_image, save_image


def tree_digest(root: Path) -> dict[str, str]:
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.suffix == ".png":
            out[str(p.relative_to(root))] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


@pytest.fixture
def corpus(tmp_path, rng):
    root = tmp_path / "corpus"
    (root / "sub").mkdir(parents=True)
    for i in range(6):
        where = root / ("sub" if i % 2 else "") / f"img_{i}.png"
        save_image(ImageBuffer(rng.random((24, 24, 3))), where)
    return root


def spec_file(tmp_path, payload, name="spec.json") -> str:
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def run(*argv) -> int:
    return main([str(a) for a in argv])


class TestTransformCommand:
    def test_identity_round_trips_bytes(self, tmp_path, corpus):
        out = tmp_path / "out"
        spec = spec_file(tmp_path, {"kind": "identity", "params": {}})
        assert run("--quiet", "--seed", 0, "transform", "--input", corpus,
                   "--output", out, "--spec", spec) == 0
        for rel, src in (("img_0.png", corpus / "img_0.png"),
                         ("sub/img_1.png", corpus / "sub" / "img_1.png")):
            a = load_image(out / rel)
            b = load_image(src)
            assert np.array_equal(a.to_uint8(), b.to_uint8())

    def test_same_seed_identical_trees(self, tmp_path, corpus):
        spec = spec_file(tmp_path, {"kind": "patch_shuffle", "params": {"grid": 4}})
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run("--quiet", "--seed", 7, "transform", "--input", corpus,
                       "--output", out, "--spec", spec) == 0
        assert tree_digest(a) == tree_digest(b)

    def test_jobs_do_not_change_outputs(self, tmp_path, corpus):
        spec = spec_file(tmp_path, {"kind": "patch_shuffle", "params": {"grid": 4}})
        a, b = tmp_path / "j1", tmp_path / "j2"
        assert run("--quiet", "--seed", 3, "--jobs", 1, "transform", "--input", corpus,
                   "--output", a, "--spec", spec) == 0
        assert run("--quiet", "--seed", 3, "--jobs", 4, "transform", "--input", corpus,
                   "--output", b, "--spec", spec) == 0
        assert tree_digest(a) == tree_digest(b)

    def test_sizes_preserved_and_manifest_written(self, tmp_path, corpus):
        out = tmp_path / "out"
        spec = spec_file(tmp_path, {"kind": "patch_shuffle", "params": {"grid": 6}})
        assert run("--quiet", "transform", "--input", corpus, "--output", out,
                   "--spec", spec) == 0
        for p in out.rglob("*.png"):
            img = load_image(p)
            assert (img.width, img.height) == (24, 24)
        manifest = json.loads((out / "run_manifest.json").read_text())
        assert manifest["failures"] == []
        assert manifest["command"] == "transform"

    def test_unreadable_input_nonzero_exit(self, tmp_path, corpus):
        (corpus / "broken.png").write_bytes(b"junk")
        out = tmp_path / "out"
        spec = spec_file(tmp_path, {"kind": "identity", "params": {}})
        assert run("--quiet", "transform", "--input", corpus, "--output", out,
                   "--spec", spec) == 1
        manifest = json.loads((out / "run_manifest.json").read_text())
        assert any(f["id"] == "broken.png" for f in manifest["failures"])

    def test_resize_applied_before_transform(self, tmp_path, corpus):
        out = tmp_path / "out"
        spec = spec_file(tmp_path, {"kind": "identity", "params": {}})
        assert run("--quiet", "transform", "--input", corpus, "--output", out,
                   "--spec", spec, "--resize", "16x12") == 0
        img = load_image(out / "img_0.png")
        assert (img.width, img.height) == (16, 12)


class TestValidateCommand:
    def test_csv_schema_and_pair_identity(self, tmp_path, corpus):
        specs = spec_file(tmp_path, [
            {"kind": "box_blur", "params": {"k": 3}},
            {"kind": "gaussian_blur", "params": {"k": 3, "sigma": 1.0}},
        ])
        out = tmp_path / "metrics.csv"
        assert run("--quiet", "validate", "--input", corpus, "--specs", specs,
                   "--out", out, "--window", 4, "--radius", 3, "--sobel", 3) == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert {r["transform"] for r in rows} == {"box_blur", "gaussian_blur"}
        aggregate_rows = [r for r in rows if r["image_id"] == "aggregate"]
        assert len(aggregate_rows) == 2
        for r in rows:
            lv, hfe, tex = float(r["lv"]), float(r["hfe"]), float(r["texture"])
            essim, gc, shape = float(r["essim"]), float(r["gc"]), float(r["shape"])
            assert abs(tex - (lv + hfe) / 2) < 1e-9
            assert abs(shape - (essim + gc) / 2) < 1e-9

    def test_json_format(self, tmp_path, corpus):
        specs = spec_file(tmp_path, [{"kind": "grayscale", "params": {}}])
        out = tmp_path / "metrics.json"
        assert run("--quiet", "--format", "json", "validate", "--input", corpus,
                   "--specs", specs, "--out", out,
                   "--window", 4, "--radius", 3, "--sobel", 3) == 0
        rows = json.loads(out.read_text())
        assert len(rows) == 7  # 6 images + 1 aggregate


def eval_fixture(tmp_path, rng, n=20, classes=10, baseline_correct=18, step_correct=9):
    img_dir = tmp_path / "imgs"
    img_dir.mkdir()
    lines = []
    labels = {}
    for i in range(n):
        name = f"img_{i:03d}.png"
        save_image(ImageBuffer(rng.random((16, 16, 3))), img_dir / name)
        labels[f"img_{i:03d}"] = i % classes
        lines.append(json.dumps({"id": f"img_{i:03d}", "path": name, "label": i % classes}))
    manifest = img_dir / "manifest.jsonl"
    manifest.write_text("\n".join(lines) + "\n")

    pred_dir = tmp_path / "preds"
    pred_dir.mkdir()

    def write(tag, correct_count):
        with open(pred_dir / f"{tag}.jsonl", "w") as fh:
            for i, (image_id, label) in enumerate(sorted(labels.items())):
                hit = label if i < correct_count else (label + 1) % classes
                scores = [0.0] * classes
                scores[hit] = 1.0
                fh.write(json.dumps({"id": image_id, "scores": scores, "prob": True}) + "\n")

    write("baseline", baseline_correct)
    write("step", step_correct)
    return manifest, pred_dir


class TestSweepCommand:
    def test_curve_matches_hand_computation(self, tmp_path, rng):
        manifest, pred_dir = eval_fixture(tmp_path, rng)
        sweep_cfg = spec_file(tmp_path, [
            {"kind": "patch_shuffle", "params": {"grid": 2}, "strength": 2, "tag": "step"},
        ], name="sweep.json")
        out = tmp_path / "out"
        assert run("--quiet", "sweep", "--manifest", manifest, "--sweep", sweep_cfg,
                   "--predictions", pred_dir, "--class-count", 10, "--out", out,
                   "--rule", "argmax") == 0
        curve = json.loads((out / "curve.json").read_text())
        assert curve["baseline_accuracy"] == 0.9
        point = curve["points"][0]
        assert point["accuracy"] == 0.45
        assert abs(point["relative_accuracy"] - 0.4375) < 1e-12
        csv_lines = (out / "curve.csv").read_text().splitlines()
        assert csv_lines[0] == "strength,accuracy,relative_accuracy"
        assert len(csv_lines) == 2

    def test_both_normalizations_from_same_predictions(self, tmp_path, rng):
        manifest, pred_dir = eval_fixture(tmp_path, rng)
        sweep_cfg = spec_file(tmp_path, [
            {"kind": "patch_shuffle", "params": {"grid": 2}, "strength": 2, "tag": "step"},
        ], name="sweep.json")
        values = {}
        for norm in ("ratio", "chance_rescaled"):
            out = tmp_path / f"out_{norm}"
            assert run("--quiet", "sweep", "--manifest", manifest, "--sweep", sweep_cfg,
                       "--predictions", pred_dir, "--class-count", 10, "--out", out,
                       "--rule", "argmax", "--normalization", norm) == 0
            values[norm] = json.loads((out / "curve.json").read_text())["points"][0]["relative_accuracy"]
        assert values["ratio"] == pytest.approx(0.5)
        assert values["chance_rescaled"] == pytest.approx(0.4375)

    def test_svg_written(self, tmp_path, rng):
        manifest, pred_dir = eval_fixture(tmp_path, rng)
        sweep_cfg = spec_file(tmp_path, [
            {"kind": "patch_shuffle", "params": {"grid": 2}, "strength": 2, "tag": "step"},
        ], name="sweep.json")
        out = tmp_path / "out"
        assert run("--quiet", "sweep", "--manifest", manifest, "--sweep", sweep_cfg,
                   "--predictions", pred_dir, "--class-count", 10, "--out", out,
                   "--rule", "argmax", "--svg", "--name", "demo") == 0
        svg = (out / "curve.svg").read_text()
        assert svg.count("<polyline") == 1
        assert "demo" in svg


class TestOverlayControlCommand:
    def test_identical_predictions_equal_columns(self, tmp_path, rng):
        manifest, pred_dir = eval_fixture(tmp_path, rng)
        baseline = (pred_dir / "baseline.jsonl").read_text()
        for grid in (2, 4, 8):
            (pred_dir / f"overlay_g{grid}.jsonl").write_text(baseline)
            (pred_dir / f"patch_shuffle_g{grid}.jsonl").write_text(baseline)
        out = tmp_path / "out"
        assert run("--quiet", "overlay-control", "--manifest", manifest,
                   "--predictions", pred_dir, "--class-count", 10, "--out", out,
                   "--grids", "2,4,8", "--rule", "argmax") == 0
        rows = list(csv.DictReader(open(out / "overlay_control.csv")))
        assert len(rows) == 3
        assert all(r["overlay"] == r["patch_shuffle"] for r in rows)


class TestStatsCommand:
    def write_columns(self, tmp_path, a, b):
        fa = tmp_path / "a.csv"
        fb = tmp_path / "b.csv"
        fa.write_text("accuracy\n" + "\n".join(str(v) for v in a) + "\n")
        fb.write_text("accuracy\n" + "\n".join(str(v) for v in b) + "\n")
        return fa, fb

    def test_known_columns(self, tmp_path, capsys):
        fa, fb = self.write_columns(tmp_path, [1, 2, 3, 5], [0, 1, 2, 2])
        out = tmp_path / "stats.json"
        assert run("--quiet", "stats", "--csv-a", fa, "--csv-b", fb, "--out", out) == 0
        printed = capsys.readouterr().out
        assert "df = 3" in printed and "n = 4" in printed
        result = json.loads(out.read_text())
        assert result["t"] == pytest.approx(3.0)
        assert result["p"] == pytest.approx(0.0577, abs=5e-5)
        assert result["cohens_d"] == pytest.approx(1.5)

    def test_identical_columns_guidance(self, tmp_path):
        fa, fb = self.write_columns(tmp_path, [1, 2, 3], [1, 2, 3])
        with pytest.raises(SystemExit) as err:
            run("--quiet", "stats", "--csv-a", fa, "--csv-b", fb)
        assert "zero variance" in str(err.value)


class TestReportCommand:
    def make_curve_file(self, tmp_path, name, rels):
        payload = {
            "transform": "patch_shuffle",
            "name": name,
            "normalization": "chance_rescaled",
            "baseline_accuracy": 0.9,
            "chance": 0.1,
            "points": [
                {"strength": float(i), "accuracy": 0.5, "relative_accuracy": r}
                for i, r in enumerate(rels)
            ],
        }
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(payload))
        return path

    def test_aggregates_matching_grids_and_svg(self, tmp_path):
        a = self.make_curve_file(tmp_path, "set_a", [1.0, 0.2])
        b = self.make_curve_file(tmp_path, "set_b", [1.0, 0.4])
        out = tmp_path / "report"
        assert run("--quiet", "report", "--curves", a, b, "--out", out, "--svg") == 0
        summary = (out / "summary.md").read_text()
        assert "set_a" in summary and "set_b" in summary
        rows = list(csv.DictReader(open(out / "domain_summary.csv")))
        assert float(rows[1]["mean"]) == pytest.approx(0.3)
        assert float(rows[1]["stddev"]) == pytest.approx(0.1)
        svg = (out / "overview.svg").read_text()
        assert svg.count("<polyline") == 2


class TestConfigPrecedence:
    def test_flag_beats_config_beats_default(self, tmp_path, corpus):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 5}))
        spec = spec_file(tmp_path, {"kind": "patch_shuffle", "params": {"grid": 4}})
        from_cfg, from_flag, default = tmp_path / "c", tmp_path / "f", tmp_path / "d"
        run("--quiet", "--config", cfg, "transform", "--input", corpus,
            "--output", from_cfg, "--spec", spec)
        run("--quiet", "--seed", 5, "transform", "--input", corpus,
            "--output", from_flag, "--spec", spec)
        run("--quiet", "transform", "--input", corpus, "--output", default,
            "--spec", spec)
        assert tree_digest(from_cfg) == tree_digest(from_flag)
        assert tree_digest(from_cfg) != tree_digest(default)
