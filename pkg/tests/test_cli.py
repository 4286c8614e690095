"""CLI surface: subcommands, exit codes, fixed-format outputs."""

import json
import subprocess
import sys

import pytest

from freedet.cli import main
from freedet.synth import generate, write_fixture


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("fix")
    paths = write_fixture(generate(scene_count=12, categories_per_bucket=2, seed=7), str(root))
    return paths


def run_cli(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestMeteorCommand:
    def test_cat_cat(self, capsys):
        code, out, _ = run_cli(["meteor", "cat", "cat"], capsys)
        assert code == 0
        assert out == "0.500000\n"

    def test_traffic_light(self, capsys):
        code, out, _ = run_cli(["meteor", "traffic light", "traffic light"], capsys)
        assert code == 0
        assert out == "0.937500\n"

    def test_custom_gamma(self, capsys):
        code, out, _ = run_cli(["meteor", "cat", "cat", "--gamma", "0.0"], capsys)
        assert out == "1.000000\n"


class TestEvaluateCommand:
    def test_mapped_perfect_fixture(self, fixture_dir, capsys):
        code, out, _ = run_cli(
            [
                "evaluate", "--protocol", "mapped",
                "--gt", fixture_dir["ground_truth"],
                "--det", fixture_dir["detections"],
                "--taxonomy", fixture_dir["taxonomy"],
                "--emb", fixture_dir["embeddings"],
            ],
            capsys,
        )
        assert code == 0
        assert '"ap_all": 1.0000' in out
        report = json.loads(out)
        assert report["ap_r"] == report["ap_c"] == report["ap_f"] == 1.0

    def test_meteor_protocol(self, fixture_dir, capsys):
        code, out, _ = run_cli(
            [
                "evaluate", "--protocol", "meteor",
                "--gt", fixture_dir["ground_truth"],
                "--det", fixture_dir["detections"],
            ],
            capsys,
        )
        assert code == 0
        assert '"map_densecap": 1.0000' in out

    def test_missing_labels_exit_1(self, tmp_path, fixture_dir, capsys):
        gt = {
            "images": [{"id": 0, "width": 100, "height": 100}],
            "annotations": [
                {"image_id": 0, "bbox": [0, 0, 10, 10], "category_id": 1, "label": "ok"},
                {"image_id": 0, "bbox": [5, 5, 10, 10], "category_id": 1},
            ],
        }
        gt_path = tmp_path / "gt_nolabel.json"
        gt_path.write_text(json.dumps(gt))
        code, out, err = run_cli(
            ["evaluate", "--protocol", "meteor", "--gt", str(gt_path),
             "--det", fixture_dir["detections"]],
            capsys,
        )
        assert code == 1
        assert "record 1" in err

    def test_mapped_without_taxonomy_is_usage_error(self, fixture_dir, capsys):
        code, _, err = run_cli(
            ["evaluate", "--protocol", "mapped", "--gt", fixture_dir["ground_truth"],
             "--det", fixture_dir["detections"]],
            capsys,
        )
        assert code == 2
        assert "--taxonomy" in err

    def test_threads_do_not_change_bytes(self, fixture_dir, tmp_path, capsys):
        outs = []
        for threads, name in ((1, "a.json"), (8, "b.json")):
            out_path = tmp_path / name
            code, _, _ = run_cli(
                [
                    "evaluate", "--protocol", "mapped",
                    "--gt", fixture_dir["ground_truth"],
                    "--det", fixture_dir["detections"],
                    "--taxonomy", fixture_dir["taxonomy"],
                    "--emb", fixture_dir["embeddings"],
                    "--threads", str(threads),
                    "--out", str(out_path),
                ],
                capsys,
            )
            assert code == 0
            outs.append(out_path.read_bytes())
        assert outs[0] == outs[1]

    def test_config_override(self, fixture_dir, tmp_path, capsys):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps({"ap_iou_grid": [0.5], "per_class_cap": 50}))
        code, out, _ = run_cli(
            [
                "evaluate", "--protocol", "mapped",
                "--gt", fixture_dir["ground_truth"],
                "--det", fixture_dir["detections"],
                "--taxonomy", fixture_dir["taxonomy"],
                "--emb", fixture_dir["embeddings"],
                "--config", str(cfg),
            ],
            capsys,
        )
        assert code == 0
        assert json.loads(out)["iou_grid"] == [0.5]


class TestUsageErrors:
    def test_unknown_subcommand_exit_2(self):
        with pytest.raises(SystemExit) as err:
            main(["frobnicate"])
        assert err.value.code == 2

    def test_missing_file_exit_1(self, capsys):
        code, _, err = run_cli(["validate", "--taxonomy", "/nonexistent.json"], capsys)
        assert code == 1
        assert "error:" in err


class TestValidateCommand:
    def test_summary(self, fixture_dir, capsys):
        code, out, _ = run_cli(
            ["validate", "--taxonomy", fixture_dir["taxonomy"],
             "--gt", fixture_dir["ground_truth"],
             "--det", fixture_dir["detections"],
             "--emb", fixture_dir["embeddings"]],
            capsys,
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["status"] == "ok"
        assert doc["taxonomy"]["categories"] == 6
        assert doc["ground_truth"]["annotations"] == 120

    def test_no_inputs_usage_error(self, capsys):
        code, _, _ = run_cli(["validate"], capsys)
        assert code == 2

    def test_referential_break_exit_1(self, tmp_path, fixture_dir, capsys):
        gt = {"images": [], "annotations": [
            {"image_id": 0, "bbox": [0, 0, 5, 5], "category_id": 999}]}
        path = tmp_path / "gt.json"
        path.write_text(json.dumps(gt))
        code, _, err = run_cli(
            ["validate", "--taxonomy", fixture_dir["taxonomy"], "--gt", str(path)], capsys
        )
        assert code == 1
        assert "999" in err


class TestPipelineCommands:
    def test_map_labels_lines(self, fixture_dir, capsys):
        code, out, _ = run_cli(
            ["map-labels", "--det", fixture_dir["detections"],
             "--taxonomy", fixture_dir["taxonomy"], "--emb", fixture_dir["embeddings"]],
            capsys,
        )
        assert code == 0
        lines = [json.loads(x) for x in out.strip().splitlines()]
        assert lines
        assert set(lines[0]) == {"image_id", "bbox", "category_id", "score",
                                 "similarity", "candidate"}

    def test_nms_idempotent_via_cli(self, fixture_dir, tmp_path, capsys):
        first = tmp_path / "once.jsonl"
        code, _, _ = run_cli(
            ["nms", "--det", fixture_dir["detections"], "--threshold", "0.5",
             "--out", str(first)], capsys,
        )
        assert code == 0
        second = tmp_path / "twice.jsonl"
        code, _, _ = run_cli(
            ["nms", "--det", str(first), "--threshold", "0.5", "--out", str(second)],
            capsys,
        )
        assert code == 0
        assert first.read_bytes() == second.read_bytes()

    def test_merge_pseudo(self, tmp_path, capsys):
        initial = tmp_path / "initial.jsonl"
        supp = tmp_path / "supp.jsonl"
        rec = {"image_id": 0, "bbox": [0, 0, 10, 10], "score": 0.9,
               "candidates": [{"text": "dog", "logprob": -0.1}]}
        initial.write_text(json.dumps(rec) + "\n")
        supp_records = [
            dict(rec, bbox=[0, 0, 10, 10], score=0.8),      # suppressed by initial
            dict(rec, bbox=[500, 500, 10, 10], score=0.4),  # below confidence
            dict(rec, bbox=[200, 200, 10, 10], score=0.7),  # survives
        ]
        supp.write_text("".join(json.dumps(r) + "\n" for r in supp_records))
        out = tmp_path / "merged.jsonl"
        code, _, _ = run_cli(
            ["merge-pseudo", "--initial", str(initial), "--supplemental", str(supp),
             "--out", str(out)], capsys,
        )
        assert code == 0
        merged = [json.loads(x) for x in out.read_text().splitlines()]
        assert len(merged) == 2
        assert merged[0]["source"] == "initial"
        assert merged[1]["source"] == "supplemental"
        assert merged[1]["bbox"] == [200.0, 200.0, 10.0, 10.0]

    def test_losses_fixture(self, tmp_path, capsys):
        doc = {
            "image_size": [100, 100],
            "predictions": [{"box": [0, 0, 10, 10], "fg_prob": 0.5}],
            "ground_truth": [[0, 0, 10, 10]],
            "alignment": {"scores": [[0.0, 0.0]], "positives": [0]},
            "language_model": [{"steps": [[0.25, 0.25, 0.25, 0.25]] * 2,
                                "targets": [1, 3]}],
        }
        path = tmp_path / "loss_fixture.json"
        path.write_text(json.dumps(doc))
        code, out, _ = run_cli(["losses", "--fixture", str(path)], capsys)
        assert code == 0
        report = json.loads(out)
        assert report["l_bce"] == 0.6931
        assert report["l_l1"] == 0.0
        assert report["l_giou"] == 0.0
        assert report["l_align"] == 1.3863
        assert report["l_lm"] == 2.7726
        assert report["total"] == round(0.6931471805599453 + 1.3862943611198906
                                        + 2.772588722239781, 4)

    def test_beam_demo(self, tmp_path, capsys):
        model = {
            "vocab_size": 3,
            "eos_token": 0,
            "table": {
                "": [0.1, 0.6, 0.3],
                "1": [0.5, 0.2, 0.3],
                "2": [0.8, 0.1, 0.1],
            },
            "default": [1.0, 0.0, 0.0],
        }
        path = tmp_path / "model.json"
        path.write_text(json.dumps(model))
        code, out, _ = run_cli(
            ["beam-demo", "--model", str(path), "--beam-size", "3", "--max-len", "2"],
            capsys,
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["sequences"][0]["tokens"] == [1, 0]

    def test_synth_writes_files(self, tmp_path, capsys):
        code, out, _ = run_cli(
            ["synth", "--out-dir", str(tmp_path / "s"), "--scenes", "2", "--seed", "1"],
            capsys,
        )
        assert code == 0
        paths = json.loads(out)
        for p in paths.values():
            assert (tmp_path / "s").exists()
            assert open(p).read()


class TestModuleEntryPoint:
    def test_python_dash_m(self):
        proc = subprocess.run(
            [sys.executable, "-m", "freedet", "meteor", "cat", "cat"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert proc.stdout == "0.500000\n"

    def test_help_lists_defaults(self):
        proc = subprocess.run(
            [sys.executable, "-m", "freedet", "evaluate", "--help"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "--threads" in proc.stdout
        assert "default" in proc.stdout
