import json

import pytest

from kp3d import cli, kitti_io
from kp3d.evaluation import Detection
from kp3d.geometry import Box3D

GT_LINE = "Car 0.00 0 -1.57 100.0 120.0 200.0 180.0 1.50 1.60 3.80 -2.0 1.7 30.0 -1.64"


def write_fixture(tmp_path, dets_equal_gt=True):
    gt_dir = tmp_path / "gt"
    det_dir = tmp_path / "det"
    gt_dir.mkdir()
    det_dir.mkdir()
    (gt_dir / "000000.txt").write_text(GT_LINE + "\n")
    if dets_equal_gt:
        (det_dir / "000000.txt").write_text(GT_LINE + " 0.95\n")
    else:
        # one FP at higher score, then the TP
        fp = Detection(box=Box3D((15.0, 0.95, 30.0), (1.5, 1.6, 3.8), 0.0), cls="Car", score=0.9)
        lines = [kitti_io.serialize_detection(fp), GT_LINE + " 0.80"]
        (det_dir / "000000.txt").write_text("\n".join(lines) + "\n")
    return gt_dir, det_dir


class TestEvalCommand:
    def test_self_evaluation_ap_100(self, tmp_path):
        gt_dir, det_dir = write_fixture(tmp_path)
        out = tmp_path / "report.json"
        code = cli.main(
            ["eval", "--gt-dir", str(gt_dir), "--det-dir", str(det_dir),
             "--criterion", "3d", "--iou", "0.7", "--mode", "r11", "--out", str(out)]
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert report["ap"] == 100.0

    def test_fp_tp_fixture_ap_50(self, tmp_path):
        gt_dir, det_dir = write_fixture(tmp_path, dets_equal_gt=False)
        out = tmp_path / "report.json"
        code = cli.main(
            ["eval", "--gt-dir", str(gt_dir), "--det-dir", str(det_dir), "--out", str(out)]
        )
        assert code == 0
        assert json.loads(out.read_text())["ap"] == 50.0

    def test_missing_directory_exit_2(self, tmp_path):
        assert cli.main(["eval", "--gt-dir", str(tmp_path / "nope"), "--det-dir", str(tmp_path)]) == 2

    def test_missing_detection_frame_exit_2(self, tmp_path):
        gt_dir, det_dir = write_fixture(tmp_path)
        (gt_dir / "000001.txt").write_text(GT_LINE + "\n")
        assert cli.main(["eval", "--gt-dir", str(gt_dir), "--det-dir", str(det_dir)]) == 2

    def test_parse_error_exit_3(self, tmp_path):
        gt_dir, det_dir = write_fixture(tmp_path)
        (det_dir / "000000.txt").write_text("Car 1 2\n")
        out = tmp_path / "report.json"
        assert cli.main(
            ["eval", "--gt-dir", str(gt_dir), "--det-dir", str(det_dir), "--out", str(out)]
        ) == 3


class TestBenchCommand:
    def test_default_flop_ratio(self, tmp_path, capsys):
        out = tmp_path / "bench.csv"
        code = cli.main(["bench", "--reps", "12", "--no-assert", "--out", str(out)])
        assert code == 0
        row = out.read_text().splitlines()[1].split(",")
        assert float(row[7]) == 102.4

    def test_k_zero_row(self, tmp_path):
        out = tmp_path / "bench.csv"
        code = cli.main(["bench", "--reps", "12", "--k", "0", "--no-assert", "--out", str(out)])
        assert code == 0
        assert out.read_text().splitlines()[1].split(",")[6] == "0"

    def test_no_assert_never_fails_on_slow_measurement(self, tmp_path):
        out = tmp_path / "bench.csv"
        code = cli.main(
            ["bench", "--reps", "12", "--no-assert", "--min-speedup", "1e9", "--out", str(out)]
        )
        assert code == 0


class TestDemoCommand:
    def test_zero_noise_perfect_ap(self, tmp_path):
        out_dir = tmp_path / "demo"
        code = cli.main(
            ["demo", "--seed", "1", "--n-scenes", "2", "--n-objects", "4",
             "--noise", "0", "--epochs", "60", "--out-dir", str(out_dir)]
        )
        assert code == 0
        report = json.loads((out_dir / "report.json").read_text())
        assert report["mean_ap"] == 100.0
        assert (out_dir / "bev" / "000000.svg").exists()
        assert (out_dir / "label_det" / "000001.txt").exists()

    def test_same_seed_byte_identical_svg(self, tmp_path):
        svgs = []
        for name in ("a", "b"):
            out_dir = tmp_path / name
            cli.main(
                ["demo", "--seed", "3", "--n-scenes", "1", "--n-objects", "3",
                 "--noise", "0", "--epochs", "20", "--out-dir", str(out_dir)]
            )
            svgs.append((out_dir / "bev" / "000000.svg").read_bytes())
        assert svgs[0] == svgs[1]

    def test_attention_beta_zero_matches_l1(self, tmp_path):
        outputs = []
        for name, flags in [("l1", ["--loss", "l1"]), ("attn", ["--loss", "attention", "--beta-attn", "0"])]:
            out_dir = tmp_path / name
            cli.main(
                ["demo", "--seed", "2", "--n-scenes", "1", "--n-objects", "3",
                 "--noise", "0", "--epochs", "30", "--out-dir", str(out_dir), *flags]
            )
            outputs.append((out_dir / "label_det" / "000000.txt").read_bytes())
        assert outputs[0] == outputs[1]


class TestGradcheckCommand:
    def test_passes(self, capsys):
        assert cli.main(["gradcheck", "--trials", "5"]) == 0
        assert "passed" in capsys.readouterr().out

    def test_detects_injected_wrong_sign(self):
        assert cli.main(["gradcheck", "--trials", "2", "--self-test-wrong-sign"]) == 5

    def test_step_echoed(self, capsys):
        cli.main(["gradcheck", "--trials", "1", "--step", "1e-5"])
        assert "1e-05" in capsys.readouterr().out

    def test_unknown_flag_exits_64(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["gradcheck", "--bogus"])
        assert exc.value.code == 64

    def test_help_exits_zero(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["--help"])
        assert exc.value.code == 0
