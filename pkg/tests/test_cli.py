"""CLI subcommands, exit codes, determinism."""

import json

import numpy as np
import pytest

from gspline.cli import main, resolve_config
from gspline.tensorio import load_tensor


class TestResolveConfig:
    def test_bundled_preset(self):
        cfg = resolve_config("pcam_desk")
        assert cfg["layers"][0]["type"] == "lift"

    def test_disk_path_wins(self, tmp_path):
        path = tmp_path / "net.json"
        path.write_text(json.dumps({"layers": []}))
        assert resolve_config(str(path)) == {"layers": []}

    def test_missing_raises(self):
        with pytest.raises(FileNotFoundError):
            resolve_config("no_such_preset")


class TestExitCodes:
    def test_argument_error_is_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["definitely-not-a-command"])
        assert exc.value.code == 2

    def test_missing_config_is_1(self, capsys):
        assert main(["gradcheck", "--config", "no_such_preset"]) == 1
        assert "error:" in capsys.readouterr().err

    def test_passing_check_is_0(self, capsys):
        assert main(["pou", "--group", "so2", "--n-h", "8"]) == 0
        out = capsys.readouterr().out
        assert json.loads(out.splitlines()[0])["pass"] is True

    def test_failing_check_is_1(self, capsys):
        # an s_h incommensurate with the grid breaks the tiling
        code = main(["pou", "--group", "so2", "--n-h", "8", "--s-h", "0.55"])
        assert code == 1


class TestKernelSample:
    def test_writes_tensor_and_is_deterministic(self, tmp_path, capsys):
        out1 = tmp_path / "a.gst"
        out2 = tmp_path / "b.gst"
        args = ["--seed", "3", "kernel-sample", "--group", "so2", "--n-h", "4",
                "--size", "3", "--mode", "group"]
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        a = load_tensor(out1)
        b = load_tensor(out2)
        assert a.shape == (4, 1, 1, 4, 3, 3)
        assert np.array_equal(a, b)
        # bit-identical on disk as well
        assert out1.read_bytes() == out2.read_bytes()

    def test_lifting_mode_shape(self, tmp_path):
        out = tmp_path / "l.gst"
        assert main(["kernel-sample", "--mode", "lifting", "--n-h", "4",
                     "--size", "5", "--out", str(out)]) == 0
        assert load_tensor(out).shape == (4, 1, 1, 5, 5)

    def test_seed_changes_output(self, tmp_path):
        out1 = tmp_path / "a.gst"
        out2 = tmp_path / "b.gst"
        main(["--seed", "1", "kernel-sample", "--size", "3", "--n-h", "2",
              "--out", str(out1)])
        main(["--seed", "2", "kernel-sample", "--size", "3", "--n-h", "2",
              "--out", str(out2)])
        assert not np.array_equal(load_tensor(out1), load_tensor(out2))


class TestVerify:
    def test_scale_space_suite(self, tmp_path, capsys):
        report_path = tmp_path / "report.jsonl"
        code = main(["verify", "--suite", "scale_space", "--json", str(report_path)])
        assert code == 0
        lines = report_path.read_text().strip().splitlines()
        assert lines
        for line in lines:
            assert json.loads(line)["pass"] is True

    def test_gauge_suite(self, capsys):
        assert main(["verify", "--suite", "gauge"]) == 0


class TestTrainToy:
    def test_quick_run_prints_accuracy(self, capsys):
        code = main([
            "train-toy", "--task", "rot_patterns", "--config", "pcam_desk",
            "--n-train", "8", "--n-test", "8", "--epochs", "1", "--batch", "8",
            "--lr", "0.05",
        ])
        assert code == 0
        out = capsys.readouterr().out
        result = json.loads(out.splitlines()[0])
        assert "test_accuracy" in result and len(result["losses"]) == 1


class TestGradcheckCommand:
    def test_small_config_passes(self, tmp_path, capsys):
        cfg = {
            "input": {"channels": 1, "size": 8},
            "layers": [
                {"type": "lift", "out_channels": 2, "size": 3, "n_h": 2},
                {"type": "project", "mode": "integral"},
                {"type": "bias"},
            ],
        }
        path = tmp_path / "tiny.json"
        path.write_text(json.dumps(cfg))
        assert main(["gradcheck", "--config", str(path), "--probes", "10"]) == 0
