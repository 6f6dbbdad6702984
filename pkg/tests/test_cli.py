"""命令行入口的测试"""

import json

import numpy as np
import pytest

from cp_guard.cli import main
from cp_guard.data import Split, TrajectoryDataset
from cp_guard.scenarios.io import write_dataset


def write_config(tmp_path, config: dict):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    return str(path)


def stl_dataset_config(tmp_path, values: np.ndarray) -> str:
    """由常值轨迹构造 verify-leas 的配置, 规约为 G[0,2] x >= 0"""
    data = np.repeat(values[:, None, None], 3, axis=1)
    csv = write_dataset(TrajectoryDataset(data, Split.CALIBRATE), tmp_path / "calib.csv")
    return write_config(
        tmp_path,
        {"dataset": {"path": str(csv)}, "stl": {"formula": "G[0,2] x >= 0", "signals": ["x"]}},
    )


def read_report(out) -> dict:
    return json.loads((out / "report.json").read_text(encoding="utf-8"))


class TestVerifyLeas:
    """验证结论对应的退出码"""

    def test_certified(self, tmp_path):
        config = stl_dataset_config(tmp_path, 1.0 + np.arange(30.0))
        out = tmp_path / "out"
        assert main(["verify-leas", "--config", config, "--out", str(out), "--delta", "0.05"]) == 0
        report = read_report(out)
        assert report["status"] == "certified"
        assert report["K"] == 30

    def test_refuted(self, tmp_path):
        config = stl_dataset_config(tmp_path, -1.0 - np.arange(30.0))
        out = tmp_path / "out"
        assert main(["verify-leas", "--config", config, "--out", str(out)]) == 2
        assert read_report(out)["status"] == "refuted"

    def test_inconclusive_with_few_samples(self, tmp_path):
        config = stl_dataset_config(tmp_path, 1.0 + np.arange(10.0))
        out = tmp_path / "out"
        assert main(["verify-leas", "--config", config, "--out", str(out), "--delta", "0.05"]) == 3
        assert read_report(out)["margin"]["kind"] == "infinite"


class TestCommands:
    """其它命令"""

    def test_calibrate_scores_file(self, tmp_path):
        scores = tmp_path / "scores.csv"
        scores.write_text("score\n" + "\n".join(str(float(i)) for i in range(1, 20)) + "\n", encoding="utf-8")
        config = write_config(tmp_path, {"scores": {"path": str(scores), "column": "score"}})
        out = tmp_path / "out"
        assert main(["calibrate", "--config", config, "--out", str(out), "--delta", "0.05"]) == 0
        report = read_report(out)
        assert report["quantile"]["value"] == 19.0
        assert report["quantile"]["K"] == 19

    def test_calibrate_missing_column(self, tmp_path):
        scores = tmp_path / "scores.csv"
        scores.write_text("score\n1.0\n", encoding="utf-8")
        config = write_config(tmp_path, {"scores": {"path": str(scores), "column": "other"}})
        assert main(["calibrate", "--config", config, "--out", str(tmp_path / "out")]) == 1

    def test_calibrate_sensor_scenario(self, tmp_path):
        out = tmp_path / "out"
        assert main(["calibrate", "--k", "200", "--seed", "4", "--out", str(out)]) == 0
        report = read_report(out)
        assert report["source"] == "sensor-navigation"
        assert report["seed"] == 4

    def test_smc(self, tmp_path):
        config = stl_dataset_config(tmp_path, np.array([1.0] * 7 + [-1.0] * 3))
        out = tmp_path / "out"
        assert main(["smc", "--config", config, "--out", str(out)]) == 0
        assert read_report(out)["bound"] == pytest.approx(7 / 11)

    def test_spec_required_for_scenarios_without_default(self, tmp_path):
        config = write_config(tmp_path, {"scenario": {"name": "noisy-unicycle"}})
        assert main(["verify-leas", "--config", config, "--k", "20", "--out", str(tmp_path / "out")]) == 1

    def test_experiment_list(self, capsys):
        assert main(["experiment", "list"]) == 0
        assert "sensor-calibration" in capsys.readouterr().out

    def test_experiment_run(self, tmp_path):
        config = write_config(
            tmp_path,
            {"experiment": {"name": "sensor-calibration", "repetitions": 2, "params": {"k_values": [20], "test_size": 20}}},
        )
        out = tmp_path / "out"
        assert main(["experiment", "run", "sensor-calibration", "--config", config, "--out", str(out)]) == 0
        assert read_report(out)["name"] == "sensor-calibration"
        assert (out / "cec.csv").exists()


class TestConfigErrors:
    """配置错误返回 1"""

    def test_invalid_delta(self, tmp_path):
        config = write_config(tmp_path, {"delta": 2})
        assert main(["calibrate", "--config", config]) == 1

    def test_command_line_override_is_validated(self, tmp_path):
        assert main(["calibrate", "--delta", "1.5", "--out", str(tmp_path)]) == 1

    def test_missing_config_file(self, tmp_path):
        assert main(["calibrate", "--config", str(tmp_path / "absent.json")]) == 1

    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            main(["teleport"])
