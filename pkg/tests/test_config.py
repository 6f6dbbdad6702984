"""配置校验的测试"""

import json

import pytest

from cp_guard.utils.config import Config, load_json_config, load_schema, validate_against_schema
from cp_guard.utils.errors import ConfigError

SCHEMA = load_schema()


def field_path(data) -> str:
    with pytest.raises(ConfigError) as info:
        validate_against_schema(data, SCHEMA)
    return info.value.field_path


class TestSchema:
    """字段路径定位"""

    def test_valid_config(self):
        validate_against_schema(
            {
                "seed": 3,
                "delta": 0.1,
                "k": 100,
                "scenario": {"name": "cartpole", "params": {"horizon": 50}},
                "stl": {"formula": "G[0,5] p <= 1", "signals": ["p", "v", "theta", "omega"]},
                "monitor": {"t": 10, "method": "interpretable", "divergence": "kl", "epsilon": 0.01},
            },
            SCHEMA,
        )

    @pytest.mark.parametrize(
        "data, path",
        [
            ({"delta": 1.0}, "delta"),
            ({"delta": 0}, "delta"),
            ({"seed": -1}, "seed"),
            ({"seed": True}, "seed"),
            ({"k": 0}, "k"),
            ({"bogus": 1}, "bogus"),
            ({"scenario": {"name": "submarine"}}, "scenario.name"),
            ({"scenario": {}}, "scenario.name"),
            ({"stl": {"formula": "x >= 0"}}, "stl.signals"),
            ({"stl": {"formula": "x >= 0", "signals": ["x", 1]}}, "stl.signals[1]"),
            ({"predictor": {"order": 11}}, "predictor.order"),
            ({"solver": {"tol": 0.0}}, "solver.tol"),
            ({"monitor": {"method": "fast"}}, "monitor.method"),
        ],
    )
    def test_field_paths(self, data, path):
        assert field_path(data) == path

    def test_root_must_be_object(self):
        assert field_path([1, 2]) == ""


class TestLoadJsonConfig:
    """配置文件读取"""

    def test_load(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"seed": 1, "abstraction": {"method": "naive"}}), encoding="utf-8")
        assert load_json_config(path)["abstraction"]["method"] == "naive"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_json_config(tmp_path / "absent.json")

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{\"seed\": 1,", encoding="utf-8")
        with pytest.raises(ConfigError) as info:
            load_json_config(path)
        assert "JSON" in str(info.value)

    def test_schema_violation(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"control": {"loop": "sideways"}}), encoding="utf-8")
        with pytest.raises(ConfigError) as info:
            load_json_config(path)
        assert info.value.field_path == "control.loop"


class TestEnvironmentConfig:
    """环境变量默认值"""

    def test_defaults_are_valid(self):
        assert Config.validate_config()

    def test_delta_out_of_range(self, monkeypatch):
        monkeypatch.setattr(Config, "DEFAULT_DELTA", 1.5)
        with pytest.raises(ConfigError) as info:
            Config.validate_config()
        assert info.value.field_path == "DEFAULT_DELTA"

    def test_ridge_order_limit(self, monkeypatch):
        monkeypatch.setattr(Config, "RIDGE_MAX_ORDER", 11)
        with pytest.raises(ConfigError):
            Config.validate_config()

    def test_solver_config(self):
        assert set(Config.get_solver_config()) == {"max_iter", "tol", "feasibility_tol"}
