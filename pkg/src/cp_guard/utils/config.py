"""
配置管理模块

环境变量 (.env) 提供全局默认值，JSON 配置文件提供单次命令/实验的参数
"""

import json
import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

from dotenv import load_dotenv

from cp_guard.utils.errors import ConfigError

# 加载环境变量
load_dotenv()

SCHEMA_PATH = Path(__file__).parent.parent / "schema" / "config.schema.json"


def _env_bool(name: str, default: str) -> bool:
    return os.getenv(name, default).lower() == "true"


class Config:
    """配置管理类"""

    # 日志配置
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")
    LOG_DIR: str = os.getenv("LOG_DIR", "logs")  # 日志目录，相对于项目根目录
    LOG_MAX_BYTES: int = int(os.getenv("LOG_MAX_BYTES", "10485760"))  # 10MB
    LOG_BACKUP_COUNT: int = int(os.getenv("LOG_BACKUP_COUNT", "7"))
    LOG_TO_FILE: bool = _env_bool("LOG_TO_FILE", "true")

    # 实验默认值
    DEFAULT_SEED: int = int(os.getenv("DEFAULT_SEED", "0"))
    DEFAULT_DELTA: float = float(os.getenv("DEFAULT_DELTA", "0.05"))
    OUTPUT_DIR: str = os.getenv("OUTPUT_DIR", "outputs")

    # 控制求解器
    SOLVER_MAX_ITER: int = int(os.getenv("SOLVER_MAX_ITER", "5000"))
    SOLVER_TOL: float = float(os.getenv("SOLVER_TOL", "1e-6"))
    SOLVER_FEASIBILITY_TOL: float = float(os.getenv("SOLVER_FEASIBILITY_TOL", "1e-6"))
    SLACK_FALLBACK: bool = _env_bool("SLACK_FALLBACK", "false")  # 不可行时改用松弛求解

    # 数值与搜索
    KL_BISECTION_TOL: float = float(os.getenv("KL_BISECTION_TOL", "1e-9"))
    ALPHA_RESTARTS: int = int(os.getenv("ALPHA_RESTARTS", "6"))
    EPS_NET_MAX_POINTS: int = int(os.getenv("EPS_NET_MAX_POINTS", "100000"))
    RIDGE_MAX_ORDER: int = int(os.getenv("RIDGE_MAX_ORDER", "10"))

    @classmethod
    def validate_config(cls) -> bool:
        """
        验证环境配置的取值范围

        Returns:
            配置是否有效

        Raises:
            ConfigError: 任一取值越界
        """
        if not 0.0 < cls.DEFAULT_DELTA < 1.0:
            raise ConfigError("DEFAULT_DELTA 必须位于 (0, 1)", "DEFAULT_DELTA")
        if cls.SOLVER_MAX_ITER < 1:
            raise ConfigError("SOLVER_MAX_ITER 必须为正整数", "SOLVER_MAX_ITER")
        if cls.SOLVER_TOL <= 0 or cls.SOLVER_FEASIBILITY_TOL <= 0:
            raise ConfigError("求解器容差必须为正数", "SOLVER_TOL")
        if cls.KL_BISECTION_TOL <= 0:
            raise ConfigError("KL_BISECTION_TOL 必须为正数", "KL_BISECTION_TOL")
        if not 1 <= cls.RIDGE_MAX_ORDER <= 10:
            raise ConfigError("RIDGE_MAX_ORDER 必须位于 [1, 10]", "RIDGE_MAX_ORDER")
        if cls.EPS_NET_MAX_POINTS < 1:
            raise ConfigError("EPS_NET_MAX_POINTS 必须为正整数", "EPS_NET_MAX_POINTS")
        return True

    @classmethod
    def get_solver_config(cls) -> dict:
        """
        获取控制求解器配置

        Returns:
            求解器参数字典
        """
        return {
            "max_iter": cls.SOLVER_MAX_ITER,
            "tol": cls.SOLVER_TOL,
            "feasibility_tol": cls.SOLVER_FEASIBILITY_TOL,
        }

    @classmethod
    def get_logging_config(cls) -> dict:
        """
        获取日志配置

        Returns:
            日志参数字典
        """
        return {
            "level": cls.LOG_LEVEL,
            "dir": cls.LOG_DIR,
            "max_bytes": cls.LOG_MAX_BYTES,
            "backup_count": cls.LOG_BACKUP_COUNT,
            "to_file": cls.LOG_TO_FILE,
        }


_JSON_TYPES = {
    "object": dict,
    "array": list,
    "string": str,
    "boolean": bool,
}


def _type_matches(value: Any, expected: str) -> bool:
    if expected == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if expected == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if expected == "null":
        return value is None
    return isinstance(value, _JSON_TYPES[expected])


def _join(path: str, key: Union[str, int]) -> str:
    if isinstance(key, int):
        return f"{path}[{key}]"
    return f"{path}.{key}" if path else key


def validate_against_schema(data: Any, schema: Dict[str, Any], path: str = "") -> None:
    """
    按 schema 校验配置数据

    只支持配置文件用到的关键字: type / properties / required /
    additionalProperties / enum / minimum / maximum / exclusiveMinimum /
    exclusiveMaximum / items

    Args:
        data: 待校验数据
        schema: schema 字典
        path: 当前字段路径

    Raises:
        ConfigError: 校验失败，field_path 指向出错字段
    """
    expected = schema.get("type")
    if expected is not None:
        options = expected if isinstance(expected, list) else [expected]
        if not any(_type_matches(data, option) for option in options):
            raise ConfigError(f"类型应为 {expected}, 实际为 {type(data).__name__}", path)

    if "enum" in schema and data not in schema["enum"]:
        raise ConfigError(f"取值 {data!r} 不在 {schema['enum']} 中", path)

    if _type_matches(data, "number"):
        if "minimum" in schema and data < schema["minimum"]:
            raise ConfigError(f"取值 {data} 小于最小值 {schema['minimum']}", path)
        if "maximum" in schema and data > schema["maximum"]:
            raise ConfigError(f"取值 {data} 大于最大值 {schema['maximum']}", path)
        if "exclusiveMinimum" in schema and data <= schema["exclusiveMinimum"]:
            raise ConfigError(f"取值 {data} 必须大于 {schema['exclusiveMinimum']}", path)
        if "exclusiveMaximum" in schema and data >= schema["exclusiveMaximum"]:
            raise ConfigError(f"取值 {data} 必须小于 {schema['exclusiveMaximum']}", path)

    if isinstance(data, dict):
        properties = schema.get("properties", {})
        for key in schema.get("required", []):
            if key not in data:
                raise ConfigError("缺少必填字段", _join(path, key))
        for key, value in data.items():
            if key in properties:
                validate_against_schema(value, properties[key], _join(path, key))
            elif schema.get("additionalProperties") is False:
                raise ConfigError("不允许的字段", _join(path, key))

    if isinstance(data, list) and "items" in schema:
        for index, item in enumerate(data):
            validate_against_schema(item, schema["items"], _join(path, index))


def load_schema(schema_path: Optional[Path] = None) -> Dict[str, Any]:
    """读取随包发布的配置 schema"""
    with open(schema_path or SCHEMA_PATH, encoding="utf-8") as handle:
        return json.load(handle)


def load_json_config(path: Union[str, Path]) -> Dict[str, Any]:
    """
    读取并校验 JSON 配置文件

    Args:
        path: 配置文件路径

    Returns:
        校验通过的配置字典

    Raises:
        ConfigError: 文件无法解析或不符合 schema
    """
    try:
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
    except FileNotFoundError as e:
        raise ConfigError(f"配置文件不存在: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"JSON 解析失败: 第 {e.lineno} 行第 {e.colno} 列 {e.msg}") from e

    validate_against_schema(data, load_schema())
    return data
