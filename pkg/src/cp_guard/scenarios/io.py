"""
数据集与实验产物的读写

数据集 CSV 表头为 traj_id,t,c0,c1,...; 报告写为 report.json,
C 值、CEC 与直方图写为 CSV
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Union

import numpy as np
import pandas as pd

from cp_guard.data.dataset import Split, TrajectoryDataset
from cp_guard.scenarios.statistics import Histogram
from cp_guard.utils.errors import ArgumentError

logger = logging.getLogger("cp_guard.scenarios.io")

PathLike = Union[str, Path]


def dataset_frame(dataset: TrajectoryDataset) -> pd.DataFrame:
    """(K, T+1, n) → 长表"""
    K, L, n = dataset.trajectories.shape
    frame = pd.DataFrame(dataset.trajectories.reshape(K * L, n), columns=[f"c{i}" for i in range(n)])
    frame.insert(0, "t", np.tile(np.arange(L), K))
    frame.insert(0, "traj_id", np.repeat(np.arange(K), L))
    return frame


def write_dataset(dataset: TrajectoryDataset, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dataset_frame(dataset).to_csv(path, index=False, lineterminator="\n")
    logger.info(f"数据集已写入: {path} (K={dataset.K}, T={dataset.T})")
    return path


def read_dataset(path: PathLike, split: Split = Split.CALIBRATE, agents=None) -> TrajectoryDataset:
    """
    读取 traj_id,t,c0,... 格式的 CSV

    Raises:
        ArgumentError: 表头不符或轨迹长度不一致
    """
    frame = pd.read_csv(path)
    columns = [c for c in frame.columns if c.startswith("c")]
    if list(frame.columns[:2]) != ["traj_id", "t"] or not columns:
        raise ArgumentError(f"数据集表头应为 traj_id,t,c0,...: {list(frame.columns)}")
    frame = frame.sort_values(["traj_id", "t"], kind="stable")
    lengths = frame.groupby("traj_id")["t"].count()
    if lengths.nunique() != 1:
        raise ArgumentError(f"轨迹长度不一致: {sorted(lengths.unique().tolist())}")
    K, L = int(lengths.size), int(lengths.iloc[0])
    values = frame[sorted(columns, key=lambda c: int(c[1:]))].to_numpy(dtype=float)
    return TrajectoryDataset(values.reshape(K, L, len(columns)), split, agents)


def _jsonable(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        # JSON 无 inf, 用字符串标记
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(value, np.bool_):
        return bool(value)
    if hasattr(value, "to_dict"):
        return _jsonable(value.to_dict())
    return value


def write_report(report: Mapping[str, Any], out_dir: PathLike) -> Path:
    path = Path(out_dir) / "report.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(report), ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_table(rows: Union[pd.DataFrame, Mapping[str, Iterable], Iterable[Mapping]], path: PathLike) -> Path:
    """把表格写为 CSV, 接受 DataFrame、列字典或行字典列表"""
    frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(rows)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def write_histograms(histograms: Mapping[str, Histogram], out_dir: PathLike) -> Dict[str, Path]:
    return {name: write_table(h.to_frame(), Path(out_dir) / f"hist_{name}.csv") for name, h in histograms.items()}


def write_artifacts(
    out_dir: PathLike,
    report: Mapping[str, Any],
    c_values: Optional[pd.DataFrame] = None,
    cec: Optional[pd.DataFrame] = None,
    histograms: Optional[Mapping[str, Histogram]] = None,
) -> Dict[str, Path]:
    """
    写出一次实验的全部产物

    Returns:
        Dict[str, Path]: 产物名 → 路径
    """
    out = Path(out_dir)
    paths = {"report": write_report(report, out)}
    if c_values is not None:
        paths["c_values"] = write_table(c_values, out / "c_values.csv")
    if cec is not None:
        paths["cec"] = write_table(cec, out / "cec.csv")
    for name, path in write_histograms(histograms or {}, out).items():
        paths[f"hist_{name}"] = path
    logger.info(f"实验产物已写入: {out} ({len(paths)} 个文件)")
    return paths
