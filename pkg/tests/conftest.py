"""测试公共夹具"""

import numpy as np
import pytest

from cp_guard.utils.config import Config


@pytest.fixture(autouse=True)
def _no_log_files(monkeypatch):
    """测试中不写日志文件"""
    monkeypatch.setattr(Config, "LOG_TO_FILE", False)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240917)
