"""
异常定义模块

库内操作统一抛出以下异常，由任务层和服务层捕获并记录日志
"""

from typing import Optional


class CPGuardError(Exception):
    """cp_guard 所有异常的基类"""


class ArgumentError(CPGuardError, ValueError):
    """参数不合法"""


class TraceTooShortError(ArgumentError):
    """轨迹长度不足以评估公式"""

    def __init__(self, required_length: int, actual_length: int):
        self.required_length = required_length
        self.actual_length = actual_length
        super().__init__(f"轨迹长度不足: 需要至少 {required_length} 个状态, 实际 {actual_length} 个")


class STLSyntaxError(ArgumentError):
    """STL 公式语法错误"""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        position = f" (第 {line} 行, 第 {column} 列)" if line is not None else ""
        super().__init__(f"{message}{position}")


class UnknownPredicateError(ArgumentError):
    """公式中引用了谓词表中不存在的名称"""


class SplitError(ArgumentError):
    """数据集划分标签不满足要求"""


class NumericalError(CPGuardError, ArithmeticError):
    """数值计算失败，例如二分法不收敛"""


class InfeasibleError(CPGuardError):
    """优化问题在迭代预算内不可行"""

    def __init__(self, message: str, max_violation: float):
        self.max_violation = max_violation
        super().__init__(f"{message}, 最大约束违反量: {max_violation:.3e}")


class ConfigError(CPGuardError, ValueError):
    """配置文件不符合 schema"""

    def __init__(self, message: str, field_path: str = ""):
        self.field_path = field_path
        where = field_path or "<root>"
        super().__init__(f"配置错误 [{where}]: {message}")


class UnknownExperimentError(CPGuardError, KeyError):
    """实验名称未注册"""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "未知实验"
