"""
cp_guard - 基于保形预测的验证、监控与控制
"""

__version__ = "0.1.0"
