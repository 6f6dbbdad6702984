"""
服务模块

CLI 命令的执行层
"""

from .command_service import CommandService

__all__ = [
    "CommandService",
]
