"""
命令行入口

cp-guard calibrate | verify-lec | verify-leas | abstract | monitor | control | experiment run <name> | smc
通用参数: --config <file> --seed <u64> --out <dir> --delta <f> --k <n>
"""

import argparse
import sys
from typing import Any, Dict, List, Optional

from cp_guard import __version__
from cp_guard.services import CommandService
from cp_guard.task import registry
from cp_guard.utils.config import Config, load_json_config, load_schema, validate_against_schema
from cp_guard.utils.errors import ConfigError
from cp_guard.utils.logger import setup_logging

COMMANDS = {
    "calibrate": "保形分位数校准 (分数文件或传感器场景)",
    "verify-lec": "学习组件的输出可达性验证",
    "verify-leas": "闭环系统轨迹的 STL 规约验证",
    "abstract": "构造预测误差的统计抽象",
    "monitor": "预测式 STL 运行时监控",
    "control": "避让行人场景上的单个控制过程",
    "smc": "统计模型检验的满足概率下界",
}


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON 配置文件")
    common.add_argument("--seed", type=int, help="随机种子")
    common.add_argument("--out", help="产物目录")
    common.add_argument("--delta", type=float, help="失效概率 δ")
    common.add_argument("--k", type=int, help="校准集大小 K")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(prog="cp-guard", description="基于保形预测的验证、监控与控制")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    for name, help_text in COMMANDS.items():
        commands.add_parser(name, parents=[common], help=help_text)

    experiment = commands.add_parser("experiment", help="实验")
    actions = experiment.add_subparsers(dest="action", required=True)
    run = actions.add_parser("run", parents=[common], help="运行注册的实验")
    run.add_argument("name", choices=registry.names())
    actions.add_parser("list", help="列出所有实验")
    return parser


def merge_options(args: argparse.Namespace) -> Dict[str, Any]:
    """读取配置文件并用命令行参数覆盖同名字段"""
    config = load_json_config(args.config) if getattr(args, "config", None) else {}
    for key in ("seed", "out", "delta", "k"):
        value = getattr(args, key, None)
        if value is not None:
            config[key] = value
    validate_against_schema(config, load_schema())
    return config


def main(argv: Optional[List[str]] = None) -> int:
    """
    解析参数并执行命令

    Returns:
        int: 退出码; 验证命令 0 认证 / 2 否定 / 3 无结论, 出错为 1
    """
    args = build_parser().parse_args(argv)
    logger = setup_logging("cli")

    if args.command == "experiment" and args.action == "list":
        for item in registry.describe():
            print(f"{item['name']:<22} {item['description']}")
        return 0

    try:
        Config.validate_config()
        config = merge_options(args)
    except ConfigError as e:
        logger.error(f"配置无效: {e}")
        return 1

    service = CommandService(config)
    if args.command == "experiment":
        return service.run("experiment", name=args.name)
    return service.run(args.command)


if __name__ == "__main__":
    sys.exit(main())
