"""
cp-guard - 主程序

支持的命令：
- calibrate / verify-lec / verify-leas / abstract / monitor / control / smc
- experiment run <name>: 运行注册的实验
- experiment list: 列出所有实验
"""

import sys

from cp_guard.cli import main


def print_usage():
    """打印使用说明"""
    print("\n📖 使用说明:")
    print("  python main.py calibrate --k 1000 --delta 0.05       # 传感器误差校准")
    print("  python main.py verify-leas --config cartpole.json    # STL 规约验证")
    print("  python main.py experiment run sensor-calibration     # 运行实验")
    print("  python main.py experiment list                       # 列出实验")


if __name__ == "__main__":
    if len(sys.argv) < 2:
        print("❌ 请指定命令")
        print_usage()
        sys.exit(1)
    sys.exit(main(sys.argv[1:]))
