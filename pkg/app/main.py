#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
CurveWeaver 命令行入口

子命令：simulate、fit、summarize、gini
退出码：0 成功，1 配置/校验错误，2 读写错误，3 数值中止，4 内部错误
"""

import argparse
import sys
from typing import List, Optional

from loguru import logger
from pydantic import ValidationError

from app.api.commands import cmd_fit, cmd_gini, cmd_simulate, cmd_summarize
from app.core.config import settings
from app.core.errors import CurveWeaverError, SweepAbortError
from app.schemas.request import Scenario
from app.utils.logging.logger import setup_logging

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3
EXIT_INTERNAL = 4


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """解析命令行参数"""
    parser = argparse.ArgumentParser(description=f"{settings.PROJECT_NAME} - 动态洛伦兹曲线与基尼系数的贝叶斯推断")
    parser.add_argument("--debug", action="store_true", help="启用调试日志")
    parser.add_argument("--no-log-file", action="store_true", help="不写入日志文件")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="生成模拟面板与真值")
    sim.add_argument("--K", type=int, default=4, help="观测自变量个数（默认: 4）")
    sim.add_argument("--phi", type=float, default=0.95, help="状态 AR 系数（默认: 0.95）")
    sim.add_argument("--T", type=int, default=200, help="时间长度（默认: 200）")
    sim.add_argument("--seed", type=int, default=settings.DEFAULT_SEED, help="随机种子")
    sim.add_argument("--out", type=str, default=f"{settings.DEFAULT_OUTPUT_DIR}/simulate", help="输出目录")

    fit = sub.add_parser("fit", help="按配置文件拟合模型")
    fit.add_argument("--config", type=str, required=True, help="YAML 或 JSON 配置文件")
    fit.add_argument("--seed", type=int, help="覆盖配置中的种子")
    fit.add_argument("--threads", type=int, help="并行链数上限")
    fit.add_argument("--out", type=str, help="覆盖配置中的输出目录")

    summ = sub.add_parser("summarize", help="汇总抽样结果")
    summ.add_argument("--out", type=str, required=True, help="拟合输出目录")
    summ.add_argument("--truth", type=str, help="模拟数据目录（含真值 CSV）")

    gini = sub.add_parser("gini", help="基尼系数序列与多边形上下界")
    gini.add_argument("--out", type=str, required=True, help="拟合输出目录")
    gini.add_argument("--panel", type=str, help="面板 CSV，缺省使用输出目录中的副本")
    gini.add_argument("--truth", type=str, help="模拟数据目录（含真值 CSV）")

    return parser.parse_args(argv)


def dispatch(args: argparse.Namespace) -> None:
    if args.command == "simulate":
        cmd_simulate(Scenario(K=args.K, phi=args.phi, T=args.T), args.seed, args.out)
    elif args.command == "fit":
        cmd_fit(args.config, seed=args.seed, threads=args.threads, out=args.out)
    elif args.command == "summarize":
        cmd_summarize(args.out, truth_dir=args.truth)
    elif args.command == "gini":
        cmd_gini(args.out, panel_path=args.panel, truth_dir=args.truth)


def main(argv: Optional[List[str]] = None) -> int:
    """运行一个子命令并返回退出码"""
    args = parse_arguments(argv)
    setup_logging(level="DEBUG" if args.debug else None, to_file=False if args.no_log_file else None)
    try:
        dispatch(args)
    except ValidationError as e:
        lines = [f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()]
        logger.error("参数校验失败:\n  " + "\n  ".join(lines))
        return EXIT_CONFIG
    except SweepAbortError as e:
        logger.error(f"抽样中止：{e}")
        if e.snapshot_path:
            logger.error(f"状态快照：{e.snapshot_path}")
        return e.exit_code
    except CurveWeaverError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except Exception as e:
        logger.exception(f"未预期的错误: {e}")
        return EXIT_INTERNAL
    logger.info(f"{args.command} 完成")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
