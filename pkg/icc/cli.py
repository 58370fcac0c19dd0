"""命令行入口：cluster / forecast / resample / synth / stability"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from icc import __version__
from icc.app.common.exception.errors import BaseErrorException, ExitCode, InternalErrorException, InvalidConfigException
from icc.app.common.log import logger, setup_logging
from icc.app.core.config import settings
from icc.app.schema.run import ModelVariant, RunConfig, load_run_config
from icc.app.service.experiment import (
    cluster_service,
    forecast_service,
    resample_service,
    stability_service,
    synth_service,
)
from icc.app.storage.export_store import export_store


class _ArgumentParser(argparse.ArgumentParser):
    """参数错误按配置错误处理（退出码1）"""

    def error(self, message: str):
        raise InvalidConfigException(message)


def _add_common(parser: argparse.ArgumentParser) -> None:
    data = parser.add_argument_group("数据")
    data.add_argument("--input", type=Path, help="收盘价CSV（首列date）")
    data.add_argument("--synthetic", action="store_true", default=None, help="使用合成的状态切换数据")
    data.add_argument("--n", type=int, help="合成资产数")
    data.add_argument("--T", type=int, help="合成观测数")
    data.add_argument("--persistence", type=float, help="合成状态期望持续天数")

    model = parser.add_argument_group("模型")
    model.add_argument("--model", choices=[v.value for v in ModelVariant], help="模型变体")
    model.add_argument("--K", type=int, help="状态数量")
    model.add_argument("--gamma", type=float, help="切换惩罚γ")
    model.add_argument("--gamma-grid", dest="gamma_grid", help="γ网格（逗号分隔）")
    model.add_argument("--target-length", dest="target_length", type=float, help="网格搜索目标平均片段长度")
    model.add_argument("--max-iters", dest="max_iters", type=int, help="最大迭代次数")
    model.add_argument("--n-init", dest="n_init", type=int, help="ICC初始化次数")

    forecast = parser.add_argument_group("预测")
    forecast.add_argument("--delta", type=int, help="对数似然比窗口Δ")
    forecast.add_argument("--horizon", type=int, help="预测步长h")
    forecast.add_argument("--split", type=float, help="训练集比例")
    forecast.add_argument("--split-date", dest="split_date", help="训练集截止日期（ISO-8601）")
    forecast.add_argument("--baseline", choices=["llr", "fraction-positive"], help="逻辑回归自变量")
    forecast.add_argument("--folds", type=int, help="交叉验证折数")

    resample = parser.add_argument_group("重采样/稳定性")
    resample.add_argument("--experiment", choices=["cluster", "forecast"], help="重采样实验类型")
    resample.add_argument("--resamples", type=int, help="重采样次数")
    resample.add_argument("--basket-size", dest="basket_size", type=int, help="篮子大小")
    resample.add_argument("--jobs", type=int, help="并行进程数")
    resample.add_argument("--q", type=int, help="稳定性实验训练样本数")
    resample.add_argument("--test-fraction", dest="test_fraction", type=float, help="稳定性实验测试集比例")

    run = parser.add_argument_group("运行")
    run.add_argument("--seed", type=int, help="64位随机种子")
    run.add_argument("--output", type=Path, help="输出目录")
    run.add_argument("--config", type=Path, help="key=value 配置文件")
    run.add_argument("--manifest", type=Path, help="之前运行写出的 manifest.json")
    run.add_argument("--log-level", dest="log_level", help="日志级别")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="icc", description=settings.app_name)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)
    for name, text in (
        ("cluster", "估计市场状态并输出分割与报告"),
        ("forecast", "样本外预测下一日市场状态"),
        ("resample", "随机篮子重采样并汇总百分位"),
        ("synth", "写出合成价格面板与真实标签"),
        ("stability", "TMFG-LoGo与Ridge似然稳定性对比"),
    ):
        _add_common(subparsers.add_parser(name, help=text))
    return parser


_NON_CONFIG = {"config", "manifest", "log_level"}


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {key: value for key, value in vars(args).items() if key not in _NON_CONFIG and value is not None}


def cmd_cluster(config: RunConfig) -> int:
    cluster_service.run(config)
    return ExitCode.SUCCESS


def cmd_forecast(config: RunConfig) -> int:
    forecast_service.run(config)
    return ExitCode.SUCCESS


def cmd_resample(config: RunConfig) -> int:
    resample_service.run(config)
    return ExitCode.SUCCESS


def cmd_synth(config: RunConfig) -> int:
    synth_service.run(config)
    return ExitCode.SUCCESS


def cmd_stability(config: RunConfig) -> int:
    stability_service.run(config)
    return ExitCode.SUCCESS


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    "cluster": cmd_cluster,
    "forecast": cmd_forecast,
    "resample": cmd_resample,
    "synth": cmd_synth,
    "stability": cmd_stability,
}


def _write_error(exc: BaseErrorException, output: Optional[Path]) -> None:
    """失败时在输出目录留下error.json"""
    if output is None:
        return
    try:
        export_store.write_json(exc.to_detail(), output / "error.json")
    except OSError:
        pass


def run(argv: Optional[List[str]] = None) -> int:
    """解析参数、写出manifest.json并分派子命令，返回退出码"""
    output: Optional[Path] = None
    try:
        args = build_parser().parse_args(argv)
        if args.log_level:
            setup_logging(args.log_level)
        if args.config is not None and args.manifest is not None:
            raise InvalidConfigException("use either --config or --manifest", field="config")
        config = load_run_config(args.config or args.manifest, _overrides(args))
        output = config.output
        output.mkdir(parents=True, exist_ok=True)
        export_store.write_json(config.manifest(), config.output / "manifest.json")
        return COMMANDS[config.command](config)
    except BaseErrorException as exc:
        logger.error(exc.one_line())
        _write_error(exc, output)
        return exc.exit_code
    except ValidationError as exc:
        logger.error(f"error[1100] 配置无效: {exc.errors()[0].get('msg')}")
        return ExitCode.CONFIG_ERROR
    except np.linalg.LinAlgError as exc:
        logger.error(f"error[3000] 数值计算失败: {exc}")
        return ExitCode.NUMERICAL_ERROR
    except OSError as exc:
        error = InternalErrorException(f"cannot write outputs to {output}: {exc}")
        logger.error(error.one_line())
        _write_error(error, output)
        return error.exit_code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
