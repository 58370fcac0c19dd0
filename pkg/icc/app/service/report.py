"""报告输出服务"""
from __future__ import annotations

from pathlib import Path
from typing import Dict, Union

from icc.app.common.exception.errors import InternalErrorException
from icc.app.common.log import logger
from icc.app.schema.report import LlrRow, ReportBundle, SharpeRow, TimeseriesRow
from icc.app.storage.export_store import export_store

TIMESERIES_COLUMNS = list(TimeseriesRow.model_fields)
SHARPE_COLUMNS = list(SharpeRow.model_fields)
LLR_COLUMNS = list(LlrRow.model_fields)


def emit_report(bundle: ReportBundle, directory: Union[str, Path]) -> Dict[str, Path]:
    """写出 report.json 以及可直接绘图的 timeseries.csv / sharpe.csv / llr.csv"""
    directory = Path(directory)
    try:
        written = {
            "report": export_store.write_json(bundle, directory / "report.json"),
            "timeseries": export_store.write_rows(bundle.timeseries, directory / "timeseries.csv", TIMESERIES_COLUMNS),
            "sharpe": export_store.write_rows(bundle.sharpe, directory / "sharpe.csv", SHARPE_COLUMNS),
            "llr": export_store.write_rows(bundle.llr, directory / "llr.csv", LLR_COLUMNS),
        }
    except OSError as exc:
        raise InternalErrorException(f"cannot write report to {directory}: {exc}") from exc
    logger.info(f"报告已写出: {directory}")
    return written


def load_report(path: Union[str, Path]) -> ReportBundle:
    """读取 report.json（目录或文件路径）"""
    path = Path(path)
    if path.is_dir():
        path = path / "report.json"
    return ReportBundle.model_validate(export_store.read_json(path))
