"""价格/收益率面板CSV读写"""
from __future__ import annotations

from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from icc.app.common.exception.errors import EmptyPanelException, UnalignedDatesException
from icc.app.common.log import logger
from icc.app.schema.panel import PricePanel, ReturnsPanel


class PanelStore:
    """面板CSV存储：首列date（ISO-8601），其余每列一个资产"""

    def read_prices(self, path: Union[str, Path]) -> PricePanel:
        """读取收盘价CSV；存在缺失值的资产整列剔除"""
        path = Path(path)
        if not path.exists():
            raise EmptyPanelException(f"file not found: {path}")
        frame = pd.read_csv(path, float_precision="round_trip")
        if frame.empty or frame.shape[1] < 2:
            raise EmptyPanelException(f"{path}: expected a date column and at least one ticker")
        date_col = frame.columns[0]
        try:
            dates = pd.DatetimeIndex(pd.to_datetime(frame[date_col], format="ISO8601"))
        except (ValueError, TypeError) as exc:
            raise UnalignedDatesException(f"{path}: unparsable date column ({exc})") from exc
        if dates.has_duplicates:
            raise UnalignedDatesException(f"{path}: duplicate dates")
        if not dates.is_monotonic_increasing:
            raise UnalignedDatesException(f"{path}: dates are not increasing")

        values = frame.drop(columns=[date_col]).apply(pd.to_numeric, errors="coerce")
        gaps = [str(col) for col in values.columns if values[col].isna().any()]
        if gaps:
            logger.warning(f"剔除存在缺失值的资产 {len(gaps)} 个: {', '.join(gaps)}")
            values = values.drop(columns=gaps)
        if values.shape[1] == 0:
            raise EmptyPanelException(f"{path}: no ticker without gaps")

        logger.info(f"读取价格面板 {path}: {values.shape[0]} 行 × {values.shape[1]} 资产")
        return PricePanel(
            dates=dates,
            tickers=[str(col) for col in values.columns],
            prices=values.to_numpy(dtype=float),
        )

    def write_frame(self, frame: pd.DataFrame, path: Union[str, Path]) -> Path:
        """写出以date为索引的面板（价格或收益率）"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        out = frame.copy()
        if isinstance(out.index, pd.DatetimeIndex):
            out.index = out.index.strftime("%Y-%m-%d")
        out.index.name = "date"
        out.to_csv(path, float_format="%.17g")
        return path

    def write_panel(self, panel: Union[PricePanel, ReturnsPanel], path: Union[str, Path]) -> Path:
        return self.write_frame(panel.to_frame(), path)

    def write_labels(self, dates: pd.DatetimeIndex, labels: np.ndarray, path: Union[str, Path]) -> Path:
        """写出 (date, state) 标签序列"""
        frame = pd.DataFrame({"state": np.asarray(labels, dtype=int)}, index=dates)
        return self.write_frame(frame, path)


panel_store = PanelStore()
