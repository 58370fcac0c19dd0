"""状态预测Schema"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from icc.app.schema.state import MarketState


@dataclass(frozen=True)
class LlrSeries:
    """滚动对数似然比R_t，只在t ≥ Δ时有定义"""
    dates: pd.DatetimeIndex
    values: np.ndarray
    delta: int
    offset: int

    def __len__(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class ForecastModel:
    """逻辑回归状态预测器"""
    beta0: float
    beta1: float
    threshold: float = 0.5
    delta: int = 24
    horizon: int = 1
    states: Optional[Tuple[MarketState, MarketState]] = None
    regressor: str = "llr"
