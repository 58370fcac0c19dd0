"""价格/收益率面板Schema"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator


@dataclass(frozen=True)
class PricePanel:
    """T×n收盘价面板"""
    dates: pd.DatetimeIndex
    tickers: List[str]
    prices: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.prices.shape

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.prices, index=self.dates, columns=self.tickers)
        frame.index.name = "date"
        return frame


@dataclass(frozen=True)
class ReturnsPanel:
    """T×n对数收益率面板，每一行是一个多元观测X_t"""
    dates: pd.DatetimeIndex
    tickers: List[str]
    returns: np.ndarray

    @property
    def T(self) -> int:
        return int(self.returns.shape[0])

    @property
    def n(self) -> int:
        return int(self.returns.shape[1])

    def rows(self, index) -> "ReturnsPanel":
        """按行下标/布尔掩码取子面板"""
        index = np.asarray(index)
        if index.dtype == bool:
            index = np.flatnonzero(index)
        return ReturnsPanel(self.dates[index], list(self.tickers), self.returns[index])

    def slice(self, start: int, stop: Optional[int] = None) -> "ReturnsPanel":
        return ReturnsPanel(self.dates[start:stop], list(self.tickers), self.returns[start:stop])

    def columns(self, index: Sequence[int]) -> "ReturnsPanel":
        index = list(index)
        return ReturnsPanel(self.dates, [self.tickers[i] for i in index], self.returns[:, index])

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.returns, index=self.dates, columns=self.tickers)
        frame.index.name = "date"
        return frame


class RegimeSpec(BaseModel):
    """单个合成状态：均值、波动率与相关结构

    sector_correlation给出时，资产按顺序均分为若干板块，板块内相关系数取对应值，
    板块间相关系数取correlation；否则全部资产两两相关系数为correlation。
    """
    mean: Union[float, List[float]] = Field(0.0, description="均值（标量或长度n的向量）")
    volatility: float = Field(1.0, gt=0, description="波动率")
    correlation: float = Field(0.0, ge=-1, lt=1, description="（板块间）相关系数")
    sector_correlation: Optional[List[float]] = Field(None, description="各板块内相关系数")
    covariance: Optional[List[List[float]]] = Field(None, description="显式协方差矩阵，优先级最高")

    def mean_vector(self, n: int) -> np.ndarray:
        if isinstance(self.mean, list):
            return np.asarray(self.mean, dtype=float)
        return np.full(n, float(self.mean))

    def covariance_matrix(self, n: int) -> np.ndarray:
        if self.covariance is not None:
            return np.asarray(self.covariance, dtype=float)
        corr = np.full((n, n), self.correlation)
        if self.sector_correlation:
            blocks = np.array_split(np.arange(n), len(self.sector_correlation))
            for block, rho in zip(blocks, self.sector_correlation):
                corr[np.ix_(block, block)] = rho
        np.fill_diagonal(corr, 1.0)
        return self.volatility ** 2 * corr


def default_regimes() -> List[RegimeSpec]:
    """bull/bear两状态：均值相反，相关性集中在不同板块"""
    return [
        RegimeSpec(mean=0.05, volatility=1.0, sector_correlation=[0.6, 0.0]),
        RegimeSpec(mean=-0.05, volatility=1.0, sector_correlation=[0.0, 0.6]),
    ]


class SyntheticSpec(BaseModel):
    """合成数据参数"""
    n: int = Field(20, ge=1, description="资产数量")
    T: int = Field(2000, ge=2, description="观测数量")
    regimes: List[RegimeSpec] = Field(default_factory=default_regimes, description="各状态参数")
    persistence: float = Field(100.0, ge=1.0, description="期望片段长度（天）")
    seed: int = Field(0, description="随机种子")
    start_date: str = Field("2000-01-03", description="首个交易日")

    @model_validator(mode="after")
    def _check_regimes(self) -> "SyntheticSpec":
        if not self.regimes:
            raise ValueError("at least one regime is required")
        for regime in self.regimes:
            if isinstance(regime.mean, list) and len(regime.mean) != self.n:
                raise ValueError(f"regime mean has length {len(regime.mean)}, expected {self.n}")
        return self

