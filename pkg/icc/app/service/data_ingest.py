"""价格读入、对数收益、合成状态面板与篮子重采样"""
from __future__ import annotations

from datetime import date as Date
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd

from icc.app.common.exception.errors import (
    BasketTooLargeException,
    EmptyPanelException,
    InvalidSyntheticSpecException,
    NonPositivePriceException,
    UnalignedDatesException,
)
from icc.app.common.log import logger
from icc.app.common.rng import substream
from icc.app.schema.graph import SimilarityMatrix
from icc.app.schema.panel import PricePanel, ReturnsPanel, SyntheticSpec
from icc.app.storage.panel_store import panel_store


def read_price_csv(path: Union[str, Path]) -> PricePanel:
    return panel_store.read_prices(path)


def write_panel_csv(panel: Union[PricePanel, ReturnsPanel], path: Union[str, Path]) -> Path:
    return panel_store.write_panel(panel, path)


def log_returns(panel: PricePanel) -> ReturnsPanel:
    """r_i(t) = ln P_i(t) - ln P_i(t-1)，首行价格没有收益"""
    prices = np.asarray(panel.prices, dtype=float)
    if prices.ndim != 2 or prices.shape[0] < 2:
        raise EmptyPanelException(f"need at least 2 price rows, got {prices.shape[0] if prices.ndim else 0}")
    if len(panel.dates) != prices.shape[0]:
        raise UnalignedDatesException(f"{len(panel.dates)} dates for {prices.shape[0]} price rows")
    if not pd.DatetimeIndex(panel.dates).is_monotonic_increasing or pd.DatetimeIndex(panel.dates).has_duplicates:
        raise UnalignedDatesException("dates must be strictly increasing")

    bad = ~(prices > 0)
    if bad.any():
        t, i = np.argwhere(bad)[0]
        raise NonPositivePriceException(panel.dates[t].date(), panel.tickers[i])

    logp = np.log(prices)
    return ReturnsPanel(
        dates=pd.DatetimeIndex(panel.dates[1:]),
        tickers=list(panel.tickers),
        returns=np.diff(logp, axis=0),
    )


def prices_from_returns(panel: ReturnsPanel, start: float = 100.0) -> PricePanel:
    """log_returns的逆变换，起始行为首个收益前一个工作日"""
    logp = np.vstack([np.zeros(panel.n), np.cumsum(panel.returns, axis=0)]) + np.log(start)
    first = panel.dates[0] - pd.offsets.BDay(1) if panel.T else pd.Timestamp("2000-01-03")
    dates = pd.DatetimeIndex([first]).append(pd.DatetimeIndex(panel.dates))
    return PricePanel(dates=dates, tickers=list(panel.tickers), prices=np.exp(logp))


def resample_basket(panel: ReturnsPanel, m: int, seed: int, index: int = 0) -> ReturnsPanel:
    """无放回均匀抽取m只股票组成子面板；index为重采样序号，同一种子下各序号独立"""
    if m < 1 or m > panel.n:
        raise BasketTooLargeException(m, panel.n)
    rng = substream(seed, "resample", index)
    chosen = rng.choice(panel.n, size=m, replace=False)
    return panel.columns(chosen.tolist())


def split_panel(
    panel: ReturnsPanel,
    fraction: float = 0.65,
    split_date: Optional[Date] = None,
) -> Tuple[ReturnsPanel, ReturnsPanel]:
    """按时间切分训练/测试集，给定切分日期时该日归入训练集"""
    if split_date is not None:
        cut = int(np.searchsorted(panel.dates.values, np.datetime64(pd.Timestamp(split_date)), side="right"))
    else:
        cut = int(np.floor(fraction * panel.T))
    if cut <= 0 or cut >= panel.T:
        raise EmptyPanelException(f"split leaves an empty side (train rows {cut} of {panel.T})")
    return panel.slice(0, cut), panel.slice(cut, None)


def _persistence_chain(rng: np.random.Generator, T: int, K: int, persistence: float) -> np.ndarray:
    labels = np.empty(T, dtype=int)
    labels[0] = rng.integers(K)
    if K == 1:
        labels[:] = 0
        return labels
    switch = rng.random(T) < 1.0 / persistence
    # 偏移1..K-1：均匀跳到另一个状态
    offsets = rng.integers(1, K, size=T)
    for t in range(1, T):
        labels[t] = (labels[t - 1] + offsets[t]) % K if switch[t] else labels[t - 1]
    return labels


def generate_synthetic(spec: SyntheticSpec) -> Tuple[ReturnsPanel, np.ndarray]:
    """生成状态切换高斯面板及真实标签（1..K）"""
    factors = []
    for k, regime in enumerate(spec.regimes):
        cov = regime.covariance_matrix(spec.n)
        if cov.shape != (spec.n, spec.n):
            raise InvalidSyntheticSpecException(f"regime {k + 1}: covariance shape {cov.shape}, expected ({spec.n}, {spec.n})")
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise InvalidSyntheticSpecException(f"regime {k + 1}: covariance is not symmetric")
        try:
            factors.append(np.linalg.cholesky(cov))
        except np.linalg.LinAlgError as exc:
            raise InvalidSyntheticSpecException(f"regime {k + 1}: covariance is not positive definite") from exc

    rng = substream(spec.seed, "synthetic")
    states = _persistence_chain(rng, spec.T, len(spec.regimes), spec.persistence)
    noise = rng.standard_normal((spec.T, spec.n))

    returns = np.empty((spec.T, spec.n))
    for k, regime in enumerate(spec.regimes):
        rows = states == k
        returns[rows] = regime.mean_vector(spec.n) + noise[rows] @ factors[k].T

    dates = pd.bdate_range(spec.start_date, periods=spec.T)
    tickers = [f"S{i:03d}" for i in range(spec.n)]
    switches = int(np.count_nonzero(np.diff(states)))
    logger.info(f"生成合成面板 T={spec.T} n={spec.n} K={len(spec.regimes)}，切换 {switches} 次")
    return ReturnsPanel(dates=dates, tickers=tickers, returns=returns), states + 1


def tmfg_structured_covariance(
    n: int,
    rng: np.random.Generator,
    factors: int = 3,
    spikes: Optional[int] = None,
    spike_strength: float = 1e4,
) -> Tuple[np.ndarray, np.ndarray]:
    """逆矩阵具有TMFG支撑的真值协方差

    随机因子模型的相关矩阵先经TMFG-LoGo过滤；再挑选若干4-团（默认n // 20个），
    在团内随机方向上叠加强度为spike_strength的秩一尖峰。协方差因此带有近共线方向，
    但精度矩阵的支撑仍在图内。返回(协方差, 真值精度)。
    """
    from icc.app.service.logo import assemble_logo
    from icc.app.service.tmfg import build_tmfg

    loadings = rng.normal(size=(n, factors)) * np.linspace(0.9, 0.4, factors)
    cov = loadings @ loadings.T + np.diag(rng.uniform(0.3, 1.0, size=n))
    scale = 1.0 / np.sqrt(np.diag(cov))
    corr = cov * np.outer(scale, scale)

    weights = corr ** 2
    np.fill_diagonal(weights, 0.0)
    graph = build_tmfg(SimilarityMatrix(weights))
    precision = assemble_logo(corr, graph).matrix.copy()

    count = max(1, n // 20) if spikes is None else spikes
    for c in rng.choice(len(graph.cliques), size=min(count, len(graph.cliques)), replace=False):
        clique = list(graph.cliques[int(c)])
        direction = rng.normal(size=len(clique))
        direction /= np.linalg.norm(direction)
        precision[np.ix_(clique, clique)] += spike_strength * np.outer(direction, direction)

    truth = np.linalg.inv(precision)
    return (truth + truth.T) / 2.0, precision
