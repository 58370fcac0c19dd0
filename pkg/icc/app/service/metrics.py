"""评估统计：夏普比率、时间一致性与分类指标"""
from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import hypergeom

from icc.app.common.exception.errors import DimensionMismatchException, EmptyPanelException, ZeroVarianceException
from icc.app.core.config import settings
from icc.app.schema.panel import ReturnsPanel
from icc.app.schema.report import (
    ClusterReport,
    ClusterStats,
    ForecastReport,
    StabilityReport,
    StabilityRow,
    SupportOverlap,
    TemporalStats,
)
from icc.app.schema.state import MarketState, Segmentation


def sharpe_ratio(returns: np.ndarray, periods_per_year: int = 252, name: str = "series") -> float:
    """年化均值/样本标准差，无风险利率取0"""
    returns = np.asarray(returns, dtype=float)
    if returns.shape[0] < 2:
        raise ZeroVarianceException(name)
    # 常数列的浮点std只是舍入噪声，按极差判定
    if np.ptp(returns) == 0:
        raise ZeroVarianceException(name)
    return float(returns.mean() / returns.std(ddof=1) * np.sqrt(periods_per_year))


def percentile_summary(values: Sequence[float]) -> Tuple[Optional[float], Optional[float], Optional[float]]:
    """(中位数, 第5, 第95百分位)，次序统计量间线性插值"""
    values = np.asarray([v for v in values if v is not None], dtype=float)
    values = values[np.isfinite(values)]
    if values.size == 0:
        return None, None, None
    p5, median, p95 = np.percentile(values, [5, 50, 95], method="linear")
    return float(median), float(p5), float(p95)


def run_lengths(labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """按时间顺序返回(片段标签, 片段长度)"""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise EmptyPanelException("empty label sequence")
    starts = np.flatnonzero(np.r_[True, labels[1:] != labels[:-1]])
    lengths = np.diff(np.r_[starts, labels.size])
    return labels[starts], lengths


def temporal_stats(seg) -> TemporalStats:
    labels = seg.labels if isinstance(seg, Segmentation) else np.asarray(seg)
    _, lengths = run_lengths(labels)
    median, p5, p95 = percentile_summary(lengths)
    return TemporalStats(
        switches=int(lengths.size - 1),
        segment_lengths=lengths.tolist(),
        median=median,
        p5=p5,
        p95=p95,
        mean_length=float(lengths.mean()),
    )


def classification_metrics(predicted: np.ndarray, actual: np.ndarray) -> ForecastReport:
    """以状态1（牛市）为正类的TPR/TNR/ACC

    TNR的p值为：预测熊市日随机等量抽取时 P(TN >= 观测值)（超几何分布）
    """
    predicted = np.asarray(predicted)
    actual = np.asarray(actual)
    if predicted.shape != actual.shape:
        raise DimensionMismatchException(f"predicted {predicted.shape} vs actual {actual.shape}")
    if predicted.size == 0:
        raise EmptyPanelException("no predictions to score")

    tp = int(np.sum((predicted == 1) & (actual == 1)))
    tn = int(np.sum((predicted == 2) & (actual == 2)))
    fp = int(np.sum((predicted == 1) & (actual == 2)))
    fn = int(np.sum((predicted == 2) & (actual == 1)))
    total = int(predicted.size)
    n_bull, n_bear = tp + fn, tn + fp

    tnr_pvalue = None
    if n_bear:
        predicted_bear = int(np.sum(predicted == 2))
        tnr_pvalue = float(np.clip(hypergeom.sf(tn - 1, total, n_bear, predicted_bear), 0.0, 1.0))
    return ForecastReport(
        tpr=tp / n_bull if n_bull else None,
        tnr=tn / n_bear if n_bear else None,
        acc=(tp + tn) / total,
        tp=tp,
        tn=tn,
        fp=fp,
        fn=fn,
        tnr_pvalue=tnr_pvalue,
    )


def state_names(K: int) -> List[str]:
    return ["bull", "bear"] if K == 2 else [f"state-{k}" for k in range(1, K + 1)]


def support_overlap(states: Sequence[MarketState]) -> SupportOverlap:
    """各状态精度矩阵非零非对角元数量，以及所有状态共有的数量"""
    masks = []
    for state in states:
        J = state.precision.matrix
        masks.append(np.triu(J != 0, k=1))
    common = np.logical_and.reduce(masks) if masks else np.zeros((0, 0), dtype=bool)
    return SupportOverlap(edges=[int(m.sum()) for m in masks], common=int(common.sum()))


def cluster_report(
    panel: ReturnsPanel,
    seg: Segmentation,
    model: str = "icc-sparse",
    gamma: float = 0.0,
    K: Optional[int] = None,
    states: Optional[Sequence[MarketState]] = None,
    accuracy: Optional[float] = None,
) -> ClusterReport:
    """各聚类大小、逐股票均值/标准差/夏普及片段统计"""
    labels = np.asarray(seg.labels)
    if labels.shape[0] != panel.T:
        raise DimensionMismatchException(f"{labels.shape[0]} labels for {panel.T} observations")
    K = K or int(labels.max())
    names = state_names(K)
    run_labels, lengths = run_lengths(labels)

    clusters = []
    for k in range(1, K + 1):
        block = panel.returns[labels == k]
        size = int(block.shape[0])
        sharpe: List[Optional[float]] = []
        for i, ticker in enumerate(panel.tickers):
            try:
                sharpe.append(sharpe_ratio(block[:, i], settings.periods_per_year, ticker))
            except ZeroVarianceException:
                sharpe.append(None)
        own = lengths[run_labels == k]
        clusters.append(
            ClusterStats(
                label=k,
                name=names[k - 1],
                size=size,
                mean_return=float(block.mean()) if size else 0.0,
                means=block.mean(axis=0).tolist() if size else [0.0] * panel.n,
                stds=block.std(axis=0, ddof=1).tolist() if size > 1 else [0.0] * panel.n,
                sharpe=sharpe,
                longest_run=int(own.max()) if own.size else 0,
                mean_segment_length=float(own.mean()) if own.size else 0.0,
            )
        )

    report = ClusterReport(
        model=model,
        tickers=list(panel.tickers),
        gamma=gamma,
        clusters=clusters,
        temporal=temporal_stats(labels),
        total_cost=seg.total_cost,
        iterations=seg.iterations,
        converged=seg.converged,
        accuracy=accuracy,
        support=support_overlap(states) if states else None,
    )
    bull, bear = sharpe_sign_counts(report)
    return report.model_copy(update={"bull_positive_sharpe": bull, "bear_negative_sharpe": bear})


def sharpe_sign_counts(report: ClusterReport) -> Tuple[int, int]:
    """(牛市夏普为正的股票数, 熊市夏普为负的股票数)"""
    by_name = {cluster.name: cluster for cluster in report.clusters}
    bull = by_name.get("bull")
    bear = by_name.get("bear")
    positive = sum(1 for s in bull.sharpe if s is not None and s > 0) if bull else 0
    negative = sum(1 for s in bear.sharpe if s is not None and s < 0) if bear else 0
    return positive, negative


def _stability_rows(estimator: str, train_ll: np.ndarray, test_ll: np.ndarray) -> List[StabilityRow]:
    rows = []
    for split, values in (("train", train_ll), ("test", test_ll)):
        p5, p95 = np.percentile(values, [5, 95], method="linear")
        rows.append(StabilityRow(estimator=estimator, split=split, mean=float(values.mean()), p5=float(p5), p95=float(p95)))
    return rows


def likelihood_stability(
    train: ReturnsPanel,
    test: ReturnsPanel,
    folds: int = 5,
    ridge_lambda: Optional[float] = None,
) -> StabilityReport:
    """TMFG-LoGo与交叉验证Ridge在训练/测试集上的逐观测对数似然"""
    from icc.app.service.baselines import cv_select_lambda, ridge_state
    from icc.app.service.logo import log_likelihood_batch, logo_precision
    from icc.app.service.tmfg import build_tmfg, prepare_similarity

    graph = build_tmfg(prepare_similarity(train))
    logo = MarketState(mu=train.returns.mean(axis=0), precision=logo_precision(train, graph), label=1, size=train.T)
    lam = cv_select_lambda(train, folds=folds) if ridge_lambda is None else float(ridge_lambda)
    ridge = ridge_state(train, lam)

    rows = []
    for name, state in (("logo", logo), ("ridge", ridge)):
        rows += _stability_rows(
            name,
            log_likelihood_batch(train.returns, state),
            log_likelihood_batch(test.returns, state),
        )
    return StabilityReport(q=train.T, n_test=test.T, ridge_lambda=lam, rows=rows)
