"""基于滚动对数似然比的次日状态预测

R_t 为最近delta个观测上 L(s, 状态1) - L(s, 状态2) 之和。用Newton迭代拟合
logistic模型 P(K_{t+h} = 1 | R_t = x) = sigmoid(b0 + b1 x)，判决阈值在前向
滚动分折上校准。
"""
from __future__ import annotations

from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit
from sklearn.model_selection import TimeSeriesSplit

from icc.app.common.exception.errors import (
    DimensionMismatchException,
    InvalidConfigException,
    OneClassLabelsException,
    WindowTooLongException,
)
from icc.app.common.log import logger
from icc.app.schema.forecast import ForecastModel, LlrSeries
from icc.app.schema.panel import ReturnsPanel
from icc.app.schema.state import MarketState
from icc.app.service.logo import log_likelihood_batch

GRADIENT_TOL = 1e-8
SEPARABLE_RIDGE = 1e-6
MAX_NEWTON_STEPS = 200
THRESHOLD_GRID = np.round(np.arange(30, 71) / 100.0, 2)


def llr_terms(panel: ReturnsPanel, state1: MarketState, state2: MarketState) -> np.ndarray:
    """逐观测的 L(t, 1) - L(t, 2)"""
    return log_likelihood_batch(panel.returns, state1) - log_likelihood_batch(panel.returns, state2)


def rolling_llr(
    panel: ReturnsPanel,
    state1: MarketState,
    state2: MarketState,
    delta: int,
    incremental: bool = False,
) -> LlrSeries:
    """对数似然差的滑动窗口和，首个值位于第delta-1行（0起）"""
    if delta < 1 or delta > panel.T:
        raise WindowTooLongException(delta, panel.T)
    terms = llr_terms(panel, state1, state2)
    if incremental:
        values = np.empty(panel.T - delta + 1)
        running = float(terms[:delta].sum())
        values[0] = running
        for i, t in enumerate(range(delta, panel.T), start=1):
            running += terms[t] - terms[t - delta]
            values[i] = running
    else:
        values = sliding_window_view(terms, delta).sum(axis=1)
    return LlrSeries(dates=panel.dates[delta - 1:], values=values, delta=delta, offset=delta - 1)


def training_pairs(
    features: np.ndarray,
    offset: int,
    labels: np.ndarray,
    horizon: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """第t行特征与第t+horizon行标签配对，features[i]对应面板第offset+i行"""
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    rows = offset + np.arange(features.shape[0])
    keep = rows + horizon < labels.shape[0]
    return features[keep], labels[rows[keep] + horizon]


def _separable(x: np.ndarray, positive: np.ndarray) -> bool:
    a, b = x[positive], x[~positive]
    return bool(a.min() >= b.max() or a.max() <= b.min())


def logistic_gradient(x: np.ndarray, y: np.ndarray, beta0: float, beta1: float, ridge: float = 0.0) -> np.ndarray:
    """（带惩罚）对数似然的梯度，y中1为正类"""
    positive = (np.asarray(y) == 1).astype(float)
    design = np.column_stack([np.ones_like(x, dtype=float), np.asarray(x, dtype=float)])
    beta = np.array([beta0, beta1])
    return design.T @ (positive - expit(design @ beta)) - ridge * beta


def fit_logistic(x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    """Newton/IRLS求极大似然(b0, b1)；标签1（牛市，正类）与2"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise DimensionMismatchException(f"x {x.shape} vs y {y.shape}")
    positive = y == 1
    if positive.all() or not positive.any():
        raise OneClassLabelsException(f"only state {int(y[0]) if y.size else '?'} present")

    ridge = 0.0
    if _separable(x, positive):
        ridge = SEPARABLE_RIDGE
        logger.warning("逻辑回归样本线性可分，加入 1e-6 二次正则")

    design = np.column_stack([np.ones_like(x), x])
    target = positive.astype(float)

    def objective(beta: np.ndarray) -> float:
        z = design @ beta
        return float(np.sum(target * z - np.logaddexp(0.0, z)) - 0.5 * ridge * beta @ beta)

    beta = np.zeros(2)
    current = objective(beta)
    for step in range(MAX_NEWTON_STEPS):
        p = expit(design @ beta)
        grad = design.T @ (target - p) - ridge * beta
        if np.max(np.abs(grad)) < GRADIENT_TOL:
            break
        weights = p * (1.0 - p)
        hessian = (design * weights[:, None]).T @ design + ridge * np.eye(2)
        direction = np.linalg.solve(hessian, grad)
        # 最优点附近目标变化低于舍入误差，留出相应余量
        slack = 1e-12 * max(1.0, abs(current))
        scale = 1.0
        while True:
            candidate = beta + scale * direction
            value = objective(candidate)
            if value >= current - slack or scale < 1e-10:
                break
            scale *= 0.5
        if value < current - slack:
            # 工作精度下已无上升
            break
        beta, current = candidate, value
    else:
        logger.warning(f"逻辑回归在 {MAX_NEWTON_STEPS} 步内未达到梯度容差")
    return float(beta[0]), float(beta[1])


def predict_probability(model: ForecastModel, r) -> np.ndarray:
    return expit(model.beta0 + model.beta1 * np.asarray(r, dtype=float))


def predict_state(model: ForecastModel, r: float) -> Tuple[float, int]:
    """返回(P(状态1), 标签)，概率严格大于阈值时标签为1"""
    probability = float(predict_probability(model, r))
    return probability, 1 if probability > model.threshold else 2


def predict_states(model: ForecastModel, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    probability = predict_probability(model, r)
    return probability, np.where(probability > model.threshold, 1, 2)


def balanced_accuracy(predicted: np.ndarray, actual: np.ndarray) -> float:
    """有定义的各率的均值（真实标签中缺失的类别跳过）"""
    rates = []
    for label in (1, 2):
        mask = actual == label
        if mask.any():
            rates.append(float(np.mean(predicted[mask] == label)))
    return float(np.mean(rates)) if rates else float("nan")


def calibrate_threshold(x: np.ndarray, y: np.ndarray, folds: int = 5) -> float:
    """在[0.30, 0.70]、步长0.01的网格上选验证集平均平衡准确率最高的阈值

    分折为前向滚动：每个验证块用其之前全部数据拟合的模型打分。并列时取最接近0.5者。
    """
    if folds < 2:
        raise InvalidConfigException("folds must be >= 2", field="folds")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    scores = []
    for train_idx, valid_idx in TimeSeriesSplit(n_splits=folds).split(x):
        try:
            beta0, beta1 = fit_logistic(x[train_idx], y[train_idx])
        except OneClassLabelsException:
            continue
        probability = expit(beta0 + beta1 * x[valid_idx])
        row = [
            balanced_accuracy(np.where(probability > threshold, 1, 2), y[valid_idx])
            for threshold in THRESHOLD_GRID
        ]
        scores.append(row)
    if not scores:
        logger.warning("没有可用的验证折，阈值取0.5")
        return 0.5

    mean_score = np.nanmean(np.asarray(scores), axis=0)
    best = np.nanmax(mean_score)
    candidates = THRESHOLD_GRID[np.isclose(mean_score, best, rtol=0.0, atol=1e-12)]
    threshold = float(candidates[np.argmin(np.abs(candidates - 0.5))])
    logger.info(f"交叉验证阈值 {threshold:.2f}（平均平衡准确率 {best:.4f}）")
    return threshold


def fit_forecaster(
    x: np.ndarray,
    y: np.ndarray,
    delta: int,
    horizon: int = 1,
    folds: int = 5,
    regressor: str = "llr",
    states=None,
) -> ForecastModel:
    beta0, beta1 = fit_logistic(x, y)
    threshold = calibrate_threshold(x, y, folds)
    return ForecastModel(
        beta0=beta0,
        beta1=beta1,
        threshold=threshold,
        delta=delta,
        horizon=horizon,
        states=states,
        regressor=regressor,
    )
