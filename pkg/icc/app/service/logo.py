"""LoGo稀疏精度矩阵：TMFG上各团协方差逆之和减去各分隔集协方差逆之和"""
from __future__ import annotations

from typing import Sequence, Union

import numpy as np
from scipy import linalg

from icc.app.common.exception.errors import (
    DimensionMismatchException,
    PrecisionNotPositiveDefiniteException,
    SingularCliqueException,
    SingularCovarianceException,
)
from icc.app.schema.graph import TmfgGraph
from icc.app.schema.panel import ReturnsPanel
from icc.app.schema.state import MarketState, SparsePrecision

CONDITION_LIMIT = 1e12
JITTER = 1e-8
MIN_OBSERVATIONS = 5
LOG_2PI = float(np.log(2.0 * np.pi))


def cholesky_logdet(matrix: np.ndarray) -> float:
    """Cholesky分解求log|J|，分解失败即J非正定"""
    try:
        factor = linalg.cholesky(matrix, lower=True)
    except linalg.LinAlgError as exc:
        raise PrecisionNotPositiveDefiniteException(str(exc)) from exc
    diag = np.diag(factor)
    if not np.all(np.isfinite(diag)) or np.any(diag <= 0):
        raise PrecisionNotPositiveDefiniteException("non-finite Cholesky factor")
    return float(2.0 * np.sum(np.log(diag)))


def _local_inverse(cov: np.ndarray, vertices: Sequence[int]) -> np.ndarray:
    idx = list(vertices)
    sub = cov[np.ix_(idx, idx)]
    cond = np.linalg.cond(sub)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        sub = sub + JITTER * np.trace(sub) / len(idx) * np.eye(len(idx))
    try:
        inv = linalg.inv(sub, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise SingularCliqueException(tuple(idx)) from exc
    if not np.all(np.isfinite(inv)):
        raise SingularCliqueException(tuple(idx))
    return inv


def assemble_logo(cov: np.ndarray, graph: TmfgGraph) -> SparsePrecision:
    """J = Σ_团 inv(S_C) - Σ_分隔集 inv(S_S)，按下标嵌回n×n"""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape != (graph.n, graph.n):
        raise DimensionMismatchException(f"covariance {cov.shape} vs graph n={graph.n}")
    J = np.zeros_like(cov)
    for clique in graph.cliques:
        J[np.ix_(clique, clique)] += _local_inverse(cov, clique)
    for separator in graph.separators:
        J[np.ix_(separator, separator)] -= _local_inverse(cov, separator)
    J = (J + J.T) / 2.0
    support = graph.support()
    J[~support] = 0.0
    return SparsePrecision(matrix=J, logdet=cholesky_logdet(J), support=support, graph=graph)


def logo_precision(obs: Union[ReturnsPanel, np.ndarray], graph: TmfgGraph) -> SparsePrecision:
    """由聚类内观测估计LoGo精度（聚类均值去中心，1/(m-1)协方差）"""
    X = obs.returns if isinstance(obs, ReturnsPanel) else np.asarray(obs, dtype=float)
    if X.shape[0] < MIN_OBSERVATIONS:
        raise SingularCovarianceException(f"{X.shape[0]} observations, need at least {MIN_OBSERVATIONS}")
    cov = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))
    return assemble_logo(cov, graph)


def log_likelihood(x: np.ndarray, state: MarketState) -> float:
    """高斯对数似然 1/2 (log|J| - d² - p ln 2π)"""
    from icc.app.service.icc_core import mahalanobis_sq

    d2 = mahalanobis_sq(x, state)
    return 0.5 * (state.precision.logdet - d2 - state.n * LOG_2PI)


def log_likelihood_batch(X: np.ndarray, state: MarketState) -> np.ndarray:
    from icc.app.service.icc_core import mahalanobis_sq_batch

    d2 = mahalanobis_sq_batch(X, state)
    return 0.5 * (state.precision.logdet - d2 - state.n * LOG_2PI)


def export_precision(precision: SparsePrecision, directory, stem: str):
    from icc.app.storage.export_store import export_store

    return export_store.write_precision(precision, directory, stem)
