"""对照模型：全协方差GMM、Ridge精度矩阵与正收益占比回归量"""
from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np
from scipy import linalg
from scipy.special import logsumexp
from sklearn.cluster import kmeans_plusplus
from sklearn.model_selection import KFold

from icc.app.common.exception.errors import (
    DegenerateComponentException,
    InvalidConfigException,
    SingularCovarianceException,
)
from icc.app.common.log import logger
from icc.app.common.rng import substream
from icc.app.schema.baseline import GmmModel, RidgePrecision
from icc.app.schema.panel import ReturnsPanel
from icc.app.schema.state import MarketState, SparsePrecision
from icc.app.service.logo import LOG_2PI, cholesky_logdet

GMM_MAX_ITER = 500
GMM_TOL = 1e-6
COVARIANCE_FLOOR = 1e-8
MIN_COMPONENT_MASS = 1.0
DEFAULT_LAMBDA_GRID = tuple(np.logspace(-4, 1, 20))


def _as_array(obs: Union[ReturnsPanel, np.ndarray]) -> np.ndarray:
    return obs.returns if isinstance(obs, ReturnsPanel) else np.atleast_2d(np.asarray(obs, dtype=float))


def _floor_covariance(cov: np.ndarray) -> np.ndarray:
    n = cov.shape[0]
    floor = COVARIANCE_FLOOR * max(np.trace(cov), 1e-300) / n
    idx = np.diag_indices(n)
    cov[idx] = np.maximum(cov[idx], floor)
    return cov


def _log_gaussian(X: np.ndarray, means: np.ndarray, covariances: np.ndarray) -> np.ndarray:
    """每行每个分量的 log N(x_t | mean_k, cov_k)"""
    T, n = X.shape
    out = np.empty((T, means.shape[0]))
    for k, (mu, cov) in enumerate(zip(means, covariances)):
        try:
            chol = linalg.cholesky(cov, lower=True)
        except linalg.LinAlgError as exc:
            raise DegenerateComponentException(f"component {k + 1}: covariance not positive definite") from exc
        z = linalg.solve_triangular(chol, (X - mu).T, lower=True)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        out[:, k] = -0.5 * (np.sum(z * z, axis=0) + logdet + n * LOG_2PI)
    return out


def _em(X: np.ndarray, K: int, rng: np.random.Generator) -> GmmModel:
    T, n = X.shape
    means, _ = kmeans_plusplus(X, K, random_state=int(rng.integers(2**31 - 1)))
    pooled = _floor_covariance(np.atleast_2d(np.cov(X, rowvar=False, bias=True)))
    covariances = np.repeat(pooled[None, :, :], K, axis=0)
    weights = np.full(K, 1.0 / K)

    history = []
    converged = False
    for iteration in range(1, GMM_MAX_ITER + 1):
        log_prob = _log_gaussian(X, means, covariances) + np.log(weights)
        log_norm = logsumexp(log_prob, axis=1)
        resp = np.exp(log_prob - log_norm[:, None])
        history.append(float(log_norm.mean()))
        if iteration > 1 and history[-1] - history[-2] < GMM_TOL:
            converged = True
            break

        mass = resp.sum(axis=0)
        if np.any(mass < MIN_COMPONENT_MASS):
            raise DegenerateComponentException(f"component {int(np.argmin(mass)) + 1} has mass {mass.min():.3g}")
        weights = mass / T
        means = (resp.T @ X) / mass[:, None]
        covariances = np.empty((K, n, n))
        for k in range(K):
            diff = X - means[k]
            covariances[k] = _floor_covariance((resp[:, k] * diff.T) @ diff / mass[k])

    return GmmModel(
        weights=weights,
        means=means,
        covariances=covariances,
        responsibilities=resp,
        log_likelihood=float(log_norm.sum()),
        iterations=iteration,
        converged=converged,
        history=history,
    )


def fit_gmm(panel: Union[ReturnsPanel, np.ndarray], K: int, seed: int) -> GmmModel:
    """全协方差高斯混合的EM，k-means++初始化，退化时重试一次"""
    X = _as_array(panel)
    if K < 1:
        raise InvalidConfigException("K must be >= 1", field="K")
    if X.shape[0] <= K * X.shape[1]:
        logger.warning(f"GMM: T={X.shape[0]} ≤ K·n={K * X.shape[1]}，依赖协方差下限")
    try:
        model = _em(X, K, substream(seed, "gmm", 0))
    except DegenerateComponentException as exc:
        logger.warning(f"GMM分量退化，重新初始化: {exc.detail}")
        model = _em(X, K, substream(seed, "gmm", 1))
    if not model.converged:
        logger.warning(f"GMM在 {GMM_MAX_ITER} 次迭代内未收敛")
    logger.info(f"GMM K={K}: {model.iterations} 次迭代, 平均对数似然 {model.history[-1]:.4f}")
    return model


def gmm_states(model: GmmModel) -> list[MarketState]:
    """混合分量转为MarketState（稠密精度）供报告使用"""
    states = []
    for k in range(model.K):
        J = linalg.inv(model.covariances[k])
        J = (J + J.T) / 2.0
        states.append(
            MarketState(
                mu=model.means[k],
                precision=SparsePrecision(matrix=J, logdet=cholesky_logdet(J)),
                label=k + 1,
                size=int(np.sum(model.hard_labels() == k + 1)),
            )
        )
    return states


def ridge_precision(obs: Union[ReturnsPanel, np.ndarray], lam: float) -> RidgePrecision:
    """(S + λI)^-1，S为1/(m-1)样本协方差"""
    if lam < 0:
        raise InvalidConfigException("lambda must be >= 0", field="lambda")
    X = _as_array(obs)
    S = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))
    A = S + lam * np.eye(S.shape[0])
    try:
        linalg.cholesky(A, lower=True)
    except linalg.LinAlgError as exc:
        hint = "; use lambda > 0" if lam == 0 else ""
        raise SingularCovarianceException(f"sample covariance is singular{hint}") from exc
    J = linalg.inv(A)
    return RidgePrecision(matrix=(J + J.T) / 2.0, lam=float(lam))


def ridge_state(obs: Union[ReturnsPanel, np.ndarray], lam: float, label: int = 1) -> MarketState:
    X = _as_array(obs)
    ridge = ridge_precision(X, lam)
    precision = SparsePrecision(matrix=ridge.matrix, logdet=cholesky_logdet(ridge.matrix))
    return MarketState(mu=X.mean(axis=0), precision=precision, label=label, size=X.shape[0])


def _held_out_loglik(train: np.ndarray, test: np.ndarray, lam: float) -> float:
    from icc.app.service.logo import log_likelihood_batch

    return float(np.mean(log_likelihood_batch(test, ridge_state(train, lam))))


def cv_select_lambda(
    obs: Union[ReturnsPanel, np.ndarray],
    grid: Optional[Sequence[float]] = None,
    folds: int = 5,
) -> float:
    """连续分折上留出高斯对数似然均值最高的λ，并列取较大者"""
    grid = DEFAULT_LAMBDA_GRID if grid is None else tuple(grid)
    if not grid:
        raise InvalidConfigException("lambda grid must not be empty", field="grid")
    if folds < 2:
        raise InvalidConfigException("folds must be >= 2", field="folds")
    X = _as_array(obs)
    splits = list(KFold(n_splits=folds, shuffle=False).split(X))

    best_lam, best_score = None, -np.inf
    for lam in sorted(set(float(g) for g in grid), reverse=True):
        try:
            score = float(np.mean([_held_out_loglik(X[tr], X[te], lam) for tr, te in splits]))
        except SingularCovarianceException:
            continue
        if score > best_score:
            best_lam, best_score = lam, score
    if best_lam is None:
        raise SingularCovarianceException("every lambda on the grid gave a singular fold covariance")
    logger.info(f"Ridge交叉验证选出 λ={best_lam:.3g}（{folds} 折，平均留出似然 {best_score:.4f}）")
    return best_lam


def fraction_positive(panel: ReturnsPanel, t: int) -> float:
    """第t行收益严格为正的资产占比"""
    row = panel.returns[t]
    return float(np.count_nonzero(row > 0)) / row.shape[0]


def fraction_positive_series(panel: ReturnsPanel) -> np.ndarray:
    return np.count_nonzero(panel.returns > 0, axis=1) / panel.n


__all__ = [
    "fit_gmm",
    "gmm_states",
    "ridge_precision",
    "ridge_state",
    "cv_select_lambda",
    "fraction_positive",
    "fraction_positive_series",
]
