"""逆协方差聚类（ICC）：带切换惩罚的马氏距离分配，用Viterbi求解

状态k由均值μ_k与精度J_k描述。观测X_t归入状态k的代价为
d²[t, k] = (X_t - μ_k)' J_k (X_t - μ_k)，相邻观测每切换一次状态加γ。
拟合在“按当前标签估计状态”与“按状态求最小代价标签路径”之间交替进行。
"""
from __future__ import annotations

from itertools import permutations
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from icc.app.common.exception.errors import (
    AllFitsFailedException,
    BaseErrorException,
    DimensionMismatchException,
    EmptyClusterException,
    EmptyPanelException,
    InvalidConfigException,
    SingularCovarianceException,
    ZeroVarianceException,
)
from icc.app.common.log import logger
from icc.app.common.rng import substream
from icc.app.schema.graph import SimilarityMatrix
from icc.app.schema.panel import ReturnsPanel
from icc.app.schema.state import IccConfig, MarketState, Segmentation, SparsePrecision
from icc.app.service.baselines import fit_gmm
from icc.app.service.logo import MIN_OBSERVATIONS, assemble_logo, cholesky_logdet
from icc.app.service.tmfg import build_tmfg, similarity_from_covariance

DENSE_RIDGE = 1e-6
DEFAULT_TARGET_LENGTH = 25.0


def mahalanobis_sq(x: np.ndarray, state: MarketState) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != state.mu.shape:
        raise DimensionMismatchException(f"observation {x.shape} vs state {state.mu.shape}")
    diff = x - state.mu
    return float(diff @ state.precision.matrix @ diff)


def mahalanobis_sq_batch(X: np.ndarray, state: MarketState) -> np.ndarray:
    """T×n观测块逐行的马氏距离平方"""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != state.n:
        raise DimensionMismatchException(f"observations have {X.shape[1]} columns, state has {state.n}")
    diff = X - state.mu
    return np.einsum("ti,ti->t", diff @ state.precision.matrix, diff)


def cost_matrix(X: np.ndarray, states: Sequence[MarketState]) -> np.ndarray:
    return np.column_stack([mahalanobis_sq_batch(X, state) for state in states])


def viterbi_assign(costs: np.ndarray, gamma: float) -> Segmentation:
    """O(TK)求 Σ_t costs[t, K_t] + γ·切换次数 的最小值

    并列时优先停留在前一状态，其次取下标较小的状态
    """
    costs = np.asarray(costs, dtype=float)
    if costs.ndim != 2 or costs.size == 0:
        raise EmptyPanelException("empty cost matrix")
    T, K = costs.shape
    states = np.arange(K)
    back = np.empty((T, K), dtype=np.intp)
    back[0] = states
    prev = costs[0].copy()
    for t in range(1, T):
        j = int(np.argmin(prev))
        switch_cost = prev[j] + gamma
        stay = prev <= switch_cost
        back[t] = np.where(stay, states, j)
        prev = np.where(stay, prev, switch_cost) + costs[t]

    path = np.empty(T, dtype=np.intp)
    path[-1] = int(np.argmin(prev))
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]

    switches = Segmentation.count_switches(path)
    total = float(costs[np.arange(T), path].sum() + gamma * switches)
    return Segmentation(labels=path + 1, total_cost=total, switches=switches)


def dense_precision(X: np.ndarray) -> SparsePrecision:
    """全协方差变体的精度：(S + 1e-6·trace(S)/n·I)^-1"""
    S = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))
    n = S.shape[0]
    try:
        J = linalg.inv(S + DENSE_RIDGE * np.trace(S) / n * np.eye(n))
    except linalg.LinAlgError as exc:
        raise SingularCovarianceException(str(exc)) from exc
    J = (J + J.T) / 2.0
    return SparsePrecision(matrix=J, logdet=cholesky_logdet(J))


def estimate_state(X: np.ndarray, label: int, sparse: bool = True) -> MarketState:
    """聚类均值 + TMFG-LoGo稀疏精度（或轻度正则化的稠密精度）"""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] < MIN_OBSERVATIONS:
        raise EmptyClusterException(f"state {label} has {X.shape[0]} observations, need {MIN_OBSERVATIONS}")
    mu = X.mean(axis=0)
    if sparse:
        flat = np.flatnonzero(np.ptp(X, axis=0) == 0)
        if flat.size:
            raise ZeroVarianceException(f"column {int(flat[0])} in state {label}")
        cov = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))
        graph = build_tmfg(SimilarityMatrix(similarity_from_covariance(cov)))
        precision = assemble_logo(cov, graph)
    else:
        precision = dense_precision(X)
    return MarketState(mu=mu, precision=precision, label=label, size=int(X.shape[0]))


def random_assignment(T: int, K: int, rng: np.random.Generator, block: Optional[int] = None) -> np.ndarray:
    """按连续块随机抽取的初始标签（0起），block=1即逐点独立"""
    block = block or max(1, T // (10 * K))
    n_blocks = -(-T // block)
    draws = rng.integers(K, size=n_blocks)
    return np.repeat(draws, block)[:T]


def _repair_clusters(
    labels: np.ndarray,
    K: int,
    distance: np.ndarray,
    reseeds: int,
    max_reseeds: int,
) -> Tuple[np.ndarray, int]:
    """观测数低于下限的聚类，用拟合最差的T/K个观测重置"""
    labels = labels.copy()
    distance = distance.astype(float, copy=True)
    T = labels.shape[0]
    while True:
        counts = np.bincount(labels, minlength=K)
        small = np.flatnonzero(counts < MIN_OBSERVATIONS)
        if small.size == 0:
            return labels, reseeds
        if reseeds >= max_reseeds:
            raise EmptyClusterException(f"state {int(small[0]) + 1} still has {int(counts[small[0]])} observations after {reseeds} re-seeds")
        k = int(small[0])
        take = max(MIN_OBSERVATIONS, T // K)
        order = np.argsort(-distance, kind="stable")[:take]
        labels[order] = k
        distance[order] = -np.inf
        reseeds += 1
        logger.warning(f"状态 {k + 1} 观测数 {int(counts[k])} 低于下限，用距离最大的 {take} 个观测重置（第 {reseeds} 次）")


def restart_score(states: Sequence[MarketState], seg: Segmentation) -> float:
    """补上对数行列式的惩罚代价：Σ_t (d² - log|J_{K_t}|) + γ·切换次数

    不动点处马氏距离部分对任意标签都约为 (T - K)·n，多次初始化之间用该分数比较。
    """
    logdets = np.array([state.precision.logdet for state in states])
    return float(seg.total_cost - logdets[np.asarray(seg.labels) - 1].sum())


def _iterate(
    X: np.ndarray,
    labels: np.ndarray,
    config: IccConfig,
) -> Tuple[List[MarketState], Segmentation]:
    """从给定初始标签（0起）出发的一次交替拟合"""
    T = X.shape[0]
    K = config.K
    # 首次拟合前，“拟合最差”即离总体均值最远
    distance = np.sum((X - X.mean(axis=0)) ** 2, axis=1)
    reseeds = 0
    previous_cost: Optional[float] = None
    best: Optional[Tuple[List[MarketState], Segmentation]] = None

    for iteration in range(1, config.max_iters + 1):
        labels, reseeds = _repair_clusters(labels, K, distance, reseeds, config.max_reseeds)
        states = [estimate_state(X[labels == k], k + 1, config.sparse) for k in range(K)]
        costs = cost_matrix(X, states)
        seg = viterbi_assign(costs, config.gamma)
        new_labels = seg.labels - 1
        distance = costs[np.arange(T), new_labels]

        if previous_cost is not None and seg.total_cost > previous_cost + config.tol * max(1.0, abs(previous_cost)):
            logger.warning(f"第 {iteration} 次迭代代价上升: {previous_cost:.6f} -> {seg.total_cost:.6f}")
        previous_cost = seg.total_cost
        logger.debug(f"迭代 {iteration}: cost={seg.total_cost:.4f} switches={seg.switches}")

        if best is None or seg.total_cost < best[1].total_cost:
            best = (states, Segmentation(seg.labels, seg.total_cost, seg.switches, iteration, False))

        if np.array_equal(new_labels, labels):
            return states, Segmentation(seg.labels, seg.total_cost, seg.switches, iteration, True)
        labels = new_labels

    logger.warning(f"ICC在 {config.max_iters} 次迭代内未收敛，返回代价最低的迭代")
    states, seg = best
    return states, Segmentation(seg.labels, seg.total_cost, seg.switches, config.max_iters, False)


def initial_assignments(X: np.ndarray, config: IccConfig) -> Iterator[Tuple[str, np.ndarray]]:
    """逐个产出各次初始化的起始标签（0起）

    gmm_init为真时第0次取全协方差GMM的硬标签，其余各次从init子流（每次一个子流）
    按块随机抽取。
    """
    T = X.shape[0]
    first = 0
    if config.gmm_init and config.K > 1:
        first = 1
        try:
            yield "gmm", fit_gmm(X, config.K, config.seed).hard_labels() - 1
        except BaseErrorException as exc:
            logger.warning(f"GMM初始化失败，改用随机初始化: {exc.one_line()}")
    for restart in range(first, config.n_init):
        yield f"random#{restart}", random_assignment(T, config.K, substream(config.seed, "init", restart), config.init_block)


def fit_icc(
    panel: ReturnsPanel,
    config: IccConfig,
    initial_labels: Optional[np.ndarray] = None,
) -> Tuple[List[MarketState], Segmentation]:
    """交替估计状态与Viterbi分配，直到标签不再变化

    给定initial_labels（1..K）时只拟合一次；否则运行n_init次初始化，保留restart_score
    最低者，出现空聚类的初始化被跳过。达到max_iters仍未收敛时返回代价最低的迭代，
    converged=False。
    """
    X = np.asarray(panel.returns, dtype=float)
    T = X.shape[0]
    K = config.K
    if T < K * MIN_OBSERVATIONS:
        raise InvalidConfigException(f"T={T} is too short for K={K} states (need {K * MIN_OBSERVATIONS})", field="K")

    if initial_labels is not None:
        labels = np.asarray(initial_labels, dtype=np.intp) - 1
        if labels.shape != (T,) or labels.min() < 0 or labels.max() >= K:
            raise InvalidConfigException("initial labels must have length T and values in 1..K", field="initial_labels")
        states, seg = _iterate(X, labels, config)
        logger.info(f"ICC拟合完成: {seg.iterations} 次迭代, γ={config.gamma}, 切换 {seg.switches} 次, 收敛={seg.converged}")
        return states, seg

    if K == 1:
        starts: Iterator[Tuple[str, np.ndarray]] = iter([("single", np.zeros(T, dtype=np.intp))])
    else:
        starts = initial_assignments(X, config)

    best: Optional[Tuple[float, List[MarketState], Segmentation]] = None
    failures: List[str] = []
    for name, labels in starts:
        try:
            states, seg = _iterate(X, labels, config)
        except EmptyClusterException as exc:
            logger.warning(f"初始化 {name} 出现空聚类，换下一个初始化: {exc.detail}")
            failures.append(name)
            continue
        score = restart_score(states, seg)
        logger.debug(f"初始化 {name}: score={score:.4f} switches={seg.switches} converged={seg.converged}")
        if best is None or score < best[0]:
            best = (score, states, seg)

    if best is None:
        raise EmptyClusterException(f"every initialisation ({', '.join(failures)}) left a state below {MIN_OBSERVATIONS} observations")
    _, states, seg = best
    logger.info(f"ICC拟合完成: {seg.iterations} 次迭代, γ={config.gamma}, 切换 {seg.switches} 次, 收敛={seg.converged}")
    return states, seg

def mean_segment_length(seg: Segmentation) -> float:
    return seg.T / (seg.switches + 1)


def grid_search_gamma(
    panel: ReturnsPanel,
    config: IccConfig,
    grid: Sequence[float],
    target_length: float = DEFAULT_TARGET_LENGTH,
) -> float:
    """选出平均片段长度最接近目标的γ，并列取较小者"""
    if not grid:
        raise InvalidConfigException("gamma grid must not be empty", field="gamma_grid")
    best_gamma: Optional[float] = None
    best_gap = np.inf
    for gamma in sorted(set(float(g) for g in grid)):
        try:
            _, seg = fit_icc(panel, config.model_copy(update={"gamma": gamma}))
        except BaseErrorException as exc:
            logger.warning(f"γ={gamma} 拟合失败: {exc.one_line()}")
            continue
        gap = abs(mean_segment_length(seg) - target_length)
        logger.debug(f"γ={gamma}: 平均片段长度 {mean_segment_length(seg):.2f}")
        if gap < best_gap:
            best_gamma, best_gap = gamma, gap
    if best_gamma is None:
        raise AllFitsFailedException(f"no fit succeeded on grid {list(grid)}")
    logger.info(f"网格搜索选出 γ={best_gamma}（目标平均片段长度 {target_length}）")
    return best_gamma


def order_bull_bear(
    states: Sequence[MarketState],
    seg: Segmentation,
) -> Tuple[List[MarketState], Segmentation]:
    """重新编号，使状态1为截面平均收益最高的状态（牛市）"""
    order = sorted(range(len(states)), key=lambda k: (-float(np.mean(states[k].mu)), k))
    mapping = np.empty(len(states) + 1, dtype=np.intp)
    relabelled = []
    for new, old in enumerate(order, start=1):
        mapping[states[old].label] = new
        relabelled.append(states[old].relabel(new))
    labels = mapping[seg.labels]
    return relabelled, Segmentation(labels, seg.total_cost, seg.switches, seg.iterations, seg.converged)


def label_accuracy(labels: np.ndarray, truth: np.ndarray) -> float:
    """对预测状态的所有重新编号取最高一致率"""
    labels = np.asarray(labels)
    truth = np.asarray(truth)
    if labels.shape != truth.shape:
        raise DimensionMismatchException(f"labels {labels.shape} vs truth {truth.shape}")
    values = sorted(set(labels.tolist()) | set(truth.tolist()))
    best = 0.0
    for perm in permutations(values):
        mapping = dict(zip(values, perm))
        mapped = np.vectorize(mapping.get)(labels)
        best = max(best, float(np.mean(mapped == truth)))
    return best
