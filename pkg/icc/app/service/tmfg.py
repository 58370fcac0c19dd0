"""TMFG（三角化最大过滤图）构建

从权重最大的4-团出发，每次把一个顶点插入增益最大的三角面。每次插入新增一个
4-团（顶点+面）和一个3-团分隔集（该面），供LoGo求逆使用。
"""
from __future__ import annotations

from itertools import combinations
from typing import Dict, List, Tuple

import numpy as np

from icc.app.common.exception.errors import TooFewVerticesException, ZeroVarianceException
from icc.app.common.log import logger
from icc.app.schema.graph import Insertion, SimilarityMatrix, TmfgGraph
from icc.app.schema.panel import ReturnsPanel


def similarity_from_covariance(cov: np.ndarray) -> np.ndarray:
    """相关系数平方，对角线置零"""
    std = np.sqrt(np.diag(cov))
    corr = cov / np.outer(std, std)
    weights = np.clip(corr ** 2, 0.0, 1.0)
    np.fill_diagonal(weights, 0.0)
    return weights


def prepare_similarity(panel: ReturnsPanel) -> SimilarityMatrix:
    """边权为收益列Pearson相关系数的平方"""
    X = np.asarray(panel.returns, dtype=float)
    if X.shape[0] < 2:
        raise ZeroVarianceException(panel.tickers[0] if panel.tickers else "?")
    flat = np.flatnonzero(np.ptp(X, axis=0) == 0)
    if flat.size:
        raise ZeroVarianceException(panel.tickers[int(flat[0])])
    cov = np.cov(X, rowvar=False, ddof=1)
    return SimilarityMatrix(similarity_from_covariance(np.atleast_2d(cov)), list(panel.tickers))


_TRIU_CACHE: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}


def _triu(size: int) -> Tuple[np.ndarray, np.ndarray]:
    if size not in _TRIU_CACHE:
        _TRIU_CACHE[size] = np.triu_indices(size, 1)
    return _TRIU_CACHE[size]


def _seed_clique(W: np.ndarray) -> Tuple[int, int, int, int]:
    """穷举权重最大的4-团，并列时取字典序最小的四元组"""
    n = W.shape[0]
    best_value = -np.inf
    best: Tuple[int, int, int, int] = (0, 1, 2, 3)
    for i in range(n - 3):
        for j in range(i + 1, n - 2):
            rest = np.arange(j + 1, n)
            a = W[i, rest] + W[j, rest]
            block = a[:, None] + a[None, :] + W[np.ix_(rest, rest)]
            rows, cols = _triu(rest.size)
            values = block[rows, cols]
            pick = int(np.argmax(values))
            value = W[i, j] + values[pick]
            if value > best_value:
                best_value = value
                best = (i, j, int(rest[rows[pick]]), int(rest[cols[pick]]))
    return best


def build_tmfg(sim: SimilarityMatrix) -> TmfgGraph:
    """贪心构建TMFG：3n-6条边、n-3个团、n-4个分隔集

    插入增益并列时取下标最小的顶点，再取最早的面
    """
    W = np.asarray(sim.weights, dtype=float)
    n = W.shape[0]
    if n < 4:
        raise TooFewVerticesException(n)

    seed = _seed_clique(W)
    edges = set(combinations(seed, 2))
    faces: List[Tuple[int, int, int]] = list(combinations(seed, 3))
    cliques: List[Tuple[int, int, int, int]] = [seed]
    separators: List[Tuple[int, int, int]] = []
    insertions: List[Insertion] = []
    remaining = [v for v in range(n) if v not in seed]

    while remaining:
        R = np.asarray(remaining)
        F = np.asarray(faces)
        gains = W[np.ix_(R, F[:, 0])] + W[np.ix_(R, F[:, 1])] + W[np.ix_(R, F[:, 2])]
        r, f = divmod(int(np.argmax(gains)), len(faces))
        v = remaining.pop(r)
        a, b, c = faces[f]

        edges.update((min(v, u), max(v, u)) for u in (a, b, c))
        faces[f] = tuple(sorted((a, b, v)))
        faces.append(tuple(sorted((a, c, v))))
        faces.append(tuple(sorted((b, c, v))))
        cliques.append(tuple(sorted((a, b, c, v))))
        separators.append((a, b, c))
        insertions.append(Insertion(vertex=v, face=(a, b, c), gain=float(gains[r, f])))

    graph = TmfgGraph(
        n=n,
        edges=frozenset(edges),
        cliques=cliques,
        separators=separators,
        seed_clique=seed,
        insertions=insertions,
    )
    logger.debug(f"TMFG n={n}: {len(edges)} 条边, 种子团 {seed}")
    return graph


def export_graph(graph: TmfgGraph, sim: SimilarityMatrix, directory, stem: str):
    from icc.app.storage.export_store import export_store

    return export_store.write_graph(graph, sim, directory, stem)
