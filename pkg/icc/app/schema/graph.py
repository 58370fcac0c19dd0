"""TMFG图Schema"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import networkx as nx
import numpy as np


@dataclass(frozen=True)
class SimilarityMatrix:
    """n×n对称非负权重矩阵（对角线为0）"""
    weights: np.ndarray
    tickers: Optional[List[str]] = None

    @property
    def n(self) -> int:
        return int(self.weights.shape[0])


@dataclass(frozen=True)
class Insertion:
    """一次贪心插入：顶点、被替换的三角面、权重增益"""
    vertex: int
    face: Tuple[int, int, int]
    gain: float


@dataclass(frozen=True)
class TmfgGraph:
    """三角化最大过滤图：边、4-团、3-团分隔集"""
    n: int
    edges: frozenset
    cliques: List[Tuple[int, int, int, int]]
    separators: List[Tuple[int, int, int]]
    seed_clique: Tuple[int, int, int, int] = (0, 1, 2, 3)
    insertions: List[Insertion] = field(default_factory=list)

    def adjacency(self) -> np.ndarray:
        """布尔邻接矩阵（对角线为False）"""
        adj = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = True
        return adj

    def support(self) -> np.ndarray:
        """精度矩阵允许的非零位置：边 + 对角线"""
        return self.adjacency() | np.eye(self.n, dtype=bool)

    def total_weight(self, sim: SimilarityMatrix) -> float:
        return float(sum(sim.weights[i, j] for i, j in self.edges))

    def to_networkx(self, sim: Optional[SimilarityMatrix] = None) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n))
        for i, j in sorted(self.edges):
            weight = float(sim.weights[i, j]) if sim is not None else 1.0
            graph.add_edge(i, j, weight=weight)
        return graph
