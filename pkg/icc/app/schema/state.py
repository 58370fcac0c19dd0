"""市场状态Schema"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field

from icc.app.schema.graph import TmfgGraph


@dataclass(frozen=True)
class SparsePrecision:
    """精度矩阵J_k及其缓存的log|J_k|；support为None表示稠密"""
    matrix: np.ndarray
    logdet: float
    support: Optional[np.ndarray] = None
    graph: Optional[TmfgGraph] = None

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def is_sparse(self) -> bool:
        return self.support is not None

    def support_size(self) -> int:
        """非零元素个数（含对角线）"""
        if self.support is not None:
            return int(self.support.sum())
        return int(np.count_nonzero(self.matrix))


@dataclass(frozen=True)
class MarketState:
    """市场状态：均值向量μ_k + 精度矩阵J_k，label取值1..K"""
    mu: np.ndarray
    precision: SparsePrecision
    label: int
    size: int = 0

    @property
    def n(self) -> int:
        return int(self.mu.shape[0])

    def relabel(self, label: int) -> "MarketState":
        return replace(self, label=label)


@dataclass(frozen=True)
class Segmentation:
    """长度为T的状态标签序列（1..K）及惩罚后总代价"""
    labels: np.ndarray
    total_cost: float
    switches: int
    iterations: Optional[int] = None
    converged: Optional[bool] = None

    @property
    def T(self) -> int:
        return int(self.labels.shape[0])

    @staticmethod
    def count_switches(labels: np.ndarray) -> int:
        labels = np.asarray(labels)
        return int(np.count_nonzero(labels[1:] != labels[:-1]))


class IccConfig(BaseModel):
    """ICC拟合参数"""
    K: int = Field(2, ge=1, description="状态数量")
    gamma: float = Field(16.0, ge=0, description="状态切换惩罚γ")
    sparse: bool = Field(True, description="TMFG-LoGo稀疏精度（否则为正则化稠密逆）")
    max_iters: int = Field(100, ge=1, description="最大迭代次数")
    seed: int = Field(0, description="随机种子")
    tol: float = Field(1e-9, ge=0, description="代价单调性检查容差")
    init_block: Optional[int] = Field(None, ge=1, description="随机初始化的块长度，None为T//(10K)")
    max_reseeds: int = Field(5, ge=0, description="空聚类最大重置次数")
    n_init: int = Field(10, ge=1, description="初始化次数，取restart_score最低的一次")
    gmm_init: bool = Field(True, description="第一次初始化使用GMM硬标签")
