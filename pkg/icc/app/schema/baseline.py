"""基准模型Schema"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np


@dataclass(frozen=True)
class GmmModel:
    """全协方差高斯混合模型"""
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    responsibilities: np.ndarray
    log_likelihood: float
    iterations: int
    converged: bool
    history: List[float] = field(default_factory=list)

    @property
    def K(self) -> int:
        return int(self.weights.shape[0])

    def hard_labels(self) -> np.ndarray:
        """按最大责任度分配的硬标签（1..K）"""
        return np.argmax(self.responsibilities, axis=1) + 1


@dataclass(frozen=True)
class RidgePrecision:
    """Ridge l2惩罚逆协方差"""
    matrix: np.ndarray
    lam: float
    cv_folds: int = 0
