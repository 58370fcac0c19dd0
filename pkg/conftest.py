"""测试公共夹具"""
import numpy as np
import pandas as pd
import pytest

from icc.app.schema.panel import ReturnsPanel, SyntheticSpec
from icc.app.service.data_ingest import generate_synthetic


def make_panel(X: np.ndarray, start: str = "2020-01-01") -> ReturnsPanel:
    """用矩阵构造收益率面板"""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return ReturnsPanel(
        dates=pd.bdate_range(start, periods=X.shape[0]),
        tickers=[f"A{i}" for i in range(X.shape[1])],
        returns=X,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def regime_panel():
    """两状态合成面板 (n=20, T=2000, persistence=100)"""
    return generate_synthetic(SyntheticSpec(n=20, T=2000, persistence=100, seed=7))
