"""数据接入测试"""
import numpy as np
import pandas as pd
import pytest

from conftest import make_panel
from icc.app.common.exception.errors import (
    BasketTooLargeException,
    InvalidSyntheticSpecException,
    NonPositivePriceException,
    UnalignedDatesException,
)
from icc.app.schema.panel import PricePanel, RegimeSpec, SyntheticSpec
from icc.app.service.data_ingest import (
    generate_synthetic,
    log_returns,
    prices_from_returns,
    read_price_csv,
    resample_basket,
    split_panel,
    tmfg_structured_covariance,
    write_panel_csv,
)


def _prices(column):
    column = np.asarray(column, dtype=float)[:, None]
    return PricePanel(pd.bdate_range("2021-01-04", periods=column.shape[0]), ["X"], column)


def test_log_returns_examples():
    """测试对数收益率的基本例子"""
    assert np.array_equal(log_returns(_prices([100, 100, 100])).returns[:, 0], [0.0, 0.0])
    assert log_returns(_prices([100, 100 * np.e])).returns[0, 0] == pytest.approx(1.0, abs=1e-14)
    r = log_returns(_prices([100, 105, 99.75])).returns[:, 0]
    assert r == pytest.approx([np.log(1.05), np.log(0.95)], abs=1e-14)
    assert r == pytest.approx([0.04879, -0.05129], abs=1e-5)


def test_log_returns_rejects_non_positive_price():
    """测试非正价格被拒绝并指出日期和资产"""
    panel = PricePanel(pd.bdate_range("2021-01-04", periods=3), ["A", "B"], np.array([[1.0, 2.0], [1.0, 0.0], [1.0, 2.0]]))
    with pytest.raises(NonPositivePriceException) as info:
        log_returns(panel)
    assert info.value.ticker == "B"
    assert str(info.value.date) == "2021-01-05"
    assert info.value.exit_code == 2


def test_log_returns_round_trip(rng):
    """测试累计指数化后再取对数收益率是恒等变换"""
    panel = make_panel(rng.normal(0, 0.01, size=(250, 4)))
    back = log_returns(prices_from_returns(panel))
    assert back.T == panel.T
    assert np.max(np.abs(back.returns - panel.returns)) < 1e-12
    assert back.dates.equals(panel.dates)


def test_resample_basket():
    """测试篮子重采样的确定性与边界"""
    panel = make_panel(np.arange(60, dtype=float).reshape(10, 6))
    full = resample_basket(panel, 6, seed=3)
    assert sorted(full.tickers) == sorted(panel.tickers)
    assert resample_basket(panel, 1, seed=3).n == 1
    a = resample_basket(panel, 3, seed=11, index=4)
    b = resample_basket(panel, 3, seed=11, index=4)
    assert a.tickers == b.tickers
    assert np.array_equal(a.returns, b.returns)
    with pytest.raises(BasketTooLargeException):
        resample_basket(panel, 7, seed=3)


def test_synthetic_single_regime_constant_labels():
    """测试单一状态时标签恒定"""
    spec = SyntheticSpec(n=3, T=300, persistence=300, regimes=[RegimeSpec(mean=0.0)], seed=1)
    _, labels = generate_synthetic(spec)
    assert set(labels.tolist()) == {1}


def test_synthetic_is_deterministic():
    """测试固定种子逐位可复现"""
    spec = SyntheticSpec(n=5, T=400, seed=42)
    p1, l1 = generate_synthetic(spec)
    p2, l2 = generate_synthetic(spec)
    assert np.array_equal(p1.returns, p2.returns)
    assert np.array_equal(l1, l2)


def test_synthetic_segment_length_matches_persistence():
    """测试平均片段长度接近persistence"""
    regimes = [RegimeSpec(mean=0.1), RegimeSpec(mean=-0.1)]
    _, labels = generate_synthetic(SyntheticSpec(n=2, T=20000, persistence=20, regimes=regimes, seed=5))
    switches = int(np.count_nonzero(np.diff(labels)))
    assert abs(20000 / (switches + 1) - 20) < 0.2 * 20


def test_synthetic_switch_rate_converges():
    """测试切换频率收敛到 1/persistence"""
    _, labels = generate_synthetic(SyntheticSpec(n=2, T=50000, persistence=100, seed=9))
    rate = np.count_nonzero(np.diff(labels)) / labels.size
    assert abs(rate - 0.01) < 0.2 * 0.01


def test_synthetic_three_regimes_visit_all_states():
    """测试K状态链切换到其他状态"""
    regimes = [RegimeSpec(mean=m) for m in (-0.1, 0.0, 0.1)]
    _, labels = generate_synthetic(SyntheticSpec(n=2, T=5000, persistence=10, regimes=regimes, seed=2))
    assert set(labels.tolist()) == {1, 2, 3}
    changes = np.diff(labels) != 0
    assert changes.any()


def test_synthetic_rejects_non_pd_covariance():
    """测试非正定协方差被拒绝"""
    spec = SyntheticSpec(n=2, T=50, regimes=[RegimeSpec(covariance=[[1.0, 2.0], [2.0, 1.0]])])
    with pytest.raises(InvalidSyntheticSpecException):
        generate_synthetic(spec)


def test_synthetic_spec_validates_mean_length():
    """测试均值向量长度校验"""
    with pytest.raises(ValueError):
        SyntheticSpec(n=3, regimes=[RegimeSpec(mean=[0.1, 0.2])])


def test_default_regimes_differ_in_shape():
    """测试默认的bull/bear状态相关结构不同"""
    spec = SyntheticSpec(n=20)
    bull, bear = (r.covariance_matrix(20) for r in spec.regimes)
    assert bull[0, 1] == pytest.approx(0.6)
    assert bull[10, 11] == pytest.approx(0.0)
    assert bear[10, 11] == pytest.approx(0.6)
    assert spec.regimes[0].mean_vector(20).mean() > spec.regimes[1].mean_vector(20).mean()


def test_split_panel(rng):
    """测试按比例和日期划分训练/测试集"""
    panel = make_panel(rng.normal(size=(100, 2)))
    train, test = split_panel(panel, 0.65)
    assert (train.T, test.T) == (65, 35)
    cut = panel.dates[9].date()
    train, test = split_panel(panel, split_date=cut)
    assert train.T == 10
    assert train.dates[-1].date() == cut


def test_csv_round_trip_and_gap_dropping(tmp_path, rng):
    """测试CSV读写，并剔除有缺失的资产"""
    prices = prices_from_returns(make_panel(rng.normal(0, 0.01, size=(20, 3))))
    path = write_panel_csv(prices, tmp_path / "prices.csv")
    loaded = read_price_csv(path)
    assert loaded.tickers == prices.tickers
    assert np.array_equal(loaded.prices, prices.prices)

    frame = pd.read_csv(path)
    frame.loc[3, "A1"] = np.nan
    frame.to_csv(tmp_path / "gappy.csv", index=False)
    assert read_price_csv(tmp_path / "gappy.csv").tickers == ["A0", "A2"]


def test_csv_rejects_unordered_dates(tmp_path):
    """测试日期不递增时报错"""
    (tmp_path / "bad.csv").write_text("date,A\n2021-01-05,1.0\n2021-01-04,1.1\n", encoding="utf-8")
    with pytest.raises(UnalignedDatesException):
        read_price_csv(tmp_path / "bad.csv")


def test_tmfg_structured_covariance():
    """测试真值精度矩阵具有TMFG稀疏结构"""
    n = 12
    cov, precision = tmfg_structured_covariance(n, np.random.default_rng(0))
    off = np.count_nonzero(np.triu(precision, k=1))
    assert off == 3 * n - 6
    np.linalg.cholesky(cov)
    assert np.allclose(cov @ precision, np.eye(n), atol=1e-6)


def test_spiked_cliques_make_near_collinear_covariance():
    """测试团内秩一尖峰使协方差出现近共线方向，且不改变TMFG支撑"""
    n = 40
    cov, precision = tmfg_structured_covariance(n, np.random.default_rng(5))
    assert np.linalg.eigvalsh(cov)[0] < 1e-4
    assert np.count_nonzero(np.triu(precision, k=1)) == 3 * n - 6
    plain, plain_precision = tmfg_structured_covariance(n, np.random.default_rng(5), spikes=0)
    assert np.linalg.eigvalsh(plain)[0] > 1e-3
    assert np.count_nonzero(np.triu(plain_precision, k=1)) == 3 * n - 6
