"""评估指标测试"""
import numpy as np
import pytest

from conftest import make_panel
from icc.app.common.exception.errors import ZeroVarianceException
from icc.app.schema.run import RunConfig
from icc.app.schema.state import MarketState, Segmentation, SparsePrecision
from icc.app.service.experiment import stability_service
from icc.app.service.metrics import (
    classification_metrics,
    cluster_report,
    likelihood_stability,
    percentile_summary,
    run_lengths,
    sharpe_ratio,
    sharpe_sign_counts,
    support_overlap,
    temporal_stats,
)


def test_sharpe_ratio():
    """测试年化夏普比率：均值0.001、标准差0.01"""
    returns = 0.001 + 0.01 * np.array([-1.0, 1.0]) / np.sqrt(2)
    assert sharpe_ratio(returns) == pytest.approx(1.5875, abs=1e-4)
    assert sharpe_ratio(-returns) == pytest.approx(-1.5875, abs=1e-4)


def test_sharpe_ratio_undefined():
    """测试零方差或单个观测时报错"""
    with pytest.raises(ZeroVarianceException):
        sharpe_ratio(np.full(10, 0.01), name="flat")
    with pytest.raises(ZeroVarianceException):
        sharpe_ratio(np.array([0.01]))


def test_temporal_stats():
    """测试片段长度统计"""
    stats = temporal_stats(np.array([1, 1, 2, 2, 2, 1]))
    assert stats.switches == 2
    assert stats.segment_lengths == [2, 3, 1]
    assert stats.median == 2.0
    assert stats.mean_length == 2.0
    runs, lengths = run_lengths(np.array([3, 3, 3]))
    assert runs.tolist() == [3]
    assert lengths.tolist() == [3]


def test_classification_metrics():
    """测试TPR/TNR/ACC与超几何p值"""
    report = classification_metrics(np.array([1, 1, 2, 2]), np.array([1, 2, 2, 1]))
    assert (report.tp, report.fp, report.tn, report.fn) == (1, 1, 1, 1)
    assert report.tpr == 0.5
    assert report.tnr == 0.5
    assert report.acc == 0.5
    assert report.tnr_pvalue == pytest.approx(5 / 6)

    perfect = classification_metrics(np.array([1, 2, 2, 1]), np.array([1, 2, 2, 1]))
    assert perfect.acc == 1.0
    assert perfect.tnr_pvalue == pytest.approx(1 / 6)


def test_classification_missing_class():
    """测试真值中缺少某类时对应比率为None"""
    report = classification_metrics(np.array([1, 2, 1]), np.array([1, 1, 1]))
    assert report.tnr is None
    assert report.tnr_pvalue is None
    assert report.tpr == pytest.approx(2 / 3)


def test_tnr_pvalue_decreases_with_true_negatives():
    """测试边际不变时真阴性越多p值越小"""
    actual = np.array([2] * 8 + [1] * 12)
    pvalues = []
    for k in range(9):
        predicted = np.ones(20, dtype=int)
        predicted[:k] = 2
        predicted[8:8 + 8 - k] = 2
        report = classification_metrics(predicted, actual)
        assert report.tn == k
        pvalues.append(report.tnr_pvalue)
    assert all(a >= b for a, b in zip(pvalues, pvalues[1:]))
    assert pvalues[0] == pytest.approx(1.0)


def test_percentile_summary():
    """测试中位数与5%/95%分位（线性插值）"""
    assert percentile_summary([1, 2, 3, 4, 5]) == pytest.approx((3.0, 1.2, 4.8))
    assert percentile_summary([]) == (None, None, None)
    assert percentile_summary([None, 2.0]) == (2.0, 2.0, 2.0)


def test_cluster_report(rng):
    """测试聚类报告：大小之和为T，常数列夏普为None，bull/bear命名"""
    X = rng.normal(0, 0.01, size=(40, 3))
    X[:, 2] = 0.0
    labels = np.array([1] * 15 + [2] * 10 + [1] * 15)
    seg = Segmentation(labels=labels, total_cost=1.0, switches=2)
    report = cluster_report(make_panel(X), seg, model="icc-full", gamma=3.0, K=2)
    assert sum(c.size for c in report.clusters) == 40
    assert [c.name for c in report.clusters] == ["bull", "bear"]
    assert report.clusters[0].sharpe[2] is None
    assert report.clusters[0].longest_run == 15
    assert report.clusters[1].mean_segment_length == 10.0
    assert report.temporal.switches == 2
    assert report.bull_positive_sharpe <= 2


def test_sharpe_sign_counts():
    """测试bull状态正夏普与bear状态负夏普的资产计数"""
    bull = np.tile([[0.02, -0.004, 0.0], [0.01, -0.002, 0.0]], (5, 1))
    bear = np.tile([[-0.02, 0.004, 0.0], [-0.01, 0.002, 0.0]], (5, 1))
    seg = Segmentation(labels=np.array([1] * 10 + [2] * 10), total_cost=0.0, switches=1)
    report = cluster_report(make_panel(np.vstack([bull, bear])), seg, K=2)
    assert sharpe_sign_counts(report) == (1, 1)
    assert (report.bull_positive_sharpe, report.bear_negative_sharpe) == (1, 1)


def test_support_overlap():
    """测试各状态依赖网络的边数与公共边数"""
    a = np.eye(4)
    a[0, 1] = a[1, 0] = 0.3
    a[2, 3] = a[3, 2] = 0.2
    b = np.eye(4)
    b[0, 1] = b[1, 0] = -0.1
    states = [
        MarketState(mu=np.zeros(4), precision=SparsePrecision(matrix=a, logdet=0.0), label=1),
        MarketState(mu=np.zeros(4), precision=SparsePrecision(matrix=b, logdet=0.0), label=2),
    ]
    overlap = support_overlap(states)
    assert overlap.edges == [2, 1]
    assert overlap.common == 1


def test_likelihood_stability_report(rng):
    """测试稳定性报告包含两个估计量的训练/测试行"""
    X = rng.normal(size=(120, 6))
    report = likelihood_stability(make_panel(X[:80]), make_panel(X[80:]), folds=4)
    assert report.q == 80
    assert report.n_test == 40
    for estimator in ("logo", "ridge"):
        for split in ("train", "test"):
            row = report.row(estimator, split)
            assert row.p5 <= row.p95


@pytest.mark.slow
def test_logo_more_stable_than_ridge():
    """测试TMFG结构真值下LoGo的测试集似然比Ridge更稳定"""
    wins = 0
    for seed in range(10):
        config = RunConfig(command="stability", synthetic=True, n=100, q=500, test_fraction=0.5, seed=seed)
        train, test = stability_service.split(config)
        assert (train.T, test.T) == (500, 500)
        report = likelihood_stability(train, test)
        logo_train, logo_test = report.row("logo", "train"), report.row("logo", "test")
        ridge_train, ridge_test = report.row("ridge", "train"), report.row("ridge", "test")
        narrower = (logo_test.p95 - logo_test.p5) < (ridge_test.p95 - ridge_test.p5)
        closer = abs(logo_train.mean - logo_test.mean) < abs(ridge_train.mean - ridge_test.mean)
        wins += narrower and closer
    assert wins >= 9
