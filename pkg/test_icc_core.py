"""ICC聚类核心测试"""
from itertools import product

import numpy as np
import pytest

from conftest import make_panel
from icc.app.common.exception.errors import DimensionMismatchException, InvalidConfigException, ZeroVarianceException
from icc.app.schema.panel import SyntheticSpec
from icc.app.schema.state import IccConfig, MarketState, Segmentation, SparsePrecision
from icc.app.service.data_ingest import generate_synthetic
from icc.app.service.icc_core import (
    estimate_state,
    fit_icc,
    grid_search_gamma,
    label_accuracy,
    mahalanobis_sq,
    mahalanobis_sq_batch,
    mean_segment_length,
    order_bull_bear,
    random_assignment,
    restart_score,
    viterbi_assign,
)


def _state(mu, J, label=1):
    J = np.asarray(J, dtype=float)
    return MarketState(
        mu=np.asarray(mu, dtype=float),
        precision=SparsePrecision(matrix=J, logdet=float(np.linalg.slogdet(J)[1])),
        label=label,
    )


def test_mahalanobis_examples():
    """测试马氏距离的基本例子"""
    assert mahalanobis_sq(np.array([1.0, 2.0]), _state([0, 0], np.eye(2))) == pytest.approx(5.0)
    assert mahalanobis_sq(np.array([1.0, 1.0]), _state([0, 0], [[2, 0], [0, 1]])) == pytest.approx(3.0)
    assert mahalanobis_sq(np.array([3.0, 3.0]), _state([3, 3], [[2, 0], [0, 1]])) == 0.0
    X = np.array([[1.0, 2.0], [1.0, 1.0]])
    assert mahalanobis_sq_batch(X, _state([0, 0], np.eye(2))) == pytest.approx([5.0, 2.0])
    with pytest.raises(DimensionMismatchException):
        mahalanobis_sq(np.zeros(3), _state([0, 0], np.eye(2)))


_PATHS = np.array(list(product(range(3), repeat=8)))
_PATH_SWITCHES = np.count_nonzero(np.diff(_PATHS, axis=1), axis=1)


@pytest.mark.parametrize("gamma", [0.0, 0.3, 10.0])
def test_viterbi_matches_brute_force(gamma):
    """测试Viterbi结果与穷举所有路径的最小代价一致"""
    rng = np.random.default_rng(int(gamma * 10) + 1)
    for _ in range(100):
        costs = rng.uniform(0, 1, size=(8, 3))
        seg = viterbi_assign(costs, gamma)
        totals = costs[np.arange(8), _PATHS].sum(axis=1) + gamma * _PATH_SWITCHES
        assert seg.total_cost == pytest.approx(totals.min(), abs=1e-12)
        path = seg.labels - 1
        recomputed = costs[np.arange(8), path].sum() + gamma * seg.switches
        assert seg.total_cost == pytest.approx(recomputed, abs=1e-12)
        assert seg.switches == Segmentation.count_switches(seg.labels)


def test_viterbi_limits(rng):
    """测试γ=0为逐行argmin，γ很大时为常数路径"""
    costs = rng.uniform(0, 1, size=(50, 4))
    assert np.array_equal(viterbi_assign(costs, 0.0).labels, np.argmin(costs, axis=1) + 1)
    flat = viterbi_assign(costs, 1e6)
    assert flat.switches == 0
    assert flat.labels[0] == np.argmin(costs.sum(axis=0)) + 1


def test_viterbi_ties_stay():
    """测试平局时保持前一状态、再取较小编号"""
    assert viterbi_assign(np.zeros((5, 3)), 1.0).labels.tolist() == [1] * 5
    costs = np.array([[0.0, 3.0], [1.0, 0.0], [1.0, 0.0]])
    seg = viterbi_assign(costs, 2.0)
    assert seg.labels.tolist() == [1, 1, 1]
    assert seg.total_cost == pytest.approx(2.0)


def test_switches_non_increasing_in_gamma():
    """测试切换次数随γ单调不增"""
    rng = np.random.default_rng(77)
    grid = [0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0]
    for _ in range(50):
        costs = rng.exponential(1.0, size=(60, 3))
        switches = [viterbi_assign(costs, g).switches for g in grid]
        assert all(a >= b for a, b in zip(switches, switches[1:]))


def test_random_assignment_blocks(rng):
    """测试随机初始化按块抽取"""
    labels = random_assignment(103, 2, rng, block=10)
    assert labels.shape == (103,)
    assert set(labels.tolist()) <= {0, 1}
    for start in range(0, 100, 10):
        assert len(set(labels[start:start + 10].tolist())) == 1


def test_single_state_fit(rng):
    """测试K=1时全部观测属于同一状态且无切换"""
    panel = make_panel(rng.normal(size=(100, 5)))
    states, seg = fit_icc(panel, IccConfig(K=1, gamma=5.0))
    assert set(seg.labels.tolist()) == {1}
    assert seg.switches == 0
    assert seg.converged
    assert np.allclose(states[0].mu, panel.returns.mean(axis=0))


def test_too_short_panel(rng):
    """测试T < 5K时报配置错误"""
    with pytest.raises(InvalidConfigException):
        fit_icc(make_panel(rng.normal(size=(9, 4))), IccConfig(K=2))


def test_initial_labels_validated(rng):
    """测试初始标签取值校验"""
    panel = make_panel(rng.normal(size=(30, 4)))
    with pytest.raises(InvalidConfigException):
        fit_icc(panel, IccConfig(K=2), initial_labels=np.full(30, 3))


@pytest.mark.slow
def test_segmentation_recovery_over_seeds():
    """测试网格选γ的稀疏ICC在10个种子上恢复分割，γ=0切换更多"""
    accurate = within = 0
    for seed in range(10):
        panel, truth = generate_synthetic(SyntheticSpec(n=20, T=2000, persistence=100, seed=seed))
        config = IccConfig(K=2, seed=seed)
        gamma = grid_search_gamma(panel, config, [0.0, 1.0, 4.0, 16.0, 64.0], target_length=100.0)
        _, seg = fit_icc(panel, config.model_copy(update={"gamma": gamma}))
        _, free = fit_icc(panel, config.model_copy(update={"gamma": 0.0}))
        true_switches = Segmentation.count_switches(truth)
        accurate += label_accuracy(seg.labels, truth) >= 0.9
        within += true_switches / 2 <= seg.switches <= 2 * true_switches
        assert free.switches > seg.switches
    assert accurate >= 9
    assert within >= 9


@pytest.mark.slow
def test_fit_survives_every_init_seed():
    """测试小面板上各随机种子都能完成拟合（空聚类时换初始化）"""
    panel, truth = generate_synthetic(SyntheticSpec(n=8, T=600, seed=3))
    accurate = 0
    for seed in range(10):
        for sparse in (True, False):
            states, seg = fit_icc(panel, IccConfig(K=2, gamma=16.0, sparse=sparse, seed=seed))
            assert min(state.size for state in states) >= 5
            accurate += label_accuracy(seg.labels, truth) >= 0.8
    assert accurate >= 16


def test_more_restarts_never_score_worse(regime_panel):
    """测试增加初始化次数不会得到更差的restart_score"""
    panel, _ = regime_panel
    config = IccConfig(K=2, gamma=16.0, sparse=False, max_iters=20, gmm_init=False, seed=4)
    one = fit_icc(panel, config.model_copy(update={"n_init": 1}))
    three = fit_icc(panel, config.model_copy(update={"n_init": 3}))
    assert restart_score(*three) <= restart_score(*one)


def test_restart_score():
    """测试restart_score = 总代价 - 各观测所属状态的log|J|"""
    states = [_state([0.0], [[np.e]], 1), _state([0.0], [[np.e ** 3]], 2)]
    seg = Segmentation(labels=np.array([1, 1, 2]), total_cost=10.0, switches=1)
    assert restart_score(states, seg) == pytest.approx(5.0)


def test_constant_column_in_state():
    """测试聚类内常数列（浮点常数）报零方差"""
    X = np.random.default_rng(1).normal(size=(30, 5))
    X[:, 3] = 0.01
    with pytest.raises(ZeroVarianceException):
        estimate_state(X, 1, sparse=True)


def test_label_permutation_symmetry(regime_panel):
    """测试交换初始标签只交换结果标签"""
    panel, truth = regime_panel
    config = IccConfig(K=2, gamma=16.0, sparse=False, max_iters=20)
    _, seg_a = fit_icc(panel, config, initial_labels=truth)
    _, seg_b = fit_icc(panel, config, initial_labels=3 - truth)
    assert np.array_equal(seg_a.labels, 3 - seg_b.labels)
    assert seg_a.total_cost == pytest.approx(seg_b.total_cost, rel=1e-9)


def test_zero_gamma_switches_more(regime_panel):
    """测试γ=0比大γ产生更多切换"""
    panel, truth = regime_panel
    _, free = fit_icc(panel, IccConfig(K=2, gamma=0.0, sparse=False, max_iters=20), initial_labels=truth)
    _, sticky = fit_icc(panel, IccConfig(K=2, gamma=50.0, sparse=False, max_iters=20), initial_labels=truth)
    assert free.switches > sticky.switches


def test_grid_search(regime_panel):
    """测试单点网格直接返回该点，空网格报错"""
    panel, _ = regime_panel
    config = IccConfig(K=2, sparse=False, max_iters=10)
    assert grid_search_gamma(panel, config, [3.0]) == 3.0
    with pytest.raises(InvalidConfigException):
        grid_search_gamma(panel, config, [])


def test_mean_segment_length():
    """测试平均片段长度T/(切换+1)"""
    seg = Segmentation(labels=np.array([1, 1, 2, 2, 2, 1]), total_cost=0.0, switches=2)
    assert mean_segment_length(seg) == pytest.approx(2.0)


def test_order_bull_bear():
    """测试按截面平均收益重新编号，状态1为bull"""
    states = [_state([-1.0, -1.0], np.eye(2), 1), _state([1.0, 1.0], np.eye(2), 2)]
    seg = Segmentation(labels=np.array([1, 1, 2]), total_cost=4.0, switches=1)
    ordered, relabelled = order_bull_bear(states, seg)
    assert [s.label for s in ordered] == [1, 2]
    assert ordered[0].mu.mean() == 1.0
    assert relabelled.labels.tolist() == [2, 2, 1]
    assert relabelled.total_cost == 4.0


def test_label_accuracy():
    """测试标签准确率对编号置换不变"""
    assert label_accuracy(np.array([1, 1, 2, 2]), np.array([2, 2, 1, 1])) == 1.0
    assert label_accuracy(np.array([1, 2, 1, 2]), np.array([1, 1, 2, 2])) == 0.5
