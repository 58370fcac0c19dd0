"""实验编排服务：聚类、预测、重采样、似然稳定性与合成数据"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from icc.app.common.exception.errors import (
    AllFitsFailedException,
    BasketTooLargeException,
    BaseErrorException,
    InvalidConfigException,
)
from icc.app.common.log import logger, sync_log_decorator
from icc.app.common.rng import substream
from icc.app.core.config import settings
from icc.app.schema.forecast import ForecastModel
from icc.app.schema.graph import SimilarityMatrix
from icc.app.schema.panel import ReturnsPanel, SyntheticSpec
from icc.app.schema.report import (
    AggregateRow,
    ClusterReport,
    FitSummary,
    ForecastReport,
    LlrRow,
    ReportBundle,
    SharpeRow,
    StabilityReport,
    TimeseriesRow,
)
from icc.app.schema.run import ModelVariant, RunConfig
from icc.app.schema.state import IccConfig, MarketState, Segmentation
from icc.app.service.baselines import fit_gmm, fraction_positive_series, gmm_states
from icc.app.service.data_ingest import (
    generate_synthetic,
    log_returns,
    prices_from_returns,
    read_price_csv,
    resample_basket,
    split_panel,
    tmfg_structured_covariance,
)
from icc.app.service.forecast import fit_forecaster, predict_states, rolling_llr, training_pairs
from icc.app.service.icc_core import fit_icc, grid_search_gamma, label_accuracy, mean_segment_length, order_bull_bear
from icc.app.service.metrics import classification_metrics, cluster_report, likelihood_stability
from icc.app.service.report import emit_report
from icc.app.service.logo import export_precision
from icc.app.service.tmfg import export_graph, similarity_from_covariance
from icc.app.storage.export_store import export_store
from icc.app.storage.panel_store import panel_store

REGRESSORS = ("llr", "fraction-positive")


def load_panel(config: RunConfig) -> Tuple[ReturnsPanel, Optional[np.ndarray]]:
    """按配置加载收益率面板；合成数据同时返回真实标签"""
    if config.synthetic:
        spec = SyntheticSpec(n=config.n, T=config.T, persistence=config.persistence, seed=config.seed)
        return generate_synthetic(spec)
    if config.input is None:
        raise InvalidConfigException("either --input or --synthetic is required", field="input")
    return log_returns(read_price_csv(config.input)), None


def fit_variant(
    panel: ReturnsPanel,
    model: ModelVariant,
    K: int,
    gamma: float,
    seed: int,
    max_iters: int = 100,
    n_init: int = 10,
) -> Tuple[List[MarketState], Segmentation]:
    """拟合指定模型变体，并按截面平均收益把bull排为状态1"""
    if model is ModelVariant.GMM:
        gmm = fit_gmm(panel, K, seed)
        labels = gmm.hard_labels()
        seg = Segmentation(
            labels=labels,
            total_cost=-gmm.log_likelihood,
            switches=Segmentation.count_switches(labels),
            iterations=gmm.iterations,
            converged=gmm.converged,
        )
        states = gmm_states(gmm)
    else:
        config = IccConfig(K=K, gamma=gamma, sparse=model.sparse, max_iters=max_iters, seed=seed, n_init=n_init)
        states, seg = fit_icc(panel, config)
    return order_bull_bear(states, seg)


def _resolve_gamma(panel: ReturnsPanel, config: RunConfig) -> float:
    gamma = config.resolved_gamma()
    if config.gamma_grid and config.model.is_icc and not config.model.zero_gamma:
        icc_config = IccConfig(
            K=config.K,
            gamma=gamma,
            sparse=config.model.sparse,
            max_iters=config.max_iters,
            seed=config.seed,
            n_init=config.n_init,
        )
        gamma = grid_search_gamma(panel, icc_config, config.gamma_grid, config.resolved_target_length())
    return gamma


@dataclass
class ClusterOutcome:
    """一次聚类的全部结果"""
    panel: ReturnsPanel
    states: List[MarketState]
    seg: Segmentation
    gamma: float
    report: ClusterReport
    truth: Optional[np.ndarray] = None


@dataclass
class ForecastOutcome:
    """一个自变量下的预测结果"""
    model: ForecastModel
    report: ForecastReport
    series: List[LlrRow] = field(default_factory=list)
    predictions: List[LlrRow] = field(default_factory=list)


def timeseries_rows(panel: ReturnsPanel, labels: np.ndarray) -> List[TimeseriesRow]:
    cumulative = np.cumsum(panel.returns.mean(axis=1))
    return [
        TimeseriesRow(date=d.strftime("%Y-%m-%d"), cum_mean_return=float(c), state=int(s))
        for d, c, s in zip(panel.dates, cumulative, labels)
    ]


def sharpe_rows(report: ClusterReport) -> List[SharpeRow]:
    return [
        SharpeRow(ticker=ticker, state=cluster.label, name=cluster.name, sharpe=value)
        for cluster in report.clusters
        for ticker, value in zip(report.tickers, cluster.sharpe)
    ]


class ClusterService:
    """聚类实验"""

    def evaluate(self, panel: ReturnsPanel, config: RunConfig, truth: Optional[np.ndarray] = None) -> ClusterOutcome:
        gamma = _resolve_gamma(panel, config)
        states, seg = fit_variant(panel, config.model, config.K, gamma, config.seed, config.max_iters, config.n_init)
        accuracy = label_accuracy(seg.labels, truth) if truth is not None else None
        report = cluster_report(
            panel,
            seg,
            model=config.model.value,
            gamma=gamma,
            K=config.K,
            states=states,
            accuracy=accuracy,
        )
        return ClusterOutcome(panel=panel, states=states, seg=seg, gamma=gamma, report=report, truth=truth)

    def summary(self, outcome: ClusterOutcome) -> FitSummary:
        return FitSummary(
            model=outcome.report.model,
            cluster_sizes=[c.size for c in outcome.report.clusters],
            switches=outcome.seg.switches,
            mean_segment_length=mean_segment_length(outcome.seg),
            gamma=outcome.gamma,
            iterations=outcome.seg.iterations,
            converged=outcome.seg.converged,
            total_cost=outcome.seg.total_cost,
            accuracy=outcome.report.accuracy,
        )

    def write_outputs(self, outcome: ClusterOutcome, output: Path) -> None:
        """segmentation.csv、fit_summary.json 与 states/ 下的精度矩阵和TMFG图"""
        export_store.write_segmentation(outcome.panel.dates, outcome.seg.labels, output / "segmentation.csv")
        export_store.write_json(self.summary(outcome), output / "fit_summary.json")
        states_dir = output / "states"
        for state in outcome.states:
            export_precision(state.precision, states_dir, f"state_{state.label}_precision")
            graph = state.precision.graph
            if graph is not None:
                block = outcome.panel.returns[outcome.seg.labels == state.label]
                cov = np.atleast_2d(np.cov(block, rowvar=False, ddof=1))
                sim = SimilarityMatrix(similarity_from_covariance(cov), list(outcome.panel.tickers))
                export_graph(graph, sim, states_dir, f"state_{state.label}_graph")

    @sync_log_decorator("cluster")
    def run(self, config: RunConfig) -> ReportBundle:
        panel, truth = load_panel(config)
        outcome = self.evaluate(panel, config, truth)
        self.write_outputs(outcome, config.output)
        bundle = ReportBundle(
            schema_version=settings.schema_version,
            command="cluster",
            cluster_reports=[outcome.report],
            timeseries=timeseries_rows(panel, outcome.seg.labels),
            sharpe=sharpe_rows(outcome.report),
        )
        emit_report(bundle, config.output)
        sizes = [c.size for c in outcome.report.clusters]
        logger.info(f"聚类完成: 模型 {config.model.value}, γ={outcome.gamma}, 聚类大小 {sizes}, 切换 {outcome.seg.switches} 次")
        return bundle


class ForecastService:
    """样本外状态预测实验"""

    def _features(self, panel: ReturnsPanel, states: Sequence[MarketState], regressor: str, delta: int) -> Tuple[np.ndarray, int]:
        if regressor == "llr":
            series = rolling_llr(panel, states[0], states[1], delta)
            return series.values, series.offset
        return fraction_positive_series(panel), 0

    def evaluate(
        self,
        panel: ReturnsPanel,
        config: RunConfig,
        regressors: Sequence[str] = ("llr",),
    ) -> Dict[str, ForecastOutcome]:
        """训练集拟合状态和逻辑回归，整段分割作为测试集真值"""
        if config.K != 2:
            raise InvalidConfigException("forecasting needs exactly two states", field="K")
        train, _ = split_panel(panel, config.split, config.split_date)
        cut = train.T
        gamma = _resolve_gamma(train, config)
        _, whole = fit_variant(panel, config.model, 2, gamma, config.seed, config.max_iters, config.n_init)
        train_states, train_seg = fit_variant(train, config.model, 2, gamma, config.seed, config.max_iters, config.n_init)

        outcomes: Dict[str, ForecastOutcome] = {}
        h = config.horizon
        for regressor in regressors:
            x_train, offset = self._features(train, train_states, regressor, config.delta)
            x, y = training_pairs(x_train, offset, train_seg.labels, h)
            model = fit_forecaster(
                x,
                y,
                delta=config.delta,
                horizon=h,
                folds=config.folds,
                regressor=regressor,
                states=(train_states[0], train_states[1]),
            )

            values, offset = self._features(panel, train_states, regressor, config.delta)
            probability, predicted = predict_states(model, values)
            rows = offset + np.arange(values.shape[0])
            series, predictions = [], []
            for value, p, label, t in zip(values, probability, predicted, rows):
                target = t + h
                actual = int(whole.labels[target]) if target < panel.T else None
                row = LlrRow(
                    date=panel.dates[t].strftime("%Y-%m-%d"),
                    llr=float(value),
                    probability=float(p),
                    predicted_state=int(label),
                    actual_state=actual,
                )
                series.append(row)
                if actual is not None and target >= cut:
                    predictions.append(row.model_copy(update={"date": panel.dates[target].strftime("%Y-%m-%d")}))
            if not predictions:
                raise InvalidConfigException("test set is empty after the split", field="split")

            report = classification_metrics(
                np.array([r.predicted_state for r in predictions]),
                np.array([r.actual_state for r in predictions]),
            ).model_copy(update={"regressor": regressor, "threshold": model.threshold, "beta0": model.beta0, "beta1": model.beta1})
            logger.info(f"预测[{regressor}] ACC={report.acc:.3f} TPR={report.tpr} TNR={report.tnr} 阈值={model.threshold:.2f}")
            outcomes[regressor] = ForecastOutcome(model=model, report=report, series=series, predictions=predictions)
        return outcomes

    @sync_log_decorator("forecast")
    def run(self, config: RunConfig) -> ReportBundle:
        panel, _ = load_panel(config)
        outcome = self.evaluate(panel, config, (config.baseline,))[config.baseline]
        export_store.write_rows(outcome.predictions, config.output / "predictions.csv", list(LlrRow.model_fields))
        bundle = ReportBundle(
            schema_version=settings.schema_version,
            command="forecast",
            forecast_reports=[outcome.report],
            llr=outcome.series,
        )
        emit_report(bundle, config.output)
        return bundle


def _metric_values(config: RunConfig, panel: ReturnsPanel, truth: Optional[np.ndarray]) -> Dict[str, Optional[float]]:
    """单次重采样的指标"""
    if config.experiment == "cluster":
        outcome = cluster_service.evaluate(panel, config, truth)
        report = outcome.report
        values: Dict[str, Optional[float]] = {
            "switches": float(report.temporal.switches),
            "mean_segment_length": report.temporal.mean_length,
            "median_segment_length": report.temporal.median,
            "bull_positive_sharpe": float(report.bull_positive_sharpe),
            "bear_negative_sharpe": float(report.bear_negative_sharpe),
        }
        for cluster in report.clusters:
            sharpe = [s for s in cluster.sharpe if s is not None]
            values[f"{cluster.name}_size"] = float(cluster.size)
            values[f"{cluster.name}_mean_sharpe"] = float(np.mean(sharpe)) if sharpe else None
        if report.accuracy is not None:
            values["accuracy"] = report.accuracy
        return values

    values = {}
    for regressor, outcome in forecast_service.evaluate(panel, config, REGRESSORS).items():
        for metric in ("tpr", "tnr", "acc", "tnr_pvalue"):
            values[f"{regressor}:{metric}"] = getattr(outcome.report, metric)
    return values


def _resample_worker(args: Tuple[RunConfig, ReturnsPanel, Optional[np.ndarray], int, int]) -> Tuple[int, Optional[Dict[str, Optional[float]]]]:
    config, panel, truth, m, index = args
    basket = resample_basket(panel, m, config.seed, index)
    try:
        return index, _metric_values(config, basket, truth)
    except BaseErrorException as exc:
        logger.warning(f"重采样 #{index} 失败: {exc.one_line()}")
        return index, None


def aggregate(experiment: str, model: str, results: Sequence[Optional[Dict[str, Optional[float]]]]) -> List[AggregateRow]:
    """按指标汇总中位数/第5/第95百分位（按指标名排序）"""
    from icc.app.service.metrics import percentile_summary

    metrics = sorted({name for result in results if result for name in result})
    rows = []
    for metric in metrics:
        values = [r[metric] for r in results if r and r.get(metric) is not None]
        median, p5, p95 = percentile_summary(values)
        rows.append(AggregateRow(experiment=experiment, model=model, metric=metric, median=median, p5=p5, p95=p95, runs=len(values)))
    return rows


class ResampleService:
    """随机篮子重采样实验"""

    def collect(self, config: RunConfig, panel: ReturnsPanel, truth: Optional[np.ndarray]) -> List[Optional[Dict[str, Optional[float]]]]:
        m = config.basket_size or panel.n
        tasks = [(config, panel, truth, m, index) for index in range(config.resamples)]
        if config.jobs > 1:
            with ProcessPoolExecutor(max_workers=config.jobs) as pool:
                done = dict(pool.map(_resample_worker, tasks))
        else:
            done = dict(map(_resample_worker, tasks))
        return [done[index] for index in range(config.resamples)]

    @sync_log_decorator("resample")
    def run(self, config: RunConfig) -> ReportBundle:
        panel, truth = load_panel(config)
        m = config.basket_size or panel.n
        if m > panel.n:
            raise BasketTooLargeException(m, panel.n)
        results = self.collect(config, panel, truth)
        if not any(results):
            raise AllFitsFailedException(f"all {config.resamples} resamples failed")
        model = config.model.value if config.experiment == "cluster" else f"{config.model.value}+logistic"
        bundle = ReportBundle(
            schema_version=settings.schema_version,
            command="resample",
            aggregates=aggregate(config.experiment, model, results),
        )
        emit_report(bundle, config.output)
        logger.info(f"重采样完成: {sum(1 for r in results if r)}/{config.resamples} 次有效")
        return bundle


class StabilityService:
    """TMFG-LoGo与Ridge的似然稳定性对比"""

    def split(self, config: RunConfig) -> Tuple[ReturnsPanel, ReturnsPanel]:
        """训练集为测试尾部之前的q个观测"""
        if config.synthetic:
            n_test = int(np.ceil(config.q * config.test_fraction / (1.0 - config.test_fraction)))
            rng = substream(config.seed, "synthetic")
            cov, _ = tmfg_structured_covariance(config.n, rng)
            X = rng.multivariate_normal(np.zeros(config.n), cov, size=config.q + n_test, method="cholesky")
            panel = ReturnsPanel(
                dates=pd.bdate_range("2000-01-03", periods=X.shape[0]),
                tickers=[f"S{i:03d}" for i in range(config.n)],
                returns=X,
            )
            return panel.slice(0, config.q), panel.slice(config.q, None)

        panel, _ = load_panel(config)
        n_test = int(np.floor(panel.T * config.test_fraction))
        start = panel.T - n_test
        if n_test < 1 or start - config.q < 0:
            raise InvalidConfigException(f"panel of {panel.T} rows cannot hold q={config.q} train rows and a test tail", field="q")
        return panel.slice(start - config.q, start), panel.slice(start, None)

    def evaluate(self, train: ReturnsPanel, test: ReturnsPanel, folds: int = 5) -> StabilityReport:
        return likelihood_stability(train, test, folds=folds)

    @sync_log_decorator("stability")
    def run(self, config: RunConfig) -> ReportBundle:
        train, test = self.split(config)
        report = self.evaluate(train, test, config.folds)
        bundle = ReportBundle(schema_version=settings.schema_version, command="stability", stability=[report])
        emit_report(bundle, config.output)
        for row in report.rows:
            logger.info(f"{row.estimator}/{row.split}: 均值 {row.mean:.3f}, p5 {row.p5:.3f}, p95 {row.p95:.3f}")
        return bundle


class SynthService:
    """写出合成价格面板与真实标签"""

    @sync_log_decorator("synth")
    def run(self, config: RunConfig) -> Tuple[Path, Path]:
        spec = SyntheticSpec(n=config.n, T=config.T, persistence=config.persistence, seed=config.seed)
        panel, labels = generate_synthetic(spec)
        prices = panel_store.write_panel(prices_from_returns(panel), config.output / "prices.csv")
        truth = panel_store.write_labels(panel.dates, labels, config.output / "labels.csv")
        return prices, truth


cluster_service = ClusterService()
forecast_service = ForecastService()
resample_service = ResampleService()
stability_service = StabilityService()
synth_service = SynthService()
