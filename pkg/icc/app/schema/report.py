"""评估报告Schema"""
from __future__ import annotations

from typing import List, Optional
from pydantic import BaseModel, Field


class TemporalStats(BaseModel):
    """时间一致性统计"""
    switches: int = Field(..., ge=0, description="切换次数")
    segment_lengths: List[int] = Field(..., description="各片段长度（按时间顺序）")
    median: float = Field(..., description="片段长度中位数")
    p5: float = Field(..., description="片段长度第5百分位")
    p95: float = Field(..., description="片段长度第95百分位")
    mean_length: float = Field(..., description="平均片段长度")


class ClusterStats(BaseModel):
    """单个聚类的风险收益统计"""
    label: int = Field(..., description="状态编号1..K")
    name: str = Field(..., description="bull/bear/state-k")
    size: int = Field(..., ge=0, description="观测数")
    mean_return: float = Field(..., description="截面平均收益")
    means: List[float] = Field(..., description="各资产均值")
    stds: List[float] = Field(..., description="各资产标准差")
    sharpe: List[Optional[float]] = Field(..., description="各资产年化夏普比率")
    longest_run: int = Field(..., ge=0, description="最长连续片段")
    mean_segment_length: float = Field(..., description="平均连续天数")


class SupportOverlap(BaseModel):
    """精度矩阵依赖网络重叠"""
    edges: List[int] = Field(..., description="各状态非对角非零边数")
    common: int = Field(..., description="所有状态共有的边数")


class ClusterReport(BaseModel):
    """聚类报告"""
    model: str = Field(..., description="模型变体")
    tickers: List[str] = Field(..., description="资产列表")
    gamma: float = Field(..., description="切换惩罚γ")
    clusters: List[ClusterStats] = Field(..., description="各聚类统计")
    temporal: TemporalStats = Field(..., description="时间一致性")
    total_cost: Optional[float] = Field(None, description="惩罚后总代价")
    iterations: Optional[int] = Field(None, description="迭代次数")
    converged: Optional[bool] = Field(None, description="是否收敛")
    accuracy: Optional[float] = Field(None, description="相对真实标签的准确率")
    bull_positive_sharpe: int = Field(0, description="bull状态夏普为正的资产数")
    bear_negative_sharpe: int = Field(0, description="bear状态夏普为负的资产数")
    support: Optional[SupportOverlap] = Field(None, description="依赖网络重叠")


class ForecastReport(BaseModel):
    """样本外预测报告"""
    tpr: Optional[float] = Field(None, ge=0, le=1, description="真阳性率（bull预测正确）")
    tnr: Optional[float] = Field(None, ge=0, le=1, description="真阴性率（bear预测正确）")
    acc: float = Field(..., ge=0, le=1, description="准确率")
    tp: int = Field(..., ge=0, description="真阳性数")
    tn: int = Field(..., ge=0, description="真阴性数")
    fp: int = Field(..., ge=0, description="假阳性数")
    fn: int = Field(..., ge=0, description="假阴性数")
    tnr_pvalue: Optional[float] = Field(None, ge=0, le=1, description="TNR超几何检验p值")
    regressor: Optional[str] = Field(None, description="自变量：llr/fraction-positive")
    threshold: Optional[float] = Field(None, description="概率阈值")
    beta0: Optional[float] = Field(None, description="截距")
    beta1: Optional[float] = Field(None, description="斜率")


class FitSummary(BaseModel):
    """拟合摘要"""
    model: str = Field(..., description="模型变体")
    cluster_sizes: List[int] = Field(..., description="各聚类大小")
    switches: int = Field(..., description="切换次数")
    mean_segment_length: float = Field(..., description="平均片段长度")
    gamma: float = Field(..., description="切换惩罚γ")
    iterations: Optional[int] = Field(None, description="迭代次数")
    converged: Optional[bool] = Field(None, description="是否收敛")
    total_cost: Optional[float] = Field(None, description="惩罚后总代价")
    accuracy: Optional[float] = Field(None, description="相对真实标签的准确率")


class AggregateRow(BaseModel):
    """重采样汇总行（中位数/第5/第95百分位）"""
    experiment: str = Field(..., description="实验类型")
    model: str = Field(..., description="模型/自变量")
    metric: str = Field(..., description="指标")
    median: Optional[float] = Field(None, description="中位数")
    p5: Optional[float] = Field(None, description="第5百分位")
    p95: Optional[float] = Field(None, description="第95百分位")
    runs: int = Field(..., ge=0, description="有效运行数")


class StabilityRow(BaseModel):
    """似然稳定性统计行"""
    estimator: str = Field(..., description="logo/ridge")
    split: str = Field(..., description="train/test")
    mean: float = Field(..., description="平均对数似然")
    p5: float = Field(..., description="第5百分位")
    p95: float = Field(..., description="第95百分位")


class StabilityReport(BaseModel):
    """TMFG-LoGo与Ridge似然稳定性对比"""
    q: int = Field(..., description="训练样本数")
    n_test: int = Field(..., description="测试样本数")
    ridge_lambda: float = Field(..., description="交叉验证选出的λ")
    rows: List[StabilityRow] = Field(..., description="统计行")

    def row(self, estimator: str, split: str) -> StabilityRow:
        for item in self.rows:
            if item.estimator == estimator and item.split == split:
                return item
        raise KeyError((estimator, split))


class TimeseriesRow(BaseModel):
    """累计平均收益与状态标签"""
    date: str
    cum_mean_return: float
    state: int


class SharpeRow(BaseModel):
    """单资产单状态夏普比率"""
    ticker: str
    state: int
    name: str
    sharpe: Optional[float]


class LlrRow(BaseModel):
    """对数似然比序列/预测明细"""
    date: str
    llr: float
    probability: Optional[float] = None
    predicted_state: Optional[int] = None
    actual_state: Optional[int] = None


class ReportBundle(BaseModel):
    """一次运行的全部报告"""
    schema_version: str = Field(..., description="报告JSON版本")
    command: str = Field(..., description="子命令")
    cluster_reports: List[ClusterReport] = Field(default_factory=list)
    forecast_reports: List[ForecastReport] = Field(default_factory=list)
    aggregates: List[AggregateRow] = Field(default_factory=list)
    stability: List[StabilityReport] = Field(default_factory=list)
    timeseries: List[TimeseriesRow] = Field(default_factory=list)
    sharpe: List[SharpeRow] = Field(default_factory=list)
    llr: List[LlrRow] = Field(default_factory=list)
