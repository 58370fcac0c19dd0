"""Schema导出"""
from icc.app.schema.baseline import GmmModel, RidgePrecision
from icc.app.schema.forecast import ForecastModel, LlrSeries
from icc.app.schema.graph import Insertion, SimilarityMatrix, TmfgGraph
from icc.app.schema.panel import PricePanel, RegimeSpec, ReturnsPanel, SyntheticSpec
from icc.app.schema.state import IccConfig, MarketState, Segmentation, SparsePrecision

__all__ = [
    "GmmModel",
    "RidgePrecision",
    "ForecastModel",
    "LlrSeries",
    "Insertion",
    "SimilarityMatrix",
    "TmfgGraph",
    "PricePanel",
    "RegimeSpec",
    "ReturnsPanel",
    "SyntheticSpec",
    "IccConfig",
    "MarketState",
    "Segmentation",
    "SparsePrecision",
]
