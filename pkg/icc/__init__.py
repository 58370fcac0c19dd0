"""ICC 市场状态聚类与预测"""
from __future__ import annotations

__version__ = "1.0.0"
