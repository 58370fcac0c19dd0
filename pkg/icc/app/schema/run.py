"""运行配置Schema"""
from __future__ import annotations

import json
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional

from dateutil.parser import isoparse
from dotenv import dotenv_values
from pydantic import Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from icc.app.common.exception.errors import InvalidConfigException
from icc.app.common.log import logger
from icc.app.core.config import settings


class ModelVariant(str, Enum):
    """五种对比模型 (a)-(e)"""
    ICC_SPARSE = "icc-sparse"
    ICC_FULL = "icc-full"
    ICC_SPARSE_G0 = "icc-sparse-g0"
    ICC_FULL_G0 = "icc-full-g0"
    GMM = "gmm"

    @property
    def is_icc(self) -> bool:
        return self is not ModelVariant.GMM

    @property
    def sparse(self) -> bool:
        return self in (ModelVariant.ICC_SPARSE, ModelVariant.ICC_SPARSE_G0)

    @property
    def zero_gamma(self) -> bool:
        return self in (ModelVariant.ICC_SPARSE_G0, ModelVariant.ICC_FULL_G0)


# 各变体默认γ
DEFAULT_GAMMA = {
    ModelVariant.ICC_SPARSE: 16.0,
    ModelVariant.ICC_FULL: 14.7,
    ModelVariant.ICC_SPARSE_G0: 0.0,
    ModelVariant.ICC_FULL_G0: 0.0,
    ModelVariant.GMM: 0.0,
}

# 非合成数据的网格搜索目标平均片段长度（天）
DEFAULT_TARGET_LENGTH = 25.0


class RunConfig(BaseSettings):
    """一次命令行运行的完整配置"""

    model_config = SettingsConfigDict(
        env_prefix="ICC_",
        case_sensitive=False,
        extra="forbid",
        use_enum_values=False,
    )

    command: Literal["cluster", "forecast", "resample", "synth", "stability"] = Field(
        "cluster", description="子命令"
    )
    input: Optional[Path] = Field(None, description="价格CSV路径")
    output: Path = Field(default_factory=lambda: Path(settings.output_dir) / "latest", description="输出目录")
    synthetic: bool = Field(False, description="使用合成数据")

    # 合成数据
    n: int = Field(20, ge=1, description="合成资产数")
    T: int = Field(2000, ge=2, description="合成观测数")
    persistence: float = Field(100.0, ge=1.0, description="合成状态期望持续天数")

    # 聚类
    model: ModelVariant = Field(ModelVariant.ICC_SPARSE, description="模型变体")
    K: int = Field(2, ge=1, description="状态数量")
    gamma: Optional[float] = Field(None, ge=0, description="切换惩罚γ（缺省取变体默认值）")
    gamma_grid: Optional[List[float]] = Field(None, description="γ网格搜索候选")
    target_length: Optional[float] = Field(None, gt=0, description="网格搜索目标平均片段长度（缺省：合成数据取persistence，否则25）")
    max_iters: int = Field(100, ge=1, description="最大迭代次数")
    n_init: int = Field(10, ge=1, description="ICC初始化次数")

    # 预测
    delta: int = Field(24, ge=1, description="对数似然比窗口Δ（天）")
    horizon: int = Field(1, ge=1, description="预测步长h（天）")
    split: float = Field(0.65, gt=0, lt=1, description="训练集比例")
    split_date: Optional[date] = Field(None, description="训练集截止日期（优先于split）")
    baseline: Literal["llr", "fraction-positive"] = Field("llr", description="逻辑回归自变量")
    folds: int = Field(5, ge=2, description="阈值交叉验证折数")

    # 重采样
    experiment: Literal["cluster", "forecast"] = Field("cluster", description="重采样实验类型")
    resamples: int = Field(100, ge=1, description="重采样次数R")
    basket_size: Optional[int] = Field(None, ge=1, description="篮子大小m")
    jobs: int = Field(default_factory=lambda: settings.jobs, ge=1, description="并行进程数")

    # 似然稳定性
    q: int = Field(500, ge=5, description="训练样本数q")
    test_fraction: float = Field(0.4, gt=0, lt=1, description="测试集比例")

    seed: int = Field(0, ge=0, lt=2**64, description="64位随机种子")

    @field_validator("gamma_grid", mode="before")
    @classmethod
    def _split_grid(cls, value: Any) -> Any:
        if isinstance(value, str):
            items = [item.strip() for item in value.split(",") if item.strip()]
            return [float(item) for item in items]
        return value

    @field_validator("gamma_grid")
    @classmethod
    def _check_grid(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is not None:
            if not value:
                raise ValueError("gamma grid must not be empty")
            if any(g < 0 for g in value):
                raise ValueError("gamma grid values must be >= 0")
        return value

    @field_validator("split_date", mode="before")
    @classmethod
    def _parse_date(cls, value: Any) -> Any:
        if isinstance(value, str) and value.strip():
            return isoparse(value.strip()).date()
        if value == "":
            return None
        return value

    def resolved_gamma(self) -> float:
        """解析γ：-g0变体强制为0，显式给出的γ优先，否则取变体默认值"""
        if self.model.zero_gamma:
            if self.gamma not in (None, 0.0):
                logger.warning(f"{self.model.value} 强制γ=0，忽略 gamma={self.gamma}")
            return 0.0
        if self.gamma is not None:
            return float(self.gamma)
        return DEFAULT_GAMMA[self.model]

    def resolved_target_length(self) -> float:
        """网格搜索目标：显式给出优先，合成数据取真实持续天数，否则25天"""
        if self.target_length is not None:
            return float(self.target_length)
        if self.synthetic:
            return float(self.persistence)
        return DEFAULT_TARGET_LENGTH

    def manifest(self) -> Dict[str, Any]:
        """可复现运行的完整配置（γ已解析）"""
        data = self.model_dump(mode="json")
        data["gamma"] = self.resolved_gamma()
        return data


def _read_config_file(path: Path) -> Dict[str, Any]:
    """读取平铺key=value配置文件，或之前运行写出的manifest.json"""
    if not path.exists():
        raise InvalidConfigException(f"config file not found: {path}", field="config")
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InvalidConfigException(f"{path}: {exc}", field="config") from exc
        if not isinstance(data, dict):
            raise InvalidConfigException(f"{path}: expected a JSON object", field="config")
        return {str(k).lower(): v for k, v in data.items() if v is not None}
    values = dotenv_values(path)
    return {str(k).lower(): v for k, v in values.items() if v is not None}


def _canonical_keys(values: Mapping[str, Any]) -> Dict[str, Any]:
    """配置键大小写不敏感；K/T保留大写字段名"""
    fields = {name.lower(): name for name in RunConfig.model_fields}
    out: Dict[str, Any] = {}
    for key, value in values.items():
        normalized = str(key).replace("-", "_")
        out[fields.get(normalized.lower(), normalized)] = value
    return out


def load_run_config(config_file: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """按优先级合并配置：命令行 > 配置文件 > ICC_*环境变量 > 默认值"""
    merged: Dict[str, Any] = {}
    if config_file is not None:
        merged.update(_canonical_keys(_read_config_file(Path(config_file))))
    if overrides:
        merged.update(_canonical_keys({k: v for k, v in overrides.items() if v is not None}))
    try:
        return RunConfig(**merged)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(part) for part in first.get("loc", ()))
        raise InvalidConfigException(f"{where}: {first.get('msg')}", field=where) from exc
    except ValueError as exc:
        # 环境变量解析失败（如列表字段不是JSON）
        raise InvalidConfigException(str(exc)) from exc


__all__ = ["ModelVariant", "DEFAULT_GAMMA", "DEFAULT_TARGET_LENGTH", "RunConfig", "load_run_config"]
