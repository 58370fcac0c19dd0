"""应用配置模块"""
from __future__ import annotations

from typing import Optional
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """应用配置类"""

    model_config = SettingsConfigDict(
        env_prefix="ICC_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # 应用配置
    app_name: str = Field(default="ICC市场状态分析", description="应用名称")
    app_version: str = Field(default="1.0.0", description="应用版本")

    # 日志配置
    log_level: str = Field(default="INFO", description="日志级别")
    log_file: Optional[str] = Field(default=None, description="日志文件路径")

    # 运行配置
    jobs: int = Field(default=1, ge=1, description="默认并行进程数")
    output_dir: str = Field(default="runs", description="默认输出目录")

    # 报告配置
    periods_per_year: int = Field(default=252, ge=1, description="年化交易日数")
    schema_version: str = Field(default="1.0", description="报告JSON版本")


# 创建全局配置实例
settings = Settings()
