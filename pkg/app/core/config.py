#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
应用配置模块
"""

import os

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """进程级配置，可由环境变量或 .env 覆盖"""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    # 应用基础配置
    PROJECT_NAME: str = "CurveWeaver"
    VERSION: str = "0.1.0"
    DEBUG: bool = os.getenv("DEBUG", "false").lower() == "true"

    # 日志设置
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")
    LOG_DIR: str = os.getenv("LOG_DIR", "./logs")
    LOG_TO_FILE: bool = os.getenv("LOG_TO_FILE", "true").lower() == "true"
    LOG_RETENTION: str = os.getenv("LOG_RETENTION", "7 days")
    LOG_ROTATION: str = os.getenv("LOG_ROTATION", "00:00")
    LOG_COMPRESSION: str = os.getenv("LOG_COMPRESSION", "zip")

    # 运行默认值
    DEFAULT_SEED: int = int(os.getenv("DEFAULT_SEED", 20240101))
    DEFAULT_OUTPUT_DIR: str = os.getenv("DEFAULT_OUTPUT_DIR", "./runs")
    DEFAULT_THREADS: int = int(os.getenv("DEFAULT_THREADS", 0))
    SNAPSHOT_ON_ABORT: bool = os.getenv("SNAPSHOT_ON_ABORT", "true").lower() == "true"

    # 数值设置
    QUADRATURE_TOL: float = float(os.getenv("QUADRATURE_TOL", 1e-10))
    QUADRATURE_MAX_EVALS: int = int(os.getenv("QUADRATURE_MAX_EVALS", 1_000_000))
    PG_GAUSSIAN_THRESHOLD: int = int(os.getenv("PG_GAUSSIAN_THRESHOLD", 170))
    PROGRESS_EVERY: int = int(os.getenv("PROGRESS_EVERY", 1000))


# 创建全局设置实例
settings = Settings()
