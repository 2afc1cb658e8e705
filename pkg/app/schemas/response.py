#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
运行结果数据模型
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, Field, ValidationError

from app.core.errors import DataIOError

DEVIATION_NOTES = [
    "phi 的提议分布两个求和都取 t=1..T，接受概率中补上 u_0 的平稳项因子",
    "sigma2 的残差以 mu 为中心：(u_t - mu) - phi (u_{t-1} - mu)",
    "多边形基尼下界使用 (f_{k-1} + f_k)(x_k - x_{k-1})，即乘以区间宽度",
    "多边形基尼上界：每个区间上取本段弦与其余弦延长线（及 y = 0）上包络的较小者，在直线交点处分段后精确积分",
]


class ChainReport(BaseModel):
    """单条链的运行信息"""

    chain: int = Field(..., description="链编号，同时也是随机数流编号")
    n_draws: int = Field(..., description="保存的抽样数")
    phi_acceptance: List[float] = Field(default_factory=list, description="各状态分量 φ 步的接受率")
    wall_time_sec: float = Field(..., description="运行耗时（秒）")


class RunManifest(BaseModel):
    """一次运行的清单"""

    project: str = Field("CurveWeaver", description="项目名称")
    version: str = Field(..., description="软件版本")
    command: str = Field(..., description="生成该清单的命令")
    model: Optional[str] = Field(None, description="模型类型")
    seed: int = Field(..., description="主种子")
    created_at: str = Field(..., description="生成时间（仅记录在清单中）")
    wall_time_sec: float = Field(0.0, description="总耗时（秒）")
    config: Dict[str, Any] = Field(default_factory=dict, description="运行配置")
    basis: List[Dict[str, Any]] = Field(default_factory=list, description="基函数设定")
    arguments: List[float] = Field(default_factory=list, description="观测自变量")
    priors: Optional[Dict[str, Any]] = Field(None, description="先验超参数")
    T: Optional[int] = Field(None, description="时间长度")
    n_draws_per_chain: Optional[int] = Field(None, description="每条链保存的抽样数")
    store_states: bool = Field(True, description="是否保存了权重抽样")
    chains: List[ChainReport] = Field(default_factory=list, description="各链信息")
    deviations: List[str] = Field(default_factory=lambda: list(DEVIATION_NOTES), description="实现上的偏差说明")
    extra: Dict[str, Any] = Field(default_factory=dict, description="其他信息")

    def save(self, path: Union[str, Path]) -> None:
        try:
            Path(path).write_text(json.dumps(self.model_dump(mode="json"), ensure_ascii=False, indent=2), encoding="utf-8")
        except OSError as e:
            raise DataIOError(f"无法写入清单: {e}", path=str(path))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunManifest":
        try:
            return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValidationError) as e:
            raise DataIOError(f"无法读取清单: {e}", path=str(path))


class MetricRow(BaseModel):
    """一行区间估计指标"""

    quantity: str = Field(..., description="被评估的量：pi、gini 或 f")
    rmse_x100: float = Field(..., description="后验均值的均方根误差乘以 100")
    cp: float = Field(..., ge=0, le=1, description="95% 区间覆盖率")
    al: float = Field(..., ge=0, description="95% 区间平均长度")


class MetricReport(BaseModel):
    """指标报告"""

    model: Optional[str] = Field(None, description="模型类型")
    rows: List[MetricRow] = Field(default_factory=list, description="区间指标")
    log_ppv: Optional[float] = Field(None, description="后验预测方差之和的自然对数")
    log_ppse: Optional[float] = Field(None, description="后验预测平方误差的自然对数")
    ess: Dict[str, float] = Field(default_factory=dict, description="各参数的有效样本量")
