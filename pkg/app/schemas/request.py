#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
运行配置数据模型
"""

import json
from enum import Enum
from pathlib import Path
from typing import List, Optional, Union

import yaml
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.core.errors import ConfigurationError, DataIOError


class ModelTag(str, Enum):
    """模型类型"""

    FSSM = "fssm"
    MIXTURE = "mixture"


class BasisEntry(BaseModel):
    """单个基函数配置"""

    model_config = ConfigDict(extra="forbid")

    family: str = Field(..., description="基函数族：beta 或 pareto")
    a: float = Field(..., gt=0, description="第一形状参数")
    b: float = Field(..., gt=0, description="第二形状参数")

    @field_validator("family")
    @classmethod
    def check_family(cls, v: str) -> str:
        v = v.lower()
        if v not in ("beta", "pareto"):
            raise ValueError("family 必须是 beta 或 pareto")
        return v

    @model_validator(mode="after")
    def check_pareto_range(self):
        if self.family == "pareto" and (self.a > 1.0 or self.b > 1.0):
            raise ValueError("Pareto 基函数要求 a, b 位于 (0, 1]")
        return self


class PriorHyperparams(BaseModel):
    """
    共轭先验超参数

    μ_ℓ ~ N(mu_mean, mu_var)，φ_ℓ ~ TN_(-1,1)(phi_mean, phi_var)，
    σ_ℓ² ~ IG(sigma2_n0/2, sigma2_d0/2)，ν² ~ IG(nu2_n0/2, nu2_d0/2)，
    混合模型的分量方差 ν_ℓ² ~ IG(component_n0/2, component_d0/2)。
    """

    model_config = ConfigDict(extra="forbid")

    mu_mean: List[float] = Field(..., description="μ 的先验均值，每个状态分量一个")
    mu_var: List[float] = Field(..., description="μ 的先验方差")
    phi_mean: List[float] = Field(..., description="φ 的先验均值（截断前）")
    phi_var: List[float] = Field(..., description="φ 的先验方差（截断前）")
    sigma2_n0: List[float] = Field(..., description="σ² 逆伽马先验的 n0")
    sigma2_d0: List[float] = Field(..., description="σ² 逆伽马先验的 d0")
    nu2_n0: float = Field(..., gt=0, description="ν² 逆伽马先验的 n0")
    nu2_d0: float = Field(..., gt=0, description="ν² 逆伽马先验的 d0")
    component_n0: Optional[List[float]] = Field(None, description="混合模型分量方差的 n0，每个基函数一个")
    component_d0: Optional[List[float]] = Field(None, description="混合模型分量方差的 d0")

    @field_validator("mu_var", "phi_var", "sigma2_n0", "sigma2_d0", "component_n0", "component_d0")
    @classmethod
    def check_positive(cls, v):
        if v is not None and any(not x > 0 for x in v):
            raise ValueError("方差与逆伽马超参数必须严格为正")
        return v

    @model_validator(mode="after")
    def check_lengths(self):
        n = len(self.mu_mean)
        for name in ("mu_var", "phi_mean", "phi_var", "sigma2_n0", "sigma2_d0"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} 的长度必须与 mu_mean 相同（{n}）")
        if (self.component_n0 is None) != (self.component_d0 is None):
            raise ValueError("component_n0 与 component_d0 必须同时给出")
        if self.component_n0 is not None:
            if len(self.component_n0) != len(self.component_d0) or len(self.component_n0) != n + 1:
                raise ValueError(f"分量方差先验的长度必须为 L = {n + 1}")
        return self

    @property
    def n_states(self) -> int:
        return len(self.mu_mean)

    @classmethod
    def experiment_defaults(cls, n_states: int) -> "PriorHyperparams":
        """实验默认先验"""
        from app.core.basis import load_prior_presets

        p = load_prior_presets()["fssm"]
        return cls(
            mu_mean=[p["mu"]["mean"]] * n_states,
            mu_var=[p["mu"]["var"]] * n_states,
            phi_mean=[p["phi"]["mean"]] * n_states,
            phi_var=[p["phi"]["var"]] * n_states,
            sigma2_n0=[p["sigma2"]["n0"]] * n_states,
            sigma2_d0=[p["sigma2"]["d0"]] * n_states,
            nu2_n0=p["nu2"]["n0"],
            nu2_d0=p["nu2"]["d0"],
        )

    @classmethod
    def mixture_defaults(cls, n_basis: int) -> "PriorHyperparams":
        """混合模型默认先验（在实验默认先验上加分量方差先验）"""
        from app.core.basis import load_prior_presets

        comp = load_prior_presets()["mixture"]["component_nu2"]
        base = cls.experiment_defaults(n_basis - 1)
        return base.model_copy(
            update={"component_n0": [comp["n0"]] * n_basis, "component_d0": [comp["d0"]] * n_basis}
        )


class McmcConfig(BaseModel):
    """MCMC 运行参数"""

    model_config = ConfigDict(extra="forbid")

    n_iter: int = Field(30000, gt=0, description="燃烧期之后的迭代次数")
    n_burnin: int = Field(10000, ge=0, description="燃烧期迭代次数")
    thin: int = Field(1, ge=1, description="稀疏间隔")
    seed: int = Field(20240101, ge=0, lt=2 ** 64, description="64 位种子")
    n_chains: int = Field(1, ge=1, description="链的条数")
    store_states: bool = Field(True, description="是否保存每次抽样的权重 π")

    @property
    def n_draws(self) -> int:
        return self.n_iter // self.thin


# 实验设计中的场景网格
EXPERIMENT_K = (4, 9)
EXPERIMENT_PHI = (0.9, 0.95, 0.99)


class Scenario(BaseModel):
    """模拟数据场景；网格之外的取值允许，但会给出警告"""

    K: int = Field(4, ge=1, description="观测自变量个数，自变量为 k/(K+1)")
    phi: float = Field(0.95, gt=-1, lt=1, description="两个状态分量共同的 AR 系数")
    T: int = Field(200, ge=1, description="时间长度")

    @field_validator("K")
    @classmethod
    def warn_off_grid_k(cls, v: int) -> int:
        if v not in EXPERIMENT_K:
            logger.warning(f"K = {v} 不在实验网格 {EXPERIMENT_K} 内")
        return v

    @field_validator("phi")
    @classmethod
    def warn_off_grid_phi(cls, v: float) -> float:
        if not any(abs(v - p) < 1e-12 for p in EXPERIMENT_PHI):
            logger.warning(f"phi = {v} 不在实验网格 {EXPERIMENT_PHI} 内")
        return v


class RunConfig(BaseModel):
    """一次拟合的完整配置"""

    model_config = ConfigDict(extra="forbid")

    model: ModelTag = Field(ModelTag.FSSM, description="模型类型：fssm 或 mixture")
    basis: Optional[List[BasisEntry]] = Field(None, description="基函数列表")
    basis_preset: Optional[str] = Field(None, description="预置基函数集合名称")
    priors: Optional[PriorHyperparams] = Field(None, description="先验超参数，缺省时使用实验默认值")
    mcmc: McmcConfig = Field(default_factory=McmcConfig, description="MCMC 运行参数")
    input_path: str = Field(..., description="长格式面板 CSV 路径（列 t, x, y）")
    output_dir: str = Field("./runs/fit", description="输出目录")
    threads: Optional[int] = Field(None, ge=1, description="并行链数上限，缺省为链数")

    @model_validator(mode="after")
    def check_basis_source(self):
        if (self.basis is None) == (self.basis_preset is None):
            raise ValueError("basis 与 basis_preset 必须且只能给出一个")
        return self

    def validate_paths(self) -> None:
        """拟合前检查输入文件存在、输出目录可写"""
        if not Path(self.input_path).is_file():
            raise ConfigurationError("输入文件不存在", input_path=self.input_path)
        out = Path(self.output_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigurationError(f"输出目录不可写: {e}", output_dir=self.output_dir)

    def dump(self) -> dict:
        return self.model_dump(mode="json")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunConfig":
        """从 YAML 或 JSON 读取配置，校验失败时列出所有违规字段"""
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigurationError(f"无法读取配置文件: {e}", path=str(path))
        try:
            data = json.loads(text) if path.suffix.lower() == ".json" else yaml.safe_load(text)
        except (json.JSONDecodeError, yaml.YAMLError) as e:
            raise ConfigurationError(f"配置文件格式错误: {e}", path=str(path))
        if not isinstance(data, dict):
            raise ConfigurationError("配置文件顶层必须是映射", path=str(path))
        return cls.from_data(data)

    @classmethod
    def from_data(cls, data: dict) -> "RunConfig":
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            lines = [f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()]
            raise ConfigurationError("配置校验失败:\n  " + "\n  ".join(lines), n_errors=len(lines))

    def save(self, path: Union[str, Path]) -> None:
        path = Path(path)
        try:
            with open(path, "w", encoding="utf-8") as f:
                if path.suffix.lower() == ".json":
                    json.dump(self.dump(), f, ensure_ascii=False, indent=2)
                else:
                    yaml.safe_dump(self.dump(), f, allow_unicode=True, sort_keys=False)
        except OSError as e:
            raise DataIOError(f"无法写入配置文件: {e}", path=str(path))
