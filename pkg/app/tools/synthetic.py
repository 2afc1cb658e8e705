#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
模拟数据生成

两维 AR(1) 状态经逆 softmax 得到三条 Beta 基曲线的权重，
观测为加权曲线在 x_k = k/(K+1) 处的取值加上高斯噪声。
"""

from dataclasses import dataclass

import numpy as np
from loguru import logger

from app.core.basis import BasisSet, build_basis_set, load_basis_preset
from app.core.gibbs import draw_stationary_path
from app.core.model import FunctionalPanel, ModelParams, softmax_rows
from app.core.samplers import RngLike, as_generator
from app.schemas.request import Scenario

TRUE_MU = (0.1, -0.3)
TRUE_SIGMA2 = 0.005
TRUE_NU2 = 1e-4


@dataclass(eq=False)
class SyntheticTruth:
    """模拟面板及其生成真值"""

    panel: FunctionalPanel
    u: np.ndarray
    pi: np.ndarray
    gini: np.ndarray
    params: ModelParams
    basis: BasisSet
    scenario: Scenario

    def true_curves(self) -> np.ndarray:
        """无噪声曲线 f_t(x_k) = Σ_ℓ π_tℓ h_ℓ(x_k)"""
        return self.pi @ self.basis.H.T


def scenario_arguments(K: int) -> np.ndarray:
    return np.arange(1, K + 1) / (K + 1.0)


def generate_synthetic(rng: RngLike, scenario: Scenario) -> SyntheticTruth:
    """
    按场景生成一份模拟数据

    Args:
        rng: 随机数流
        scenario: K、φ 与 T

    Returns:
        SyntheticTruth
    """
    gen = as_generator(rng)
    basis = build_basis_set(load_basis_preset("oracle"), scenario_arguments(scenario.K))
    params = ModelParams(
        mu=np.array(TRUE_MU),
        phi=np.full(2, scenario.phi),
        sigma2=np.full(2, TRUE_SIGMA2),
        nu2=TRUE_NU2,
    )
    u = draw_stationary_path(gen, params, scenario.T)
    pi = softmax_rows(u[1:])
    mean = pi @ basis.H.T
    y = mean + np.sqrt(TRUE_NU2) * gen.standard_normal(mean.shape)
    panel = FunctionalPanel(y=y, arguments=basis.arguments)
    logger.info(f"生成模拟数据：T={scenario.T}，K={scenario.K}，phi={scenario.phi}")
    return SyntheticTruth(
        panel=panel,
        u=u,
        pi=pi,
        gini=pi @ basis.ginis,
        params=params,
        basis=basis,
        scenario=scenario,
    )
