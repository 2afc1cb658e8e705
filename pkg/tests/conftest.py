#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
测试公共夹具
"""

import sys
from pathlib import Path

import numpy as np
import pytest
from loguru import logger

# 确保能够导入app模块
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from app.core.basis import build_basis_set, load_basis_preset  # noqa: E402
from app.core.model import FunctionalPanel  # noqa: E402
from app.schemas.request import McmcConfig, PriorHyperparams  # noqa: E402

# 测试时只输出警告以上的日志
logger.remove()
logger.add(sys.stderr, level="WARNING")


@pytest.fixture
def gen():
    return np.random.default_rng(20240101)


@pytest.fixture
def oracle_basis():
    """Beta {(1,1), (3,1), (1,0.3)}，自变量 0.2k"""
    return build_basis_set(load_basis_preset("oracle"), [0.2, 0.4, 0.6, 0.8])


@pytest.fixture
def small_panel(oracle_basis):
    """T = 12 的小面板，权重缓慢变化"""
    T = 12
    rng = np.random.default_rng(7)
    t = np.linspace(0.0, 1.0, T)
    pi = np.stack([0.5 - 0.2 * t, 0.3 + 0.1 * t, 0.2 + 0.1 * t], axis=1)
    y = pi @ oracle_basis.H.T + 0.01 * rng.standard_normal((T, oracle_basis.K))
    return FunctionalPanel(y=y, arguments=oracle_basis.arguments)


@pytest.fixture
def default_priors():
    return PriorHyperparams.experiment_defaults(2)


@pytest.fixture
def tight_priors():
    """逆伽马形状 ≥ 3 的先验，保证二阶矩存在"""
    return PriorHyperparams(
        mu_mean=[0.0],
        mu_var=[1.0],
        phi_mean=[0.5],
        phi_var=[0.1],
        sigma2_n0=[8.0],
        sigma2_d0=[2.0],
        nu2_n0=8.0,
        nu2_d0=0.06,
        component_n0=[8.0, 8.0],
        component_d0=[0.06, 0.06],
    )


@pytest.fixture
def short_mcmc():
    return McmcConfig(n_iter=40, n_burnin=10, thin=2, seed=11, n_chains=1)
