#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
抽样器诊断

geweke_test 比较两种模拟联合分布的方式：
边际-条件模拟（参数与状态取自先验，数据取自似然）与
逐次-条件模拟（交替抽取数据与执行一次 Gibbs 扫描）。
抽样器正确时两者对任意检验函数的矩一致。
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import arviz as az
import numpy as np
from loguru import logger

from app.core.errors import DomainError
from app.core.gibbs import GibbsSamplerBase, draw_params_from_prior, draw_stationary_path
from app.core.model import FunctionalPanel, ModelParams
from app.core.samplers import RngLike, as_generator
from app.schemas.request import PriorHyperparams
from app.tools.metrics import ess


def prior_simulate(rng: RngLike, priors: PriorHyperparams, T: int) -> Tuple[ModelParams, np.ndarray]:
    """从先验抽取参数，再从平稳 AR(1) 抽取 u_0..u_T"""
    gen = as_generator(rng)
    params = draw_params_from_prior(gen, priors)
    return params, draw_stationary_path(gen, params, T)


def default_test_functions(sampler: GibbsSamplerBase) -> Tuple[List[str], Callable[[GibbsSamplerBase], np.ndarray]]:
    """参数向量与每个状态分量在 t = 0、T/2、T 三个时点的取值"""
    T = sampler.panel.T
    times = sorted({0, T // 2, T})
    names = list(sampler.param_names())
    names += [f"u[{t},{l}]" for l in range(1, sampler.n_states + 1) for t in times]

    def evaluate(s: GibbsSamplerBase) -> np.ndarray:
        return np.concatenate([s.param_vector(), s.latent.u[times, :].T.ravel()])

    return names, evaluate


@dataclass
class GewekeResult:
    names: List[str]
    z_mean: np.ndarray
    z_second: np.ndarray
    n_iter: int

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(np.concatenate([self.z_mean, self.z_second]))))

    def as_dict(self) -> Dict[str, Dict[str, float]]:
        return {
            name: {"z_mean": float(zm), "z_second": float(zs)}
            for name, zm, zs in zip(self.names, self.z_mean, self.z_second)
        }


def _z_scores(mc: np.ndarray, sc: np.ndarray) -> np.ndarray:
    n_mc, n_sc = mc.shape[0], sc.shape[0]
    z = np.zeros(mc.shape[1])
    for j in range(mc.shape[1]):
        se2 = mc[:, j].var() / n_mc + sc[:, j].var() / ess(sc[:, j])
        diff = mc[:, j].mean() - sc[:, j].mean()
        z[j] = diff / np.sqrt(se2) if se2 > 0.0 else 0.0
    return z


def geweke_test(
    sampler: GibbsSamplerBase,
    n_iter: int,
    rng: RngLike,
    test_functions: Optional[Tuple[List[str], Callable[[GibbsSamplerBase], np.ndarray]]] = None,
) -> GewekeResult:
    """
    Geweke 联合分布检验

    Args:
        sampler: 已构造的抽样器，其面板只用来确定 T 与自变量
        n_iter: 两种模拟各自的迭代次数
        rng: 数据与先验抽样所用的随机数流（Gibbs 扫描用抽样器自身的流）
        test_functions: (名称, 取值函数)，默认取 default_test_functions

    Returns:
        每个检验函数的均值与二阶矩 z 分数
    """
    if n_iter < 100:
        raise DomainError("Geweke 检验至少需要 100 次迭代", n_iter=n_iter)
    gen = as_generator(rng)
    names, evaluate = test_functions or default_test_functions(sampler)
    arguments = sampler.panel.arguments

    marginal = np.empty((n_iter, len(names)))
    for i in range(n_iter):
        sampler.draw_from_prior(gen)
        sampler.simulate_data(gen)
        marginal[i] = evaluate(sampler)

    successive = np.empty((n_iter, len(names)))
    sampler.draw_from_prior(gen)
    for i in range(n_iter):
        y = sampler.simulate_data(gen)
        sampler.panel = FunctionalPanel(y=y, arguments=arguments)
        sampler.sweep(i + 1)
        successive[i] = evaluate(sampler)

    result = GewekeResult(
        names=names,
        z_mean=_z_scores(marginal, successive),
        z_second=_z_scores(marginal ** 2, successive ** 2),
        n_iter=n_iter,
    )
    logger.info(f"[{sampler.model_tag}] Geweke 检验完成：{n_iter} 次迭代，最大 |z| = {result.max_abs_z:.2f}")
    return result


def split_rhat(chains: np.ndarray) -> float:
    """
    分半 Gelman-Rubin R̂（arviz "split" 方法）

    Args:
        chains: (链数, 每链抽样数)

    Returns:
        R̂；链内方差为 0 时返回 1（链间也无差异）或 inf
    """
    chains = np.atleast_2d(np.asarray(chains, dtype=float))
    n = chains.shape[1]
    half = n // 2
    if half < 2:
        raise DomainError("每条链至少需要 4 个抽样", n=n)
    splits = np.concatenate([chains[:, :half], chains[:, n - half:]], axis=0)
    if float(splits.var(axis=1).max()) <= 0.0:
        return 1.0 if np.ptp(splits.mean(axis=1)) == 0.0 else float("inf")
    dataset = az.convert_to_dataset(chains)
    return float(az.rhat(dataset, method="split")["x"])
