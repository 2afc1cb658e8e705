#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
评估指标：基尼序列、区间指标、后验预测损失与有效样本量
"""

import math
from typing import NamedTuple

import arviz as az
import numpy as np

from app.core.errors import DomainError, ShapeError

MIN_ESS_DRAWS = 100
SIMPLEX_CHECK_TOL = 1e-8


class IntervalMetrics(NamedTuple):
    rmse_x100: float
    cp: float
    al: float


class PredictiveLoss(NamedTuple):
    ppv: float
    ppse: float
    log_ppv: float
    log_ppse: float


def gini_series(weights_draws: np.ndarray, basis_ginis: np.ndarray) -> np.ndarray:
    """
    G_t = Σ_ℓ π_tℓ G_ℓ

    Args:
        weights_draws: (..., T, L) 权重抽样
        basis_ginis: 长度 L 的基函数基尼系数

    Returns:
        (..., T) 基尼系数抽样
    """
    w = np.asarray(weights_draws, dtype=float)
    g = np.asarray(basis_ginis, dtype=float)
    if w.shape[-1] != g.size:
        raise ShapeError("权重维数与基函数个数不一致", weights=w.shape, ginis=g.size)
    if np.any(w < -SIMPLEX_CHECK_TOL) or np.any(np.abs(w.sum(axis=-1) - 1.0) > SIMPLEX_CHECK_TOL):
        raise DomainError("权重不在单纯形上")
    return w @ g


def interval_metrics(truth: np.ndarray, draws: np.ndarray, level: float = 0.95) -> IntervalMetrics:
    """
    后验均值的 RMSE×100、等尾区间的覆盖率与平均长度

    draws 的第 0 维是抽样，其余维度与 truth 对齐。
    """
    truth = np.asarray(truth, dtype=float)
    draws = np.asarray(draws, dtype=float)
    if draws.shape[1:] != truth.shape:
        raise ShapeError("真值与抽样的形状不一致", truth=truth.shape, draws=draws.shape)
    if not 0.0 < level < 1.0:
        raise DomainError("区间水平必须位于 (0, 1)", level=level)
    alpha = 1.0 - level
    lo, hi = np.quantile(draws, [alpha / 2.0, 1.0 - alpha / 2.0], axis=0)
    mean = draws.mean(axis=0)
    rmse = math.sqrt(float(np.mean((mean - truth) ** 2)))
    covered = (lo <= truth) & (truth <= hi)
    return IntervalMetrics(rmse_x100=100.0 * rmse, cp=float(covered.mean()), al=float(np.mean(hi - lo)))


def _safe_log(value: float) -> float:
    return math.log(value) if value > 0.0 else -math.inf


def predictive_loss_from_moments(y: np.ndarray, mean: np.ndarray, var: np.ndarray) -> PredictiveLoss:
    """由逐格预测均值与方差计算 PPV 与 PPSE"""
    y = np.asarray(y, dtype=float)
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    if not (y.shape == mean.shape == var.shape):
        raise ShapeError("观测与预测矩的形状不一致", y=y.shape, mean=mean.shape, var=var.shape)
    ppv = float(np.sum(np.maximum(var, 0.0)))
    ppse = ppv + float(np.sum((mean - y) ** 2))
    return PredictiveLoss(ppv=ppv, ppse=ppse, log_ppv=_safe_log(ppv), log_ppse=_safe_log(ppse))


def posterior_predictive_loss(y: np.ndarray, predictive_draws: np.ndarray) -> PredictiveLoss:
    """
    后验预测损失

    Args:
        y: T×K 观测
        predictive_draws: (n, T, K) 预测复制

    Returns:
        PPV、PPSE 及其自然对数（0 的对数记为 -inf）
    """
    draws = np.asarray(predictive_draws, dtype=float)
    return predictive_loss_from_moments(y, draws.mean(axis=0), draws.var(axis=0))


def ess(draws: np.ndarray) -> float:
    """
    单链有效样本量 n / τ

    τ 由 arviz 的 "mean" 方法估计（Geyer 初始单调正序列截断）。
    常数序列返回 n，结果不超过 n。
    """
    x = np.asarray(draws, dtype=float).ravel()
    n = x.size
    if n < MIN_ESS_DRAWS:
        raise DomainError(f"计算有效样本量至少需要 {MIN_ESS_DRAWS} 个抽样", n=n)
    if not np.all(np.isfinite(x)):
        raise DomainError("抽样中含有非有限值")
    if np.ptp(x) == 0.0 or x.var() <= 1e-300:
        return float(n)
    dataset = az.convert_to_dataset(x[np.newaxis, :])
    value = float(az.ess(dataset, method="mean")["x"])
    if not np.isfinite(value) or value <= 0.0:
        return float(n)
    return float(min(value, n))
