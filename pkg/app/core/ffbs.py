#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
单变量 AR(1) 伪动态线性模型的前向滤波后向抽样

状态方程 u_t = μ + φ(u_{t-1} - μ) + ε_t，ε_t ~ N(0, σ²)，u_0 取平稳分布；
观测 ỹ_t ~ N(u_t, 1/ω_t)，ω_t = 0 表示该时点缺失。
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from app.core.augment import PseudoObservation
from app.core.errors import DomainError, NumericalError, ShapeError
from app.core.samplers import RngLike, as_generator

NEGATIVE_VARIANCE_TOL = 1e-10


@dataclass(frozen=True)
class Ar1Process:
    """平稳 AR(1) 参数"""

    phi: float
    mu: float
    sigma2: float

    def __post_init__(self):
        if not abs(self.phi) < 1.0:
            raise DomainError("AR(1) 需要 |phi| < 1", phi=self.phi)
        if not (self.sigma2 > 0.0 and math.isfinite(self.sigma2)):
            raise DomainError("AR(1) 新息方差必须为正", sigma2=self.sigma2)

    @property
    def stationary_variance(self) -> float:
        return self.sigma2 / (1.0 - self.phi ** 2)


@dataclass
class FilterState:
    """t = 0..T 的滤波均值 m、方差 P，以及 t = 1..T 的一步预测 a、R（下标 0 不用）"""

    m: np.ndarray
    P: np.ndarray
    a: np.ndarray
    R: np.ndarray


def _clamp_variance(value: float, t: int, kind: str) -> float:
    if value < 0.0:
        if value < -NEGATIVE_VARIANCE_TOL:
            raise NumericalError(f"{kind}方差为负", t=t, value=value)
        return 0.0
    return value


def _as_arrays(pseudo) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(pseudo, tuple) and len(pseudo) == 2 and not isinstance(pseudo[0], PseudoObservation):
        values, precisions = (np.asarray(p, dtype=float) for p in pseudo)
    else:
        values = np.array([p.value for p in pseudo], dtype=float)
        precisions = np.array([p.precision for p in pseudo], dtype=float)
    if values.shape != precisions.shape or values.ndim != 1:
        raise ShapeError("伪观测的值与精度长度不一致")
    if np.any(precisions < 0.0):
        raise DomainError("伪观测精度不能为负")
    return values, precisions


def forward_filter(process: Ar1Process, values: np.ndarray, precisions: np.ndarray) -> FilterState:
    """信息形式的卡尔曼滤波，精度为 0 的观测直接跳过"""
    T = values.size
    m = np.empty(T + 1)
    P = np.empty(T + 1)
    a = np.full(T + 1, np.nan)
    R = np.full(T + 1, np.nan)
    m[0] = process.mu
    P[0] = process.stationary_variance
    drift = (1.0 - process.phi) * process.mu
    phi2 = process.phi ** 2
    for t in range(1, T + 1):
        a_t = drift + process.phi * m[t - 1]
        R_t = phi2 * P[t - 1] + process.sigma2
        a[t], R[t] = a_t, R_t
        omega = precisions[t - 1]
        if omega > 0.0:
            P_t = 1.0 / (1.0 / R_t + omega)
            m[t] = P_t * (a_t / R_t + omega * values[t - 1])
            P[t] = _clamp_variance(P_t, t, "滤波")
        else:
            m[t], P[t] = a_t, R_t
    return FilterState(m=m, P=P, a=a, R=R)


def backward_sample(rng: RngLike, process: Ar1Process, state: FilterState) -> np.ndarray:
    """先按滤波分布抽 u_T，再逐步抽 u_t | u_{t+1}"""
    T = state.m.size - 1
    normals = as_generator(rng).standard_normal(T + 1)
    u = np.empty(T + 1)
    u[T] = state.m[T] + math.sqrt(state.P[T]) * normals[T]
    for t in range(T - 1, -1, -1):
        gain = state.P[t] * process.phi / state.R[t + 1]
        mean = state.m[t] + gain * (u[t + 1] - state.a[t + 1])
        var = _clamp_variance(state.P[t] - gain * gain * state.R[t + 1], t, "平滑")
        u[t] = mean + math.sqrt(var) * normals[t]
    return u


def ffbs_draw(
    rng: RngLike,
    process: Ar1Process,
    pseudo: Union[Sequence[PseudoObservation], Tuple[np.ndarray, np.ndarray]],
) -> np.ndarray:
    """
    从 p(u_0..u_T | 伪观测, process) 精确抽取一条路径

    Args:
        rng: 随机数流
        process: AR(1) 参数
        pseudo: T 个 PseudoObservation，或 (values, precisions) 数组对

    Returns:
        长度 T+1 的状态路径 u_0..u_T
    """
    values, precisions = _as_arrays(pseudo)
    state = forward_filter(process, values, precisions)
    return backward_sample(rng, process, state)
