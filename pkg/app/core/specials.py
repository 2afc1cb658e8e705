#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
特殊函数

对数伽马函数、正则化不完全贝塔函数（连分式）以及自适应 Gauss-Kronrod 积分。
"""

import heapq
import math
from typing import Callable, Tuple

import numpy as np
from scipy.special import gammaln

from app.core.config import settings
from app.core.errors import DomainError, QuadratureAccuracyError

_CF_EPS = 1e-15
_CF_TINY = 1e-300
_CF_MAX_ITER = 20000

# Kronrod 15 点节点与权重（前 7 个奇数位节点与 Gauss 7 点共享）
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss 节点在 _NODES 中的位置：1,3,5,7,9,11,13
_GAUSS_WEIGHTS = np.zeros(15)
_GAUSS_WEIGHTS[[1, 3, 5]] = _WG[:3]
_GAUSS_WEIGHTS[7] = _WG[3]
_GAUSS_WEIGHTS[[9, 11, 13]] = _WG[2::-1]


def log_gamma(x: float) -> float:
    """
    计算 ln Γ(x)

    Args:
        x: 正实数

    Returns:
        ln Γ(x)
    """
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError("log_gamma 需要有限的正数参数", x=x)
    return float(gammaln(x))


def log_beta(a: float, b: float) -> float:
    """ln B(a, b)"""
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b)


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """修正 Lentz 算法求不完全贝塔函数的连分式"""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        # 偶数项
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        # 奇数项
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise QuadratureAccuracyError(
        "不完全贝塔连分式未收敛", best_estimate=h, n_evals=_CF_MAX_ITER, a=a, b=b, x=x
    )


def regularized_incomplete_beta(x: float, a: float, b: float) -> float:
    """
    正则化不完全贝塔函数 I_x(a, b)

    x 大于 (a+1)/(a+b+2) 时利用 I_x(a,b) = 1 - I_{1-x}(b,a) 切换到收敛更快的一侧。

    Args:
        x: [0, 1] 内的自变量
        a: 第一形状参数，正数
        b: 第二形状参数，正数

    Returns:
        I_x(a, b)，位于 [0, 1]
    """
    x, a, b = float(x), float(a), float(b)
    if not (math.isfinite(a) and a > 0.0 and math.isfinite(b) and b > 0.0):
        raise DomainError("不完全贝塔函数的形状参数必须为有限正数", a=a, b=b)
    if not (0.0 <= x <= 1.0):
        raise DomainError("不完全贝塔函数的自变量必须位于 [0, 1]", x=x)
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0

    log_front = a * math.log(x) + b * math.log1p(-x) - log_beta(a, b)
    if x < (a + 1.0) / (a + b + 2.0):
        value = math.exp(log_front) * _beta_continued_fraction(a, b, x) / a
    else:
        value = 1.0 - math.exp(log_front) * _beta_continued_fraction(b, a, 1.0 - x) / b
    return min(1.0, max(0.0, value))


def _kronrod_rule(f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float) -> Tuple[float, float]:
    half = 0.5 * (hi - lo)
    center = 0.5 * (hi + lo)
    values = np.asarray(f(center + half * _NODES), dtype=float)
    if values.shape != _NODES.shape or not np.all(np.isfinite(values)):
        raise DomainError("被积函数在积分节点上返回了非有限值", lo=lo, hi=hi)
    kronrod = half * float(np.dot(_KRONROD_WEIGHTS, values))
    gauss = half * float(np.dot(_GAUSS_WEIGHTS, values))
    return kronrod, abs(kronrod - gauss)


def quadrature(
    f: Callable[[float], float],
    tol: float = 1e-10,
    lo: float = 0.0,
    hi: float = 1.0,
    vectorized: bool = False,
    max_evals: int = None,
) -> float:
    """
    自适应 G7-K15 积分

    总是二分误差估计最大的子区间，直到误差估计之和不超过 tol。

    Args:
        f: 被积函数
        tol: 绝对误差容限
        lo, hi: 积分区间，默认 [0, 1]
        vectorized: f 是否接受 numpy 数组
        max_evals: 函数求值预算，默认 settings.QUADRATURE_MAX_EVALS

    Returns:
        积分估计值

    Raises:
        QuadratureAccuracyError: 预算耗尽仍未达到容限，异常中携带最佳估计
    """
    if not (tol > 0.0):
        raise DomainError("积分容限必须为正数", tol=tol)
    if not hi > lo:
        raise DomainError("积分区间必须满足 lo < hi", lo=lo, hi=hi)
    budget = settings.QUADRATURE_MAX_EVALS if max_evals is None else int(max_evals)
    g = f if vectorized else np.vectorize(f, otypes=[float])

    value, err = _kronrod_rule(g, lo, hi)
    n_evals = 15
    heap = [(-err, lo, hi, value)]
    total_value, total_err = value, err
    frozen_err = 0.0
    frozen_value = 0.0

    while total_err > tol and heap:
        if n_evals + 30 > budget:
            raise QuadratureAccuracyError(
                "自适应积分超出求值预算", best_estimate=total_value, n_evals=n_evals, error_estimate=total_err
            )
        neg_err, a, b, part = heapq.heappop(heap)
        mid = 0.5 * (a + b)
        if not (a < mid < b):
            # 区间已到浮点分辨率，不能再二分
            frozen_err += -neg_err
            frozen_value += part
            if frozen_err > tol:
                raise QuadratureAccuracyError(
                    "积分误差受舍入限制无法达到容限", best_estimate=total_value, n_evals=n_evals
                )
            continue
        left, left_err = _kronrod_rule(g, a, mid)
        right, right_err = _kronrod_rule(g, mid, b)
        n_evals += 30
        total_value += left + right - part
        total_err += left_err + right_err + neg_err
        heapq.heappush(heap, (-left_err, a, mid, left))
        heapq.heappush(heap, (-right_err, mid, b, right))
        if total_err <= tol:
            # 用精确求和消除累计舍入后再确认
            total_err = math.fsum(-item[0] for item in heap) + frozen_err
            total_value = math.fsum(item[3] for item in heap) + frozen_value

    if heap:
        total_value = math.fsum(item[3] for item in heap) + frozen_value
    return float(total_value)
