#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
由有限个洛伦兹曲线点给出的基尼系数非参数上下界

下界：连接各点（含 (0,0) 与 (1,1)）的折线，即任何过这些点的凸曲线的上包络；
上界：过这些点的最低凸曲线，由相邻弦的延长线在各区间内构成的下包络。
两者都是分段线性函数，按所有两两交点切分后精确积分。
"""

from typing import NamedTuple, Sequence, Tuple

import numpy as np
from loguru import logger

from app.core.errors import DomainError


class GiniBounds(NamedTuple):
    lower: float
    upper: float


def _validate(x: Sequence[float], f: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float).ravel()
    f = np.asarray(f, dtype=float).ravel()
    if x.size != f.size or x.size == 0:
        raise DomainError("x 与 f 必须等长且非空", x=x.size, f=f.size)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(f))):
        raise DomainError("点坐标必须有限")
    if x[0] <= 0.0 or x[-1] >= 1.0 or np.any(np.diff(x) <= 0.0):
        raise DomainError("x 必须严格递增且位于 (0, 1)")
    if f[0] < 0.0 or f[-1] > 1.0 or np.any(np.diff(f) < 0.0):
        raise DomainError("f 必须单调不减且位于 [0, 1]")
    return np.concatenate(([0.0], x, [1.0])), np.concatenate(([0.0], f, [1.0]))


def polygon_gini_bounds(x: Sequence[float], f: Sequence[float]) -> GiniBounds:
    """
    Args:
        x: 0 < x_1 < ... < x_K < 1
        f: 0 ≤ f_1 ≤ ... ≤ f_K ≤ 1

    Returns:
        GiniBounds(lower, upper)
    """
    xs, fs = _validate(x, f)
    dx = np.diff(xs)
    lower = 1.0 - float(np.sum((fs[:-1] + fs[1:]) * dx))

    slopes = np.diff(fs) / dx
    intercepts = fs[:-1] - slopes * xs[:-1]
    # 所有弦所在直线外加 y = 0
    all_slopes = np.append(slopes, 0.0)
    all_intercepts = np.append(intercepts, 0.0)

    ds = all_slopes[:, None] - all_slopes[None, :]
    dc = all_intercepts[None, :] - all_intercepts[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        cross = dc / ds
    cross = cross[np.isfinite(cross) & (cross > 0.0) & (cross < 1.0)]
    knots = np.unique(np.concatenate((xs, cross)))

    n_seg = slopes.size
    area = 0.0
    for p, q in zip(knots[:-1], knots[1:]):
        if q <= p:
            continue
        j = min(int(np.searchsorted(xs, 0.5 * (p + q), side="right")) - 1, n_seg - 1)
        others = np.delete(np.arange(n_seg), j)
        ends = np.array([p, q])
        if others.size:
            floor = np.max(slopes[others, None] * ends[None, :] + intercepts[others, None], axis=0)
            floor = np.maximum(floor, 0.0)
        else:
            floor = np.zeros(2)
        env = np.minimum(slopes[j] * ends + intercepts[j], floor)
        area += 0.5 * float(env[0] + env[1]) * (q - p)
    upper = 1.0 - 2.0 * area
    return GiniBounds(lower=lower, upper=max(upper, lower))


def panel_gini_bounds(y: np.ndarray, arguments: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    逐期计算上下界

    某一期的观测不满足单调或取值范围时记为 NaN 并给出警告。
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    lower = np.full(y.shape[0], np.nan)
    upper = np.full(y.shape[0], np.nan)
    for t, row in enumerate(y):
        try:
            lower[t], upper[t] = polygon_gini_bounds(arguments, row)
        except DomainError as e:
            logger.warning(f"第 {t + 1} 期无法计算基尼上下界：{e.message}")
    return lower, upper
