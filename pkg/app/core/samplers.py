#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
随机数生成与抽样器

所有随机性都来自 RngStream：种子相同且流编号相同则抽样序列逐位一致，
不同流编号之间统计独立（Philox 计数器生成器 + SeedSequence spawn_key）。
"""

import math
from typing import Tuple, Union

import numpy as np
from polyagamma import random_polyagamma
from scipy.special import log_ndtr, ndtr, ndtri

from app.core.config import settings
from app.core.errors import DomainError

_UINT64_MAX = 2 ** 64 - 1

_TN_MAX_TRIES = 10_000


class RngStream:
    """
    带编号的独立随机数流

    Args:
        seed: 64 位无符号种子
        stream_id: 64 位无符号流编号
        keys: 派生子流时追加的键（例如迭代号、块号）
    """

    def __init__(self, seed: int, stream_id: int = 0, keys: Tuple[int, ...] = ()):
        for name, value in (("seed", seed), ("stream_id", stream_id)):
            if not (0 <= int(value) <= _UINT64_MAX):
                raise DomainError(f"{name} 必须是 64 位无符号整数", value=value)
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.keys = tuple(int(k) for k in keys)
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id, *self.keys))
        self.generator = np.random.Generator(np.random.Philox(sequence))

    def substream(self, *keys: int) -> "RngStream":
        """派生一个由附加键唯一确定的子流"""
        return RngStream(self.seed, self.stream_id, self.keys + tuple(keys))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, keys={self.keys})"


RngLike = Union[RngStream, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    """取出底层 numpy Generator"""
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise DomainError("rng 必须是 RngStream 或 numpy Generator", type=type(rng).__name__)


def _check_positive(name: str, value: float) -> float:
    value = float(value)
    if not (math.isfinite(value) and value > 0.0):
        raise DomainError(f"{name} 必须为有限正数", **{name: value})
    return value


def draw_normal(rng: RngLike, mean: float, variance: float) -> float:
    """N(mean, variance) 的一次抽样"""
    variance = _check_positive("variance", variance)
    return float(as_generator(rng).normal(mean, math.sqrt(variance)))


def _tn_inverse_cdf(gen: np.random.Generator, alpha: float, beta: float) -> float:
    """逆 CDF 兜底，在尾部用对称形式保持精度"""
    if alpha > 0.0:
        upper, lower = ndtr(-alpha), ndtr(-beta)
        z = -ndtri(upper - gen.random() * (upper - lower))
    else:
        lower, upper = ndtr(alpha), ndtr(beta)
        z = ndtri(lower + gen.random() * (upper - lower))
    if not math.isfinite(z):
        z = alpha if math.isfinite(alpha) else beta
    return float(min(max(z, alpha), beta))


def _tn_tail(gen: np.random.Generator, alpha: float, beta: float) -> float:
    """标准正态在 [alpha, beta] (alpha >= 0) 上的截断抽样"""
    root = math.sqrt(alpha * alpha + 4.0)
    rate = 0.5 * (alpha + root)
    # 区间较窄时均匀提议比指数提议更有效
    exp_threshold = (2.0 / (alpha + root)) * math.exp(0.25 * (alpha * alpha - alpha * root) + 0.5)
    use_uniform = math.isfinite(beta) and (beta - alpha) <= exp_threshold
    for _ in range(_TN_MAX_TRIES):
        if use_uniform:
            z = alpha + (beta - alpha) * gen.random()
            log_accept = 0.5 * (alpha * alpha - z * z)
        else:
            z = alpha + gen.exponential() / rate
            if z > beta:
                continue
            log_accept = -0.5 * (z - rate) ** 2
        if math.log(gen.random()) <= log_accept:
            return z
    return _tn_inverse_cdf(gen, alpha, beta)


def draw_truncated_normal(rng: RngLike, mean: float, variance: float, lo: float, hi: float) -> float:
    """
    截断正态分布抽样

    区间概率大于 0.2 时直接从未截断正态拒绝抽样，否则使用单侧指数倾斜（或均匀）提议。
    拒绝次数超过上限时退回逆 CDF，不会陷入死循环。

    Args:
        rng: 随机数流
        mean: 未截断分布的均值
        variance: 未截断分布的方差
        lo: 下界，可为 -inf
        hi: 上界，可为 +inf

    Returns:
        (lo, hi) 内的一次抽样
    """
    variance = _check_positive("variance", variance)
    lo, hi = float(lo), float(hi)
    if not lo < hi:
        raise DomainError("截断正态要求 lo < hi", lo=lo, hi=hi)
    gen = as_generator(rng)
    sd = math.sqrt(variance)
    alpha = (lo - mean) / sd
    beta = (hi - mean) / sd

    if alpha > 0.0:
        mass = math.exp(log_ndtr(-alpha)) - math.exp(log_ndtr(-beta))
    else:
        mass = math.exp(log_ndtr(beta)) - math.exp(log_ndtr(alpha))

    if mass > 0.2:
        for _ in range(_TN_MAX_TRIES):
            z = gen.standard_normal()
            if alpha < z < beta:
                return mean + sd * z
        return mean + sd * _tn_inverse_cdf(gen, alpha, beta)

    if alpha >= 0.0:
        z = _tn_tail(gen, alpha, beta)
    elif beta <= 0.0:
        z = -_tn_tail(gen, -beta, -alpha)
    else:
        # 包含 0 的窄区间：均匀提议，密度峰值在 0
        for _ in range(_TN_MAX_TRIES):
            z = alpha + (beta - alpha) * gen.random()
            if math.log(gen.random()) <= -0.5 * z * z:
                break
        else:
            z = _tn_inverse_cdf(gen, alpha, beta)
    value = mean + sd * z
    # 舍入可能落到边界上
    if not lo < value < hi:
        value = min(max(value, math.nextafter(lo, hi)), math.nextafter(hi, lo))
    return value


def draw_inverse_gamma(rng: RngLike, shape: float, rate: float) -> float:
    """IG(shape, rate)，即 rate / Gamma(shape, 1)"""
    shape = _check_positive("shape", shape)
    rate = _check_positive("rate", rate)
    g = as_generator(rng).gamma(shape)
    # 极小形状参数下 gamma 抽样可能下溢为 0
    g = max(g, np.finfo(float).tiny)
    return float(rate / g)


def draw_poisson(rng: RngLike, rate: float) -> int:
    """Poisson(rate) 抽样，rate = 0 时恒返回 0"""
    rate = float(rate)
    if not math.isfinite(rate) or rate < 0.0:
        raise DomainError("Poisson 速率必须是有限非负数", rate=rate)
    if rate == 0.0:
        return 0
    gen = as_generator(rng)
    if rate > 1e15:
        # numpy 的 Poisson 有上限，超大速率下正态近似的相对误差可以忽略
        return int(max(0.0, round(gen.normal(rate, math.sqrt(rate)))))
    return int(gen.poisson(rate))


def polya_gamma_moments(b: np.ndarray, c: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """PG(b, c) 的精确均值与方差（含 c -> 0 极限）"""
    b = np.asarray(b, dtype=float)
    c = np.abs(np.asarray(c, dtype=float))
    half_tanh = np.tanh(0.5 * c)
    with np.errstate(divide="ignore", invalid="ignore"):
        mean = np.where(c < 1e-8, 0.25 - c * c / 48.0, half_tanh / (2.0 * c))
        # (sinh c - c) / cosh^2(c/2) = 2 tanh(c/2) - c / cosh^2(c/2)
        core = 2.0 * half_tanh - c * (1.0 - half_tanh ** 2)
        var = np.where(c < 1e-3, 1.0 / 24.0 - c * c / 120.0, core / (4.0 * c ** 3))
    return b * mean, b * var


def draw_polya_gamma_array(rng: RngLike, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """
    批量 PG(b_i, c_i) 抽样

    b_i = 0 返回 0；b_i 不超过阈值时用 polyagamma 的 Devroye 方法精确抽样；
    超过阈值时使用均值方差精确匹配的正态近似。

    Args:
        rng: 随机数流
        b: 非负整数形状参数数组
        c: 倾斜参数数组

    Returns:
        与 b 同形状的抽样数组
    """
    b_arr = np.asarray(b)
    c_arr = np.broadcast_to(np.asarray(c, dtype=float), b_arr.shape)
    if b_arr.size and (np.any(b_arr < 0) or np.any(b_arr != np.round(b_arr))):
        raise DomainError("PG 形状参数必须是非负整数")
    if not np.all(np.isfinite(c_arr)):
        raise DomainError("PG 倾斜参数必须有限")
    gen = as_generator(rng)
    b_flat = b_arr.astype(np.int64).ravel()
    c_flat = c_arr.ravel()
    out = np.zeros(b_flat.size)

    threshold = settings.PG_GAUSSIAN_THRESHOLD
    exact = np.flatnonzero((b_flat > 0) & (b_flat <= threshold))
    if exact.size:
        out[exact] = random_polyagamma(
            b_flat[exact].astype(float), c_flat[exact], method="devroye", random_state=gen
        )

    approx = np.flatnonzero(b_flat > threshold)
    if approx.size:
        mean, var = polya_gamma_moments(b_flat[approx], c_flat[approx])
        draw = mean + np.sqrt(var) * gen.standard_normal(size=approx.size)
        out[approx] = np.maximum(draw, 1e-3 * mean)
    return out.reshape(b_arr.shape)


def draw_polya_gamma(rng: RngLike, b: int, c: float) -> float:
    """PG(b, c) 的一次抽样，b 为正整数"""
    if int(b) != b or b < 1:
        raise DomainError("PG 形状参数必须是正整数", b=b)
    return float(draw_polya_gamma_array(rng, np.array([int(b)]), np.array([float(c)]))[0])
