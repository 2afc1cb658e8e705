#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
泊松 / Pólya-Gamma 数据增广

对每个 (t, ℓ)，二次型 πᵀA_tπ 被写成关于 p = v/(v+s) 的二次式，
展开 exp 后引入两个泊松潜变量 z1、z2，再用 PG 变量 ω 把 logistic
形式线性化，得到以 ỹ 为虚拟观测、以 ω 为精度的高斯伪观测。
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import expit, gammaln, logsumexp

from app.core.errors import DomainError, InvariantViolationError, NumericalError, QuadratureAccuracyError
from app.core.samplers import RngLike, as_generator, draw_polya_gamma, draw_poisson, draw_polya_gamma_array

RATE_TOL = 1e-12


@dataclass(frozen=True)
class PseudoObservation:
    """虚拟观测 ỹ 及其精度 ω；ω = 0 表示缺失"""

    value: float
    precision: float

    @property
    def missing(self) -> bool:
        return self.precision == 0.0


def poisson_rates(b, c, d, p, q):
    """两个泊松潜变量的速率（未截断）"""
    b_lt_d = b < d
    rate1 = np.abs(b - d) * np.where(b_lt_d, p * p, q * q)
    rate2 = 2.0 * (np.maximum(b, d) - c) * p * q
    return rate1, rate2


def _clamp_rates(rate1, rate2, **where):
    rate1 = np.asarray(rate1, dtype=float)
    rate2 = np.asarray(rate2, dtype=float)
    if not (np.all(np.isfinite(rate1)) and np.all(np.isfinite(rate2))):
        bad = np.flatnonzero(~(np.isfinite(rate1) & np.isfinite(rate2)))
        raise NumericalError("泊松速率不是有限值", first_bad_t=int(bad[0]) + 1 if bad.size else None, **where)
    return np.maximum(rate1, 0.0), np.maximum(rate2, 0.0)


def sample_z(rng: RngLike, b: float, c: float, d: float, v_ell: float, s: float) -> Tuple[int, int]:
    """
    抽取泊松潜变量 (z1, z2)

    Args:
        rng: 随机数流
        b, c, d: compute_B_and_s 给出的 2×2 矩阵元素
        v_ell: e^{u_tℓ}
        s: 其余分量 v 之和

    Returns:
        (z1, z2)
    """
    total = v_ell + s
    p, q = v_ell / total, s / total
    rate1, rate2 = _clamp_rates(*poisson_rates(b, c, d, p, q))
    return draw_poisson(rng, float(rate1)), draw_poisson(rng, float(rate2))


def sample_z_all(
    rng: RngLike, b: np.ndarray, c: np.ndarray, d: np.ndarray, u_ell: np.ndarray, log_s: np.ndarray, ell: int = None
) -> Tuple[np.ndarray, np.ndarray]:
    """对全部 t 抽取 (z1, z2)，p 由 u - ln s 经 logistic 变换得到"""
    psi = u_ell - log_s
    p, q = expit(psi), expit(-psi)
    rate1, rate2 = _clamp_rates(*poisson_rates(b, c, d, p, q), ell=ell)
    gen = as_generator(rng)
    return gen.poisson(rate1).astype(np.int64), gen.poisson(rate2).astype(np.int64)


def sample_omega(rng: RngLike, z1: int, z2: int, u_ell: float, s: float) -> float:
    """z1 + z2 = 0 时精确返回 0，否则抽取 PG(2(z1+z2), u - ln s)"""
    n = int(z1) + int(z2)
    if n == 0:
        return 0.0
    return draw_polya_gamma(rng, 2 * n, u_ell - math.log(s))


def sample_omega_all(rng: RngLike, z1: np.ndarray, z2: np.ndarray, u_ell: np.ndarray, log_s: np.ndarray) -> np.ndarray:
    """批量 ω 抽样"""
    return draw_polya_gamma_array(rng, 2 * (z1 + z2), u_ell - log_s)


def make_pseudo_obs(z1: int, omega: float, s: float, b_lt_d: bool) -> PseudoObservation:
    """
    构造伪观测 ỹ = ln s + z1(2·1[b<d] - 1)/ω

    Raises:
        InvariantViolationError: ω = 0 但 z1 > 0
    """
    if omega == 0.0:
        if z1 > 0:
            raise InvariantViolationError("ω = 0 时 z1 必须为 0", z1=z1)
        return PseudoObservation(0.0, 0.0)
    sign = 1.0 if b_lt_d else -1.0
    return PseudoObservation(math.log(s) + sign * z1 / omega, float(omega))


def make_pseudo_obs_all(
    z1: np.ndarray, omega: np.ndarray, log_s: np.ndarray, b_lt_d: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """批量伪观测，返回 (values, precisions)，缺失处 value 置 0"""
    missing = omega == 0.0
    if np.any(missing & (z1 > 0)):
        t = int(np.flatnonzero(missing & (z1 > 0))[0]) + 1
        raise InvariantViolationError("ω = 0 时 z1 必须为 0", t=t)
    sign = np.where(b_lt_d, 1.0, -1.0)
    safe_omega = np.where(missing, 1.0, omega)
    values = np.where(missing, 0.0, log_s + sign * z1 / safe_omega)
    return values, np.where(missing, 0.0, omega)


def augmentation_target(b: float, c: float, d: float, v: float, s: float) -> float:
    """exp{max(b,d) - (v,s)B(v,s)ᵀ/(v+s)²}"""
    quad = (b * v * v + 2.0 * c * v * s + d * s * s) / (v + s) ** 2
    return math.exp(max(b, d) - quad)


def series_identity_check(b: float, c: float, d: float, v: float, s: float, truncation: int) -> float:
    """
    截断到 z1, z2 <= N 的泊松双重级数之和

    收敛到 augmentation_target(b, c, d, v, s)，仅供测试确认增广恒等式。
    """
    if truncation < 1:
        raise DomainError("截断阶数至少为 1", truncation=truncation)
    p, q = v / (v + s), s / (v + s)
    rate1, rate2 = (max(float(r), 0.0) for r in poisson_rates(b, c, d, p, q))
    n = np.arange(truncation + 1)

    def log_terms(rate: float) -> np.ndarray:
        if rate == 0.0:
            out = np.full(n.size, -np.inf)
            out[0] = 0.0
            return out
        return n * math.log(rate) - gammaln(n + 1)

    log_sum = logsumexp(log_terms(rate1)) + logsumexp(log_terms(rate2))
    value = math.exp(log_sum) if log_sum < 709.0 else math.inf
    if not math.isfinite(value):
        raise QuadratureAccuracyError("泊松级数溢出", best_estimate=value, n_evals=(truncation + 1) ** 2)
    return value
