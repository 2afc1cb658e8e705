#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
函数型状态空间模型的核心对象

状态 u 以 (T+1)×(L-1) 矩阵保存，第 0 行是初始状态 u_0。权重由锚定在第一个
分量上的逆 softmax 给出：π_1 = 1/(1+Σe^u)，π_{ℓ+1} = e^{u_ℓ}/(1+Σe^u)。
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp
from scipy.stats import norm

from app.core.errors import DomainError, InvariantViolationError, ShapeError

SIMPLEX_TOL = 1e-12


@dataclass(eq=False)
class FunctionalPanel:
    """
    观测面板 y_{tk}，自变量 x_k 固定

    nu2_cells 返回 T×K 的逐格观测方差；默认模型把所有格子绑定到同一个 ν²，
    此时返回的是广播视图。
    """

    y: np.ndarray
    arguments: np.ndarray

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.arguments = np.asarray(self.arguments, dtype=float)
        if self.y.ndim != 2:
            raise ShapeError("面板 y 必须是 T×K 矩阵", shape=self.y.shape)
        if self.y.shape[1] != self.arguments.size:
            raise ShapeError("面板列数与自变量个数不一致", K=self.y.shape[1], arguments=self.arguments.size)
        if not np.all(np.isfinite(self.y)):
            raise DomainError("面板中存在非有限值")

    @property
    def T(self) -> int:
        return self.y.shape[0]

    @property
    def K(self) -> int:
        return self.y.shape[1]

    def nu2_cells(self, nu2: Union[float, np.ndarray]) -> np.ndarray:
        return np.broadcast_to(np.asarray(nu2, dtype=float), self.y.shape)


@dataclass
class ModelParams:
    """μ、对角 Φ、对角 Σ 与观测方差 ν²"""

    mu: np.ndarray
    phi: np.ndarray
    sigma2: np.ndarray
    nu2: float

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float).copy()
        self.phi = np.asarray(self.phi, dtype=float).copy()
        self.sigma2 = np.asarray(self.sigma2, dtype=float).copy()
        self.nu2 = float(self.nu2)
        if not (self.mu.shape == self.phi.shape == self.sigma2.shape) or self.mu.ndim != 1:
            raise ShapeError("mu、phi、sigma2 必须是等长向量")

    @property
    def n_states(self) -> int:
        return self.mu.size

    def validate(self) -> None:
        if np.any(np.abs(self.phi) >= 1.0):
            raise InvariantViolationError("phi 必须位于 (-1, 1)", phi=self.phi.tolist())
        if np.any(self.sigma2 <= 0.0) or not self.nu2 > 0.0:
            raise InvariantViolationError("方差参数必须为正", sigma2=self.sigma2.tolist(), nu2=self.nu2)

    def copy(self) -> "ModelParams":
        return ModelParams(self.mu, self.phi, self.sigma2, self.nu2)


@dataclass
class LatentState:
    """状态矩阵 u（行 t = 0..T）及其导出的权重 π（行 t = 1..T）"""

    u: np.ndarray
    pi: np.ndarray = field(init=False)

    def __post_init__(self):
        self.u = np.array(self.u, dtype=float)
        if self.u.ndim != 2 or self.u.shape[0] < 1:
            raise ShapeError("状态矩阵必须是 (T+1)×(L-1)", shape=self.u.shape)
        self.pi = softmax_rows(self.u[1:])

    @property
    def T(self) -> int:
        return self.u.shape[0] - 1

    @property
    def L(self) -> int:
        return self.u.shape[1] + 1

    def refresh(self) -> None:
        """状态更新后重新计算权重"""
        self.pi = softmax_rows(self.u[1:])

    def copy(self) -> "LatentState":
        return LatentState(self.u.copy())


@dataclass
class AugmentationVars:
    """泊松潜变量 z1、z2 与 Pólya-Gamma 变量 ω，均为 T×(L-1)"""

    z1: np.ndarray
    z2: np.ndarray
    omega: np.ndarray

    @classmethod
    def zeros(cls, T: int, n_states: int) -> "AugmentationVars":
        return cls(
            np.zeros((T, n_states), dtype=np.int64),
            np.zeros((T, n_states), dtype=np.int64),
            np.zeros((T, n_states)),
        )

    def validate(self) -> None:
        zero_counts = (self.z1 + self.z2) == 0
        if np.any(zero_counts != (self.omega == 0.0)):
            raise InvariantViolationError("ω = 0 当且仅当 z1 + z2 = 0 的约束被破坏")


def softmax_rows(u: np.ndarray) -> np.ndarray:
    """逐行逆 softmax，输入 (..., L-1)，输出 (..., L)"""
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise DomainError("softmax 输入必须有限")
    full = np.concatenate([np.zeros(u.shape[:-1] + (1,)), u], axis=-1)
    full = full - full.max(axis=-1, keepdims=True)
    weights = np.exp(full)
    weights /= weights.sum(axis=-1, keepdims=True)
    # 再归一化一次，抵消长链中的累计舍入
    weights /= weights.sum(axis=-1, keepdims=True)
    return weights


def softmax_weights(u_row: Sequence[float]) -> np.ndarray:
    """
    单行逆 softmax

    Args:
        u_row: (L-1) 维状态

    Returns:
        L 维单纯形上的权重
    """
    u_row = np.asarray(u_row, dtype=float)
    if u_row.ndim != 1:
        raise ShapeError("u_row 必须是一维向量", shape=u_row.shape)
    return softmax_rows(u_row)


def inverse_softmax(pi: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    """权重到状态：u_ℓ = ln(π_{ℓ+1}/π_1)，权重先截断到 floor 再归一化"""
    pi = np.maximum(np.asarray(pi, dtype=float), floor)
    pi = pi / pi.sum(axis=-1, keepdims=True)
    return np.log(pi[..., 1:]) - np.log(pi[..., :1])


def mean_curve(pi: np.ndarray, H: np.ndarray) -> np.ndarray:
    """均值函数 H·π"""
    pi = np.asarray(pi, dtype=float)
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or pi.shape[-1] != H.shape[1]:
        raise ShapeError("权重维度与 H 的列数不一致", pi=pi.shape, H=H.shape)
    return pi @ H.T


def compute_A(y_row: np.ndarray, H: np.ndarray, nu2_row: np.ndarray) -> np.ndarray:
    """
    二次型矩阵 A_t = Σ_k (y_tk 1 - h_k)(y_tk 1 - h_k)ᵀ / (2ν²_tk)

    Args:
        y_row: K 维观测
        H: K×L 基函数矩阵
        nu2_row: K 维观测方差

    Returns:
        L×L 对称半正定矩阵
    """
    y_row = np.asarray(y_row, dtype=float)
    H = np.asarray(H, dtype=float)
    nu2_row = np.broadcast_to(np.asarray(nu2_row, dtype=float), y_row.shape)
    if H.ndim != 2 or H.shape[0] != y_row.size:
        raise ShapeError("y_row 与 H 的行数不一致", y=y_row.shape, H=H.shape)
    if np.any(nu2_row <= 0.0):
        raise DomainError("观测方差必须为正")
    diff = y_row[:, None] - H
    return diff.T @ (diff / (2.0 * nu2_row[:, None]))


def compute_A_all(y: np.ndarray, H: np.ndarray, nu2_cells: np.ndarray) -> np.ndarray:
    """全部时点的 A_t，形状 T×L×L"""
    nu2_cells = np.broadcast_to(np.asarray(nu2_cells, dtype=float), y.shape)
    if np.any(nu2_cells <= 0.0):
        raise DomainError("观测方差必须为正")
    diff = y[:, :, None] - H[None, :, :]
    return np.einsum("tkl,tkm->tlm", diff, diff / (2.0 * nu2_cells[:, :, None]))


def compute_B_and_s(A: np.ndarray, v_row: np.ndarray, ell: int) -> Tuple[float, float, float, float]:
    """
    第 ℓ 个状态分量对应的 2×2 矩阵 B 的元素 (b, c, d) 与 s

    Args:
        A: L×L 矩阵
        v_row: L 维正向量，v[0] = 1
        ell: 1..L-1，对应 v 与 A 的第 ℓ+1 个分量

    Returns:
        (b, c, d, s)
    """
    A = np.asarray(A, dtype=float)
    v_row = np.asarray(v_row, dtype=float)
    L = v_row.size
    if A.shape != (L, L):
        raise ShapeError("A 与 v 的维度不一致", A=A.shape, L=L)
    if not (1 <= ell <= L - 1):
        raise DomainError("ell 必须位于 1..L-1", ell=ell)
    if np.any(v_row <= 0.0):
        raise DomainError("v 的元素必须为正")
    others = np.arange(L) != ell
    s = float(v_row[others].sum())
    w = v_row[others] / s
    b = float(A[ell, ell])
    c = float(A[ell, others] @ w)
    d = float(w @ A[np.ix_(others, others)] @ w)
    return b, c, d, s


def compute_B_and_s_all(
    A_all: np.ndarray, u: np.ndarray, ell: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    对全部 t 计算 (b, c, d, ln s)，u 为 T×(L-1) 当前状态（不含第 0 行）

    使用对数尺度避免 e^u 溢出。
    """
    T = u.shape[0]
    full = np.concatenate([np.zeros((T, 1)), u], axis=1)
    others = np.arange(full.shape[1]) != ell
    u_others = full[:, others]
    log_s = logsumexp(u_others, axis=1)
    w = np.exp(u_others - log_s[:, None])
    b = A_all[:, ell, ell]
    c = np.einsum("tj,tj->t", A_all[:, ell, others], w)
    A_oo = A_all[:, others][:, :, others]
    d = np.einsum("ti,tij,tj->t", w, A_oo, w)
    return b, c, d, log_s


def log_observation_density(
    y_row: np.ndarray, pi: np.ndarray, H: np.ndarray, nu2_row: Union[float, np.ndarray]
) -> float:
    """Σ_k log N(y_tk; (Hπ)_k, ν²_tk)"""
    y_row = np.asarray(y_row, dtype=float)
    mean = mean_curve(pi, H)
    if mean.shape != y_row.shape:
        raise ShapeError("观测与均值函数维度不一致", y=y_row.shape, mean=mean.shape)
    scale = np.sqrt(np.broadcast_to(np.asarray(nu2_row, dtype=float), y_row.shape))
    return float(np.sum(norm.logpdf(y_row, loc=mean, scale=scale)))


def check_simplex(pi: np.ndarray, where: Optional[str] = None) -> None:
    """单纯形不变量：各行和为 1 且元素严格为正"""
    if np.any(pi <= 0.0) or np.any(np.abs(pi.sum(axis=-1) - 1.0) > SIMPLEX_TOL):
        raise InvariantViolationError("权重离开了单纯形", where=where)
