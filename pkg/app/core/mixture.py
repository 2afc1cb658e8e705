#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
对照模型：每个观测点属于某一条基曲线的混合模型

y_tk | 标签 ℓ ~ N(h_ℓ(x_k), ν_ℓ²)，P(标签 = ℓ) = π_tℓ，
π_t 与函数型状态空间模型共用 AR(1) 状态与逆 softmax。
标签给定时，每个 ℓ 的状态更新是多项 logit 的 PG 增广。
"""

from typing import List, Optional

import numpy as np
from loguru import logger
from scipy.special import logsumexp
from scipy.stats import norm

from app.core.drawstore import mixture_param_names
from app.core.errors import DomainError, NumericalError
from app.core.ffbs import Ar1Process, ffbs_draw
from app.core.gibbs import (
    BLOCK_INIT,
    BLOCK_PARAMS,
    BLOCK_STATES,
    GibbsSamplerBase,
    _inverse_gamma_mean,
    draw_params_from_prior,
    draw_stationary_path,
)
from app.core.model import LatentState, ModelParams, check_simplex
from app.core.samplers import RngLike, as_generator, draw_inverse_gamma, draw_polya_gamma_array
from app.schemas.request import PriorHyperparams

LABEL_DTYPE = np.uint8


def _full_states(u: np.ndarray) -> np.ndarray:
    """在状态前补 u_{t0} = 0，得到 T×L"""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    return np.concatenate([np.zeros((u.shape[0], 1)), u], axis=1)


def label_log_probs(y: np.ndarray, H: np.ndarray, nu2_comp: np.ndarray, u: np.ndarray) -> np.ndarray:
    """
    标签的对数后验（未归一化）

    Args:
        y: T×K 观测
        H: K×L 基函数取值
        nu2_comp: 长度 L 的分量方差
        u: T×(L-1) 状态（t = 1..T）

    Returns:
        T×K×L 对数概率
    """
    loglik = norm.logpdf(y[:, :, None], loc=np.asarray(H)[None, :, :], scale=np.sqrt(nu2_comp)[None, None, :])
    return loglik + _full_states(u)[:, None, :]


def sample_labels(
    rng: RngLike, y: np.ndarray, H: np.ndarray, nu2_comp: np.ndarray, u: np.ndarray
) -> np.ndarray:
    """
    在对数空间中抽取标签

    y 可以是一行 (K,) 配一行 u (L-1,)，也可以是整个面板。
    返回的标签取值 1..L，dtype 为 uint8。
    """
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    y2 = np.atleast_2d(y)
    logp = label_log_probs(y2, H, np.asarray(nu2_comp, dtype=float), np.atleast_2d(u))
    probs = np.exp(logp - logsumexp(logp, axis=2, keepdims=True))
    cum = np.cumsum(probs, axis=2)
    draws = as_generator(rng).random(y2.shape)[:, :, None] * cum[:, :, -1:]
    labels = (np.sum(cum < draws, axis=2) + 1).clip(1, probs.shape[2]).astype(LABEL_DTYPE)
    return labels[0] if single else labels


def label_counts(labels: np.ndarray, L: int) -> np.ndarray:
    """T×L 的计数 N_tℓ"""
    labels = np.atleast_2d(labels)
    return np.stack([(labels == ell).sum(axis=1) for ell in range(1, L + 1)], axis=1)


def update_mixture_states(
    rng: RngLike, labels: np.ndarray, params: ModelParams, latent: LatentState
) -> LatentState:
    """
    标签给定时逐个 ℓ 更新状态路径

    ω_tℓ ~ PG(K, ξ_tℓ)，ξ_tℓ = u_tℓ - ln Σ_{ℓ'≠ℓ} e^{u_tℓ'}，
    伪观测 ỹ = ln Σ_{ℓ'≠ℓ} e^{u_tℓ'} + (2N_tℓ - K)/(2ω)。
    """
    gen = as_generator(rng)
    labels = np.atleast_2d(labels)
    K = labels.shape[1]
    counts = label_counts(labels, latent.L)
    for ell in range(1, latent.L):
        j = ell - 1
        full = _full_states(latent.u[1:])
        others = np.delete(full, ell, axis=1)
        log_rest = logsumexp(others, axis=1)
        xi = full[:, ell] - log_rest
        omega = draw_polya_gamma_array(gen, np.full(xi.shape, K), xi)
        missing = omega == 0.0
        safe = np.where(missing, 1.0, omega)
        values = np.where(missing, 0.0, log_rest + (2.0 * counts[:, ell] - K) / (2.0 * safe))
        process = Ar1Process(phi=float(params.phi[j]), mu=float(params.mu[j]), sigma2=float(params.sigma2[j]))
        try:
            latent.u[:, j] = ffbs_draw(gen, process, (values, np.where(missing, 0.0, omega)))
        except NumericalError as e:
            e.diagnostics.setdefault("ell", ell)
            raise
    latent.refresh()
    check_simplex(latent.pi, where="update_mixture_states")
    return latent


def component_variance_posterior(
    ell: int, y: np.ndarray, labels: np.ndarray, H: np.ndarray, prior: PriorHyperparams
):
    """分量 ℓ（1..L）方差的 IG(n1/2, d1/2) 参数 (n1, d1)"""
    if prior.component_n0 is None:
        raise DomainError("混合模型需要分量方差先验 component_n0 / component_d0")
    mask = np.asarray(labels) == ell
    resid = np.asarray(y, dtype=float) - np.asarray(H)[:, ell - 1][None, :]
    n1 = prior.component_n0[ell - 1] + float(mask.sum())
    d1 = prior.component_d0[ell - 1] + float(np.sum(resid[mask] ** 2))
    return n1, d1


def update_component_variance(
    rng: RngLike, ell: int, y: np.ndarray, labels: np.ndarray, H: np.ndarray, prior: PriorHyperparams
) -> float:
    n1, d1 = component_variance_posterior(ell, y, labels, H, prior)
    return draw_inverse_gamma(rng, n1 / 2.0, d1 / 2.0)


def mixture_predictive_moments(pi: np.ndarray, H: np.ndarray, nu2_comp: np.ndarray):
    """
    给定 π_t 时 y_tk 的预测均值与方差

    mean = Σ π h，var = Σ π(ν² + h²) - mean²
    """
    pi = np.atleast_2d(pi)
    H = np.asarray(H)
    mean = pi @ H.T
    second = pi @ (H * H).T + (pi @ np.asarray(nu2_comp))[:, None]
    return mean, np.maximum(second - mean * mean, 0.0)


class MixtureGibbsSampler(GibbsSamplerBase):
    """混合模型的抽样器"""

    model_tag = "mixture"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        if self.priors.component_n0 is None:
            defaults = PriorHyperparams.mixture_defaults(self.basis.L)
            self.priors = self.priors.model_copy(
                update={"component_n0": defaults.component_n0, "component_d0": defaults.component_d0}
            )
            logger.info("未给出分量方差先验，使用默认 IG(0.005, 0.005)")
        self.nu2_comp: Optional[np.ndarray] = None
        self.labels: Optional[np.ndarray] = None

    def param_names(self) -> List[str]:
        return mixture_param_names(self.n_states)

    def param_vector(self) -> np.ndarray:
        p = self.params
        return np.concatenate([p.mu, p.phi, p.sigma2, self.nu2_comp])

    def initialize(self) -> None:
        pr = self.priors
        u_row, resid_var = self._static_fit()
        self.latent = LatentState(np.tile(u_row, (self.panel.T + 1, 1)))
        self.nu2_comp = np.array(
            [_inverse_gamma_mean(n0, d0, resid_var) for n0, d0 in zip(pr.component_n0, pr.component_d0)]
        )
        self.params = ModelParams(
            mu=np.array(pr.mu_mean, dtype=float),
            phi=np.clip(pr.phi_mean, -0.8, 0.8),
            sigma2=np.array([_inverse_gamma_mean(n0, d0, 0.1) for n0, d0 in zip(pr.sigma2_n0, pr.sigma2_d0)]),
            nu2=float(np.mean(self.nu2_comp)),
        )
        gen = self.stream.substream(0, BLOCK_INIT).generator
        self.labels = sample_labels(gen, self.panel.y, self.basis.H, self.nu2_comp, self.latent.u[1:])

    def sweep(self, iteration: int) -> None:
        gen = self.stream.substream(iteration, BLOCK_PARAMS).generator
        self._update_ar_params(gen)
        for ell in range(1, self.basis.L + 1):
            self.nu2_comp[ell - 1] = update_component_variance(
                gen, ell, self.panel.y, self.labels, self.basis.H, self.priors
            )
        self.params.nu2 = float(np.mean(self.nu2_comp))

        gen = self.stream.substream(iteration, BLOCK_STATES).generator
        self.labels = sample_labels(gen, self.panel.y, self.basis.H, self.nu2_comp, self.latent.u[1:])
        update_mixture_states(gen, self.labels, self.params, self.latent)

    def _draw_labels_and_data(self, gen: np.random.Generator):
        pi = self.latent.pi
        T, K = self.panel.T, self.panel.K
        cum = np.cumsum(pi, axis=1)
        draws = gen.random((T, K)) * cum[:, -1:]
        labels = np.empty((T, K), dtype=LABEL_DTYPE)
        for t in range(T):
            labels[t] = np.searchsorted(cum[t], draws[t], side="right") + 1
        labels = labels.clip(1, self.basis.L)
        idx = labels.astype(np.intp) - 1
        H = np.asarray(self.basis.H)
        means = H[np.arange(K)[None, :], idx]
        y = means + np.sqrt(self.nu2_comp[idx]) * gen.standard_normal((T, K))
        return labels, y

    def replicate(self, gen: np.random.Generator) -> np.ndarray:
        return self._draw_labels_and_data(gen)[1]

    def simulate_data(self, gen: np.random.Generator) -> np.ndarray:
        """标签与观测一起重新抽取，标签保存在抽样器上"""
        self.labels, y = self._draw_labels_and_data(gen)
        return y

    def draw_from_prior(self, gen: np.random.Generator) -> None:
        pr = self.priors
        self.params = draw_params_from_prior(gen, pr)
        self.nu2_comp = np.array(
            [draw_inverse_gamma(gen, n0 / 2.0, d0 / 2.0) for n0, d0 in zip(pr.component_n0, pr.component_d0)]
        )
        self.params.nu2 = float(np.mean(self.nu2_comp))
        self.latent = LatentState(draw_stationary_path(gen, self.params, self.panel.T))
        self.labels = np.ones((self.panel.T, self.panel.K), dtype=LABEL_DTYPE)
