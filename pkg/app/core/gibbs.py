#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
函数型状态空间模型的 Gibbs 抽样器

每次扫描先更新参数块（对每个 ℓ 依次更新 φ、σ²、μ，然后更新 ν²），
再更新状态块（对每个 ℓ 做泊松/PG 增广并用 FFBS 抽取整条路径）。
随机数子流按 (迭代号, 块号) 派生，保证可复现。
"""

import asyncio
import math
import time
from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Type

import numpy as np
from loguru import logger
from scipy.optimize import nnls

from app.core.augment import make_pseudo_obs_all, sample_omega_all, sample_z_all
from app.core.basis import BasisSet
from app.core.config import settings
from app.core.drawstore import ChainDraws, DrawStore, fssm_param_names
from app.core.errors import ConfigurationError, NumericalError, SweepAbortError
from app.core.ffbs import Ar1Process, ffbs_draw
from app.core.model import (
    AugmentationVars,
    FunctionalPanel,
    LatentState,
    ModelParams,
    check_simplex,
    compute_A_all,
    compute_B_and_s_all,
    inverse_softmax,
)
from app.core.samplers import (
    RngLike,
    RngStream,
    as_generator,
    draw_inverse_gamma,
    draw_normal,
    draw_truncated_normal,
)
from app.schemas.request import McmcConfig, PriorHyperparams
from app.utils.storage import ensure_dir, write_json

BLOCK_PARAMS = 0
BLOCK_STATES = 1
BLOCK_PREDICTIVE = 2
BLOCK_INIT = 3

WEIGHT_FLOOR = 1e-6


def _column(u: np.ndarray, ell: int) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return u if u.ndim == 1 else u[:, ell - 1]


def phi_acceptance_log_ratio(phi_old: float, phi_new: float, u0_centered: float, sigma2: float) -> float:
    """
    φ 步的对数接受比

    提议分布的两个求和都取 t = 1..T，没有吸收 u_0 的平稳先验因子，
    所以接受比由 √(1-φ²) 与 exp{φ²(u_0-μ)²/(2σ²)} 两部分组成；u_0 = μ 时退化为 √ 比。
    """
    return (
        0.5 * (math.log1p(-phi_new ** 2) - math.log1p(-phi_old ** 2))
        + (phi_new ** 2 - phi_old ** 2) * u0_centered ** 2 / (2.0 * sigma2)
    )


def phi_acceptance_probability(phi_old: float, phi_new: float, u0_centered: float = 0.0, sigma2: float = 1.0) -> float:
    return min(1.0, math.exp(min(0.0, phi_acceptance_log_ratio(phi_old, phi_new, u0_centered, sigma2))))


def phi_proposal_moments(ell: int, u: np.ndarray, mu: float, sigma2: float, prior: PriorHyperparams) -> Tuple[float, float]:
    """φ 截断正态提议的 (m1, v1²)"""
    x = _column(u, ell) - mu
    prev, curr = x[:-1], x[1:]
    m0, v0 = prior.phi_mean[ell - 1], prior.phi_var[ell - 1]
    precision = float(prev @ prev) / sigma2 + 1.0 / v0
    if not (math.isfinite(precision) and precision > 0.0):
        raise NumericalError("φ 提议方差退化", ell=ell, precision=precision)
    v1 = 1.0 / precision
    m1 = v1 * (float(curr @ prev) / sigma2 + m0 / v0)
    return m1, v1


def update_phi(
    rng: RngLike, ell: int, u: np.ndarray, mu: float, sigma2: float, prior: PriorHyperparams, phi_old: float
) -> Tuple[float, bool]:
    """
    φ_ℓ 的 Metropolis-Hastings 更新

    Args:
        rng: 随机数流
        ell: 状态分量编号 1..L-1
        u: (T+1)×(L-1) 状态矩阵（或第 ℓ 列）
        mu, sigma2: 当前的 μ_ℓ、σ_ℓ²
        prior: 先验超参数
        phi_old: 当前的 φ_ℓ

    Returns:
        (新的 φ_ℓ, 是否接受)
    """
    m1, v1 = phi_proposal_moments(ell, u, mu, sigma2, prior)
    phi_new = draw_truncated_normal(rng, m1, v1, -1.0, 1.0)
    u0_centered = float(_column(u, ell)[0] - mu)
    log_ratio = phi_acceptance_log_ratio(phi_old, phi_new, u0_centered, sigma2)
    if log_ratio >= 0.0 or math.log(as_generator(rng).random()) <= log_ratio:
        return phi_new, True
    return phi_old, False


def sigma2_posterior(ell: int, u: np.ndarray, phi: float, prior: PriorHyperparams, mu: float = 0.0) -> Tuple[float, float]:
    """σ_ℓ² 全条件 IG(n1/2, d1/2) 的 (n1, d1)，残差以 μ 为中心"""
    x = _column(u, ell) - mu
    T = x.size - 1
    resid = x[1:] - phi * x[:-1]
    n1 = T + prior.sigma2_n0[ell - 1] + 1.0
    d1 = float(resid @ resid) + prior.sigma2_d0[ell - 1] + (1.0 - phi ** 2) * x[0] ** 2
    return n1, d1


def update_sigma2(rng: RngLike, ell: int, u: np.ndarray, phi: float, prior: PriorHyperparams, mu: float = 0.0) -> float:
    n1, d1 = sigma2_posterior(ell, u, phi, prior, mu=mu)
    return draw_inverse_gamma(rng, n1 / 2.0, d1 / 2.0)


def mu_posterior(ell: int, u: np.ndarray, phi: float, sigma2: float, prior: PriorHyperparams) -> Tuple[float, float]:
    """μ_ℓ 全条件 N(m̄1, v̄1²) 的 (m̄1, v̄1²)"""
    x = _column(u, ell)
    T = x.size - 1
    m0, v0 = prior.mu_mean[ell - 1], prior.mu_var[ell - 1]
    precision = (T * (1.0 - phi) ** 2 + (1.0 - phi ** 2)) / sigma2 + 1.0 / v0
    v1 = 1.0 / precision
    data = (1.0 - phi) * float(np.sum(x[1:] - phi * x[:-1])) + (1.0 - phi ** 2) * x[0]
    m1 = v1 * (data / sigma2 + m0 / v0)
    return m1, v1


def update_mu(rng: RngLike, ell: int, u: np.ndarray, phi: float, sigma2: float, prior: PriorHyperparams) -> float:
    m1, v1 = mu_posterior(ell, u, phi, sigma2, prior)
    return draw_normal(rng, m1, v1)


def nu2_posterior(panel: FunctionalPanel, H: np.ndarray, pi_all: np.ndarray, prior: PriorHyperparams) -> Tuple[float, float]:
    """ν² 全条件 IG(n1/2, d1/2) 的 (n1, d1)"""
    resid = panel.y - pi_all @ np.asarray(H).T
    n1 = panel.T * panel.K + prior.nu2_n0
    d1 = float(np.sum(resid * resid)) + prior.nu2_d0
    return n1, d1


def update_nu2(rng: RngLike, panel: FunctionalPanel, H: np.ndarray, pi_all: np.ndarray, prior: PriorHyperparams) -> float:
    n1, d1 = nu2_posterior(panel, H, pi_all, prior)
    return draw_inverse_gamma(rng, n1 / 2.0, d1 / 2.0)


def update_states(
    rng: RngLike,
    panel: FunctionalPanel,
    basis: BasisSet,
    params: ModelParams,
    latent: LatentState,
    aug: AugmentationVars,
    A_all: Optional[np.ndarray] = None,
    order: Optional[Iterable[int]] = None,
) -> Tuple[LatentState, AugmentationVars]:
    """
    状态块：对每个 ℓ 抽取 z、ω，构造伪观测并用 FFBS 抽取 u_{0..T,ℓ}

    A_t 只依赖 (y_t, H, ν²)，可由调用方在一次扫描内共享传入。
    """
    gen = as_generator(rng)
    if A_all is None:
        A_all = compute_A_all(panel.y, basis.H, panel.nu2_cells(params.nu2))
    order = range(1, latent.L) if order is None else order
    for ell in order:
        j = ell - 1
        try:
            b, c, d, log_s = compute_B_and_s_all(A_all, latent.u[1:], ell)
            u_ell = latent.u[1:, j]
            z1, z2 = sample_z_all(gen, b, c, d, u_ell, log_s, ell=ell)
            omega = sample_omega_all(gen, z1, z2, u_ell, log_s)
            values, precisions = make_pseudo_obs_all(z1, omega, log_s, b < d)
            process = Ar1Process(phi=float(params.phi[j]), mu=float(params.mu[j]), sigma2=float(params.sigma2[j]))
            latent.u[:, j] = ffbs_draw(gen, process, (values, precisions))
        except NumericalError as e:
            e.diagnostics.setdefault("ell", ell)
            raise
        aug.z1[:, j], aug.z2[:, j], aug.omega[:, j] = z1, z2, omega
    latent.refresh()
    check_simplex(latent.pi, where="update_states")
    return latent, aug


def draw_params_from_prior(gen: np.random.Generator, prior: PriorHyperparams) -> ModelParams:
    """按先验抽取一组参数（φ 取截断正态）"""
    n = prior.n_states
    mu = np.array([draw_normal(gen, prior.mu_mean[j], prior.mu_var[j]) for j in range(n)])
    phi = np.array([draw_truncated_normal(gen, prior.phi_mean[j], prior.phi_var[j], -1.0, 1.0) for j in range(n)])
    sigma2 = np.array([draw_inverse_gamma(gen, prior.sigma2_n0[j] / 2.0, prior.sigma2_d0[j] / 2.0) for j in range(n)])
    nu2 = draw_inverse_gamma(gen, prior.nu2_n0 / 2.0, prior.nu2_d0 / 2.0)
    return ModelParams(mu=mu, phi=phi, sigma2=sigma2, nu2=nu2)


def draw_stationary_path(gen: np.random.Generator, params: ModelParams, T: int) -> np.ndarray:
    """u_0 取平稳分布，u_t = μ + φ(u_{t-1} - μ) + ε_t"""
    n = params.n_states
    u = np.empty((T + 1, n))
    sd = np.sqrt(params.sigma2)
    u[0] = params.mu + np.sqrt(params.sigma2 / (1.0 - params.phi ** 2)) * gen.standard_normal(n)
    for t in range(1, T + 1):
        u[t] = params.mu + params.phi * (u[t - 1] - params.mu) + sd * gen.standard_normal(n)
    return u


def _inverse_gamma_mean(n0: float, d0: float, fallback: float) -> float:
    """IG(n0/2, d0/2) 的均值，不存在时返回 fallback"""
    return d0 / (n0 - 2.0) if n0 > 2.0 else fallback


class GibbsSamplerBase:
    """
    单条链的 Gibbs 抽样器基类

    子类实现 initialize、sweep、replicate、simulate_data 与 param_vector。
    """

    model_tag = "base"

    def __init__(
        self,
        panel: FunctionalPanel,
        basis: BasisSet,
        priors: PriorHyperparams,
        mcmc: McmcConfig,
        chain: int = 0,
        snapshot_dir: Optional[str] = None,
    ):
        if basis.K != panel.K or not np.allclose(basis.arguments, panel.arguments):
            raise ConfigurationError("面板自变量与基函数集合的自变量不一致", panel_K=panel.K, basis_K=basis.K)
        if priors.n_states != basis.L - 1:
            raise ConfigurationError("先验的状态维数与基函数个数不匹配", priors=priors.n_states, expected=basis.L - 1)
        self.panel = panel
        self.basis = basis
        self.priors = priors
        self.mcmc = mcmc
        self.chain = int(chain)
        self.snapshot_dir = snapshot_dir
        self.stream = RngStream(mcmc.seed, self.chain)
        self.params: Optional[ModelParams] = None
        self.latent: Optional[LatentState] = None
        self.phi_accepted = np.zeros(basis.L - 1)
        self.phi_tries = 0

    @property
    def n_states(self) -> int:
        return self.basis.L - 1

    def param_names(self) -> List[str]:
        raise NotImplementedError

    def param_vector(self) -> np.ndarray:
        raise NotImplementedError

    def initialize(self) -> None:
        raise NotImplementedError

    def sweep(self, iteration: int) -> None:
        raise NotImplementedError

    def replicate(self, gen: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def simulate_data(self, gen: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def draw_from_prior(self, gen: np.random.Generator) -> None:
        raise NotImplementedError

    def _static_fit(self) -> Tuple[np.ndarray, float]:
        """静态 NNLS 拟合：返回初始状态行与残差方差"""
        if self.panel.K == 0:
            return np.zeros(self.n_states), 1.0
        ybar = self.panel.y.mean(axis=0)
        weights, _ = nnls(np.asarray(self.basis.H), ybar)
        if weights.sum() <= 0.0:
            weights = np.ones(self.basis.L)
        weights = np.maximum(weights / weights.sum(), WEIGHT_FLOOR)
        weights /= weights.sum()
        resid = self.panel.y - weights @ self.basis.H.T
        return inverse_softmax(weights, WEIGHT_FLOOR), max(float(np.mean(resid * resid)), 1e-8)

    def _update_ar_params(self, gen: np.random.Generator) -> None:
        """对每个 ℓ 依次更新 φ、σ²、μ"""
        u = self.latent.u
        p = self.params
        for j in range(self.n_states):
            ell = j + 1
            p.phi[j], accepted = update_phi(gen, ell, u, p.mu[j], p.sigma2[j], self.priors, p.phi[j])
            self.phi_accepted[j] += accepted
            p.sigma2[j] = update_sigma2(gen, ell, u, p.phi[j], self.priors, mu=p.mu[j])
            p.mu[j] = update_mu(gen, ell, u, p.phi[j], p.sigma2[j], self.priors)
        self.phi_tries += 1

    def _snapshot(self, iteration: int, error: NumericalError) -> Optional[str]:
        if not settings.SNAPSHOT_ON_ABORT or self.snapshot_dir is None:
            return None
        out = ensure_dir(self.snapshot_dir)
        path = Path(out) / f"snapshot_chain{self.chain}_iter{iteration}.json"
        write_json(
            {
                "model": self.model_tag,
                "chain": self.chain,
                "iteration": iteration,
                "error": error.message,
                "diagnostics": error.diagnostics,
                "param_names": self.param_names(),
                "params": self.param_vector(),
                "u": self.latent.u if self.latent is not None else None,
            },
            path,
        )
        return str(path)

    def run(self) -> ChainDraws:
        """初始化后运行 n_burnin + n_iter 次扫描，保存稀疏后的燃烧期后抽样"""
        start = time.perf_counter()
        self.initialize()
        draws = ChainDraws(
            chain=self.chain,
            param_names=self.param_names(),
            T=self.panel.T,
            L=self.basis.L,
            K=self.panel.K,
            store_states=self.mcmc.store_states,
        )
        n_burnin, thin = self.mcmc.n_burnin, self.mcmc.thin
        total = n_burnin + self.mcmc.n_iter
        logger.info(f"[{self.model_tag}] 链 {self.chain} 开始：燃烧期 {n_burnin}，抽样 {self.mcmc.n_iter}，稀疏 {thin}")
        for it in range(1, total + 1):
            try:
                self.sweep(it)
            except NumericalError as e:
                path = self._snapshot(it, e)
                logger.error(f"[{self.model_tag}] 链 {self.chain} 第 {it} 次扫描中止：{e}，快照：{path}")
                extra = {k: v for k, v in e.diagnostics.items() if k not in ("iteration", "chain", "snapshot_path")}
                raise SweepAbortError(
                    f"第 {it} 次扫描中止：{e.message}", iteration=it, chain=self.chain, snapshot_path=path, **extra
                ) from e
            post = it - n_burnin
            if post > 0 and post % thin == 0:
                gen = self.stream.substream(it, BLOCK_PREDICTIVE).generator
                pi = self.latent.pi
                draws.record(it, self.param_vector(), pi, pi @ self.basis.ginis, self.replicate(gen))
            if it % settings.PROGRESS_EVERY == 0:
                rates = ", ".join(f"{r:.3f}" for r in self.phi_accepted / max(self.phi_tries, 1))
                logger.debug(f"[{self.model_tag}] 链 {self.chain}：{it}/{total}，φ 接受率 [{rates}]")
        draws.phi_accepted = self.phi_accepted.copy()
        draws.phi_tries = self.phi_tries
        draws.wall_time_sec = time.perf_counter() - start
        rates = ", ".join(f"{r:.3f}" for r in draws.phi_acceptance)
        logger.info(
            f"[{self.model_tag}] 链 {self.chain} 完成：{draws.n_draws} 次抽样，耗时 {draws.wall_time_sec:.1f} 秒，"
            f"φ 接受率 [{rates}]"
        )
        return draws


class FssmGibbsSampler(GibbsSamplerBase):
    """函数型状态空间模型的抽样器"""

    model_tag = "fssm"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.aug: Optional[AugmentationVars] = None

    def param_names(self) -> List[str]:
        return fssm_param_names(self.n_states)

    def param_vector(self) -> np.ndarray:
        p = self.params
        return np.concatenate([p.mu, p.phi, p.sigma2, [p.nu2]])

    def initialize(self) -> None:
        pr = self.priors
        u_row, resid_var = self._static_fit()
        self.latent = LatentState(np.tile(u_row, (self.panel.T + 1, 1)))
        self.params = ModelParams(
            mu=np.array(pr.mu_mean, dtype=float),
            phi=np.clip(pr.phi_mean, -0.8, 0.8),
            sigma2=np.array([_inverse_gamma_mean(n0, d0, 0.1) for n0, d0 in zip(pr.sigma2_n0, pr.sigma2_d0)]),
            nu2=_inverse_gamma_mean(pr.nu2_n0, pr.nu2_d0, resid_var),
        )
        self.aug = AugmentationVars.zeros(self.panel.T, self.n_states)

    def sweep(self, iteration: int) -> None:
        gen = self.stream.substream(iteration, BLOCK_PARAMS).generator
        self._update_ar_params(gen)
        self.params.nu2 = update_nu2(gen, self.panel, self.basis.H, self.latent.pi, self.priors)
        A_all = compute_A_all(self.panel.y, self.basis.H, self.panel.nu2_cells(self.params.nu2))
        update_states(
            self.stream.substream(iteration, BLOCK_STATES).generator,
            self.panel,
            self.basis,
            self.params,
            self.latent,
            self.aug,
            A_all=A_all,
        )

    def replicate(self, gen: np.random.Generator) -> np.ndarray:
        mean = self.latent.pi @ self.basis.H.T
        return mean + math.sqrt(self.params.nu2) * gen.standard_normal(mean.shape)

    def simulate_data(self, gen: np.random.Generator) -> np.ndarray:
        return self.replicate(gen)

    def draw_from_prior(self, gen: np.random.Generator) -> None:
        self.params = draw_params_from_prior(gen, self.priors)
        self.latent = LatentState(draw_stationary_path(gen, self.params, self.panel.T))
        self.aug = AugmentationVars.zeros(self.panel.T, self.n_states)


def sampler_class(model: str) -> Type[GibbsSamplerBase]:
    """按模型标签选择抽样器"""
    model = getattr(model, "value", model)
    if model == "fssm":
        return FssmGibbsSampler
    if model == "mixture":
        from app.core.mixture import MixtureGibbsSampler

        return MixtureGibbsSampler
    raise ConfigurationError(f"未知的模型类型: {model}")


def _run_single(
    model: str,
    config: McmcConfig,
    panel: FunctionalPanel,
    basis: BasisSet,
    priors: PriorHyperparams,
    chain: int,
    snapshot_dir: Optional[str],
) -> ChainDraws:
    sampler = sampler_class(model)(panel, basis, priors, config, chain=chain, snapshot_dir=snapshot_dir)
    return sampler.run()


def run_chain(
    config: McmcConfig,
    panel: FunctionalPanel,
    basis: BasisSet,
    priors: PriorHyperparams,
    model: str = "fssm",
    chain: int = 0,
    snapshot_dir: Optional[str] = None,
) -> DrawStore:
    """
    运行单条链

    Args:
        config: MCMC 设置
        panel: 观测面板
        basis: 基函数集合
        priors: 先验超参数
        model: fssm 或 mixture
        chain: 链编号（随机数流编号）
        snapshot_dir: 扫描中止时写入状态快照的目录

    Returns:
        只含一条链的 DrawStore
    """
    draws = _run_single(model, config, panel, basis, priors, chain, snapshot_dir)
    return DrawStore([draws], basis.arguments, model=getattr(model, "value", model))


async def run_chains(
    config: McmcConfig,
    panel: FunctionalPanel,
    basis: BasisSet,
    priors: PriorHyperparams,
    model: str = "fssm",
    threads: Optional[int] = None,
    snapshot_dir: Optional[str] = None,
) -> DrawStore:
    """并行运行 n_chains 条链，并发数不超过 threads（默认等于链数）"""
    limit = threads or config.n_chains
    semaphore = asyncio.Semaphore(limit)
    logger.info(f"启动 {config.n_chains} 条链，并发上限 {limit}")

    async def one(chain: int) -> ChainDraws:
        async with semaphore:
            return await asyncio.to_thread(_run_single, model, config, panel, basis, priors, chain, snapshot_dir)

    results = await asyncio.gather(*(one(c) for c in range(config.n_chains)))
    return DrawStore(list(results), basis.arguments, model=getattr(model, "value", model))
