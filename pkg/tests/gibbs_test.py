#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
Gibbs 抽样器测试：全条件分布的参数、链的可复现性与扫描中止
"""

import asyncio
import math
from pathlib import Path

import numpy as np
import pytest

from app.core import gibbs
from app.core.basis import build_basis_set
from app.core.errors import ConfigurationError, NumericalError, SweepAbortError
from app.core.gibbs import (
    FssmGibbsSampler,
    mu_posterior,
    nu2_posterior,
    phi_acceptance_probability,
    phi_proposal_moments,
    run_chain,
    run_chains,
    sigma2_posterior,
    update_mu,
    update_phi,
    update_sigma2,
    update_states,
)
from app.core.model import AugmentationVars, FunctionalPanel, LatentState, ModelParams
from app.schemas.request import McmcConfig, PriorHyperparams
from app.tools.diagnostics import geweke_test
from app.tools.metrics import ess


def _single_prior(**overrides):
    fields = dict(
        mu_mean=[0.0], mu_var=[1.0], phi_mean=[0.0], phi_var=[1.0], sigma2_n0=[1.0], sigma2_d0=[1.0],
        nu2_n0=1.0, nu2_d0=1.0,
    )
    fields.update(overrides)
    return PriorHyperparams(**fields)


def test_phi_acceptance_examples():
    assert phi_acceptance_probability(0.4, 0.4) == 1.0
    assert phi_acceptance_probability(0.0, 0.8) == pytest.approx(0.6)
    assert phi_acceptance_probability(0.8, 0.0) == 1.0


def test_phi_acceptance_includes_initial_state_factor():
    # u_0 偏离 μ 时接受比多出 exp{(φn² - φo²)(u_0 - μ)²/(2σ²)}
    expected = 0.6 * math.exp(0.64 * 0.25 / 2.0)
    assert phi_acceptance_probability(0.0, 0.8, u0_centered=0.5, sigma2=1.0) == pytest.approx(min(1.0, expected))
    assert phi_acceptance_probability(0.0, 0.8, u0_centered=0.1, sigma2=1.0) == pytest.approx(
        0.6 * math.exp(0.64 * 0.01 / 2.0)
    )


def test_phi_proposal_moments_use_full_sums():
    u = np.array([[1.0], [0.5], [0.25]])
    prior = _single_prior(phi_mean=[0.8], phi_var=[0.04])
    m1, v1 = phi_proposal_moments(1, u, 0.0, 1.0, prior)
    assert v1 == pytest.approx(1.0 / (1.0 + 0.25 + 25.0))
    assert m1 == pytest.approx(v1 * (0.5 + 0.125 + 20.0))


def test_update_phi_stays_in_unit_interval(gen):
    u = gen.normal(size=(30, 1))
    prior = _single_prior(phi_mean=[0.8], phi_var=[0.04])
    phi = 0.5
    for _ in range(200):
        phi, accepted = update_phi(gen, 1, u, 0.0, 0.05, prior, phi)
        assert -1.0 < phi < 1.0
        assert isinstance(accepted, (bool, np.bool_))


def test_sigma2_posterior_hand_case():
    u = np.array([1.0, 0.5, 0.25])
    n1, d1 = sigma2_posterior(1, u, 0.5, _single_prior())
    assert n1 == pytest.approx(4.0)
    assert d1 == pytest.approx(1.75)


def test_sigma2_posterior_zero_path_and_centering():
    prior = _single_prior(sigma2_d0=[0.3])
    assert sigma2_posterior(1, np.zeros(5), 0.9, prior)[1] == pytest.approx(0.3)
    # 整条路径平移 μ 后，以 μ 为中心的残差不变
    u = np.array([1.0, 0.5, 0.25])
    assert sigma2_posterior(1, u + 2.0, 0.5, prior, mu=2.0) == pytest.approx(sigma2_posterior(1, u, 0.5, prior))


def test_sigma2_posterior_without_transitions():
    n1, d1 = sigma2_posterior(1, np.array([2.0]), 0.6, _single_prior())
    assert n1 == pytest.approx(2.0)
    assert d1 == pytest.approx(1.0 + 0.64 * 4.0)


def test_mu_posterior_formulas():
    prior = _single_prior(mu_var=[4.0])
    u = np.array([0.3, -0.1, 0.4, 0.2])
    _, v1 = mu_posterior(1, u, 0.0, 0.5, prior)
    assert 1.0 / v1 == pytest.approx((1 + 3) / 0.5 + 0.25)
    # 先验很弱且 T = 0 时后验均值趋于 u_0
    m1, _ = mu_posterior(1, np.array([1.7]), 0.5, 0.5, _single_prior(mu_var=[1e12]))
    assert m1 == pytest.approx(1.7, rel=1e-9)


def test_nu2_posterior_hand_case(oracle_basis):
    prior = PriorHyperparams.model_construct(nu2_n0=0.0, nu2_d0=0.0)
    panel = FunctionalPanel(y=np.array([[0.8]]), arguments=[0.5])
    H = np.array([[0.5, 0.5]])
    n1, d1 = nu2_posterior(panel, H, np.array([[0.5, 0.5]]), prior)
    assert n1 == pytest.approx(1.0)
    assert d1 / 2.0 == pytest.approx(0.045)


def test_nu2_posterior_perfect_fit(oracle_basis):
    pi = np.array([[0.2, 0.3, 0.5], [0.6, 0.2, 0.2]])
    panel = FunctionalPanel(y=pi @ oracle_basis.H.T, arguments=oracle_basis.arguments)
    prior = PriorHyperparams.experiment_defaults(2)
    assert nu2_posterior(panel, oracle_basis.H, pi, prior)[1] == pytest.approx(prior.nu2_d0, abs=1e-15)


def test_update_draws_are_positive(gen):
    prior = _single_prior()
    u = gen.normal(size=10)
    for _ in range(50):
        assert update_sigma2(gen, 1, u, 0.5, prior) > 0.0
        assert math.isfinite(update_mu(gen, 1, u, 0.5, 0.2, prior))


def _state_setup(panel, basis):
    params = ModelParams(mu=[0.0, 0.0], phi=[0.9, 0.9], sigma2=[0.01, 0.01], nu2=1e-3)
    latent = LatentState(np.zeros((panel.T + 1, 2)))
    return params, latent, AugmentationVars.zeros(panel.T, 2)


def test_update_states_keeps_simplex_for_any_order(small_panel, oracle_basis, gen):
    for order in ([1, 2], [2, 1]):
        params, latent, aug = _state_setup(small_panel, oracle_basis)
        for _ in range(5):
            update_states(gen, small_panel, oracle_basis, params, latent, aug, order=order)
            assert np.max(np.abs(latent.pi.sum(axis=1) - 1.0)) <= 1e-12
            aug.validate()


def test_sampler_rejects_mismatched_priors(small_panel, oracle_basis, short_mcmc):
    with pytest.raises(ConfigurationError):
        FssmGibbsSampler(small_panel, oracle_basis, PriorHyperparams.experiment_defaults(3), short_mcmc)
    other = oracle_basis.with_arguments([0.1, 0.2, 0.3, 0.9])
    with pytest.raises(ConfigurationError):
        FssmGibbsSampler(small_panel, other, PriorHyperparams.experiment_defaults(2), short_mcmc)


def test_run_chain_draw_count_and_determinism(small_panel, oracle_basis, default_priors):
    config = McmcConfig(n_iter=10, n_burnin=3, thin=2, seed=5)
    first = run_chain(config, small_panel, oracle_basis, default_priors)
    second = run_chain(config, small_panel, oracle_basis, default_priors)
    assert first.n_draws_per_chain == 5
    np.testing.assert_array_equal(first.params_array(), second.params_array())
    np.testing.assert_array_equal(first.weights_array(), second.weights_array())
    assert first.chains[0].iterations == [5, 7, 9, 11, 13]
    draws = first.params_array()
    n = 2
    assert np.all(np.abs(draws[:, n:2 * n]) < 1.0)
    assert np.all(draws[:, 2 * n:] > 0.0)


def test_parallel_chains_match_sequential(small_panel, oracle_basis, default_priors):
    config = McmcConfig(n_iter=6, n_burnin=2, thin=1, seed=9, n_chains=2)
    store = asyncio.run(run_chains(config, small_panel, oracle_basis, default_priors, threads=2))
    assert store.n_chains == 2
    single = run_chain(config, small_panel, oracle_basis, default_priors, chain=1)
    np.testing.assert_array_equal(store.params_by_chain()[1], single.params_array())
    assert not np.array_equal(store.params_by_chain()[0], store.params_by_chain()[1])


def test_store_states_false_keeps_gini(small_panel, oracle_basis, default_priors):
    config = McmcConfig(n_iter=4, n_burnin=0, seed=3, store_states=False)
    store = run_chain(config, small_panel, oracle_basis, default_priors)
    assert store.gini_array().shape == (4, small_panel.T)
    assert store.chains[0].weights == []


def test_sweep_abort_writes_snapshot(small_panel, oracle_basis, default_priors, tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise NumericalError("滤波方差为负", t=3, ell=1)

    monkeypatch.setattr(gibbs, "update_states", broken)
    config = McmcConfig(n_iter=5, n_burnin=0, seed=1)
    with pytest.raises(SweepAbortError) as info:
        run_chain(config, small_panel, oracle_basis, default_priors, snapshot_dir=str(tmp_path))
    err = info.value
    assert err.iteration == 1 and err.chain == 0
    assert err.diagnostics["t"] == 3
    assert Path(err.snapshot_path).is_file()
    assert err.exit_code == 3


def test_no_data_chain_recovers_prior_moments():
    """K = 0 时后验即先验，μ 的链均值应回到先验均值"""
    basis = build_basis_set([("beta", 1.0, 1.0), ("beta", 3.0, 1.0)], [])
    panel = FunctionalPanel(y=np.zeros((5, 0)), arguments=[])
    priors = PriorHyperparams(
        mu_mean=[0.5], mu_var=[0.25], phi_mean=[0.5], phi_var=[0.05], sigma2_n0=[10.0], sigma2_d0=[2.0],
        nu2_n0=6.0, nu2_d0=1.0,
    )
    config = McmcConfig(n_iter=3000, n_burnin=100, seed=4)
    store = run_chain(config, panel, basis, priors)
    mu_draws = store.params_array()[:, 0]
    se = math.sqrt(0.25 / ess(mu_draws))
    assert abs(mu_draws.mean() - 0.5) < 4.0 * se


@pytest.mark.slow
def test_geweke_fssm(tight_priors):
    basis = build_basis_set([("beta", 1.0, 1.0), ("beta", 3.0, 1.0)], [0.25, 0.5, 0.75])
    panel = FunctionalPanel(y=np.zeros((20, 3)), arguments=basis.arguments)
    sampler = FssmGibbsSampler(panel, basis, tight_priors, McmcConfig(seed=77))
    result = geweke_test(sampler, 50_000, np.random.default_rng(78))
    assert result.max_abs_z < 4.0, result.as_dict()


def test_geweke_smoke(tight_priors):
    basis = build_basis_set([("beta", 1.0, 1.0), ("beta", 3.0, 1.0)], [0.25, 0.5, 0.75])
    panel = FunctionalPanel(y=np.zeros((6, 3)), arguments=basis.arguments)
    sampler = FssmGibbsSampler(panel, basis, tight_priors, McmcConfig(seed=12))
    result = geweke_test(sampler, 150, np.random.default_rng(13))
    assert len(result.names) == len(result.z_mean) == len(result.z_second)
    assert "u[0,1]" in result.names and "phi[1]" in result.names
    assert np.all(np.isfinite(result.z_mean))
