#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
混合对照模型测试
"""

import math

import numpy as np
import pytest

from app.core.basis import build_basis_set
from app.core.errors import DomainError
from app.core.gibbs import run_chain
from app.core.mixture import (
    LABEL_DTYPE,
    MixtureGibbsSampler,
    component_variance_posterior,
    label_counts,
    mixture_predictive_moments,
    sample_labels,
    update_mixture_states,
)
from app.core.model import FunctionalPanel, LatentState, ModelParams
from app.schemas.request import McmcConfig, PriorHyperparams
from app.tools.diagnostics import geweke_test


def _component_prior(n0=0.01, d0=0.01):
    return PriorHyperparams(
        mu_mean=[0.0], mu_var=[1.0], phi_mean=[0.0], phi_var=[1.0], sigma2_n0=[1.0], sigma2_d0=[1.0],
        nu2_n0=1.0, nu2_d0=1.0, component_n0=[n0, n0], component_d0=[d0, d0],
    )


def test_label_probabilities_follow_weights(gen):
    K = 20_000
    y = np.full((1, K), 0.5)
    H = np.full((K, 2), 0.5)
    labels = sample_labels(gen, y, H, np.array([0.01, 0.01]), np.array([[math.log(3.0)]]))
    share = np.mean(labels == 2)
    assert share == pytest.approx(0.75, abs=4.0 * math.sqrt(0.1875 / K))


def test_dominating_density_does_not_overflow(gen):
    H = np.array([[0.0, 1.0], [0.0, 1.0]])
    with np.errstate(over="raise", invalid="raise"):
        labels = sample_labels(gen, np.array([0.0, 1.0]), H, np.array([1e-6, 1e-6]), np.array([50.0]))
    np.testing.assert_array_equal(labels, [1, 2])


def test_labels_are_compact_and_counted(gen, oracle_basis, small_panel):
    u = gen.normal(size=(small_panel.T, 2))
    labels = sample_labels(gen, small_panel.y, oracle_basis.H, np.full(3, 0.01), u)
    assert labels.dtype == LABEL_DTYPE
    assert labels.shape == small_panel.y.shape
    assert labels.min() >= 1 and labels.max() <= 3
    counts = label_counts(labels, 3)
    np.testing.assert_array_equal(counts.sum(axis=1), np.full(small_panel.T, small_panel.K))


def test_component_variance_hand_case():
    y = np.array([[0.5, 0.7]])
    H = np.array([[0.3, 0.1], [0.5, 0.6]])
    labels = np.array([[1, 2]], dtype=LABEL_DTYPE)
    prior = _component_prior()
    assert component_variance_posterior(1, y, labels, H, prior) == pytest.approx((1.01, 0.05))
    assert component_variance_posterior(2, y, labels, H, prior) == pytest.approx((1.01, 0.02))


def test_empty_component_returns_prior():
    y = np.array([[0.5, 0.7]])
    H = np.array([[0.3, 0.1], [0.5, 0.6]])
    labels = np.ones((1, 2), dtype=LABEL_DTYPE)
    assert component_variance_posterior(2, y, labels, H, _component_prior(3.0, 0.2)) == pytest.approx((3.0, 0.2))


def test_component_prior_required(default_priors):
    with pytest.raises(DomainError):
        component_variance_posterior(1, np.zeros((1, 1)), np.ones((1, 1)), np.zeros((1, 3)), default_priors)


def test_predictive_moments_closed_form(gen):
    pi = np.array([[0.3, 0.7]])
    H = np.array([[0.2, 0.6]])
    nu2 = np.array([0.01, 0.04])
    mean, var = mixture_predictive_moments(pi, H, nu2)
    assert mean[0, 0] == pytest.approx(0.48)
    assert var[0, 0] == pytest.approx(0.295 - 0.48 ** 2)

    n = 200_000
    comp = (gen.random(n) < 0.7).astype(int)
    draws = H[0, comp] + np.sqrt(nu2[comp]) * gen.standard_normal(n)
    assert draws.mean() == pytest.approx(mean[0, 0], abs=4.0 * math.sqrt(var[0, 0] / n))
    assert draws.var() == pytest.approx(var[0, 0], rel=0.02)


def test_state_update_keeps_simplex(gen, small_panel, oracle_basis):
    params = ModelParams(mu=[0.0, 0.0], phi=[0.8, 0.8], sigma2=[0.05, 0.05], nu2=0.01)
    latent = LatentState(np.zeros((small_panel.T + 1, 2)))
    labels = gen.integers(1, 4, size=small_panel.y.shape).astype(LABEL_DTYPE)
    for _ in range(5):
        update_mixture_states(gen, labels, params, latent)
        assert np.max(np.abs(latent.pi.sum(axis=1) - 1.0)) <= 1e-12


def test_labels_favour_heavier_component_after_updates(gen):
    # 所有观测都打上标签 2 时，π_t2 应远大于 1/2
    params = ModelParams(mu=[0.0], phi=[0.5], sigma2=[1.0], nu2=0.01)
    latent = LatentState(np.zeros((9, 1)))
    labels = np.full((8, 30), 2, dtype=LABEL_DTYPE)
    for _ in range(20):
        update_mixture_states(gen, labels, params, latent)
    assert latent.pi[:, 1].mean() > 0.8


def test_short_mixture_chain(small_panel, oracle_basis, default_priors):
    config = McmcConfig(n_iter=6, n_burnin=2, seed=21)
    store = run_chain(config, small_panel, oracle_basis, default_priors, model="mixture")
    assert store.model == "mixture"
    assert store.params_array().shape == (6, 9)
    assert store.param_names[-3:] == ["nu2_comp[1]", "nu2_comp[2]", "nu2_comp[3]"]
    assert np.all(store.params_array()[:, -3:] > 0.0)
    np.testing.assert_allclose(store.weights_array().sum(axis=2), 1.0, atol=1e-12)


def test_sampler_fills_default_component_priors(small_panel, oracle_basis, default_priors, short_mcmc):
    sampler = MixtureGibbsSampler(small_panel, oracle_basis, default_priors, short_mcmc)
    assert len(sampler.priors.component_n0) == 3
    sampler.initialize()
    assert sampler.labels.dtype == LABEL_DTYPE
    assert sampler.param_vector().size == 9


@pytest.mark.slow
def test_geweke_mixture(tight_priors):
    basis = build_basis_set([("beta", 1.0, 1.0), ("beta", 3.0, 1.0)], [0.25, 0.5, 0.75])
    panel = FunctionalPanel(y=np.zeros((20, 3)), arguments=basis.arguments)
    sampler = MixtureGibbsSampler(panel, basis, tight_priors, McmcConfig(seed=91))
    result = geweke_test(sampler, 50_000, np.random.default_rng(92))
    assert result.max_abs_z < 4.0, result.as_dict()
