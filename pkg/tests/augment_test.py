#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
泊松 / PG 增广测试
"""

import math

import numpy as np
import pytest
from scipy.stats import norm

from app.core.augment import (
    augmentation_target,
    make_pseudo_obs,
    make_pseudo_obs_all,
    poisson_rates,
    sample_omega,
    sample_omega_all,
    sample_z,
    sample_z_all,
    series_identity_check,
)
from app.core.errors import DomainError, InvariantViolationError, NumericalError
from app.core.model import compute_B_and_s


def _random_bcd(rng):
    L = 3
    m = rng.normal(scale=0.8, size=(L, L))
    A = m @ m.T
    v = np.exp(rng.normal(size=L))
    v[0] = 1.0
    b, c, d, s = compute_B_and_s(A, v, 1)
    return b, c, d, v[1], s


def test_series_identity_matches_target():
    rng = np.random.default_rng(101)
    for _ in range(20):
        b, c, d, v, s = _random_bcd(rng)
        assert series_identity_check(b, c, d, v, s, truncation=80) == pytest.approx(
            augmentation_target(b, c, d, v, s), rel=1e-10
        )


def test_series_identity_validation():
    with pytest.raises(DomainError):
        series_identity_check(1.0, 0.0, 1.0, 1.0, 1.0, truncation=0)


def test_rates_are_nonnegative_for_psd_inputs():
    rng = np.random.default_rng(103)
    for _ in range(200):
        b, c, d, v, s = _random_bcd(rng)
        p = v / (v + s)
        rate1, rate2 = poisson_rates(b, c, d, p, 1.0 - p)
        assert rate1 >= 0.0
        assert rate2 >= -1e-12


def test_zero_rates_give_zero_counts_and_zero_omega(gen):
    zeros = np.zeros(5)
    z1, z2 = sample_z_all(gen, zeros, zeros, zeros, zeros, zeros)
    assert np.all(z1 == 0) and np.all(z2 == 0)
    omega = sample_omega_all(gen, z1, z2, zeros, zeros)
    np.testing.assert_array_equal(omega, zeros)
    values, precisions = make_pseudo_obs_all(z1, omega, zeros, np.ones(5, dtype=bool))
    np.testing.assert_array_equal(precisions, zeros)
    np.testing.assert_array_equal(values, zeros)


def test_scalar_sampling(gen):
    z1, z2 = sample_z(gen, 2.0, 0.5, 1.0, 1.5, 2.0)
    assert z1 >= 0 and z2 >= 0
    assert sample_omega(gen, 0, 0, 0.3, 2.0) == 0.0
    assert sample_omega(gen, 1, 2, 0.3, 2.0) > 0.0


def test_nonfinite_rates_raise(gen):
    with pytest.raises(NumericalError):
        sample_z_all(gen, np.array([np.inf]), np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1), ell=1)


def test_pseudo_observation_values():
    obs = make_pseudo_obs(2, 0.5, math.e, True)
    assert obs.value == pytest.approx(5.0)
    assert obs.precision == 0.5
    assert make_pseudo_obs(2, 0.5, math.e, False).value == pytest.approx(-3.0)
    assert make_pseudo_obs(0, 0.0, 2.0, True).missing


def test_pseudo_observation_rejects_inconsistent_omega():
    with pytest.raises(InvariantViolationError):
        make_pseudo_obs(1, 0.0, 2.0, True)
    with pytest.raises(InvariantViolationError):
        make_pseudo_obs_all(np.array([1]), np.array([0.0]), np.array([0.0]), np.array([True]))


def test_vectorized_pseudo_obs_match_scalar():
    z1 = np.array([0, 1, 3])
    omega = np.array([0.0, 0.7, 1.9])
    log_s = np.array([0.2, -0.4, 1.1])
    b_lt_d = np.array([True, False, True])
    values, precisions = make_pseudo_obs_all(z1, omega, log_s, b_lt_d)
    for t in range(3):
        obs = make_pseudo_obs(int(z1[t]), float(omega[t]), math.exp(log_s[t]), bool(b_lt_d[t]))
        assert values[t] == pytest.approx(obs.value)
        assert precisions[t] == obs.precision


def test_sample_z_hand_rates():
    rate1, rate2 = poisson_rates(2.0, 0.5, 1.0, 0.5, 0.5)
    assert (rate1, rate2) == pytest.approx((0.25, 0.75))
    n = 100_000
    gen = np.random.default_rng(107)
    z1, z2 = sample_z_all(gen, np.full(n, 2.0), np.full(n, 0.5), np.full(n, 1.0), np.zeros(n), np.zeros(n))
    assert abs(z1.mean() - 0.25) < 4.0 * math.sqrt(0.25 / n)
    assert abs(z2.mean() - 0.75) < 4.0 * math.sqrt(0.75 / n)


def test_pg_kernel_reproduces_logistic_factor():
    # p^{2 z1} (p q)^{z2} = e^{ψ(2 z1 + z2)} / (1 + e^ψ)^{2(z1 + z2)}
    #                     = 2^{-N} e^{z1 ψ} E[exp(-ω ψ² / 2)],  ω ~ PG(N, 0)
    z1, z2, psi = 1, 1, 0.7
    N = 2 * (z1 + z2)
    exact = math.exp(psi * (2 * z1 + z2)) / (1.0 + math.exp(psi)) ** N
    n = 200_000
    gen = np.random.default_rng(109)
    omega = sample_omega_all(gen, np.full(n, z1), np.full(n, z2), np.zeros(n), np.zeros(n))
    kernel = 2.0 ** -N * math.exp(z1 * psi) * np.exp(-0.5 * omega * psi ** 2)
    assert abs(kernel.mean() - exact) < 4.0 * kernel.std() / math.sqrt(n)


def test_pseudo_observation_likelihood_is_gaussian_in_u():
    gen = np.random.default_rng(113)
    for _ in range(50):
        z1 = int(gen.integers(0, 6))
        omega = float(gen.uniform(0.2, 3.0))
        s = float(math.exp(gen.normal()))
        b_lt_d = bool(gen.random() < 0.5)
        obs = make_pseudo_obs(z1, omega, s, b_lt_d)
        sign = 1.0 if b_lt_d else -1.0
        diffs = []
        for u in (-1.3, 0.2, 2.4):
            log_lik = u * z1 * sign - 0.5 * omega * (u - math.log(s)) ** 2
            diffs.append(log_lik - norm.logpdf(obs.value, loc=u, scale=1.0 / math.sqrt(obs.precision)))
        assert max(diffs) - min(diffs) == pytest.approx(0.0, abs=1e-10)
