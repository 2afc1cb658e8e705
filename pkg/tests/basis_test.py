#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
基函数与基函数集合测试
"""

import numpy as np
import pytest

from app.core.basis import (
    BasisFamily,
    BasisFunction,
    basis_gini,
    build_basis_set,
    eval_basis,
    evaluate_basis,
    load_basis_preset,
    load_prior_presets,
    preset_names,
    warn_nonconvex,
)
from app.core.errors import ConfigurationError, DomainError
from app.core.specials import quadrature


def test_oracle_basis_values(oracle_basis):
    x = np.array([0.2, 0.4, 0.6, 0.8])
    assert oracle_basis.H.shape == (4, 3)
    np.testing.assert_allclose(oracle_basis.H[:, 0], x, atol=1e-14)
    np.testing.assert_allclose(oracle_basis.H[:, 1], x ** 3, atol=1e-13)
    np.testing.assert_allclose(oracle_basis.H[:, 2], 1.0 - (1.0 - x) ** 0.3, atol=1e-13)


def test_oracle_basis_ginis(oracle_basis):
    expected = [0.0, 0.5, 2.0 / 1.3 - 1.0]
    np.testing.assert_allclose(oracle_basis.ginis, expected, atol=1e-9)


def test_basis_set_is_read_only(oracle_basis):
    with pytest.raises(ValueError):
        oracle_basis.H[0, 0] = 0.5
    with pytest.raises(ValueError):
        oracle_basis.ginis[0] = 0.5


@pytest.mark.parametrize("preset", ["oracle", "misspecified_pareto", "basis_set_1", "basis_set_2", "basis_set_3"])
def test_presets_are_pinned_monotone_and_convex(preset):
    xs = np.linspace(0.0, 1.0, 401)
    for f in load_basis_preset(preset):
        values = evaluate_basis(f, xs)
        assert values[0] == pytest.approx(0.0, abs=1e-14)
        assert values[-1] == pytest.approx(1.0, abs=1e-14)
        assert np.all(np.diff(values) >= -1e-14)
        assert np.min(np.diff(values, n=2)) > -1e-9


def test_preset_catalogue():
    names = preset_names()
    assert {"oracle", "misspecified_pareto", "basis_set_1", "basis_set_2", "basis_set_3"} <= set(names)
    assert len(load_basis_preset("misspecified_pareto")) == 7
    assert len(load_basis_preset("basis_set_3")) == 5
    priors = load_prior_presets()
    assert priors["fssm"]["nu2"]["n0"] == pytest.approx(0.001)
    with pytest.raises(ConfigurationError):
        load_basis_preset("no_such_set")


def test_pareto_gini_closed_form_matches_quadrature():
    rng = np.random.default_rng(11)
    for _ in range(50):
        a, b = rng.uniform(0.1, 1.0, size=2)
        f = BasisFunction("pareto", a, b)
        numeric = 1.0 - 2.0 * quadrature(lambda xs: evaluate_basis(f, xs), tol=1e-11, vectorized=True)
        assert basis_gini(f) == pytest.approx(numeric, abs=1e-8)


def test_scalar_and_array_evaluation_agree():
    f = BasisFunction(BasisFamily.BETA, 1.5, 0.8)
    xs = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
    np.testing.assert_allclose(evaluate_basis(f, xs), [eval_basis(f, x) for x in xs], atol=1e-15)
    assert f(0.5) == pytest.approx(eval_basis(f, 0.5))


def test_basis_function_validation():
    with pytest.raises(DomainError):
        BasisFunction("gamma", 1.0, 1.0)
    with pytest.raises(DomainError):
        BasisFunction("pareto", 1.5, 0.5)
    with pytest.raises(DomainError):
        BasisFunction("beta", 0.0, 1.0)
    with pytest.raises(DomainError):
        eval_basis(BasisFunction("beta", 1.0, 1.0), 1.5)


@pytest.mark.parametrize(
    "entries,arguments",
    [
        ([("beta", 1.0, 1.0)], [0.5]),
        ([("beta", 1.0, 1.0), ("beta", 3.0, 1.0)], [0.5, 0.4]),
        ([("beta", 1.0, 1.0), ("beta", 3.0, 1.0)], [0.5, 0.5]),
        ([("beta", 1.0, 1.0), ("beta", 3.0, 1.0)], [0.0, 0.5]),
        ([("beta", 1.0, 1.0), ("pareto", 2.0, 1.0)], [0.5]),
        ([("beta", 1.0, 1.0), {"family": "beta", "a": 1.0}], [0.5]),
    ],
)
def test_build_basis_set_rejects_invalid(entries, arguments):
    with pytest.raises(ConfigurationError):
        build_basis_set(entries, arguments)


def test_build_basis_set_without_arguments():
    basis = build_basis_set(load_basis_preset("oracle"), [])
    assert basis.K == 0 and basis.L == 3
    assert basis.H.shape == (0, 3)


def test_with_arguments_keeps_bases(oracle_basis):
    other = oracle_basis.with_arguments([0.1, 0.2, 0.3])
    assert other.bases == oracle_basis.bases
    np.testing.assert_allclose(other.ginis, oracle_basis.ginis)


def test_warn_nonconvex_flags_concave_basis(oracle_basis):
    assert warn_nonconvex(oracle_basis) == []
    assert warn_nonconvex([BasisFunction("beta", 1.0, 1.0), BasisFunction("beta", 0.5, 2.0)]) == [1]
