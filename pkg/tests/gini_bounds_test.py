#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
基尼系数非参数上下界测试
"""

import numpy as np
import pytest

from app.core.errors import DomainError
from app.tools.gini_bounds import panel_gini_bounds, polygon_gini_bounds


def test_equality_line_gives_zero_bounds():
    bounds = polygon_gini_bounds([0.25, 0.5, 0.75], [0.25, 0.5, 0.75])
    assert bounds.lower == pytest.approx(0.0, abs=1e-14)
    assert bounds.upper == pytest.approx(0.0, abs=1e-14)


def test_single_point_hand_case():
    bounds = polygon_gini_bounds([0.5], [0.25])
    assert bounds.lower == pytest.approx(0.25)
    assert bounds.upper == pytest.approx(0.583333, abs=1e-6)


@pytest.mark.parametrize("a", [1.0, 1.5, 2.0, 4.0])
def test_bounds_bracket_power_curve(a):
    # f(x) = x^a 的基尼系数为 (a-1)/(a+1)
    x = np.array([0.2, 0.4, 0.6, 0.8])
    bounds = polygon_gini_bounds(x, x ** a)
    truth = (a - 1.0) / (a + 1.0)
    assert bounds.lower <= truth + 1e-12
    assert truth <= bounds.upper + 1e-12


def test_bounds_ordered_for_random_convex_points():
    gen = np.random.default_rng(57)
    for _ in range(100):
        k = int(gen.integers(1, 8))
        x = np.sort(gen.uniform(0.01, 0.99, size=k))
        while np.any(np.diff(x) <= 0.0):
            x = np.sort(gen.uniform(0.01, 0.99, size=k))
        weights = gen.dirichlet(np.ones(3))
        powers = gen.uniform(1.0, 5.0, size=3)
        f = sum(w * x ** p for w, p in zip(weights, powers))
        bounds = polygon_gini_bounds(x, f)
        assert 0.0 <= bounds.lower <= bounds.upper <= 1.0 + 1e-12


def test_more_points_tighten_bounds():
    coarse = polygon_gini_bounds([0.5], [0.25])
    x = np.array([0.25, 0.5, 0.75])
    fine = polygon_gini_bounds(x, x ** 2)
    assert fine.lower >= coarse.lower - 1e-12
    assert fine.upper <= coarse.upper + 1e-12


@pytest.mark.parametrize(
    "x,f",
    [
        ([0.3, 0.6], [0.4, 0.2]),
        ([0.6, 0.3], [0.1, 0.2]),
        ([0.0, 0.5], [0.0, 0.2]),
        ([0.5], [1.2]),
        ([0.5, 0.6], [0.1]),
    ],
)
def test_invalid_points_raise(x, f):
    with pytest.raises(DomainError):
        polygon_gini_bounds(x, f)


def test_panel_bounds_mark_bad_rows_nan():
    y = np.array([[0.1, 0.4], [0.5, 0.3], [0.2, 0.5]])
    lower, upper = panel_gini_bounds(y, [0.4, 0.8])
    assert np.isnan(lower[1]) and np.isnan(upper[1])
    assert np.all(np.isfinite(lower[[0, 2]]))
    assert np.all(lower[[0, 2]] <= upper[[0, 2]])
