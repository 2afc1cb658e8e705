#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
实验工具模块

提供模拟数据、评估指标、基尼上下界和抽样器诊断
"""

from app.tools.gini_bounds import GiniBounds, panel_gini_bounds, polygon_gini_bounds
from app.tools.metrics import ess, gini_series, interval_metrics, posterior_predictive_loss
from app.tools.synthetic import SyntheticTruth, generate_synthetic

__all__ = [
    "GiniBounds",
    "panel_gini_bounds",
    "polygon_gini_bounds",
    "ess",
    "gini_series",
    "interval_metrics",
    "posterior_predictive_loss",
    "SyntheticTruth",
    "generate_synthetic",
]
