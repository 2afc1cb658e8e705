#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
形状约束基函数

每个基函数都是 [0,1] 上单调、凸、满足 h(0)=0、h(1)=1 的洛伦兹曲线。
BasisSet 在观测自变量上预先计算 H 矩阵与各基函数的基尼系数。
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np
import yaml
from loguru import logger

from app.core.config import settings
from app.core.errors import ConfigurationError, DataIOError, DomainError
from app.core.specials import log_beta, quadrature, regularized_incomplete_beta

PRESET_FILE = Path(__file__).parent / "presets" / "basis_sets.yml"


class BasisFamily(str, Enum):
    """基函数族"""

    BETA = "beta"
    PARETO = "pareto"


@dataclass(frozen=True)
class BasisFunction:
    """参数为 (a, b) 的单个基函数"""

    family: BasisFamily
    a: float
    b: float

    def __post_init__(self):
        try:
            family = BasisFamily(str(getattr(self.family, "value", self.family)).lower())
        except ValueError:
            raise DomainError("未知的基函数族", family=self.family)
        object.__setattr__(self, "family", family)
        a, b = float(self.a), float(self.b)
        if not (math.isfinite(a) and math.isfinite(b) and a > 0.0 and b > 0.0):
            raise DomainError("基函数参数必须为有限正数", family=family.value, a=a, b=b)
        if family is BasisFamily.PARETO and (a > 1.0 or b > 1.0):
            raise DomainError("Pareto 基函数要求 a, b 位于 (0, 1]", a=a, b=b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    def __call__(self, x):
        return evaluate_basis(self, x)

    def as_dict(self) -> Dict[str, Any]:
        return {"family": self.family.value, "a": self.a, "b": self.b}


def eval_basis(f: BasisFunction, x: float) -> float:
    """
    在单点计算基函数

    Args:
        f: 基函数
        x: [0, 1] 内的自变量

    Returns:
        h(x; a, b)
    """
    x = float(x)
    if not (0.0 <= x <= 1.0):
        raise DomainError("基函数自变量必须位于 [0, 1]", x=x)
    if f.family is BasisFamily.BETA:
        return regularized_incomplete_beta(x, f.a, f.b)
    return float((1.0 - (1.0 - x) ** f.a) ** (1.0 / f.b))


def evaluate_basis(f: BasisFunction, x) -> np.ndarray:
    """在数组上计算基函数"""
    xs = np.asarray(x, dtype=float)
    if xs.size and (np.any(xs < 0.0) or np.any(xs > 1.0) or not np.all(np.isfinite(xs))):
        raise DomainError("基函数自变量必须位于 [0, 1]")
    if f.family is BasisFamily.PARETO:
        return (1.0 - (1.0 - xs) ** f.a) ** (1.0 / f.b)
    return np.vectorize(lambda v: regularized_incomplete_beta(v, f.a, f.b), otypes=[float])(xs)


def basis_gini(f: BasisFunction, tol: float = None) -> float:
    """
    基函数的基尼系数 1 - 2∫h

    Pareto 族使用闭式 1 - 2B(1/a, 1/b + 1)/a，贝塔族使用自适应积分。
    """
    if f.family is BasisFamily.PARETO:
        return 1.0 - 2.0 * math.exp(log_beta(1.0 / f.a, 1.0 / f.b + 1.0)) / f.a
    tol = settings.QUADRATURE_TOL if tol is None else tol
    return 1.0 - 2.0 * quadrature(lambda xs: evaluate_basis(f, xs), tol, vectorized=True)


@dataclass(frozen=True, eq=False)
class BasisSet:
    """观测网格上的基函数集合（构造后不可变）"""

    bases: Tuple[BasisFunction, ...]
    arguments: np.ndarray
    H: np.ndarray
    ginis: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def L(self) -> int:
        return len(self.bases)

    @property
    def K(self) -> int:
        return int(self.arguments.size)

    def as_records(self) -> List[Dict[str, Any]]:
        return [f.as_dict() for f in self.bases]

    def with_arguments(self, arguments: Sequence[float]) -> "BasisSet":
        """相同基函数在另一组自变量上的集合"""
        return build_basis_set(self.bases, arguments)


BasisEntryLike = Union[BasisFunction, Dict[str, Any], Tuple[Any, float, float], Sequence[Any]]


def _coerce_entry(index: int, entry: BasisEntryLike) -> BasisFunction:
    try:
        if isinstance(entry, BasisFunction):
            return entry
        if isinstance(entry, dict):
            return BasisFunction(entry["family"], entry["a"], entry["b"])
        if hasattr(entry, "family") and hasattr(entry, "a") and hasattr(entry, "b"):
            return BasisFunction(entry.family, entry.a, entry.b)
        family, a, b = entry
        return BasisFunction(family, a, b)
    except (DomainError, KeyError, TypeError, ValueError) as e:
        raise ConfigurationError(f"第 {index + 1} 个基函数配置无效: {e}", entry=repr(entry))


def build_basis_set(entries: Iterable[BasisEntryLike], arguments: Sequence[float]) -> BasisSet:
    """
    构造基函数集合并校验全部不变量

    Args:
        entries: (family, a, b) 列表
        arguments: 严格递增且位于 (0, 1) 的观测自变量

    Returns:
        BasisSet

    Raises:
        ConfigurationError: 基函数数量不足、参数无效或自变量无序/重复
    """
    bases = tuple(_coerce_entry(i, entry) for i, entry in enumerate(entries))
    if len(bases) < 2:
        raise ConfigurationError("基函数数量 L 至少为 2", L=len(bases))
    if len(bases) > 255:
        raise ConfigurationError("基函数数量 L 不能超过 255", L=len(bases))

    x = np.asarray(list(arguments), dtype=float)
    if x.ndim != 1:
        raise ConfigurationError("观测自变量必须是一维序列")
    for k, value in enumerate(x):
        if not (0.0 < value < 1.0):
            raise ConfigurationError(f"第 {k + 1} 个观测自变量不在 (0, 1) 内", x=float(value))
        if k and value <= x[k - 1]:
            raise ConfigurationError(f"第 {k + 1} 个观测自变量未严格递增（重复或乱序）", x=float(value))

    H = np.empty((x.size, len(bases)))
    for j, f in enumerate(bases):
        H[:, j] = evaluate_basis(f, x)
    ginis = np.array([basis_gini(f) for f in bases])

    if H.size and (np.any(H < 0.0) or np.any(H > 1.0)):
        raise ConfigurationError("H 的元素超出 [0, 1]")
    if x.size > 1 and np.any(np.diff(H, axis=0) < 0.0):
        raise ConfigurationError("H 的某一列不是单调不减的")
    for j, g in enumerate(ginis):
        if not (-1e-12 <= g < 1.0):
            raise ConfigurationError(f"第 {j + 1} 个基函数的基尼系数超出 [0, 1)", gini=float(g))
    ginis = np.clip(ginis, 0.0, None)

    x.flags.writeable = False
    H.flags.writeable = False
    ginis.flags.writeable = False
    return BasisSet(bases=bases, arguments=x, H=H, ginis=ginis)


def warn_nonconvex(basis: Union[BasisSet, Sequence[BasisFunction]], grid: int = 1001) -> List[int]:
    """
    报告在均匀网格上二阶差分为负（小于 -1e-9）的基函数

    Returns:
        非凸基函数的下标列表（从 0 开始）
    """
    bases = basis.bases if isinstance(basis, BasisSet) else tuple(basis)
    xs = np.linspace(0.0, 1.0, grid)
    flagged = []
    for j, f in enumerate(bases):
        second = np.diff(evaluate_basis(f, xs), n=2)
        if np.min(second) < -1e-9:
            flagged.append(j)
            logger.warning(
                f"第 {j + 1} 个基函数 {f.family.value}({f.a}, {f.b}) 在网格上不是凸函数，"
                f"最小二阶差分 {np.min(second):.3e}"
            )
    return flagged


@lru_cache(maxsize=1)
def _load_presets() -> Dict[str, Any]:
    try:
        with open(PRESET_FILE, "r", encoding="utf-8") as f:
            return yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise DataIOError(f"无法读取预置基函数文件: {e}", path=str(PRESET_FILE))


def preset_names() -> List[str]:
    return list(_load_presets()["basis_sets"].keys())


def load_basis_preset(name: str) -> List[BasisFunction]:
    """按名称读取预置基函数集合"""
    sets = _load_presets()["basis_sets"]
    if name not in sets:
        raise ConfigurationError(f"未知的预置基函数集合: {name}", available=",".join(sets))
    return [_coerce_entry(i, entry) for i, entry in enumerate(sets[name])]


def load_prior_presets() -> Dict[str, Any]:
    """读取预置先验"""
    return _load_presets()["priors"]
