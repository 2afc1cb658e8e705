#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
异常体系

所有异常都派生自 CurveWeaverError，并携带命令行退出码：
0 成功，1 配置/校验错误，2 读写错误，3 数值中止；未预期的异常由命令行映射为 4。
"""

from typing import Any, Dict, Optional


class CurveWeaverError(Exception):
    """项目异常基类"""

    exit_code: int = 3

    def __init__(self, message: str, **diagnostics: Any):
        super().__init__(message)
        self.message = message
        self.diagnostics: Dict[str, Any] = dict(diagnostics)

    def __str__(self) -> str:
        if not self.diagnostics:
            return self.message
        details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
        return f"{self.message} ({details})"


class DomainError(CurveWeaverError, ValueError):
    """参数超出运算的定义域"""

    exit_code = 1


class ShapeError(CurveWeaverError, ValueError):
    """维度不匹配"""

    exit_code = 1


class ConfigurationError(CurveWeaverError):
    """基函数、先验或运行配置无效"""

    exit_code = 1


class DataIOError(CurveWeaverError):
    """文件读写失败或CSV格式错误"""

    exit_code = 2


class NumericalError(CurveWeaverError):
    """数值计算失败（非有限速率、负方差等）"""

    exit_code = 3


class InvariantViolationError(NumericalError):
    """采样器内部不变量被破坏"""


class QuadratureAccuracyError(NumericalError):
    """自适应积分在节点预算内未收敛"""

    def __init__(self, message: str, best_estimate: float, n_evals: int, **diagnostics: Any):
        super().__init__(message, best_estimate=best_estimate, n_evals=n_evals, **diagnostics)
        self.best_estimate = best_estimate
        self.n_evals = n_evals


class SweepAbortError(CurveWeaverError):
    """Gibbs 扫描中止，附带迭代位置与状态快照路径"""

    exit_code = 3

    def __init__(
        self,
        message: str,
        iteration: int,
        chain: int,
        snapshot_path: Optional[str] = None,
        **diagnostics: Any,
    ):
        super().__init__(message, iteration=iteration, chain=chain, snapshot_path=snapshot_path, **diagnostics)
        self.iteration = iteration
        self.chain = chain
        self.snapshot_path = snapshot_path


class TruncatedDrawStoreError(CurveWeaverError):
    """抽样存储中的记录数少于清单声明的数量"""

    exit_code = 3
