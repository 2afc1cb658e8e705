#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
文件读写工具

所有 CSV/JSON 读写都经过这里，失败统一转换为 DataIOError。
"""

import json
from pathlib import Path
from typing import Any, Dict, Iterable, Union

import numpy as np
import pandas as pd
from loguru import logger

from app.core.errors import DataIOError
from app.core.model import FunctionalPanel

PathLike = Union[str, Path]

FLOAT_FORMAT = "%.17g"


def ensure_dir(path: PathLike) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DataIOError(f"无法创建目录: {e}", path=str(path))
    return path


def write_frame(df: pd.DataFrame, path: PathLike) -> Path:
    """写出 CSV，浮点数使用可逐位还原的格式"""
    path = Path(path)
    try:
        df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise DataIOError(f"无法写入 CSV: {e}", path=str(path))
    logger.debug(f"已写入 {path}（{len(df)} 行）")
    return path


def read_frame(path: PathLike, required: Iterable[str] = ()) -> pd.DataFrame:
    """读取 CSV 并检查必需列"""
    path = Path(path)
    try:
        df = pd.read_csv(path)
    except FileNotFoundError:
        raise DataIOError("文件不存在", path=str(path))
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataIOError(f"无法解析 CSV: {e}", path=str(path))
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise DataIOError(f"CSV 缺少必需列: {', '.join(missing)}", path=str(path))
    return df


def write_json(data: Dict[str, Any], path: PathLike) -> Path:
    path = Path(path)
    try:
        path.write_text(json.dumps(data, ensure_ascii=False, indent=2, default=_json_default), encoding="utf-8")
    except (OSError, TypeError) as e:
        raise DataIOError(f"无法写入 JSON: {e}", path=str(path))
    return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"无法序列化的类型: {type(obj).__name__}")


def panel_to_frame(panel: FunctionalPanel) -> pd.DataFrame:
    """面板转长格式 (t, x, y)，t 从 1 开始"""
    T, K = panel.y.shape
    return pd.DataFrame(
        {
            "t": np.repeat(np.arange(1, T + 1), K),
            "x": np.tile(panel.arguments, T),
            "y": panel.y.ravel(),
        }
    )


def read_panel_csv(path: PathLike) -> FunctionalPanel:
    """
    读取长格式面板

    每个 t 必须覆盖同一组自变量 x，且 (t, x) 不重复。
    """
    df = read_frame(path, required=("t", "x", "y"))
    if df.empty:
        raise DataIOError("面板文件为空", path=str(path))
    if df[["t", "x", "y"]].isna().any().any():
        raise DataIOError("面板文件含有缺失值", path=str(path))
    if df.duplicated(subset=["t", "x"]).any():
        raise DataIOError("面板文件含有重复的 (t, x)", path=str(path))
    wide = df.pivot(index="t", columns="x", values="y").sort_index().sort_index(axis=1)
    if wide.isna().any().any():
        raise DataIOError("面板不是完整的 T×K 网格", path=str(path))
    panel = FunctionalPanel(y=wide.to_numpy(dtype=float), arguments=wide.columns.to_numpy(dtype=float))
    logger.info(f"读取面板 {path}：T={panel.T}，K={panel.K}")
    return panel


def write_panel_csv(panel: FunctionalPanel, path: PathLike) -> Path:
    return write_frame(panel_to_frame(panel), path)
