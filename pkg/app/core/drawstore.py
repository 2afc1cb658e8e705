#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
后验抽样存储

每条链在本地累积抽样，运行结束后合并。落盘格式为长格式 CSV
（列 chain, iter, name, value），参数、权重、基尼系数各一个文件，
另有后验预测矩 predictive.csv 与清单 manifest.json。
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from app.core.errors import DataIOError, TruncatedDrawStoreError
from app.schemas.response import RunManifest
from app.utils.storage import ensure_dir, read_frame, write_frame

PARAMS_FILE = "params.csv"
WEIGHTS_FILE = "weights.csv"
GINI_FILE = "gini.csv"
PREDICTIVE_FILE = "predictive.csv"
MANIFEST_FILE = "manifest.json"


def fssm_param_names(n_states: int) -> List[str]:
    names = []
    for prefix in ("mu", "phi", "sigma2"):
        names += [f"{prefix}[{l}]" for l in range(1, n_states + 1)]
    return names + ["nu2"]


def mixture_param_names(n_states: int) -> List[str]:
    names = fssm_param_names(n_states)[:-1]
    return names + [f"nu2_comp[{l}]" for l in range(1, n_states + 2)]


@dataclass
class ChainDraws:
    """单条链的抽样"""

    chain: int
    param_names: List[str]
    T: int
    L: int
    K: int
    store_states: bool = True
    iterations: List[int] = field(default_factory=list)
    params: List[np.ndarray] = field(default_factory=list)
    weights: List[np.ndarray] = field(default_factory=list)
    gini: List[np.ndarray] = field(default_factory=list)
    pred_sum: Optional[np.ndarray] = None
    pred_sumsq: Optional[np.ndarray] = None
    pred_count: int = 0
    phi_accepted: Optional[np.ndarray] = None
    phi_tries: int = 0
    wall_time_sec: float = 0.0

    def __post_init__(self):
        if self.pred_sum is None:
            self.pred_sum = np.zeros((self.T, self.K))
            self.pred_sumsq = np.zeros((self.T, self.K))
        if self.phi_accepted is None:
            self.phi_accepted = np.zeros(self.L - 1)

    def record(
        self,
        iteration: int,
        param_vector: np.ndarray,
        pi: np.ndarray,
        gini: np.ndarray,
        y_rep: Optional[np.ndarray] = None,
    ) -> None:
        self.iterations.append(int(iteration))
        self.params.append(np.asarray(param_vector, dtype=float).copy())
        if self.store_states:
            self.weights.append(np.asarray(pi, dtype=float).copy())
        self.gini.append(np.asarray(gini, dtype=float).copy())
        if y_rep is not None:
            self.pred_sum += y_rep
            self.pred_sumsq += y_rep * y_rep
            self.pred_count += 1

    @property
    def n_draws(self) -> int:
        return len(self.iterations)

    @property
    def phi_acceptance(self) -> List[float]:
        if self.phi_tries == 0:
            return [0.0] * (self.L - 1)
        return (self.phi_accepted / self.phi_tries).tolist()


class DrawStore:
    """多条链的抽样集合"""

    def __init__(self, chains: Sequence[ChainDraws], arguments: Sequence[float], model: str = "fssm"):
        if not chains:
            raise ValueError("DrawStore 至少需要一条链")
        self.chains = sorted(chains, key=lambda c: c.chain)
        self.arguments = np.asarray(arguments, dtype=float)
        self.model = model
        first = self.chains[0]
        self.param_names = list(first.param_names)
        self.T, self.L, self.K = first.T, first.L, first.K
        self.store_states = first.store_states

    @property
    def n_chains(self) -> int:
        return len(self.chains)

    @property
    def n_draws_per_chain(self) -> int:
        return self.chains[0].n_draws

    def params_array(self) -> np.ndarray:
        """(总抽样数, 参数个数)"""
        return np.concatenate([np.asarray(c.params).reshape(c.n_draws, -1) for c in self.chains])

    def params_by_chain(self) -> np.ndarray:
        """(链数, 每链抽样数, 参数个数)"""
        return np.stack([np.asarray(c.params).reshape(c.n_draws, -1) for c in self.chains])

    def weights_array(self) -> np.ndarray:
        """(总抽样数, T, L)"""
        if not self.store_states:
            raise DataIOError("该运行未保存权重抽样（store_states = false）")
        return np.concatenate([np.asarray(c.weights).reshape(c.n_draws, self.T, self.L) for c in self.chains])

    def gini_array(self) -> np.ndarray:
        """(总抽样数, T)"""
        return np.concatenate([np.asarray(c.gini).reshape(c.n_draws, self.T) for c in self.chains])

    def predictive_moments(self) -> Tuple[np.ndarray, np.ndarray, int]:
        """合并各链的后验预测均值与方差"""
        total = sum(c.pred_sum for c in self.chains)
        total_sq = sum(c.pred_sumsq for c in self.chains)
        n = sum(c.pred_count for c in self.chains)
        if n == 0:
            return np.full((self.T, self.K), np.nan), np.full((self.T, self.K), np.nan), 0
        mean = total / n
        var = np.maximum(total_sq / n - mean * mean, 0.0)
        return mean, var, n

    # 长格式表

    def params_frame(self) -> pd.DataFrame:
        frames = []
        P = len(self.param_names)
        for c in self.chains:
            values = np.asarray(c.params).reshape(c.n_draws, P)
            frames.append(
                pd.DataFrame(
                    {
                        "chain": c.chain,
                        "iter": np.repeat(c.iterations, P),
                        "name": np.tile(self.param_names, c.n_draws),
                        "value": values.ravel(),
                    }
                )
            )
        return pd.concat(frames, ignore_index=True)

    def _matrix_frame(self, arrays: Dict[int, np.ndarray], names: List[str]) -> pd.DataFrame:
        frames = []
        for c in self.chains:
            values = arrays[c.chain].reshape(c.n_draws, -1)
            frames.append(
                pd.DataFrame(
                    {
                        "chain": c.chain,
                        "iter": np.repeat(c.iterations, len(names)),
                        "name": np.tile(names, c.n_draws),
                        "value": values.ravel(),
                    }
                )
            )
        return pd.concat(frames, ignore_index=True)

    def weight_names(self) -> List[str]:
        return [f"pi[{t},{l}]" for t in range(1, self.T + 1) for l in range(1, self.L + 1)]

    def gini_names(self) -> List[str]:
        return [f"gini[{t}]" for t in range(1, self.T + 1)]

    def predictive_frame(self) -> pd.DataFrame:
        mean, var, n = self.predictive_moments()
        return pd.DataFrame(
            {
                "t": np.repeat(np.arange(1, self.T + 1), self.K),
                "x": np.tile(self.arguments, self.T),
                "mean": mean.ravel(),
                "var": var.ravel(),
                "count": n,
            }
        )

    def save(self, out_dir, manifest: RunManifest) -> Path:
        """写出全部 CSV 与清单"""
        out = ensure_dir(out_dir)
        write_frame(self.params_frame(), out / PARAMS_FILE)
        if self.store_states:
            arrays = {c.chain: np.asarray(c.weights) for c in self.chains}
            write_frame(self._matrix_frame(arrays, self.weight_names()), out / WEIGHTS_FILE)
        arrays = {c.chain: np.asarray(c.gini) for c in self.chains}
        write_frame(self._matrix_frame(arrays, self.gini_names()), out / GINI_FILE)
        write_frame(self.predictive_frame(), out / PREDICTIVE_FILE)
        manifest.save(out / MANIFEST_FILE)
        logger.info(f"抽样结果已写入 {out}：{self.n_chains} 条链，每条 {self.n_draws_per_chain} 次抽样")
        return out

    @classmethod
    def load(cls, in_dir) -> Tuple["DrawStore", RunManifest]:
        """
        读回 DrawStore

        Raises:
            TruncatedDrawStoreError: 文件中的抽样数少于清单声明
            DataIOError: 文件缺失或格式错误
        """
        in_dir = Path(in_dir)
        manifest = RunManifest.load(in_dir / MANIFEST_FILE)
        expected = manifest.n_draws_per_chain
        if expected is None or manifest.T is None:
            raise DataIOError("清单缺少抽样数或时间长度", path=str(in_dir))
        T = manifest.T
        L = len(manifest.basis)
        K = len(manifest.arguments)
        chain_ids = [c.chain for c in manifest.chains]

        params = read_frame(in_dir / PARAMS_FILE, required=("chain", "iter", "name", "value"))
        gini = read_frame(in_dir / GINI_FILE, required=("chain", "iter", "name", "value"))
        weights = None
        if manifest.store_states:
            weights = read_frame(in_dir / WEIGHTS_FILE, required=("chain", "iter", "name", "value"))
        predictive = None
        if (in_dir / PREDICTIVE_FILE).is_file():
            predictive = read_frame(in_dir / PREDICTIVE_FILE, required=("t", "x", "mean", "var", "count"))

        param_names = list(dict.fromkeys(params["name"].tolist()))
        chains = []
        for report in manifest.chains:
            cid = report.chain
            p = params[params["chain"] == cid]
            g = gini[gini["chain"] == cid]
            n_params = len(p) / max(len(param_names), 1)
            n_gini = len(g) / T
            if n_params != expected or n_gini != expected:
                raise TruncatedDrawStoreError(
                    "抽样存储被截断", chain=cid, expected=expected, params=n_params, gini=n_gini
                )
            draws = ChainDraws(chain=cid, param_names=param_names, T=T, L=L, K=K, store_states=manifest.store_states)
            draws.iterations = p["iter"].to_numpy()[:: len(param_names)].tolist()
            values = p["value"].to_numpy(dtype=float).reshape(expected, len(param_names))
            draws.params = list(values)
            draws.gini = list(g["value"].to_numpy(dtype=float).reshape(expected, T))
            if weights is not None:
                w = weights[weights["chain"] == cid]
                if len(w) != expected * T * L:
                    raise TruncatedDrawStoreError(
                        "权重抽样被截断", chain=cid, expected=expected * T * L, found=len(w)
                    )
                draws.weights = list(w["value"].to_numpy(dtype=float).reshape(expected, T, L))
            draws.phi_accepted = np.asarray(report.phi_acceptance, dtype=float)
            draws.phi_tries = 1
            draws.wall_time_sec = report.wall_time_sec
            chains.append(draws)

        if predictive is not None and len(predictive) == T * K and len(chains):
            # 预测矩已在各链间合并，读回时挂到第一条链上
            n = int(predictive["count"].iloc[0])
            mean = predictive["mean"].to_numpy(dtype=float).reshape(T, K)
            var = predictive["var"].to_numpy(dtype=float).reshape(T, K)
            chains[0].pred_count = n
            chains[0].pred_sum = mean * n
            chains[0].pred_sumsq = (var + mean * mean) * n

        store = cls(chains, manifest.arguments, model=manifest.model or "fssm")
        logger.info(f"读取抽样存储 {in_dir}：{len(chain_ids)} 条链，每条 {expected} 次抽样")
        return store, manifest
