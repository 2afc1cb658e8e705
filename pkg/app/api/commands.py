#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
命令实现：simulate、fit、summarize、gini

每个命令读入输入、调用核心模块、写出 CSV 与清单，返回输出目录。
异常原样抛出，由 app.main 统一映射为退出码。
"""

import asyncio
import time
from datetime import datetime
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from app.core.basis import build_basis_set, load_basis_preset, warn_nonconvex
from app.core.config import settings
from app.core.drawstore import DrawStore
from app.core.errors import DataIOError, DomainError
from app.core.gibbs import run_chains
from app.core.samplers import RngStream
from app.schemas.request import ModelTag, PriorHyperparams, RunConfig, Scenario
from app.schemas.response import ChainReport, MetricReport, MetricRow, RunManifest
from app.tools.diagnostics import split_rhat
from app.tools.gini_bounds import panel_gini_bounds
from app.tools.metrics import ess, interval_metrics, predictive_loss_from_moments
from app.tools.synthetic import generate_synthetic
from app.utils.storage import ensure_dir, read_frame, read_panel_csv, write_frame, write_json, write_panel_csv

PANEL_FILE = "panel.csv"
TRUTH_WEIGHTS_FILE = "truth_weights.csv"
TRUTH_GINI_FILE = "truth_gini.csv"
PARAMS_SUMMARY_FILE = "params_summary.csv"
METRICS_FILE = "metrics.csv"
METRIC_REPORT_FILE = "metric_report.json"
GINI_SUMMARY_FILE = "gini_summary.csv"


def _manifest(command: str, seed: int, **fields) -> RunManifest:
    return RunManifest(
        project=settings.PROJECT_NAME,
        version=settings.VERSION,
        command=command,
        seed=seed,
        created_at=datetime.now().isoformat(timespec="seconds"),
        **fields,
    )


def cmd_simulate(scenario: Scenario, seed: int, out: str) -> Path:
    """生成模拟面板，写出 panel.csv、真值 CSV 与清单"""
    start = time.perf_counter()
    out_dir = ensure_dir(out)
    truth = generate_synthetic(RngStream(seed).generator, scenario)
    write_panel_csv(truth.panel, out_dir / PANEL_FILE)

    T, L = truth.pi.shape
    write_frame(
        pd.DataFrame(
            {
                "t": np.repeat(np.arange(1, T + 1), L),
                "l": np.tile(np.arange(1, L + 1), T),
                "pi_true": truth.pi.ravel(),
            }
        ),
        out_dir / TRUTH_WEIGHTS_FILE,
    )
    write_frame(pd.DataFrame({"t": np.arange(1, T + 1), "gini_true": truth.gini}), out_dir / TRUTH_GINI_FILE)

    p = truth.params
    manifest = _manifest(
        "simulate",
        seed,
        wall_time_sec=time.perf_counter() - start,
        config=scenario.model_dump(),
        basis=truth.basis.as_records(),
        arguments=truth.basis.arguments.tolist(),
        T=T,
        extra={
            "true_params": {"mu": p.mu.tolist(), "phi": p.phi.tolist(), "sigma2": p.sigma2.tolist(), "nu2": p.nu2},
            "basis_ginis": truth.basis.ginis.tolist(),
        },
    )
    manifest.save(out_dir / "manifest.json")
    logger.info(f"模拟数据已写入 {out_dir}")
    return out_dir


def resolve_priors(config: RunConfig, L: int) -> PriorHyperparams:
    if config.priors is not None:
        return config.priors
    if config.model is ModelTag.MIXTURE:
        return PriorHyperparams.mixture_defaults(L)
    return PriorHyperparams.experiment_defaults(L - 1)


def cmd_fit(
    config_path: str,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
    out: Optional[str] = None,
) -> Path:
    """
    读取配置并拟合

    命令行给出的 seed、threads、out 覆盖配置文件中的值。
    """
    config = RunConfig.load(config_path)
    data = config.dump()
    if seed is not None:
        data["mcmc"]["seed"] = seed
    if threads is not None:
        data["threads"] = threads
    if out is not None:
        data["output_dir"] = out
    config = RunConfig.from_data(data)
    config.validate_paths()

    panel = read_panel_csv(config.input_path)
    entries = load_basis_preset(config.basis_preset) if config.basis_preset else config.basis
    basis = build_basis_set(entries, panel.arguments)
    warn_nonconvex(basis)
    priors = resolve_priors(config, basis.L)

    limit = config.threads or settings.DEFAULT_THREADS or None
    start = time.perf_counter()
    store = asyncio.run(
        run_chains(
            config.mcmc,
            panel,
            basis,
            priors,
            model=config.model.value,
            threads=limit,
            snapshot_dir=config.output_dir,
        )
    )
    out_dir = Path(config.output_dir)
    write_panel_csv(panel, out_dir / PANEL_FILE)
    manifest = _manifest(
        "fit",
        config.mcmc.seed,
        model=config.model.value,
        wall_time_sec=time.perf_counter() - start,
        config=config.dump(),
        basis=basis.as_records(),
        arguments=basis.arguments.tolist(),
        priors=priors.model_dump(),
        T=panel.T,
        n_draws_per_chain=store.n_draws_per_chain,
        store_states=store.store_states,
        chains=[
            ChainReport(chain=c.chain, n_draws=c.n_draws, phi_acceptance=c.phi_acceptance, wall_time_sec=c.wall_time_sec)
            for c in store.chains
        ],
        extra={"basis_ginis": basis.ginis.tolist()},
    )
    store.save(out_dir, manifest)
    return out_dir


def _chain_ess(values: np.ndarray) -> float:
    """各链 ESS 之和；抽样过少时为 NaN"""
    try:
        return float(sum(ess(chain) for chain in values))
    except DomainError:
        return float("nan")


def _read_truth(truth_dir: str, T: int, L: int) -> Tuple[np.ndarray, np.ndarray]:
    truth_dir = Path(truth_dir)
    weights = read_frame(truth_dir / TRUTH_WEIGHTS_FILE, required=("t", "l", "pi_true"))
    gini = read_frame(truth_dir / TRUTH_GINI_FILE, required=("t", "gini_true"))
    pi_true = weights.pivot(index="t", columns="l", values="pi_true").sort_index().sort_index(axis=1).to_numpy()
    gini_true = gini.sort_values("t")["gini_true"].to_numpy(dtype=float)
    if pi_true.shape != (T, L) or gini_true.size != T:
        raise DataIOError("真值的维度与抽样不一致", truth=str(truth_dir), expected=(T, L), found=pi_true.shape)
    return pi_true, gini_true


def _load_panel(run_dir: Path, panel_path: Optional[str]):
    return read_panel_csv(panel_path or (run_dir / PANEL_FILE))


def cmd_summarize(run_dir: str, truth_dir: Optional[str] = None) -> Path:
    """
    参数汇总（均值、2.5%、97.5% 分位数、ESS、R̂）与后验预测损失；
    给出真值目录时另外输出 π、G_t 与 f_t(x_k) 的 RMSE×100、CP、AL
    """
    run_dir = Path(run_dir)
    store, manifest = DrawStore.load(run_dir)
    by_chain = store.params_by_chain()
    pooled = store.params_array()

    q025, q975 = np.quantile(pooled, [0.025, 0.975], axis=0)
    summary = pd.DataFrame(
        {
            "name": store.param_names,
            "mean": pooled.mean(axis=0),
            "q025": q025,
            "q975": q975,
            "ess": [_chain_ess(by_chain[:, :, j]) for j in range(pooled.shape[1])],
            "rhat": [
                split_rhat(by_chain[:, :, j]) if store.n_chains >= 2 and by_chain.shape[1] >= 4 else float("nan")
                for j in range(pooled.shape[1])
            ],
        }
    )
    write_frame(summary, run_dir / PARAMS_SUMMARY_FILE)

    report = MetricReport(
        model=store.model,
        ess={name: value for name, value in zip(summary["name"], summary["ess"]) if np.isfinite(value)},
    )
    mean, var, n_rep = store.predictive_moments()
    if n_rep > 0:
        panel = _load_panel(run_dir, None)
        loss = predictive_loss_from_moments(panel.y, mean, var)
        report.log_ppv, report.log_ppse = loss.log_ppv, loss.log_ppse
        logger.info(f"log PPV = {loss.log_ppv:.4f}，log PPSE = {loss.log_ppse:.4f}")

    if truth_dir is not None:
        pi_true, gini_true = _read_truth(truth_dir, store.T, store.L)
        weights = store.weights_array()
        basis = build_basis_set(manifest.basis, manifest.arguments)
        rows = [
            MetricRow(quantity="pi", **interval_metrics(pi_true, weights)._asdict()),
            MetricRow(quantity="gini", **interval_metrics(gini_true, store.gini_array())._asdict()),
        ]
        f_true = pi_true @ basis.H.T
        f_draws = weights @ basis.H.T
        for k, x in enumerate(basis.arguments):
            rows.append(
                MetricRow(quantity=f"f(x={x:g})", **interval_metrics(f_true[:, k], f_draws[:, :, k])._asdict())
            )
        report.rows = rows
        write_frame(pd.DataFrame([r.model_dump() for r in rows]), run_dir / METRICS_FILE)

    write_json(report.model_dump(mode="json"), run_dir / METRIC_REPORT_FILE)
    logger.info(f"汇总已写入 {run_dir}")
    return run_dir


def cmd_gini(run_dir: str, panel_path: Optional[str] = None, truth_dir: Optional[str] = None) -> Path:
    """逐期的后验均值、95% 区间与由原始数据得到的多边形上下界"""
    run_dir = Path(run_dir)
    store, _ = DrawStore.load(run_dir)
    draws = store.gini_array()
    q025, q975 = np.quantile(draws, [0.025, 0.975], axis=0)
    panel = _load_panel(run_dir, panel_path)
    if panel.T != store.T:
        raise DataIOError("面板期数与抽样不一致", panel=panel.T, draws=store.T)
    lower, upper = panel_gini_bounds(panel.y, panel.arguments)
    frame = pd.DataFrame(
        {
            "t": np.arange(1, store.T + 1),
            "mean": draws.mean(axis=0),
            "q025": q025,
            "q975": q975,
            "lower_bound": lower,
            "upper_bound": upper,
        }
    )
    if truth_dir is not None:
        gini = read_frame(Path(truth_dir) / TRUTH_GINI_FILE, required=("t", "gini_true"))
        frame = frame.merge(gini[["t", "gini_true"]], on="t", how="left")
    inside = ((frame["lower_bound"] <= frame["mean"]) & (frame["mean"] <= frame["upper_bound"])).mean()
    logger.info(f"后验均值落在多边形上下界之内的比例：{inside:.3f}")
    write_frame(frame, run_dir / GINI_SUMMARY_FILE)
    return run_dir
