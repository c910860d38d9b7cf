"""Experiment reports: baseline comparison, trade-off sweep, AP scaling.

Every report is a pure function of (checkpoints, datasets, config): rerunning
produces identical CSV bytes. The CSV header is fixed:

    method,beta_s,M,U,mean_sum_rate,mean_sensing_snr,mean_sensing_log,mean_objective,n_samples
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import gnn, metrics, training
from .baselines import WmmseOptions, cb_comm, cb_sense, wmmse
from .data import Dataset, generate_dataset
from .system import ConfigError, SystemConfig

CSV_HEADER = ("method", "beta_s", "M", "U", "mean_sum_rate", "mean_sensing_snr",
              "mean_sensing_log", "mean_objective", "n_samples")


@dataclass
class ExperimentRow:
    method: str
    beta_s: float
    M: int
    U: int
    mean_sum_rate: float
    mean_per_user_rate: float
    mean_sensing_snr: float
    mean_sensing_log: float
    mean_objective: float
    n_samples: int


@dataclass
class ExperimentReport:
    rows: List[ExperimentRow] = field(default_factory=list)
    metadata: Dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for r in self.rows:
                writer.writerow([r.method, _fmt(r.beta_s), r.M, r.U,
                                 _fmt(r.mean_sum_rate), _fmt(r.mean_sensing_snr),
                                 _fmt(r.mean_sensing_log), _fmt(r.mean_objective),
                                 r.n_samples])

    def write_sidecar(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.metadata, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _fmt(x: float) -> str:
    return f"{float(x):.10g}"


def checkpoint_hash(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _mean_row(method: str, config: SystemConfig, dataset: Dataset,
              solutions) -> ExperimentRow:
    """Aggregate per-sample metric reports into one row."""
    n = len(dataset)
    sums = np.zeros(4)
    for sample, solution in zip(dataset.samples(), solutions):
        rep = metrics.evaluate(config, sample, solution)
        sums += (float(np.sum(rep.rates)), rep.sensing_snr,
                 rep.sensing_rate_term, rep.objective)
    means = sums / n
    return ExperimentRow(method=method, beta_s=config.beta_s, M=config.M,
                         U=config.U, mean_sum_rate=means[0],
                         mean_per_user_rate=means[0] / config.U,
                         mean_sensing_snr=means[1], mean_sensing_log=means[2],
                         mean_objective=means[3], n_samples=n)


def _gnn_row(method: str, params: gnn.GnnParameters, config: SystemConfig,
             dataset: Dataset) -> ExperimentRow:
    stats = training.evaluate_params(params, config, dataset)
    return ExperimentRow(method=method, beta_s=config.beta_s, M=config.M,
                         U=config.U, mean_sum_rate=stats["mean_sum_rate"],
                         mean_per_user_rate=stats["mean_sum_rate"] / config.U,
                         mean_sensing_snr=stats["mean_sensing_snr"],
                         mean_sensing_log=stats["mean_sensing_log"],
                         mean_objective=stats["mean_objective"],
                         n_samples=len(dataset))


def baseline_row(method: str, config: SystemConfig, dataset: Dataset,
                 wmmse_options: Optional[WmmseOptions] = None) -> ExperimentRow:
    if method == "wmmse":
        sols = (wmmse(config, s, wmmse_options)[0] for s in dataset.samples())
    elif method == "cb-comm":
        sols = (cb_comm(config, s) for s in dataset.samples())
    elif method == "cb-sense":
        sols = (cb_sense(config, s) for s in dataset.samples())
    else:
        raise ConfigError(f"unknown baseline method {method!r}")
    return _mean_row(method, config, dataset, sols)


def compare_baselines(config: SystemConfig, dataset: Dataset,
                      wmmse_options: Optional[WmmseOptions] = None
                      ) -> ExperimentReport:
    """WMMSE, CB-comm and CB-sense side by side on one test set."""
    rows = [baseline_row(m, config, dataset, wmmse_options)
            for m in ("wmmse", "cb-comm", "cb-sense")]
    meta = {"experiment": "compare_baselines", "config": config_dict(config),
            "n_samples": len(dataset)}
    return ExperimentReport(rows=rows, metadata=meta)


def sweep_beta(config: SystemConfig, beta_list: Sequence[float],
               tcfg: training.TrainConfig, train_ds: Dataset, test_ds: Dataset,
               workdir, hyper: Optional[gnn.GnnHyperparams] = None,
               log=None) -> ExperimentReport:
    """One GNN row per sensing weight plus the three baseline rows.

    Checkpoints land in workdir as gnn_beta<value>.ckpt and are reused when
    present, so a sweep can resume without retraining.
    """
    os.makedirs(workdir, exist_ok=True)
    rows = []
    ckpt_ids = {}
    for beta in beta_list:
        cfg_b = replace_beta(config, beta)
        path = os.path.join(workdir, f"gnn_beta{_fmt(beta)}.ckpt")
        if not os.path.exists(path):
            params, _ = training.train(cfg_b, tcfg, train_ds, test_ds,
                                       hyper=hyper,
                                       out_dir=os.path.join(
                                           workdir, f"train_beta{_fmt(beta)}"),
                                       log=log)
            gnn.save_checkpoint(path, params, extra={"beta_s": beta})
        params, _ = gnn.load_checkpoint(path)
        rows.append(_gnn_row("gnn", params, cfg_b, test_ds))
        ckpt_ids[_fmt(beta)] = checkpoint_hash(path)
    for m in ("wmmse", "cb-comm", "cb-sense"):
        rows.append(baseline_row(m, config, test_ds))
    meta = {"experiment": "sweep_beta", "config": config_dict(config),
            "beta_list": [float(b) for b in beta_list],
            "checkpoints": ckpt_ids, "n_samples": len(test_ds)}
    return ExperimentReport(rows=rows, metadata=meta)


def scale_aps(config: SystemConfig, ckpt_path, m_list: Sequence[int],
              test_count: int = 500, seed: int = 9000,
              with_wmmse: bool = True) -> ExperimentReport:
    """Evaluate one checkpoint at several AP counts without retraining.

    Per tested M the per-AP budget is rescaled to keep unit sum power
    (P = 1/M) and a fresh test set is generated from a deterministic seed.
    """
    params, extra = gnn.load_checkpoint(ckpt_path)
    if params.n_t != config.N_t:
        raise ConfigError(f"checkpoint N_t={params.n_t} does not match "
                          f"config N_t={config.N_t}")
    rows = []
    for m_aps in m_list:
        cfg_m = SystemConfig(M=m_aps, U=config.U, Q=config.Q, N_t=config.N_t,
                             N_r=config.N_r, P=1.0 / m_aps,
                             sigma2_c=config.sigma2_c, sigma2_r=config.sigma2_r,
                             beta_s=config.beta_s, seed=config.seed)
        ds = generate_dataset(cfg_m, test_count, seed=seed + m_aps)
        rows.append(_gnn_row("gnn", params, cfg_m, ds))
        if with_wmmse:
            rows.append(baseline_row("wmmse", cfg_m, ds))
    meta = {"experiment": "scale_aps", "config": config_dict(config),
            "m_list": [int(m) for m in m_list], "test_count": test_count,
            "seed": seed, "checkpoint": checkpoint_hash(ckpt_path),
            "checkpoint_extra": extra}
    return ExperimentReport(rows=rows, metadata=meta)


def replace_beta(config: SystemConfig, beta: float) -> SystemConfig:
    return SystemConfig(M=config.M, U=config.U, Q=config.Q, N_t=config.N_t,
                        N_r=config.N_r, P=config.P, sigma2_c=config.sigma2_c,
                        sigma2_r=config.sigma2_r, beta_s=beta, seed=config.seed)


def config_dict(config: SystemConfig) -> dict:
    return {"M": config.M, "U": config.U, "Q": config.Q, "N_t": config.N_t,
            "N_r": config.N_r, "P": config.P, "sigma2_c": config.sigma2_c,
            "sigma2_r": config.sigma2_r, "beta_s": config.beta_s,
            "seed": config.seed}
