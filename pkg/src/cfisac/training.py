"""Unsupervised training of the GNN beamformer.

The loss is the negated batch-mean joint objective (sum rate plus weighted
log sensing term), evaluated on the power-normalized network outputs, so the
whole pipeline from channel features to objective sits on one tape. Adam with
a single-cycle cosine-annealed learning rate drives the updates.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import autodiff as ad
from . import gnn
from . import metrics as metrics_mod
from .data import Dataset
from .system import (BeamformingSolution, ChannelSample, ConfigError,
                     SystemConfig)

LN2 = math.log(2.0)


class TrainingDivergence(RuntimeError):
    def __init__(self, step: int):
        super().__init__(f"loss became non-finite at step {step}")
        self.step = step


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 4e-4
    batch_size: int = 256
    epochs: int = 60
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    train_samples: int = 20000
    test_samples: int = 500
    seed: int = 0

    def __post_init__(self):
        for name in ("learning_rate", "batch_size", "epochs", "beta1", "beta2",
                     "adam_eps", "train_samples", "test_samples"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if self.batch_size > self.train_samples:
            raise ConfigError("batch_size must be <= train_samples")

    @classmethod
    def desk_scale(cls, **kw) -> "TrainConfig":
        kw.setdefault("train_samples", 20000)
        kw.setdefault("test_samples", 500)
        kw.setdefault("epochs", 30)
        return cls(**kw)

    @classmethod
    def full_scale(cls, **kw) -> "TrainConfig":
        kw.setdefault("train_samples", 100000)
        kw.setdefault("test_samples", 2000)
        kw.setdefault("epochs", 60)
        return cls(**kw)


# ---------------------------------------------------------------------------
# differentiable objective
# ---------------------------------------------------------------------------

def objective_graph(tape: ad.Tape, config: SystemConfig,
                    f_cu: ad.Tensor, f_cs: ad.Tensor,
                    h: np.ndarray, theta: np.ndarray,
                    zeta2: np.ndarray) -> ad.Tensor:
    """Per-sample joint objective (B,) from normalized stacked-real beams."""
    B, M, U, _ = f_cu.shape
    N = h.shape[-1]
    S = U + 1
    dtype = f_cu.data.dtype
    c = lambda x: tape.constant(np.asarray(x, dtype=dtype))

    fr = ad.concat([ad.slice_(f_cu, (..., slice(0, N))),
                    ad.reshape(ad.slice_(f_cs, (..., slice(0, N))), (B, M, 1, N))],
                   axis=2)                                        # (B, M, S, N)
    fi = ad.concat([ad.slice_(f_cu, (..., slice(N, 2 * N))),
                    ad.reshape(ad.slice_(f_cs, (..., slice(N, 2 * N))), (B, M, 1, N))],
                   axis=2)
    fr5 = ad.reshape(fr, (B, M, 1, S, N))
    fi5 = ad.reshape(fi, (B, M, 1, S, N))

    # h_mu^H f_ms summed coherently over APs
    hr = c(h.real.reshape(B, M, U, 1, N))
    hi = c(h.imag.reshape(B, M, U, 1, N))
    re = ad.sum_reduce(ad.add(ad.elementwise_mul(hr, fr5),
                              ad.elementwise_mul(hi, fi5)), axis=(1, 4))  # (B,U,S)
    im = ad.sum_reduce(ad.subtract(ad.elementwise_mul(hr, fi5),
                                   ad.elementwise_mul(hi, fr5)), axis=(1, 4))
    power = ad.add(ad.square(re), ad.square(im))                  # (B, U, S)

    diag = np.zeros((U, S), dtype=dtype)
    diag[np.arange(U), np.arange(U)] = 1.0
    signal = ad.sum_reduce(ad.elementwise_mul(power, c(diag)), axis=2)   # (B, U)
    total = ad.sum_reduce(power, axis=2)
    interference = ad.subtract(total, signal)
    sinr = ad.divide(signal, ad.add(interference,
                                    c(np.full((B, U), config.sigma2_c))))
    rates = ad.scalar_mul(ad.natural_log(ad.add(sinr, c(np.ones((B, U))))),
                          1.0 / LN2)
    sum_rate = ad.sum_reduce(rates, axis=1)                       # (B,)

    # sensing SNR over all streams and AP pairs
    phase = np.pi * np.arange(N) * np.sin(theta)[..., None]
    ar = c(np.cos(phase).reshape(B, M, 1, N))
    ai = c(np.sin(phase).reshape(B, M, 1, N))
    s_re = ad.sum_reduce(ad.add(ad.elementwise_mul(ar, fr),
                                ad.elementwise_mul(ai, fi)), axis=3)   # (B, M, S)
    s_im = ad.sum_reduce(ad.subtract(ad.elementwise_mul(ar, fi),
                                     ad.elementwise_mul(ai, fr)), axis=3)
    proj = ad.sum_reduce(ad.add(ad.square(s_re), ad.square(s_im)), axis=2)  # (B,M)
    weights = c(zeta2.sum(axis=2))                               # sum over receivers
    num = ad.sum_reduce(ad.elementwise_mul(weights, proj), axis=1)
    snr = ad.scalar_mul(num, 1.0 / (M * config.sigma2_r))
    sensing = ad.scalar_mul(ad.natural_log(ad.add(snr, c(np.ones(B)))), 1.0 / LN2)

    return ad.add(sum_rate, ad.scalar_mul(sensing, config.beta_s))


def build_loss(params: gnn.GnnParameters, config: SystemConfig,
               h: np.ndarray, theta: np.ndarray, zeta2: np.ndarray,
               dtype=np.float32) -> Tuple[ad.Tape, ad.Tensor, np.ndarray]:
    """Tape and scalar loss for one batch; also returns per-sample objectives."""
    B = h.shape[0]
    tape = ad.Tape()
    p = gnn.register_parameters(tape, params if
                                params.values["out.ap_ue.b"].dtype == dtype
                                else params.astype(dtype))
    feats = gnn.batch_edge_features(h, theta, dtype=dtype)
    raw_cu, raw_cs = gnn.forward_graph(tape, p, params.hyper,
                                       tape.constant(feats["ap_ue"]),
                                       tape.constant(feats["ap_st"]))
    f_cu, f_cs = gnn.normalize_graph(tape, raw_cu, raw_cs, config.P)
    obj = objective_graph(tape, config, f_cu, f_cs, h, theta, zeta2)
    loss = ad.scalar_mul(ad.sum_reduce(obj), -1.0 / B)
    return tape, loss, obj.data.copy()


def loss(params: gnn.GnnParameters, batch: Sequence[ChannelSample],
         config: SystemConfig, dtype=np.float32) -> float:
    """Negated mean objective of a batch of realizations."""
    if len(batch) == 0:
        raise ConfigError("batch must be nonempty")
    h = np.stack([s.h for s in batch])
    theta = np.stack([s.theta for s in batch])
    zeta2 = np.stack([s.zeta2 for s in batch])
    tape, l, _ = build_loss(params, config, h, theta, zeta2, dtype=dtype)
    value = float(l.data)
    tape.clear()
    return value


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

@dataclass
class TrainState:
    params: gnn.GnnParameters
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    def __post_init__(self):
        if not self.m:
            self.m = {k: np.zeros_like(a) for k, a in self.params.values.items()}
            self.v = {k: np.zeros_like(a) for k, a in self.params.values.items()}


def cosine_lr(t: int, total: int, lr_max: float) -> float:
    """Single-cycle cosine annealing from lr_max to zero."""
    if t < 0:
        raise ConfigError("step must be >= 0")
    if t >= total:
        return 0.0
    return 0.5 * lr_max * (1.0 + math.cos(math.pi * t / total))


def adam_step(state: TrainState, grads: Dict[str, np.ndarray],
              lr_t: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> TrainState:
    """Standard bias-corrected Adam update; mutates and returns the state."""
    state.step += 1
    t = state.step
    for name, value in state.params.values.items():
        g = grads[name].astype(value.dtype, copy=False)
        if g.shape != value.shape:
            raise ConfigError(f"gradient for {name} has shape {g.shape}, "
                              f"expected {value.shape}")
        state.m[name] = beta1 * state.m[name] + (1 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1 - beta2) * g * g
        m_hat = state.m[name] / (1 - beta1 ** t)
        v_hat = state.v[name] / (1 - beta2 ** t)
        value -= (lr_t * m_hat / (np.sqrt(v_hat) + eps)).astype(value.dtype)
    return state


# ---------------------------------------------------------------------------
# evaluation and the training loop
# ---------------------------------------------------------------------------

def evaluate_params(params: gnn.GnnParameters, config: SystemConfig,
                    dataset: Dataset, batch_size: int = 256) -> Dict[str, float]:
    """Mean test metrics of the network on a dataset (f64 metric evaluation)."""
    n = len(dataset)
    sums = {"sum_rate": 0.0, "sensing_snr": 0.0, "sensing_log": 0.0,
            "objective": 0.0}
    for lo in range(0, n, batch_size):
        hi = min(lo + batch_size, n)
        h = dataset.h[lo:hi].astype(np.complex128)
        theta = dataset.theta[lo:hi].astype(np.float64)
        beams = gnn.beams_for_batch(params, config, h, theta)
        for i in range(hi - lo):
            report = metrics_mod.evaluate(config, dataset.sample(lo + i),
                                          BeamformingSolution(f=beams[i]))
            sums["sum_rate"] += float(np.sum(report.rates))
            sums["sensing_snr"] += report.sensing_snr
            sums["sensing_log"] += report.sensing_rate_term
            sums["objective"] += report.objective
    return {f"mean_{k}": v / n for k, v in sums.items()}


def _epoch_permutation(seed: int, epoch: int, n: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence(entropy=seed, spawn_key=(0x5A, epoch))))
    return rng.permutation(n)


HISTORY_FIELDS = ("step", "lr", "train_loss", "test_objective",
                  "test_sum_rate", "test_sensing_snr")


def write_history(path, history: List[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_FIELDS)
        for row in history:
            writer.writerow([_fmt(row.get(k, "")) for k in HISTORY_FIELDS])


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def train(config: SystemConfig, tcfg: TrainConfig,
          train_ds: Dataset, test_ds: Dataset,
          hyper: Optional[gnn.GnnHyperparams] = None,
          out_dir: Optional[str] = None,
          log=None) -> Tuple[gnn.GnnParameters, List[dict]]:
    """Full training run; returns the best-by-test-objective parameters.

    Deterministic given (config, tcfg, datasets): initialization and epoch
    shuffles derive from tcfg.seed alone.
    """
    train_ds.check_config(config)
    test_ds.check_config(config)
    hyper = hyper or gnn.GnnHyperparams()

    init_rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence(entropy=tcfg.seed, spawn_key=(0x1217,))))
    state = TrainState(params=gnn.init_parameters(hyper, config.N_t, init_rng))

    n = len(train_ds)
    steps_per_epoch = math.ceil(n / tcfg.batch_size)
    total_steps = steps_per_epoch * tcfg.epochs

    history: List[dict] = []
    best_obj = -np.inf
    best_params = state.params.astype(np.float32)

    for epoch in range(tcfg.epochs):
        order = _epoch_permutation(tcfg.seed, epoch, n)
        for b in range(steps_per_epoch):
            idx = order[b * tcfg.batch_size:(b + 1) * tcfg.batch_size]
            lr_t = cosine_lr(state.step, total_steps, tcfg.learning_rate)
            tape, l, _ = build_loss(state.params, config,
                                    train_ds.h[idx].astype(np.complex64),
                                    train_ds.theta[idx],
                                    train_ds.zeta2[idx])
            lval = float(l.data)
            if not np.isfinite(lval):
                raise TrainingDivergence(state.step)
            grads = ad.backward(tape, l)
            tape.clear()
            adam_step(state, grads, lr_t, tcfg.beta1, tcfg.beta2, tcfg.adam_eps)
            history.append({"step": state.step, "lr": lr_t, "train_loss": lval})

        stats = evaluate_params(state.params, config, test_ds,
                                batch_size=tcfg.batch_size)
        history[-1].update({"test_objective": stats["mean_objective"],
                            "test_sum_rate": stats["mean_sum_rate"],
                            "test_sensing_snr": stats["mean_sensing_snr"]})
        if log is not None:
            log(f"epoch {epoch + 1}/{tcfg.epochs} "
                f"loss {history[-1]['train_loss']:.4f} "
                f"test objective {stats['mean_objective']:.4f}")
        if stats["mean_objective"] > best_obj:
            best_obj = stats["mean_objective"]
            best_params = state.params.astype(np.float32)

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_history(os.path.join(out_dir, "history.csv"), history)
        gnn.save_checkpoint(os.path.join(out_dir, "best.ckpt"), best_params,
                            extra={"beta_s": config.beta_s,
                                   "test_objective": best_obj})
        gnn.save_checkpoint(os.path.join(out_dir, "last.ckpt"), state.params,
                            extra={"beta_s": config.beta_s})
    return best_params, history
