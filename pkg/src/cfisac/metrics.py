"""Communication and sensing performance measures and the joint objective.

All rate-like quantities are in bits (log base 2). The sensing SNR is the
joint SNR over all receiving APs: every stream's projection onto the transmit
steering direction of each AP contributes to the numerator, and every AP
contributes its radar noise to the denominator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .system import (BeamformingSolution, ChannelSample, ConfigError,
                     SystemConfig, steering_vector)


@dataclass(frozen=True)
class MetricsReport:
    """Per-user rates, sensing terms, joint objective and per-AP power usage."""

    rates: np.ndarray           # (U,) bits/s/Hz
    sensing_snr: float          # linear
    sensing_rate_term: float    # log2(1 + sensing_snr)
    objective: float
    per_ap_power: np.ndarray    # (M,) watts


def _check(config: SystemConfig, sample: ChannelSample,
           solution: BeamformingSolution):
    if sample.h.shape != (config.M, config.U, config.N_t):
        raise ConfigError(f"h has shape {sample.h.shape}, expected "
                          f"{(config.M, config.U, config.N_t)}")
    if solution.f.shape != (config.M, config.S, config.N_t):
        raise ConfigError(f"f has shape {solution.f.shape}, expected "
                          f"{(config.M, config.S, config.N_t)}")


def sinr_user(config: SystemConfig, sample: ChannelSample,
              solution: BeamformingSolution, u: int) -> float:
    """SINR of user u: coherent AP combining per stream, then power summation."""
    _check(config, sample, solution)
    if not 0 <= u < config.U:
        raise IndexError(f"user index {u} out of range for U={config.U}")
    # inner[s] = sum_m h_mu^H f_ms
    inner = np.einsum("mn,msn->s", sample.h[:, u].conj(), solution.f)
    powers = np.abs(inner) ** 2
    signal = powers[u]
    interference = np.sum(powers) - signal
    return float(signal / (interference + config.sigma2_c))


def rate_user(config: SystemConfig, sample: ChannelSample,
              solution: BeamformingSolution, u: int) -> float:
    return float(np.log2(1.0 + sinr_user(config, sample, solution, u)))


def sensing_snr(config: SystemConfig, sample: ChannelSample,
                solution: BeamformingSolution) -> float:
    """Joint sensing SNR over all (transmit, receive) AP pairs and streams."""
    _check(config, sample, solution)
    M = config.M
    # proj[m] = sum_s |a(theta_m)^H f_ms|^2
    a = np.stack([steering_vector(t, config.N_t) for t in sample.theta])
    proj = np.sum(np.abs(np.einsum("mn,msn->ms", a.conj(), solution.f)) ** 2, axis=1)
    weights = np.sum(sample.zeta2, axis=1)     # sum over receive APs per transmitter
    num = float(np.dot(weights, proj))
    den = M * config.sigma2_r
    return num / den


def objective(config: SystemConfig, sample: ChannelSample,
              solution: BeamformingSolution) -> float:
    """Sum rate plus beta_s times the log sensing term."""
    total = sum(rate_user(config, sample, solution, u) for u in range(config.U))
    if config.beta_s > 0:
        total += config.beta_s * np.log2(1.0 + sensing_snr(config, sample, solution))
    return float(total)


def evaluate(config: SystemConfig, sample: ChannelSample,
             solution: BeamformingSolution) -> MetricsReport:
    """All metrics of one solution on one realization."""
    rates = np.array([rate_user(config, sample, solution, u)
                      for u in range(config.U)])
    snr = sensing_snr(config, sample, solution)
    log_term = float(np.log2(1.0 + snr))
    obj = float(np.sum(rates) + config.beta_s * log_term)
    powers = np.sum(np.abs(solution.f) ** 2, axis=(1, 2))
    return MetricsReport(rates=rates, sensing_snr=snr,
                         sensing_rate_term=log_term, objective=obj,
                         per_ap_power=powers)


def sum_rate(config: SystemConfig, sample: ChannelSample,
             solution: BeamformingSolution) -> float:
    return float(sum(rate_user(config, sample, solution, u)
                     for u in range(config.U)))
