"""Scenario configuration, channel realizations, and array helpers.

The downlink scenario: M multi-antenna APs jointly serve U single-antenna
users and illuminate a single point target with Q sensing streams. Channels
are i.i.d. Rayleigh, target angles are uniform on [0, pi/2), and the combined
sensing gain variance of each (transmit AP, receive AP) pair is drawn as the
squared magnitude of a unit-variance complex normal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the offending field."""


@dataclass(frozen=True)
class SystemConfig:
    """All scenario scalars for one simulation setting.

    P is the per-AP power budget (identical across APs), sigma2_c the UE
    receiver noise variance, sigma2_r the radar receiver noise variance and
    beta_s the sensing weight of the joint objective. The stream count
    S = U + Q is derived, never stored.
    """

    M: int = 5
    U: int = 2
    Q: int = 1
    N_t: int = 8
    N_r: int = 8
    P: float = 0.2
    sigma2_c: float = 0.1
    sigma2_r: float = 0.1
    beta_s: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.M < 1:
            raise ConfigError("M must be >= 1")
        if self.U < 1:
            raise ConfigError("U must be >= 1")
        if self.Q not in (0, 1):
            raise ConfigError("Q must be 0 or 1")
        if self.N_t < 1:
            raise ConfigError("N_t must be >= 1")
        if self.N_r < 1:
            raise ConfigError("N_r must be >= 1")
        if not self.P > 0:
            raise ConfigError("P must be > 0")
        if not self.sigma2_c > 0:
            raise ConfigError("sigma2_c must be > 0")
        if not self.sigma2_r > 0:
            raise ConfigError("sigma2_r must be > 0")
        if not self.beta_s >= 0:
            raise ConfigError("beta_s must be >= 0")

    @property
    def S(self) -> int:
        return self.U + self.Q

    @classmethod
    def reference(cls, M=5, U=2, **kwargs) -> "SystemConfig":
        """Reference setting: unit sum power (P = 1/M), 10 dB system SNR."""
        kwargs.setdefault("P", 1.0 / M)
        return cls(M=M, U=U, **kwargs)


@dataclass(frozen=True)
class ChannelSample:
    """One network realization.

    h      : (M, U, N_t) complex communication channels h_mu
    theta  : (M,) target angles seen from each AP, radians in [0, pi/2)
    zeta2  : (M, M) combined sensing gain variances; row = transmit AP,
             column = receive AP
    """

    h: np.ndarray
    theta: np.ndarray
    zeta2: np.ndarray

    def validate(self, config: SystemConfig):
        if self.h.shape != (config.M, config.U, config.N_t):
            raise ConfigError(f"h has shape {self.h.shape}, expected "
                              f"{(config.M, config.U, config.N_t)}")
        if self.theta.shape != (config.M,):
            raise ConfigError(f"theta has shape {self.theta.shape}, expected ({config.M},)")
        if self.zeta2.shape != (config.M, config.M):
            raise ConfigError(f"zeta2 has shape {self.zeta2.shape}, expected "
                              f"{(config.M, config.M)}")
        if np.any(self.zeta2 < 0):
            raise ConfigError("zeta2 entries must be >= 0")
        if np.any(self.theta < 0) or np.any(self.theta >= np.pi / 2):
            raise ConfigError("theta entries must lie in [0, pi/2)")


@dataclass(frozen=True)
class BeamformingSolution:
    """Beam vectors f_ms for every AP m and stream s.

    f : (M, S, N_t) complex; streams 0..U-1 are communication, the rest sensing.
    """

    f: np.ndarray

    def validate(self, config: SystemConfig, rtol: float = 1e-9):
        if self.f.shape != (config.M, config.S, config.N_t):
            raise ConfigError(f"f has shape {self.f.shape}, expected "
                              f"{(config.M, config.S, config.N_t)}")
        powers = np.sum(np.abs(self.f) ** 2, axis=(1, 2))
        if np.any(powers > config.P * (1 + rtol)):
            worst = int(np.argmax(powers))
            raise ConfigError(f"per-AP power {powers[worst]:.6g} at AP {worst} "
                              f"exceeds budget {config.P:.6g}")


def steering_vector(theta: float, n: int) -> np.ndarray:
    """Half-wavelength ULA response: a_k = exp(j*pi*k*sin(theta)), k = 0..n-1."""
    if n < 1:
        raise ConfigError("antenna count must be >= 1")
    if not np.isfinite(theta):
        raise ConfigError("theta must be finite")
    return np.exp(1j * np.pi * np.arange(n) * np.sin(theta))


def stack_complex(x: np.ndarray) -> np.ndarray:
    """[Re(x), Im(x)] along the last axis."""
    x = np.asarray(x)
    return np.concatenate([x.real, x.imag], axis=-1)


def unstack_complex(y: np.ndarray) -> np.ndarray:
    """Inverse of stack_complex along the last axis."""
    y = np.asarray(y)
    n2 = y.shape[-1]
    if n2 % 2 != 0:
        raise ConfigError(f"cannot unstack odd length {n2}")
    n = n2 // 2
    return y[..., :n] + 1j * y[..., n:]


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based per-sample stream: a pure function of (seed, index)."""
    return np.random.Generator(np.random.Philox(
        np.random.SeedSequence(entropy=seed, spawn_key=(index,))))


def sample_channel(config: SystemConfig, rng: np.random.Generator) -> ChannelSample:
    """Draw one realization: Rayleigh h, uniform angles, |CN(0,1)|^2 gains."""
    M, U, N = config.M, config.U, config.N_t
    h = (rng.standard_normal((M, U, N)) + 1j * rng.standard_normal((M, U, N))) / np.sqrt(2)
    theta = rng.uniform(0.0, np.pi / 2, size=M)
    g = (rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))) / np.sqrt(2)
    zeta2 = np.abs(g) ** 2
    return ChannelSample(h=h, theta=theta, zeta2=zeta2)


def sample_channel_at(config: SystemConfig, index: int) -> ChannelSample:
    """Sample i of the stream defined by config.seed, independent of order."""
    return sample_channel(config, sample_rng(config.seed, index))


def per_ap_power(solution: BeamformingSolution, m: int) -> float:
    """Total transmit power of AP m over all streams."""
    M = solution.f.shape[0]
    if not 0 <= m < M:
        raise IndexError(f"AP index {m} out of range for M={M}")
    return float(np.sum(np.abs(solution.f[m]) ** 2))
