"""Binary dataset format for channel realizations.

Little-endian layout:

    "CFIS" | u32 version=1 | u32 M | u32 U | u32 Q | u32 N_t | u64 count
    then per sample:
        h      M*U*N_t complex entries, each (f32 re, f32 im), m-major
        theta  M * f32
        zeta2  M*M * f32, row-major, transmit AP as the row

Samples are stored at f32 precision; all metric computation happens in f64
after loading.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .system import ChannelSample, SystemConfig

MAGIC = b"CFIS"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIIQ")


class DatasetFormatError(ValueError):
    """Malformed header or dimension mismatch; message names the field."""


class DatasetCorruptionError(ValueError):
    """File shorter than its header promises."""


@dataclass
class Dataset:
    """A batch of realizations kept as packed arrays.

    h     : (n, M, U, N_t) complex64
    theta : (n, M) float32
    zeta2 : (n, M, M) float32
    """

    M: int
    U: int
    Q: int
    N_t: int
    h: np.ndarray
    theta: np.ndarray
    zeta2: np.ndarray

    def __len__(self) -> int:
        return self.h.shape[0]

    def sample(self, i: int) -> ChannelSample:
        """Sample i as a float64 ChannelSample."""
        return ChannelSample(h=self.h[i].astype(np.complex128),
                             theta=self.theta[i].astype(np.float64),
                             zeta2=self.zeta2[i].astype(np.float64))

    def samples(self) -> Iterable[ChannelSample]:
        for i in range(len(self)):
            yield self.sample(i)

    def check_config(self, config: SystemConfig):
        for name in ("M", "U", "Q", "N_t"):
            if getattr(self, name) != getattr(config, name):
                raise DatasetFormatError(
                    f"dataset {name}={getattr(self, name)} does not match "
                    f"config {name}={getattr(config, name)}")

    @classmethod
    def from_samples(cls, config: SystemConfig,
                     samples: Sequence[ChannelSample]) -> "Dataset":
        n = len(samples)
        M, U, N = config.M, config.U, config.N_t
        h = np.zeros((n, M, U, N), dtype=np.complex64)
        theta = np.zeros((n, M), dtype=np.float32)
        zeta2 = np.zeros((n, M, M), dtype=np.float32)
        for i, s in enumerate(samples):
            h[i] = s.h.astype(np.complex64)
            theta[i] = s.theta.astype(np.float32)
            zeta2[i] = s.zeta2.astype(np.float32)
        return cls(M=M, U=U, Q=config.Q, N_t=N, h=h, theta=theta, zeta2=zeta2)


def generate_dataset(config: SystemConfig, count: int, seed: int) -> Dataset:
    """count realizations from per-sample counter-based streams."""
    from .system import sample_channel, sample_rng

    samples = [sample_channel(config, sample_rng(seed, i)) for i in range(count)]
    return Dataset.from_samples(config, samples)


def write_dataset(path, config: SystemConfig, dataset) -> None:
    """Write samples (a Dataset or a sequence of ChannelSample) to path."""
    if not isinstance(dataset, Dataset):
        dataset = Dataset.from_samples(config, list(dataset))
    dataset.check_config(config)
    n = len(dataset)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, config.M, config.U,
                              config.Q, config.N_t, n))
        for i in range(n):
            hi = np.ascontiguousarray(dataset.h[i], dtype=np.complex64)
            fh.write(hi.view(np.float32).astype("<f4").tobytes())
            fh.write(dataset.theta[i].astype("<f4").tobytes())
            fh.write(dataset.zeta2[i].astype("<f4").tobytes())


def read_dataset(path) -> Dataset:
    """Read a dataset file; raises on bad headers or truncation."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise DatasetCorruptionError(f"file has {len(raw)} bytes, header needs "
                                     f"{_HEADER.size}")
    magic, version, M, U, Q, N_t, count = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise DatasetFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise DatasetFormatError(f"unsupported version {version}")
    if M < 1 or U < 1 or Q not in (0, 1) or N_t < 1:
        raise DatasetFormatError(f"invalid dimensions M={M} U={U} Q={Q} N_t={N_t}")
    per_sample = 4 * (2 * M * U * N_t + M + M * M)
    expected = _HEADER.size + count * per_sample
    if len(raw) < expected:
        raise DatasetCorruptionError(
            f"file has {len(raw)} bytes, expected {expected} for {count} samples")

    h = np.zeros((count, M, U, N_t), dtype=np.complex64)
    theta = np.zeros((count, M), dtype=np.float32)
    zeta2 = np.zeros((count, M, M), dtype=np.float32)
    off = _HEADER.size
    for i in range(count):
        nh = 2 * M * U * N_t
        flat = np.frombuffer(raw, dtype="<f4", count=nh, offset=off)
        h[i] = flat.view("<c8").reshape(M, U, N_t)
        off += 4 * nh
        theta[i] = np.frombuffer(raw, dtype="<f4", count=M, offset=off)
        off += 4 * M
        zeta2[i] = np.frombuffer(raw, dtype="<f4", count=M * M,
                                 offset=off).reshape(M, M)
        off += 4 * M * M
    return Dataset(M=M, U=U, Q=Q, N_t=N_t, h=h, theta=theta, zeta2=zeta2)
