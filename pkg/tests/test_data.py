"""Dataset container and the binary file format."""

import struct

import numpy as np
import pytest

from cfisac.data import (DatasetCorruptionError, DatasetFormatError,
                         generate_dataset, read_dataset, write_dataset)
from cfisac.system import ConfigError, SystemConfig, sample_channel_at


@pytest.fixture
def cfg():
    return SystemConfig.reference(M=3, U=2, N_t=4, seed=11)


def test_generate_matches_counter_streams(cfg):
    ds = generate_dataset(cfg, 5, seed=cfg.seed)
    for i in range(5):
        ref = sample_channel_at(cfg, i)
        got = ds.sample(i)
        assert np.allclose(got.h, ref.h, rtol=0, atol=1e-6)  # f32 storage
        assert np.allclose(got.theta, ref.theta, atol=1e-6)
        assert np.allclose(got.zeta2, ref.zeta2, atol=1e-6)


def test_roundtrip_bit_exact(cfg, tmp_path):
    ds = generate_dataset(cfg, 16, seed=3)
    path = tmp_path / "a.bin"
    write_dataset(path, cfg, ds)
    first = path.read_bytes()
    back = read_dataset(path)
    assert np.array_equal(back.h, ds.h)
    assert np.array_equal(back.theta, ds.theta)
    assert np.array_equal(back.zeta2, ds.zeta2)
    # re-serialization is byte identical
    write_dataset(tmp_path / "b.bin", cfg, back)
    assert (tmp_path / "b.bin").read_bytes() == first


def test_bad_magic(cfg, tmp_path):
    ds = generate_dataset(cfg, 2, seed=0)
    path = tmp_path / "x.bin"
    write_dataset(path, cfg, ds)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"NOPE"
    path.write_bytes(bytes(raw))
    with pytest.raises(DatasetFormatError):
        read_dataset(path)


def test_bad_version(cfg, tmp_path):
    ds = generate_dataset(cfg, 2, seed=0)
    path = tmp_path / "x.bin"
    write_dataset(path, cfg, ds)
    raw = bytearray(path.read_bytes())
    struct.pack_into("<I", raw, 4, 999)
    path.write_bytes(bytes(raw))
    with pytest.raises(DatasetFormatError):
        read_dataset(path)


def test_truncated_payload(cfg, tmp_path):
    ds = generate_dataset(cfg, 4, seed=0)
    path = tmp_path / "x.bin"
    write_dataset(path, cfg, ds)
    raw = path.read_bytes()
    path.write_bytes(raw[:len(raw) - 7])
    with pytest.raises(DatasetCorruptionError):
        read_dataset(path)


def test_check_config_mismatch(cfg):
    ds = generate_dataset(cfg, 2, seed=0)
    other = SystemConfig.reference(M=4, U=2, N_t=4)
    with pytest.raises(DatasetFormatError):
        ds.check_config(other)


def test_sample_out_of_range(cfg):
    ds = generate_dataset(cfg, 2, seed=0)
    assert len(ds) == 2
    with pytest.raises(IndexError):
        ds.sample(2)
