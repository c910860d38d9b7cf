"""Configuration, channel sampling and complex/real stacking."""

import numpy as np
import pytest

from cfisac.system import (BeamformingSolution, ChannelSample, ConfigError,
                           SystemConfig, per_ap_power, sample_channel,
                           sample_channel_at, sample_rng, stack_complex,
                           steering_vector, unstack_complex)


def test_reference_config_defaults():
    cfg = SystemConfig.reference(M=5, U=2)
    assert cfg.S == 3
    assert cfg.P == pytest.approx(1.0 / 5)
    assert cfg.sigma2_c == pytest.approx(0.1)
    assert cfg.sigma2_r == pytest.approx(0.1)


@pytest.mark.parametrize("field,value", [
    ("M", 0), ("U", 0), ("Q", 2), ("N_t", 0), ("P", 0.0), ("P", -1.0),
    ("sigma2_c", 0.0), ("sigma2_r", -0.5), ("beta_s", -1.0),
])
def test_config_validation(field, value):
    kwargs = {field: value}
    with pytest.raises(ConfigError) as err:
        SystemConfig(**kwargs)
    assert field in str(err.value)


def test_steering_vector_values():
    # [DERIVED] half-wavelength ULA phases exp(j*pi*k*sin(theta)), theta=0.7
    a = steering_vector(0.7, 5)
    expected = np.exp(1j * np.pi * np.arange(5) * np.sin(0.7))
    assert np.allclose(a, expected, rtol=0, atol=1e-15)
    assert a[0] == 1.0 + 0.0j
    assert np.allclose(np.abs(a), 1.0)


def test_steering_vector_norm():
    for theta in (0.0, 0.3, 1.2):
        a = steering_vector(theta, 8)
        assert np.linalg.norm(a) ** 2 == pytest.approx(8.0)


def test_stack_unstack_roundtrip():
    rng = np.random.default_rng(0)
    z = rng.normal(size=(3, 2, 4)) + 1j * rng.normal(size=(3, 2, 4))
    stacked = stack_complex(z)
    assert stacked.shape == (3, 2, 8)
    back = unstack_complex(stacked)
    assert np.array_equal(back, z)


def test_unstack_rejects_odd_length():
    with pytest.raises(ConfigError):
        unstack_complex(np.zeros((2, 5)))


def test_sample_rng_streams_are_counter_based():
    # sample i must not depend on whether samples 0..i-1 were drawn
    cfg = SystemConfig.reference(M=3, U=2, N_t=4)
    direct = sample_channel_at(cfg, 7)
    fresh = sample_channel(cfg, sample_rng(cfg.seed, 7))
    assert np.array_equal(direct.h, fresh.h)
    assert np.array_equal(direct.theta, fresh.theta)
    assert np.array_equal(direct.zeta2, fresh.zeta2)
    other = sample_channel_at(cfg, 8)
    assert not np.array_equal(direct.h, other.h)


def test_sample_channel_statistics():
    cfg = SystemConfig(M=2, U=2, N_t=8, seed=5)
    hs = np.stack([sample_channel_at(cfg, i).h for i in range(400)])
    # CN(0, 1) entries: unit variance split evenly between re/im
    assert np.var(hs.real) == pytest.approx(0.5, rel=0.05)
    assert np.var(hs.imag) == pytest.approx(0.5, rel=0.05)
    thetas = np.stack([sample_channel_at(cfg, i).theta for i in range(400)])
    assert thetas.min() >= 0.0
    assert thetas.max() < np.pi / 2
    zetas = np.stack([sample_channel_at(cfg, i).zeta2 for i in range(400)])
    assert zetas.min() >= 0.0
    # squared magnitude of CN(0,1) is Exp(1)
    assert zetas.mean() == pytest.approx(1.0, rel=0.1)


def test_channel_sample_validate():
    cfg = SystemConfig.reference(M=3, U=2, N_t=4)
    s = sample_channel_at(cfg, 0)
    s.validate(cfg)
    bad = ChannelSample(h=s.h[:2], theta=s.theta, zeta2=s.zeta2)
    with pytest.raises(ConfigError):
        bad.validate(cfg)


def test_solution_power_validation():
    cfg = SystemConfig.reference(M=2, U=1, N_t=2)
    f = np.zeros((2, 2, 2), dtype=complex)
    f[0, 0, 0] = np.sqrt(cfg.P)  # exactly at the cap
    BeamformingSolution(f=f).validate(cfg)
    f[0, 0, 0] = np.sqrt(cfg.P) * 1.01
    with pytest.raises(ConfigError):
        BeamformingSolution(f=f).validate(cfg)


def test_per_ap_power():
    cfg = SystemConfig.reference(M=2, U=1, N_t=2)
    f = np.zeros((2, 2, 2), dtype=complex)
    f[1, 0] = [0.3, 0.4j]
    sol = BeamformingSolution(f=f)
    assert per_ap_power(sol, 0) == pytest.approx(0.0)
    assert per_ap_power(sol, 1) == pytest.approx(0.25)
    with pytest.raises(IndexError):
        per_ap_power(sol, 2)
