import json

import numpy as np
import pytest

from specsense.channel import (EPA_DELAYS_NS, ChannelProfile, Fading, apply_channel,
                               epa_profile, load_profile, noise_floor_inject, tap_gains)
from specsense.errors import ConfigError
from specsense.signal import SignalConfig, Waveform, generate_noise

FS = 2.4576e9


def _brute_force(x, offsets, gains):
    # direct truncated convolution with an explicit impulse response
    h = np.zeros(max(offsets) + 1, dtype=complex)
    for d, g in zip(offsets, gains):
        h[d] += g
    y = np.zeros(x.size, dtype=complex)
    for n in range(x.size):
        for k in range(min(n + 1, h.size)):
            y[n] += h[k] * x[n - k]
    return y


def _wave(rng, n=512):
    return Waveform(rng.standard_normal(n) + 1j * rng.standard_normal(n), FS)


def test_epa_profile():
    p = epa_profile()
    assert p.num_taps == 7
    assert abs(p.linear_powers.sum() - 1.0) < 1e-12
    assert p.delays_s[-1] == pytest.approx(410e-9)
    rel = np.asarray(p.powers_db) - p.powers_db[0]
    assert np.allclose(rel, [0, -1, -2, -3, -8, -17.2, -20.8], atol=1e-12)


def test_epa_offsets():
    offsets = epa_profile().sample_offsets(FS)
    assert offsets[1] == 74
    assert list(offsets) == [round(d * 1e-9 * FS) for d in EPA_DELAYS_NS]


def test_identity_channel(rng):
    p = ChannelProfile("id", (0.0,), (0.0,), Fading.STATIC)
    x = _wave(rng)
    out = apply_channel(x, p, num_rx=2)
    for w in out.per_rx:
        assert np.array_equal(w.samples, x.samples)


@pytest.mark.parametrize("fading", list(Fading))
def test_matches_brute_force(rng, fading):
    p = epa_profile(fading, seed=3)
    x = _wave(rng, 1024)
    out = apply_channel(x, p, num_rx=2, snapshot=5)
    g = tap_gains(p, (0, 1), 5)
    for m, w in enumerate(out.per_rx):
        ref = _brute_force(x.samples, p.sample_offsets(FS), g[m])
        assert np.max(np.abs(w.samples - ref)) <= 1e-10
        assert len(w) == len(x) and w.sample_rate_hz == FS


def test_linearity(rng):
    p = epa_profile(seed=1)
    x, y = _wave(rng), _wave(rng)
    a, b = 0.7 - 0.2j, -1.3
    lhs = apply_channel(Waveform(a * x.samples + b * y.samples, FS), p, snapshot=2).as_array()
    rhs = (a * apply_channel(x, p, snapshot=2).as_array()
           + b * apply_channel(y, p, snapshot=2).as_array())
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * np.max(np.abs(lhs))


def test_rayleigh_tap_variance():
    p = epa_profile(seed=11)
    g = np.concatenate([tap_gains(p, (0, 1), s) for s in range(5000)])  # 10^4 draws
    var = np.mean(np.abs(g) ** 2, axis=0)
    assert np.all(np.abs(var / p.linear_powers - 1) < 0.05)
    assert np.all(np.abs(g.mean(axis=0)) < 0.05)


def test_unit_average_gain():
    p = epa_profile(seed=4)
    x = Waveform(np.exp(1j * np.arange(1024) * 0.3), FS)
    powers = [np.mean(np.abs(apply_channel(x, p, num_rx=1, snapshot=s).as_array()[0, 512:]) ** 2)
              for s in range(10_000)]
    assert abs(np.mean(powers) - 1.0) < 0.03


def test_block_fading_deterministic():
    p = epa_profile(seed=2)
    assert np.array_equal(tap_gains(p, (0, 3), 9), tap_gains(p, (0, 3), 9))
    assert np.array_equal(tap_gains(p, (3,), 9)[0], tap_gains(p, (0, 3), 9)[1])
    assert not np.array_equal(tap_gains(p, (0,), 9), tap_gains(p, (0,), 10))


def test_noise_floor_inject():
    x = Waveform(np.zeros(1_000_000), FS)
    out = apply_channel(x, epa_profile(), num_rx=2)
    assert noise_floor_inject(out, float("-inf"), 0) is out
    noisy = noise_floor_inject(out, 3.0, seed=8)
    a, b = noisy.as_array()
    assert not np.array_equal(a, b)
    assert abs(np.mean(np.abs(a) ** 2) / 10 ** 0.3 - 1) < 0.01
    again = noise_floor_inject(out, 3.0, seed=8).as_array()
    assert np.array_equal(again[0], a)


def test_noise_floor_matches_generate_noise():
    cfg = SignalConfig(num_samples=64, seed=5)
    out = apply_channel(Waveform(np.zeros(64), cfg.sample_rate_hz), epa_profile(), num_rx=1)
    noisy = noise_floor_inject(out, 0.0, seed=5, stream_ids=[(0,)])
    assert np.array_equal(noisy.per_rx[0].samples, generate_noise(cfg, (0,)).samples)


def test_profile_json_roundtrip(tmp_path):
    p = epa_profile(Fading.STATIC, seed=6)
    path = tmp_path / "p.json"
    path.write_text(json.dumps(p.to_dict()))
    q = load_profile(path)
    assert q.fading is Fading.STATIC and q.seed == 6
    assert np.allclose(q.delays_s, p.delays_s) and np.allclose(q.powers_db, p.powers_db)


@pytest.mark.parametrize("delays,powers", [
    ((), ()),
    ((1e-9,), (0.0,)),
    ((0.0, 2e-9, 1e-9), (0, 0, 0)),
    ((0.0, 1e-9), (0.0,)),
])
def test_profile_validation(delays, powers):
    with pytest.raises(ConfigError):
        ChannelProfile("bad", delays, powers)


def test_num_rx_validation(rng):
    with pytest.raises(ConfigError):
        apply_channel(_wave(rng), epa_profile(), num_rx=0)
