"""Primary-user waveform and receiver noise generation.

Powers are given in dBm but interpreted on a 1.0-normalized scale:
0 dBm corresponds to a mean sample power ``E|x|^2 = 1``. Only the ratio of
PU power to noise power carries meaning downstream; absolute RF calibration
is not modeled. All processing is complex baseband.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .rng import PHASE_NOISE, complex_normal, stream

MIN_SAMPLES = 16


class Label(str, enum.Enum):
    PU_TONE = "PuTone"
    NOISE_ONLY = "NoiseOnly"
    COMPOSITE = "Composite"


@dataclass(frozen=True, eq=False)
class Waveform:
    """Complex baseband samples plus their sample rate."""

    samples: np.ndarray
    sample_rate_hz: float
    label: Label = Label.COMPOSITE

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.complex128)
        if x.ndim != 1 or x.size == 0:
            raise ConfigError("waveform samples must be a non-empty 1-D sequence")
        if not self.sample_rate_hz > 0:
            raise ConfigError("sample_rate_hz must be positive")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "label", Label(self.label))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def power(self) -> float:
        """Mean sample power ``mean(|x|^2)``."""
        return float(np.mean(np.abs(self.samples) ** 2))


def dbm_to_power(dbm: float) -> float:
    """Linear power on the normalized scale; ``-inf`` maps to 0."""
    if dbm == -math.inf:
        return 0.0
    return 10.0 ** (dbm / 10.0)


@dataclass(frozen=True)
class SignalConfig:
    tone_freq_hz: float = 1.0e5
    sample_rate_hz: float = 2.4576e9
    num_samples: int = 4096
    pu_power_dbm: float = 0.0
    noise_power_dbm: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise ConfigError("sample_rate_hz must be positive")
        if not abs(self.tone_freq_hz) < self.sample_rate_hz / 2:
            raise ConfigError(
                f"tone {self.tone_freq_hz} Hz violates Nyquist at {self.sample_rate_hz} Hz")
        if int(self.num_samples) != self.num_samples or self.num_samples < MIN_SAMPLES:
            raise ConfigError(f"num_samples must be an integer >= {MIN_SAMPLES}")
        if math.isnan(self.pu_power_dbm) or math.isnan(self.noise_power_dbm):
            raise ConfigError("powers must not be NaN")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @property
    def snr_db(self) -> float:
        return self.pu_power_dbm - self.noise_power_dbm

    def to_dict(self) -> dict:
        return {
            "tone_freq_hz": self.tone_freq_hz,
            "sample_rate_hz": self.sample_rate_hz,
            "num_samples": self.num_samples,
            "pu_power_dbm": _finite_or_none(self.pu_power_dbm),
            "noise_power_dbm": _finite_or_none(self.noise_power_dbm),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SignalConfig":
        d = dict(d)
        for key in ("pu_power_dbm", "noise_power_dbm"):
            if key in d and d[key] is None:
                d[key] = -math.inf
        return cls(**d)


def _finite_or_none(v: float):
    return None if v == -math.inf else v


def generate_pu_tone(cfg: SignalConfig) -> Waveform:
    """Constant-envelope CW tone ``A exp(j 2 pi f k / Fs)``, ``A^2`` = PU power."""
    amp = math.sqrt(dbm_to_power(cfg.pu_power_dbm))
    k = np.arange(cfg.num_samples, dtype=np.float64)
    phase = 2.0 * np.pi * (cfg.tone_freq_hz / cfg.sample_rate_hz) * k
    return Waveform(amp * np.exp(1j * phase), cfg.sample_rate_hz, Label.PU_TONE)


def generate_noise(cfg: SignalConfig, stream_id: tuple[int, ...] = (0,)) -> Waveform:
    """I.i.d. circular complex Gaussian noise at ``cfg.noise_power_dbm``.

    Deterministic in ``(cfg.seed, stream_id)``; variance is split equally
    between I and Q.
    """
    power = dbm_to_power(cfg.noise_power_dbm)
    if power == 0.0:
        x = np.zeros(cfg.num_samples, dtype=np.complex128)
    else:
        rng = stream(cfg.seed, PHASE_NOISE, *stream_id)
        x = complex_normal(rng, cfg.num_samples, power)
    return Waveform(x, cfg.sample_rate_hz, Label.NOISE_ONLY)


def mix(signal: Waveform, noise: Waveform) -> Waveform:
    if len(signal) != len(noise):
        raise ConfigError(f"length mismatch: {len(signal)} vs {len(noise)}")
    if signal.sample_rate_hz != noise.sample_rate_hz:
        raise ConfigError("sample-rate mismatch")
    return Waveform(signal.samples + noise.samples, signal.sample_rate_hz, Label.COMPOSITE)
