"""Tapped-delay-line fading channel from one PU port to several SU receivers.

A software stand-in for a hardware channel emulator. Tap delays are rounded
to the nearest integer sample at the working rate (at 2.4576 GSPS the
quantization error is at most 0.2 ns); the delayed copies are zero-filled at
the start of the capture, which is exactly a truncated linear convolution.

Fading is block fading: tap gains are constant over a capture and redrawn per
``snapshot``. Receivers fade independently of one another.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .rng import PHASE_FADING, PHASE_NOISE, complex_normal, stream
from .signal import Label, Waveform, dbm_to_power

# 3GPP TS 36.101 Annex B.2.1, Extended Pedestrian A.
EPA_DELAYS_NS = (0.0, 30.0, 70.0, 90.0, 110.0, 190.0, 410.0)
EPA_POWERS_DB = (0.0, -1.0, -2.0, -3.0, -8.0, -17.2, -20.8)


class Fading(str, enum.Enum):
    STATIC = "static"
    RAYLEIGH_BLOCK = "rayleigh_block"


@dataclass(frozen=True)
class ChannelProfile:
    """Power-delay profile. Tap powers are renormalized to unit total gain."""

    name: str
    delays_s: tuple[float, ...]
    powers_db: tuple[float, ...]
    fading: Fading = Fading.RAYLEIGH_BLOCK
    seed: int = 0

    def __post_init__(self):
        delays = tuple(float(d) for d in self.delays_s)
        powers = tuple(float(p) for p in self.powers_db)
        if not delays or len(delays) != len(powers):
            raise ConfigError("profile needs matching, non-empty delay and power lists")
        if delays[0] != 0.0:
            raise ConfigError("first tap delay must be 0")
        if any(b <= a for a, b in zip(delays, delays[1:])):
            raise ConfigError("tap delays must be strictly increasing")
        if not all(math.isfinite(p) for p in powers):
            raise ConfigError("tap powers must be finite")
        total = sum(10.0 ** (p / 10.0) for p in powers)
        offset = 10.0 * math.log10(total)
        if abs(offset) < 1e-12:  # already normalized; keep round trips exact
            offset = 0.0
        object.__setattr__(self, "delays_s", delays)
        object.__setattr__(self, "powers_db", tuple(p - offset for p in powers))
        object.__setattr__(self, "fading", Fading(self.fading))

    @property
    def num_taps(self) -> int:
        return len(self.delays_s)

    @property
    def linear_powers(self) -> np.ndarray:
        return 10.0 ** (np.asarray(self.powers_db) / 10.0)

    def sample_offsets(self, sample_rate_hz: float) -> np.ndarray:
        """Integer delay of each tap, ``rint(delay * Fs)`` (half to even)."""
        return np.rint(np.asarray(self.delays_s) * sample_rate_hz).astype(np.int64)

    def with_seed(self, seed: int) -> "ChannelProfile":
        return ChannelProfile(self.name, self.delays_s, self.powers_db, self.fading, seed)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "taps": [{"delay_ns": round(d * 1e9, 6), "power_db": p}
                     for d, p in zip(self.delays_s, self.powers_db)],
            "fading": self.fading.value,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelProfile":
        try:
            taps = d["taps"]
            return cls(
                name=str(d.get("name", "custom")),
                delays_s=tuple(float(t["delay_ns"]) / 1e9 for t in taps),
                powers_db=tuple(float(t["power_db"]) for t in taps),
                fading=Fading(d.get("fading", Fading.RAYLEIGH_BLOCK.value)),
                seed=int(d.get("seed", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed channel profile: {exc}") from exc


def load_profile(path: str | Path) -> ChannelProfile:
    with open(path, encoding="utf-8") as fh:
        return ChannelProfile.from_dict(json.load(fh))


def epa_profile(fading: Fading = Fading.RAYLEIGH_BLOCK, seed: int = 0) -> ChannelProfile:
    return ChannelProfile("EPA", tuple(d / 1e9 for d in EPA_DELAYS_NS), EPA_POWERS_DB,
                          fading, seed)


@dataclass(eq=False)
class MultiRxOutput:
    per_rx: list[Waveform]
    realization_id: int = 0
    rx_ids: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not self.rx_ids:
            self.rx_ids = tuple(range(len(self.per_rx)))

    def as_array(self) -> np.ndarray:
        return np.stack([w.samples for w in self.per_rx])


def tap_gains(profile: ChannelProfile, rx_ids: Sequence[int], snapshot: int) -> np.ndarray:
    """Complex tap gains, shape ``(len(rx_ids), num_taps)``.

    Static: ``sqrt(power)``. RayleighBlock: ``CN(0, power)``, a deterministic
    function of ``(profile.seed, snapshot, rx, tap)``.
    """
    amp = np.sqrt(profile.linear_powers)
    if profile.fading is Fading.STATIC:
        return np.tile(amp.astype(np.complex128), (len(rx_ids), 1))
    rows = []
    for rx in rx_ids:
        rng = stream(profile.seed, PHASE_FADING, snapshot, rx)
        rows.append(amp * complex_normal(rng, profile.num_taps))
    return np.array(rows)


def _convolve_taps(x: np.ndarray, offsets: np.ndarray, gains: np.ndarray) -> np.ndarray:
    y = np.zeros(x.size, dtype=np.complex128)
    for d, g in zip(offsets, gains):
        if d < x.size:
            y[d:] += g * x[: x.size - d]
    return y


def apply_channel(x: Waveform, profile: ChannelProfile, num_rx: int = 4, snapshot: int = 0,
                  rx_ids: Sequence[int] | None = None) -> MultiRxOutput:
    """Pass ``x`` through an independent realization of ``profile`` per receiver."""
    if rx_ids is None:
        if int(num_rx) != num_rx or num_rx < 1:
            raise ConfigError("num_rx must be a positive integer")
        rx_ids = range(int(num_rx))
    rx_ids = tuple(int(r) for r in rx_ids)
    if not rx_ids:
        raise ConfigError("num_rx must be a positive integer")
    offsets = profile.sample_offsets(x.sample_rate_hz)
    gains = tap_gains(profile, rx_ids, snapshot)
    per_rx = [Waveform(_convolve_taps(x.samples, offsets, g), x.sample_rate_hz, Label.COMPOSITE)
              for g in gains]
    return MultiRxOutput(per_rx, realization_id=snapshot, rx_ids=rx_ids)


def noise_floor_inject(out: MultiRxOutput, noise_power_dbm: float, seed: int,
                       stream_ids: Sequence[tuple[int, ...]] | None = None) -> MultiRxOutput:
    """Add independent circular Gaussian noise to each receiver.

    ``stream_ids[m]`` keys receiver ``m``'s noise; by default ``(rx_id,)``.
    A power of ``-inf`` disables injection.
    """
    power = dbm_to_power(noise_power_dbm)
    if power == 0.0:
        return out
    if stream_ids is None:
        stream_ids = [(r,) for r in out.rx_ids]
    if len(stream_ids) != len(out.per_rx):
        raise ConfigError("one stream id per receiver is required")
    noisy = []
    for w, sid in zip(out.per_rx, stream_ids):
        rng = stream(seed, PHASE_NOISE, *sid)
        noisy.append(Waveform(w.samples + complex_normal(rng, len(w), power),
                              w.sample_rate_hz, Label.COMPOSITE))
    return MultiRxOutput(noisy, out.realization_id, out.rx_ids)
