"""Multi-channel IQ capture files.

A capture is two files sharing a base path: ``<base>.json`` holds the
metadata and ``<base>.iq`` the payload, little-endian float32 interleaved
I/Q, channel after channel. Payload size is always
``num_channels * num_samples * 8`` bytes.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import CaptureFormatError, ConfigError

FORMAT_VERSION = 1
_PAYLOAD_DTYPE = np.dtype("<f4")


@dataclass
class CaptureMeta:
    sample_rate_hz: float
    num_channels: int
    num_samples: int
    center_freq_hz: float = 1.8e9
    label: str = ""
    seed: int = 0
    format_version: int = FORMAT_VERSION
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        order = ["format_version", "sample_rate_hz", "center_freq_hz", "num_channels",
                 "num_samples", "label", "seed", "extra"]
        return {k: d[k] for k in order}


@dataclass(eq=False)
class IqCapture:
    meta: CaptureMeta
    payload: np.ndarray  # complex64, (num_channels, num_samples)

    def __post_init__(self):
        p = np.asarray(self.payload)
        if p.ndim == 1:
            p = p[None, :]
        self.payload = p.astype(np.complex64, copy=False)
        if self.meta.format_version != FORMAT_VERSION:
            raise ConfigError(f"format_version must be {FORMAT_VERSION}")
        if self.payload.shape != (self.meta.num_channels, self.meta.num_samples):
            raise ConfigError(
                f"payload shape {self.payload.shape} does not match metadata "
                f"({self.meta.num_channels}, {self.meta.num_samples})")

    @classmethod
    def from_array(cls, x: np.ndarray, sample_rate_hz: float, **meta) -> "IqCapture":
        x = np.atleast_2d(np.asarray(x))
        return cls(CaptureMeta(sample_rate_hz, x.shape[0], x.shape[1], **meta), x)

    @property
    def payload_nbytes(self) -> int:
        return self.meta.num_channels * self.meta.num_samples * 8


def _base(path: str | Path) -> Path:
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".iq", ".json") else p


def capture_paths(path: str | Path) -> tuple[Path, Path]:
    """``(metadata, payload)`` paths for a capture base path."""
    base = _base(path)
    return base.with_name(base.name + ".json"), base.with_name(base.name + ".iq")


def write_capture(path: str | Path, capture: IqCapture) -> None:
    meta_path, iq_path = capture_paths(path)
    interleaved = np.empty(capture.payload.shape + (2,), dtype=_PAYLOAD_DTYPE)
    interleaved[..., 0] = capture.payload.real
    interleaved[..., 1] = capture.payload.imag
    iq_path.write_bytes(interleaved.tobytes())
    meta_path.write_text(json.dumps(capture.meta.to_dict(), indent=2) + "\n", encoding="utf-8")


def read_capture(path: str | Path) -> IqCapture:
    meta_path, iq_path = capture_paths(path)
    try:
        doc = json.loads(meta_path.read_text(encoding="utf-8"))
        raw = iq_path.read_bytes()
    except FileNotFoundError as exc:
        raise CaptureFormatError(f"missing capture file: {exc.filename}") from exc
    except json.JSONDecodeError as exc:
        raise CaptureFormatError(f"corrupt capture metadata: {exc}") from exc
    if doc.get("format_version") != FORMAT_VERSION:
        raise CaptureFormatError(
            f"unsupported capture format_version {doc.get('format_version')!r}")
    try:
        meta = CaptureMeta(**doc)
    except TypeError as exc:
        raise CaptureFormatError(f"bad capture metadata: {exc}") from exc
    expected = meta.num_channels * meta.num_samples * 8
    if len(raw) != expected:
        kind = "truncated" if len(raw) < expected else "oversized"
        raise CaptureFormatError(f"{kind} payload: {len(raw)} bytes, expected {expected}")
    pairs = np.frombuffer(raw, dtype=_PAYLOAD_DTYPE).reshape(meta.num_channels, meta.num_samples, 2)
    payload = pairs[..., 0] + 1j * pairs[..., 1].astype(np.complex64)
    return IqCapture(meta, payload.astype(np.complex64))
