"""End-to-end sensing runs: null calibration, detection, and ROC sweeps.

Every capture is a deterministic function of ``(master_seed, phase, trial,
su_id)``: receiver noise for SU ``m`` in trial ``t`` comes from the stream
``(master_seed, NOISE, phase, t, m)`` and its fading realization from
``(master_seed, FADING, t, m)``. The master seed drives every stream; the
seeds inside the signal and channel sub-configs are ignored here. Because
detection runs at different SNRs share noise and fading draws, ROC curves
are free of between-point Monte Carlo jitter.

SNR is defined before the channel: PU power at the emulator input over the
per-SU noise floor. The fading channel has unit average gain.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .channel import ChannelProfile, apply_channel, epa_profile
from .detectors import ALL_KINDS, StatKind, statistics_batch
from .dists import EmpiricalReference, Normal
from .eig import DEFAULT_L, covariance_batch, eigenvalues_batch
from .errors import ConfigError
from .gof import GofResult, GofTest, ThresholdTable, kl_from_samples, quantile_ceiling, run_gof
from .rng import (PHASE_CALIBRATION, PHASE_DETECTION, PHASE_NOISE, PHASE_VALIDATION,
                  chunked_map, complex_normal, stream)
from .signal import SignalConfig, dbm_to_power, generate_pu_tone

MIN_TRIALS = 100
REPORT_FORMAT_VERSION = 1
CHUNK = 64


def _snr_or_none(v):
    return None if v is None or v == -math.inf else float(v)


def _none_to_neginf(v):
    return -math.inf if v is None else float(v)


@dataclass(frozen=True)
class ExperimentConfig:
    signal: SignalConfig = field(default_factory=SignalConfig)
    channel: ChannelProfile = field(default_factory=epa_profile)
    num_rx: int = 4
    smoothing_L: int = DEFAULT_L
    statistic: StatKind = StatKind.MME
    gof_test: GofTest = GofTest.KS
    significance: float = 0.05
    trials: int = 2000
    calibration_trials: int | None = None
    snr_grid_db: tuple[float, ...] = (-20.0, -15.0, -10.0, -5.0, 0.0)
    master_seed: int = 0
    diagonal_loading: float = 0.0
    gof_trials: int = 2000
    significances: tuple[float, ...] = (0.1, 0.05, 0.01)

    def __post_init__(self):
        object.__setattr__(self, "statistic", StatKind(self.statistic))
        object.__setattr__(self, "gof_test", GofTest.parse(self.gof_test))
        object.__setattr__(self, "snr_grid_db",
                           tuple(_none_to_neginf(s) for s in self.snr_grid_db))
        sigs = {float(a) for a in self.significances} | {float(self.significance)}
        object.__setattr__(self, "significances", tuple(sorted(sigs, reverse=True)))
        if int(self.num_rx) != self.num_rx or self.num_rx < 1:
            raise ConfigError("num_rx must be a positive integer")
        if self.trials < MIN_TRIALS or self.cal_trials < MIN_TRIALS:
            raise ConfigError(f"reported probabilities need at least {MIN_TRIALS} trials")
        if not all(0 < a < 1 for a in self.significances):
            raise ConfigError("significances must lie in (0, 1)")
        if self.signal.num_samples < 2 * self.smoothing_L or self.smoothing_L < 2:
            raise ConfigError("need 2 <= smoothing_L <= num_samples / 2")
        if self.diagonal_loading < 0:
            raise ConfigError("diagonal_loading must be nonnegative")

    @property
    def cal_trials(self) -> int:
        return self.trials if self.calibration_trials is None else int(self.calibration_trials)

    @property
    def snr_db(self) -> float:
        return self.signal.snr_db

    def with_snr(self, snr_db: float | None) -> "ExperimentConfig":
        pu = -math.inf if _snr_or_none(snr_db) is None else self.signal.noise_power_dbm + snr_db
        return replace(self, signal=replace(self.signal, pu_power_dbm=pu))

    def to_dict(self) -> dict:
        return {
            "signal": self.signal.to_dict(),
            "channel": self.channel.to_dict(),
            "num_rx": self.num_rx,
            "smoothing_L": self.smoothing_L,
            "statistic": self.statistic.value,
            "gof_test": self.gof_test.value,
            "significance": self.significance,
            "trials": self.trials,
            "calibration_trials": self.cal_trials,
            "snr_grid_db": [_snr_or_none(s) for s in self.snr_grid_db],
            "master_seed": self.master_seed,
            "diagonal_loading": self.diagonal_loading,
            "gof_trials": self.gof_trials,
            "significances": list(self.significances),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "signal" in d:
            d["signal"] = SignalConfig.from_dict(d["signal"])
        if "channel" in d:
            d["channel"] = ChannelProfile.from_dict(d["channel"])
        for key in ("snr_grid_db", "significances"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


# -- captures --------------------------------------------------------------

def _unit_tone(cfg: ExperimentConfig) -> np.ndarray:
    sig = replace(cfg.signal, pu_power_dbm=0.0)
    return generate_pu_tone(sig)


def _noise(cfg: ExperimentConfig, phase: int, trial: int) -> np.ndarray:
    power = dbm_to_power(cfg.signal.noise_power_dbm)
    n = cfg.signal.num_samples
    if power == 0.0:
        return np.zeros((cfg.num_rx, n), dtype=np.complex128)
    return np.stack([complex_normal(stream(cfg.master_seed, PHASE_NOISE, phase, trial, su), n, power)
                     for su in range(cfg.num_rx)])


def _faded_tone(cfg: ExperimentConfig, tone, trial: int) -> np.ndarray:
    profile = cfg.channel.with_seed(cfg.master_seed)
    return apply_channel(tone, profile, snapshot=trial, rx_ids=range(cfg.num_rx)).as_array()


def _amplitude(cfg: ExperimentConfig, snr_db: float | None) -> float:
    if _snr_or_none(snr_db) is None:
        return 0.0
    return math.sqrt(dbm_to_power(cfg.signal.noise_power_dbm + snr_db))


def observe(cfg: ExperimentConfig, trial: int, snr_db: float | None = None,
            signal: bool = True, noise: bool = True, phase: int = PHASE_DETECTION) -> np.ndarray:
    """One multi-SU capture, shape ``(num_rx, num_samples)``.

    ``snr_db=None`` means the PU is silent.
    """
    n = cfg.signal.num_samples
    x = np.zeros((cfg.num_rx, n), dtype=np.complex128)
    amp = _amplitude(cfg, snr_db)
    if signal and amp > 0:
        x = amp * _faded_tone(cfg, _unit_tone(cfg), trial)
    if noise:
        x = x + _noise(cfg, phase, trial)
    return x


def capture_statistics(x: np.ndarray, smoothing_L: int = DEFAULT_L,
                       diagonal_loading: float = 0.0) -> np.ndarray:
    """All four eigenvalue statistics per row of ``x``; shape ``(rows, 4)``."""
    lam = eigenvalues_batch(covariance_batch(np.asarray(x), smoothing_L))
    return statistics_batch(lam, diagonal_loading)


def _null_chunk(cfg: ExperimentConfig, phase: int, start: int, stop: int) -> np.ndarray:
    return np.stack([capture_statistics(_noise(cfg, phase, t), cfg.smoothing_L,
                                        cfg.diagonal_loading)
                     for t in range(start, stop)])


def _h1_chunk(cfg: ExperimentConfig, snrs: Sequence[float | None], start: int,
              stop: int) -> np.ndarray:
    tone = _unit_tone(cfg)
    amps = [_amplitude(cfg, s) for s in snrs]
    out = np.empty((len(snrs), stop - start, cfg.num_rx, len(ALL_KINDS)))
    for j, t in enumerate(range(start, stop)):
        n = _noise(cfg, PHASE_DETECTION, t)
        h = _faded_tone(cfg, tone, t) if any(a > 0 for a in amps) else None
        for i, a in enumerate(amps):
            x = a * h + n if a > 0 else n
            out[i, j] = capture_statistics(x, cfg.smoothing_L, cfg.diagonal_loading)
    return out


def null_statistics(cfg: ExperimentConfig, phase: int, trials: int,
                    workers: int | None = None) -> np.ndarray:
    """Noise-only statistics, shape ``(trials, num_rx, 4)``."""
    parts = chunked_map(lambda a, b: _null_chunk(cfg, phase, a, b), trials, workers, CHUNK)
    return np.concatenate(parts)


def h1_statistics(cfg: ExperimentConfig, snrs: Sequence[float | None], trials: int,
                  workers: int | None = None) -> np.ndarray:
    """PU-present statistics, shape ``(len(snrs), trials, num_rx, 4)``."""
    parts = chunked_map(lambda a, b: _h1_chunk(cfg, snrs, a, b), trials, workers, CHUNK)
    return np.concatenate(parts, axis=1)


# -- calibration -----------------------------------------------------------

def _null_spec(cfg: ExperimentConfig) -> dict:
    return {"kind": "noise_only", "num_samples": cfg.signal.num_samples,
            "smoothing_L": cfg.smoothing_L,
            "noise_power_dbm": _snr_or_none(cfg.signal.noise_power_dbm),
            "num_rx": cfg.num_rx, "diagonal_loading": cfg.diagonal_loading,
            "master_seed": cfg.master_seed}


def thresholds_from_samples(samples: np.ndarray, kind: StatKind, cfg: ExperimentConfig,
                            significances: Iterable[float]) -> ThresholdTable:
    """Pooled (trial x SU) null samples of one statistic -> threshold table."""
    pooled = np.sort(np.asarray(samples, dtype=np.float64).ravel(), kind="stable")
    q = {float(a): quantile_ceiling(pooled, a) for a in significances}
    return ThresholdTable(kind.value, cfg.signal.num_samples, _null_spec(cfg), False,
                          pooled.size, q, pooled)


@dataclass
class NullCalibration:
    samples: np.ndarray  # (trials, num_rx, 4)
    tables: dict[StatKind, ThresholdTable]

    def table(self, kind: StatKind) -> ThresholdTable:
        return self.tables[StatKind(kind)]

    def null_samples(self, kind: StatKind) -> np.ndarray:
        return self.samples[..., ALL_KINDS.index(StatKind(kind))].ravel()


def run_null_calibration(cfg: ExperimentConfig, significances: Iterable[float] | None = None,
                         workers: int | None = None) -> NullCalibration:
    """Noise-only calibration: empirical null and thresholds for every statistic.

    Thresholds are order statistics of the pooled ``trials x num_rx`` sample
    with the ceiling-index convention, so at most ``floor(alpha T)`` of the
    calibration values exceed the level-``alpha`` threshold.
    """
    sigs = tuple(cfg.significances if significances is None else significances)
    samples = null_statistics(cfg, PHASE_CALIBRATION, cfg.cal_trials, workers)
    tables = {k: thresholds_from_samples(samples[..., i], k, cfg, sigs)
              for i, k in enumerate(ALL_KINDS)}
    return NullCalibration(samples, tables)


def empirical_pfa(cfg: ExperimentConfig, calibration: NullCalibration,
                  trials: int | None = None, workers: int | None = None) -> dict[StatKind, float]:
    """False-alarm rate at ``cfg.significance`` on fresh noise-only captures."""
    fresh = null_statistics(cfg, PHASE_VALIDATION, trials or cfg.trials, workers)
    return {k: float(np.mean(fresh[..., i] > calibration.table(k).threshold(cfg.significance)))
            for i, k in enumerate(ALL_KINDS)}


def _check_matches(cfg: ExperimentConfig, calibration: NullCalibration) -> None:
    spec = calibration.table(cfg.statistic).null_spec
    if (spec.get("num_samples") != cfg.signal.num_samples
            or spec.get("smoothing_L") != cfg.smoothing_L):
        raise ConfigError("thresholds were calibrated for a different capture length or L")


# -- detection -------------------------------------------------------------

@dataclass
class SuResult:
    su_id: int
    statistic_samples: np.ndarray
    pd_hat: float
    gof_result: GofResult
    kl_to_null: float
    kl_support_mismatch: int

    @property
    def decision(self) -> bool:
        return self.gof_result.reject_null

    def to_dict(self) -> dict:
        return {"su_id": self.su_id, "decision": "pu_present" if self.decision else "vacant",
                "pd_hat": self.pd_hat, "gof_result": self.gof_result.to_dict(),
                "kl_to_null": self.kl_to_null, "kl_support_mismatch": self.kl_support_mismatch,
                "statistic_samples": self.statistic_samples.tolist()}


@dataclass
class DetectionReport:
    statistic: StatKind
    snr_db: float | None
    per_su: list[SuResult]
    pfa_hat: float
    pd_hat: float
    thresholds: dict[float, float]
    config_echo: dict
    runtime_s: float = 0.0
    kl_to_null: float | None = None  # all SUs pooled

    def to_dict(self, include_runtime: bool = False) -> dict:
        d = {"format_version": REPORT_FORMAT_VERSION,
             "statistic": self.statistic.value,
             "snr_db": _snr_or_none(self.snr_db),
             "pfa_hat": self.pfa_hat,
             "pd_hat": self.pd_hat,
             "kl_to_null": self.kl_to_null,
             "thresholds": {repr(float(a)): v for a, v in sorted(self.thresholds.items(), reverse=True)},
             "per_su": [s.to_dict() for s in self.per_su],
             "config_echo": self.config_echo}
        if include_runtime:
            d["runtime_s"] = self.runtime_s
        return d

    def to_json(self, include_runtime: bool = False) -> str:
        """Serialized report. Wall-clock time is left out by default so that
        identical configurations serialize to identical bytes."""
        return json.dumps(self.to_dict(include_runtime), indent=2) + "\n"


def su_result(su_id: int, samples: np.ndarray, threshold: float, null: np.ndarray,
              test: GofTest | str = GofTest.KS, significance: float = 0.05,
              gof_trials: int = 2000, seed: int = 0, threshold_source: str = "calibrated",
              workers: int | None = None) -> SuResult:
    """Per-SU decision: GoF test of the SU's statistic sample against the null.

    With ``threshold_source="calibrated"`` the sample is tested against the
    empirical null using Monte Carlo critical values. With ``"table"`` it is
    an AD normality test (normal fitted to the sample) against the tabulated
    composite-normal critical values.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if threshold_source == "table":
        gof = run_gof(GofTest.AD, samples, Normal.fit(samples), significance, "table")
    else:
        gof = run_gof(test, samples, EmpiricalReference(null), significance, threshold_source,
                      trials=gof_trials, seed=seed, workers=workers)
    kl = kl_from_samples(samples, null)
    return SuResult(su_id, samples, float(np.mean(samples > threshold)), gof, kl.value,
                    kl.support_mismatch)


def run_detection(cfg: ExperimentConfig, calibration: NullCalibration,
                  snr_db: float | None = ..., workers: int | None = None) -> DetectionReport:
    """PU -> channel -> noise -> covariance -> statistic -> decision, per trial.

    ``pd_hat`` is the exceedance rate of the calibrated threshold over all
    trials and SUs; ``pfa_hat`` the same rate on independent noise-only
    captures. Each SU's decision is its GoF test against the null sample.
    """
    t0 = time.perf_counter()
    _check_matches(cfg, calibration)
    if snr_db is ...:
        snr_db = cfg.snr_db
    snr_db = _snr_or_none(snr_db)
    kind = cfg.statistic
    col = ALL_KINDS.index(kind)
    table = calibration.table(kind)
    threshold = table.threshold(cfg.significance)
    h1 = h1_statistics(cfg, [snr_db], cfg.trials, workers)[0][..., col]  # (trials, num_rx)
    pfa = empirical_pfa(cfg, calibration, workers=workers)[kind]
    null = calibration.null_samples(kind)
    per_su = [su_result(m, h1[:, m], threshold, null, cfg.gof_test, cfg.significance,
                        cfg.gof_trials, cfg.master_seed, workers=workers)
              for m in range(cfg.num_rx)]
    kl = kl_from_samples(h1, null).value
    return DetectionReport(kind, snr_db, per_su, pfa, float(np.mean(h1 > threshold)),
                           dict(table.quantiles), cfg.to_dict(), time.perf_counter() - t0, kl)


@dataclass(frozen=True)
class RocRow:
    snr_db: float | None
    statistic: StatKind
    pfa_hat: float
    pd_hat: float


def run_roc_sweep(cfg: ExperimentConfig, kinds: Iterable[StatKind] = ALL_KINDS,
                  calibration: NullCalibration | None = None,
                  workers: int | None = None) -> list[RocRow]:
    """Calibrate once, then estimate Pd per SNR point and statistic."""
    if not cfg.snr_grid_db:
        raise ConfigError("snr_grid_db is empty")
    kinds = [StatKind(k) for k in kinds]
    if calibration is None:
        calibration = run_null_calibration(cfg, workers=workers)
    _check_matches(cfg, calibration)
    pfa = empirical_pfa(cfg, calibration, workers=workers)
    snrs = sorted(cfg.snr_grid_db)
    h1 = h1_statistics(cfg, [_snr_or_none(s) for s in snrs], cfg.trials, workers)
    rows = []
    for i, s in enumerate(snrs):
        for k in kinds:
            col = ALL_KINDS.index(k)
            thr = calibration.table(k).threshold(cfg.significance)
            rows.append(RocRow(_snr_or_none(s), k, pfa[k], float(np.mean(h1[i][..., col] > thr))))
    return rows
