"""Goodness-of-fit statistics, KL divergence, and critical values.

The three EDF statistics are computed from the probability-integral
transform ``u_i = F0(y_(i))`` of the sorted sample:

* KS:  ``D = max_i max(i/n - u_i, u_i - (i-1)/n)``
* CM:  ``W^2 = 1/(12n) + sum_i (u_i - (2i-1)/(2n))^2``
* AD:  ``A^2 = -n - (1/n) sum_i (2i-1) [ln u_i + ln(1 - u_(n+1-i))]``

The CM and AD forms are the exact values of ``n * int (F1 - F0)^2 w(F0) dF0``
for a step ECDF with weights ``1`` and ``1/(u(1-u))`` respectively.
"""

from __future__ import annotations

import enum
import functools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dists import EmpiricalReference, Normal, NullCdf, Parametric, from_dict
from .errors import CaptureFormatError, ConfigError, DegenerateCdfError, SupportMismatchError
from .rng import PHASE_GOF_NULL, chunked_map, stream

CLAMP = 1e-15
DEFAULT_SIGNIFICANCES = (0.15, 0.10, 0.05, 0.025, 0.01)
MIN_CALIBRATION_TRIALS = 1000
TABLE_FORMAT_VERSION = 1
MAX_KL_BINS = 100_000

# Anderson-Darling critical values for the composite normality test
# (mean and variance estimated from the data).
AD_CRITICAL_TABLE = {0.15: 0.57, 0.10: 0.65, 0.05: 0.78, 0.025: 0.90, 0.01: 1.08}


class GofTest(str, enum.Enum):
    KS = "KS"
    CM = "CM"
    AD = "AD"

    @classmethod
    def parse(cls, name: str) -> "GofTest":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).upper())
        except ValueError:
            raise ConfigError(f"unknown GoF test {name!r}; expected ks, cm or ad") from None


@dataclass(frozen=True, eq=False)
class EmpiricalCdf:
    """Right-continuous step ECDF, ``F(x) = #{samples <= x} / n``."""

    sorted_samples: np.ndarray

    @property
    def n(self) -> int:
        return self.sorted_samples.size

    def __call__(self, x) -> np.ndarray:
        return np.searchsorted(self.sorted_samples, np.asarray(x, dtype=np.float64),
                               side="right") / self.n


def ecdf(samples) -> EmpiricalCdf:
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise ConfigError("ECDF of an empty sample")
    if not np.all(np.isfinite(x)):
        raise ConfigError("ECDF samples must be finite")
    return EmpiricalCdf(np.sort(x, kind="stable"))


def _sorted(f1) -> np.ndarray:
    return f1.sorted_samples if isinstance(f1, EmpiricalCdf) else ecdf(f1).sorted_samples


# -- statistics on transformed samples; u has shape (..., n), ascending ----

def _ks_u(u: np.ndarray) -> np.ndarray:
    n = u.shape[-1]
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - u, axis=-1)
    d_minus = np.max(u - (i - 1) / n, axis=-1)
    return np.maximum(np.maximum(d_plus, d_minus), 0.0)


def _cm_u(u: np.ndarray) -> np.ndarray:
    n = u.shape[-1]
    i = np.arange(1, n + 1)
    return 1.0 / (12.0 * n) + np.sum((u - (2 * i - 1) / (2.0 * n)) ** 2, axis=-1)


def _ad_u(u: np.ndarray, s: np.ndarray | None = None) -> np.ndarray:
    """AD from ``u = F0(y_(i))`` and optionally ``s = 1 - F0(y_(i))`` (more accurate)."""
    if s is None:
        s = 1.0 - u
    if np.any(np.isnan(u)) or np.any(u <= 0.0) or np.any(s <= 0.0):
        raise DegenerateCdfError(
            "a sample maps to F0 = 0 or 1; A^2 is infinite for this reference")
    u = np.clip(u, CLAMP, 1.0 - CLAMP)
    s = np.clip(s, CLAMP, 1.0 - CLAMP)
    n = u.shape[-1]
    i = np.arange(1, n + 1)
    terms = (2 * i - 1) * (np.log(u) + np.log(s[..., ::-1]))
    return -n - np.sum(terms, axis=-1) / n


def ks_statistic(f1, f0: NullCdf) -> float:
    return float(_ks_u(f0.cdf(_sorted(f1))))


def cm_statistic(f1, f0: NullCdf) -> float:
    return float(_cm_u(f0.cdf(_sorted(f1))))


def ad_statistic(f1, f0: NullCdf) -> float:
    y = _sorted(f1)
    return float(_ad_u(f0.cdf(y), f0.sf(y)))


_STATISTICS = {GofTest.KS: ks_statistic, GofTest.CM: cm_statistic, GofTest.AD: ad_statistic}


def statistic(test: GofTest | str, f1, f0: NullCdf) -> float:
    return _STATISTICS[GofTest.parse(test)](f1, f0)


# -- KL divergence ---------------------------------------------------------

def kl_divergence(p, q) -> float:
    """``sum_i p_i ln(p_i / q_i)`` over matching bins (natural log)."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ConfigError("p and q must share the same binning")
    if np.any(p < 0) or np.any(q < 0):
        raise ConfigError("probabilities must be nonnegative")
    mask = p > 0
    if np.any(q[mask] <= 0):
        raise SupportMismatchError("p has mass where q has none")
    return float(max(np.sum(p[mask] * np.log(p[mask] / q[mask])), 0.0))


@dataclass(frozen=True)
class KlEstimate:
    value: float
    num_bins: int
    support_mismatch: int  # bins where p > 0 but the raw q histogram is empty
    out_of_range: int      # p samples outside the reference sample's range

    def to_dict(self) -> dict:
        return {"value": self.value, "num_bins": self.num_bins,
                "support_mismatch": self.support_mismatch, "out_of_range": self.out_of_range}


def fd_bin_width(x: np.ndarray) -> float:
    """Freedman-Diaconis width ``2 IQR n^(-1/3)``, falling back to a sqrt rule."""
    q75, q25 = np.percentile(x, [75, 25])
    width = 2.0 * (q75 - q25) / np.cbrt(x.size)
    if width > 0:
        return float(width)
    span = float(np.ptp(x))
    return span / math.ceil(math.sqrt(x.size)) if span > 0 else 1.0


def kl_from_samples(p_samples, q_samples, eps: float = 1e-12) -> KlEstimate:
    """Histogram estimate of ``KL(P || Q)`` from two samples.

    Bins share the Freedman-Diaconis width of the reference (``q``) sample
    and cover the union of both ranges, so mass of ``p`` where ``q`` never
    lands is penalized rather than hidden. ``eps`` is added to every bin of
    both histograms before renormalizing.
    """
    p = np.asarray(p_samples, dtype=np.float64).ravel()
    q = np.asarray(q_samples, dtype=np.float64).ravel()
    if p.size == 0 or q.size == 0:
        raise ConfigError("KL estimate needs two non-empty samples")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
        raise ConfigError("KL estimate needs finite samples")
    lo, hi = float(min(p.min(), q.min())), float(max(p.max(), q.max()))
    if hi > lo:
        width = max(fd_bin_width(p if p.size < q.size else q), (hi - lo) / MAX_KL_BINS)
        nbins = max(1, int(math.ceil((hi - lo) / width)))
        edges = np.linspace(lo, hi, nbins + 1)
    else:
        nbins, edges = 1, np.array([lo - 0.5, lo + 0.5])
    out = int(np.sum((p < q.min()) | (p > q.max())))
    hp, _ = np.histogram(p, edges)
    hq, _ = np.histogram(q, edges)
    mismatch = int(np.sum((hp > 0) & (hq == 0)))
    # same floor on both sides, so identical histograms give exactly zero
    pp = hp / hp.sum() + eps
    pp /= pp.sum()
    qq = hq / hq.sum() + eps
    qq /= qq.sum()
    return KlEstimate(kl_divergence(pp, qq), nbins, mismatch, out)


# -- critical values -------------------------------------------------------

def ad_critical_table() -> dict[float, float]:
    return dict(AD_CRITICAL_TABLE)


def _alpha_key(alpha: float) -> str:
    return repr(float(alpha))


def quantile_ceiling(sorted_stats: np.ndarray, alpha: float) -> float:
    """Order statistic ``ceil((1 - alpha) T)``: at most ``floor(alpha T)`` values exceed it."""
    t = sorted_stats.size
    k = math.ceil((1.0 - alpha) * t - 1e-9)
    k = min(max(k, 1), t)
    return float(sorted_stats[k - 1])


@dataclass
class ThresholdTable:
    """Monte Carlo quantiles of a statistic's null distribution."""

    test: str
    n: int
    null_spec: dict
    composite: bool
    trials: int
    quantiles: dict[float, float]
    null_samples: np.ndarray | None = field(default=None, repr=False)

    def threshold(self, alpha: float) -> float:
        for a, v in self.quantiles.items():
            if math.isclose(a, alpha, rel_tol=1e-9):
                return v
        raise ConfigError(f"no threshold at alpha={alpha}; table has {sorted(self.quantiles)}")

    def __getitem__(self, alpha: float) -> float:
        return self.threshold(alpha)

    def to_dict(self, include_samples: bool = True) -> dict:
        d = {
            "test": self.test,
            "n": self.n,
            "null_spec": self.null_spec,
            "composite": self.composite,
            "trials": self.trials,
            "quantiles": {_alpha_key(a): v for a, v in sorted(self.quantiles.items(), reverse=True)},
        }
        if include_samples and self.null_samples is not None:
            d["null_samples"] = self.null_samples.tolist()
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ThresholdTable":
        try:
            samples = d.get("null_samples")
            return cls(
                test=str(d["test"]),
                n=int(d["n"]),
                null_spec=dict(d["null_spec"]),
                composite=bool(d["composite"]),
                trials=int(d["trials"]),
                quantiles={float(a): float(v) for a, v in d["quantiles"].items()},
                null_samples=None if samples is None else np.asarray(samples, dtype=np.float64),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CaptureFormatError(f"malformed threshold table: {exc}") from exc

    def save(self, path: str | Path) -> None:
        doc = {"format_version": TABLE_FORMAT_VERSION, **self.to_dict()}
        Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ThresholdTable":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if doc.get("format_version") != TABLE_FORMAT_VERSION:
            raise CaptureFormatError(f"unsupported table version {doc.get('format_version')!r}")
        return cls.from_dict(doc)


def _null_statistics(test: GofTest, n: int, null_spec: Parametric, composite: bool,
                     seed: int, start: int, stop: int) -> np.ndarray:
    family = type(null_spec)
    out = np.empty(stop - start)
    for j, t in enumerate(range(start, stop)):
        x = null_spec.rvs(stream(seed, PHASE_GOF_NULL, t), n)
        f0 = family.fit(x) if composite else null_spec
        out[j] = _STATISTICS[test](x, f0)
    return out


@functools.lru_cache(maxsize=64)
def _calibrate_cached(test, n, null_spec, composite, trials, significances, seed, workers):
    parts = chunked_map(
        lambda a, b: _null_statistics(test, n, null_spec, composite, seed, a, b),
        trials, workers, chunk=512)
    stats = np.sort(np.concatenate(parts))
    return stats, {a: quantile_ceiling(stats, a) for a in significances}


def calibrate_critical_values(test: GofTest | str, n: int, null_spec: NullCdf,
                              composite: bool = False, trials: int = 10_000,
                              significances: Iterable[float] = DEFAULT_SIGNIFICANCES,
                              seed: int = 0, workers: int | None = None,
                              keep_samples: bool = False) -> ThresholdTable:
    """Monte Carlo null quantiles of a GoF statistic.

    Trial ``t`` draws its sample from the stream keyed by ``(seed, t)``. With
    ``composite=True`` the null family is refit to every synthetic sample
    before the statistic is computed, as when testing with estimated
    parameters.
    """
    test = GofTest.parse(test)
    if trials < MIN_CALIBRATION_TRIALS:
        raise ConfigError(f"need at least {MIN_CALIBRATION_TRIALS} calibration trials")
    if int(n) != n or n < 1:
        raise ConfigError("sample size n must be a positive integer")
    if not isinstance(null_spec, Parametric):
        raise ConfigError("calibration needs a parametric null to simulate from")
    sigs = tuple(sorted({float(a) for a in significances}, reverse=True))
    if not sigs or any(not 0 < a < 1 for a in sigs):
        raise ConfigError("significances must lie in (0, 1)")
    stats, q = _calibrate_cached(test, int(n), null_spec, bool(composite), int(trials),
                                 sigs, int(seed), None if workers is None else int(workers))
    return ThresholdTable(test.value, int(n), null_spec.to_dict(), bool(composite),
                          int(trials), q, stats.copy() if keep_samples else None)


# -- decision --------------------------------------------------------------

@dataclass(frozen=True)
class GofResult:
    test: GofTest
    statistic: float
    threshold: float
    significance: float
    reject_null: bool

    def to_dict(self) -> dict:
        return {"test": self.test.value, "statistic": self.statistic, "threshold": self.threshold,
                "significance": self.significance, "reject_null": self.reject_null}


def run_gof(test: GofTest | str, samples: Sequence[float] | np.ndarray, f0: NullCdf,
            significance: float = 0.05, threshold_source: str | ThresholdTable = "calibrated",
            trials: int = 2000, seed: int = 0, composite: bool = False,
            workers: int | None = None) -> GofResult:
    """Test ``samples`` against ``f0``; ``reject_null`` means "PU present".

    ``threshold_source`` is ``"table"`` (the composite-normal AD table),
    ``"calibrated"`` (Monte Carlo at this sample size), or a precomputed
    :class:`ThresholdTable`. A fully specified continuous null is
    distribution-free, so it is calibrated against a standard normal.
    """
    test = GofTest.parse(test)
    f1 = ecdf(samples)
    stat = _STATISTICS[test](f1, f0)
    if isinstance(threshold_source, ThresholdTable):
        threshold = threshold_source.threshold(significance)
    elif threshold_source == "table":
        if test is not GofTest.AD:
            raise ConfigError("the built-in critical-value table covers the AD test only")
        table = ad_critical_table()
        matches = [v for a, v in table.items() if math.isclose(a, significance)]
        if not matches:
            raise ConfigError(f"no tabulated AD critical value at alpha={significance}")
        threshold = matches[0]
    elif threshold_source == "calibrated":
        if composite:
            if not isinstance(f0, Parametric):
                raise ConfigError("composite calibration needs a parametric null")
            null = f0
        else:
            null = Normal(0.0, 1.0)
        threshold = calibrate_critical_values(test, f1.n, null, composite, trials,
                                              [significance], seed, workers).threshold(significance)
    else:
        raise ConfigError(f"unknown threshold source {threshold_source!r}")
    return GofResult(test, stat, float(threshold), float(significance), bool(stat > threshold))


def null_from_spec(spec: Mapping) -> NullCdf:
    return from_dict(dict(spec))


__all__ = [
    "AD_CRITICAL_TABLE", "EmpiricalCdf", "EmpiricalReference", "GofResult", "GofTest",
    "KlEstimate", "ThresholdTable", "ad_critical_table", "ad_statistic",
    "calibrate_critical_values", "cm_statistic", "ecdf", "kl_divergence", "kl_from_samples",
    "ks_statistic", "quantile_ceiling", "run_gof", "statistic",
]
