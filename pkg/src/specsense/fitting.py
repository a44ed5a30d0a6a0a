"""Candidate-distribution fitting and AIC model selection.

Four positive-support families are fit by maximum likelihood, scored with
``AIC = 2k - 2 ln L``, and given a parametric-bootstrap GoF p-value.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dists import ChiSquare, Exponential, Gamma, Lognormal, Parametric
from .errors import ConfigError, NumericError
from .gof import MIN_CALIBRATION_TRIALS, GofTest, statistic
from .rng import PHASE_BOOTSTRAP, chunked_map, stream

MIN_FIT_SAMPLES = 10
DEFAULT_BOOTSTRAP_TRIALS = 2000


class Family(str, enum.Enum):
    """Candidate families, in tie-break order."""

    LOGNORMAL = "Lognormal"
    CHI_SQUARE = "ChiSquare"
    GAMMA = "Gamma"
    EXPONENTIAL = "Exponential"

    @property
    def dist(self) -> type[Parametric]:
        return _DISTS[self]

    @classmethod
    def parse(cls, name: str) -> "Family":
        if isinstance(name, cls):
            return name
        key = name.strip().lower().replace("-", "").replace("_", "")
        for fam in cls:
            if fam.value.lower() == key or (fam is cls.CHI_SQUARE and key in ("chi2", "chisq")):
                return fam
        raise ConfigError(f"unknown family {name!r}")


_DISTS = {Family.LOGNORMAL: Lognormal, Family.CHI_SQUARE: ChiSquare,
          Family.GAMMA: Gamma, Family.EXPONENTIAL: Exponential}
_ORDER = {fam: i for i, fam in enumerate(Family)}


@dataclass
class FitResult:
    family: Family
    params: dict[str, float]
    log_likelihood: float
    k: int
    aic: float
    p_value: float | None = None
    p_value_test: str | None = field(default=None)

    @property
    def dist(self) -> Parametric:
        return self.family.dist(**self.params)

    def to_dict(self) -> dict:
        return {"family": self.family.value, "params": dict(self.params),
                "log_likelihood": self.log_likelihood, "k": self.k, "aic": self.aic,
                "p_value": self.p_value, "p_value_test": self.p_value_test}

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        return cls(Family(d["family"]), {k: float(v) for k, v in d["params"].items()},
                   float(d["log_likelihood"]), int(d["k"]), float(d["aic"]),
                   d.get("p_value"), d.get("p_value_test"))


def aic(fit: FitResult) -> float:
    return 2.0 * fit.k - 2.0 * fit.log_likelihood


def _check_samples(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < MIN_FIT_SAMPLES:
        raise ConfigError(f"need at least {MIN_FIT_SAMPLES} samples to fit, got {x.size}")
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise ConfigError("candidate families have positive support; samples must be > 0")
    return x


def fit_mle(family: Family | str, samples) -> FitResult:
    family = Family.parse(family) if isinstance(family, str) else family
    x = _check_samples(samples)
    dist = family.dist.fit(x)
    ll = dist.loglik(x)
    if not math.isfinite(ll):
        raise NumericError(f"{family.value} log-likelihood is not finite")
    k = dist.num_params
    return FitResult(family, dist.params, ll, k, 2.0 * k - 2.0 * ll)


def select_best(fits: Sequence[FitResult]) -> FitResult:
    """Lowest AIC; ties go to fewer parameters, then to family order."""
    if not fits:
        raise ConfigError("no fits to choose from")
    return min(fits, key=lambda f: (f.aic, f.k, _ORDER[f.family]))


def _bootstrap_stats(fit: FitResult, n: int, test: GofTest, seed: int,
                     start: int, stop: int) -> np.ndarray:
    dist = fit.dist
    family = fit.family.dist
    out = np.empty(stop - start)
    for j, t in enumerate(range(start, stop)):
        sim = dist.rvs(stream(seed, PHASE_BOOTSTRAP, t), n)
        try:
            out[j] = statistic(test, sim, family.fit(sim))
        except NumericError:
            # A degenerate resample (e.g. a sample beyond double-precision
            # tails) counts as at least as extreme as the observation.
            out[j] = math.inf
    return out


def gof_p_value(fit: FitResult, samples, test: GofTest | str = GofTest.AD,
                trials: int = DEFAULT_BOOTSTRAP_TRIALS, seed: int = 0,
                workers: int | None = None) -> float:
    """Parametric-bootstrap p-value of ``fit`` on ``samples``.

    Each of ``trials`` resamples is drawn from the fitted distribution, refit,
    and scored with the same statistic; the p-value is the fraction of
    resampled statistics at least as large as the observed one.
    """
    test = GofTest.parse(test)
    if trials < MIN_CALIBRATION_TRIALS:
        raise ConfigError(f"need at least {MIN_CALIBRATION_TRIALS} bootstrap trials")
    x = _check_samples(samples)
    try:
        observed = statistic(test, x, fit.dist)
    except NumericError:
        return 0.0
    parts = chunked_map(lambda a, b: _bootstrap_stats(fit, x.size, test, seed, a, b),
                        trials, workers, chunk=250)
    boot = np.concatenate(parts)
    return float(np.mean(boot >= observed))


def fit_candidates(samples, families: Iterable[Family | str] = tuple(Family),
                   test: GofTest | str | None = GofTest.AD,
                   trials: int = DEFAULT_BOOTSTRAP_TRIALS, seed: int = 0,
                   workers: int | None = None) -> list[FitResult]:
    """Fit each family; attach bootstrap p-values unless ``test`` is None."""
    fits = []
    for fam in families:
        fam = Family.parse(fam) if isinstance(fam, str) else fam
        fit = fit_mle(fam, samples)
        if test is not None:
            fit.p_value = gof_p_value(fit, samples, test, trials, seed, workers)
            fit.p_value_test = GofTest.parse(test).value
        fits.append(fit)
    return fits
