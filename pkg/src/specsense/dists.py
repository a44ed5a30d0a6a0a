"""Reference (null) distributions for the goodness-of-fit tests.

Each parametric family knows its CDF, log-density, how to draw variates from
a given generator, and its maximum-likelihood estimator. Gamma and
chi-square estimators run a scalar Newton iteration on the profile
likelihood; the others are closed form.
"""

from __future__ import annotations

import math
from typing import ClassVar

import numpy as np
from scipy import special

from .errors import ConfigError, ConvergenceError, NumericError

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 200
LOG_2PI = math.log(2.0 * math.pi)


class NullCdf:
    """A monotone map from the measurement axis onto [0, 1]."""

    kind: ClassVar[str] = ""
    param_names: ClassVar[tuple[str, ...]] = ()

    def cdf(self, x) -> np.ndarray:
        raise NotImplementedError

    def sf(self, x) -> np.ndarray:
        """Survival function ``1 - F0``; families override it for tail accuracy."""
        return 1.0 - self.cdf(x)

    def __call__(self, x) -> np.ndarray:
        return self.cdf(x)

    @property
    def params(self) -> dict[str, float]:
        return {name: float(getattr(self, name)) for name in self.param_names}

    @property
    def num_params(self) -> int:
        return len(self.param_names)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v:.6g}" for k, v in self.params.items())
        return f"{self.kind}({args})"

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and self.params == other.params

    def __hash__(self) -> int:
        return hash((self.kind, tuple(self.params.items())))


class Parametric(NullCdf):
    def logpdf(self, x) -> np.ndarray:
        raise NotImplementedError

    def loglik(self, x) -> float:
        return float(np.sum(self.logpdf(np.asarray(x, dtype=np.float64))))

    def rvs(self, rng: np.random.Generator, size) -> np.ndarray:
        raise NotImplementedError

    @classmethod
    def fit(cls, x) -> "Parametric":
        raise NotImplementedError


def _positive(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ConfigError("cannot fit an empty sample")
    if np.any(~(x > 0)) or not np.all(np.isfinite(x)):
        raise ConfigError("family has positive support; got nonpositive or non-finite samples")
    return x


def _check_positive(**kw):
    for name, val in kw.items():
        if not (val > 0 and math.isfinite(val)):
            raise ConfigError(f"{name} must be positive and finite, got {val}")


class Normal(Parametric):
    kind = "Normal"
    param_names = ("mu", "sigma")

    def __init__(self, mu: float = 0.0, sigma: float = 1.0):
        _check_positive(sigma=sigma)
        self.mu, self.sigma = float(mu), float(sigma)

    def cdf(self, x):
        return special.ndtr((np.asarray(x, dtype=np.float64) - self.mu) / self.sigma)

    def sf(self, x):
        return special.ndtr((self.mu - np.asarray(x, dtype=np.float64)) / self.sigma)

    def logpdf(self, x):
        z = (np.asarray(x, dtype=np.float64) - self.mu) / self.sigma
        return -0.5 * z * z - math.log(self.sigma) - 0.5 * LOG_2PI

    def rvs(self, rng, size):
        return rng.normal(self.mu, self.sigma, size)

    @classmethod
    def fit(cls, x):
        # Unbiased variance, as in the standard composite normality test.
        x = np.asarray(x, dtype=np.float64)
        if x.size < 2:
            raise ConfigError("normal fit needs at least two samples")
        return cls(float(np.mean(x)), float(np.std(x, ddof=1)))


class Lognormal(Parametric):
    kind = "Lognormal"
    param_names = ("mu", "sigma")

    def __init__(self, mu: float = 0.0, sigma: float = 1.0):
        _check_positive(sigma=sigma)
        self.mu, self.sigma = float(mu), float(sigma)

    def cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (np.log(np.where(x > 0, x, 1.0)) - self.mu) / self.sigma
        return np.where(x > 0, special.ndtr(z), 0.0)

    def sf(self, x):
        x = np.asarray(x, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (np.log(np.where(x > 0, x, 1.0)) - self.mu) / self.sigma
        return np.where(x > 0, special.ndtr(-z), 1.0)

    def logpdf(self, x):
        lx = np.log(x)
        z = (lx - self.mu) / self.sigma
        return -lx - math.log(self.sigma) - 0.5 * LOG_2PI - 0.5 * z * z

    def rvs(self, rng, size):
        return rng.lognormal(self.mu, self.sigma, size)

    @classmethod
    def fit(cls, x):
        lx = np.log(_positive(x))
        sigma = float(np.std(lx))
        if sigma == 0.0:
            raise NumericError("lognormal fit of a constant sample")
        return cls(float(np.mean(lx)), sigma)


class Exponential(Parametric):
    kind = "Exponential"
    param_names = ("rate",)

    def __init__(self, rate: float = 1.0):
        _check_positive(rate=rate)
        self.rate = float(rate)

    def cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.where(x > 0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)

    def sf(self, x):
        return np.exp(-self.rate * np.maximum(np.asarray(x, dtype=np.float64), 0.0))

    def logpdf(self, x):
        return math.log(self.rate) - self.rate * np.asarray(x, dtype=np.float64)

    def rvs(self, rng, size):
        return rng.exponential(1.0 / self.rate, size)

    @classmethod
    def fit(cls, x):
        return cls(1.0 / float(np.mean(_positive(x))))


def _newton(f, fprime, x0: float, what: str) -> float:
    """Scalar Newton iteration on a positive unknown, halving on overshoot."""
    x = x0
    for _ in range(NEWTON_MAX_ITER):
        step = f(x) / fprime(x)
        x_new = x - step
        if x_new <= 0:
            x_new = x / 2.0
        if abs(x_new - x) < NEWTON_TOL * max(1.0, abs(x)):
            return x_new
        x = x_new
    raise ConvergenceError(f"{what} Newton iteration did not converge")


class Gamma(Parametric):
    kind = "Gamma"
    param_names = ("shape", "scale")

    def __init__(self, shape: float = 1.0, scale: float = 1.0):
        _check_positive(shape=shape, scale=scale)
        self.shape, self.scale = float(shape), float(scale)

    def cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        return special.gammainc(self.shape, np.maximum(x, 0.0) / self.scale)

    def sf(self, x):
        x = np.asarray(x, dtype=np.float64)
        return special.gammaincc(self.shape, np.maximum(x, 0.0) / self.scale)

    def logpdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        return ((self.shape - 1.0) * np.log(x) - x / self.scale
                - special.gammaln(self.shape) - self.shape * math.log(self.scale))

    def rvs(self, rng, size):
        return rng.gamma(self.shape, self.scale, size)

    @classmethod
    def fit(cls, x):
        x = _positive(x)
        mean = float(np.mean(x))
        s = math.log(mean) - float(np.mean(np.log(x)))
        if not s > 0:
            raise ConvergenceError("gamma fit of a (numerically) constant sample")
        # Profile score: log(a) - digamma(a) = s, decreasing in a.
        a0 = (3.0 - s + math.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)
        a = _newton(lambda a: math.log(a) - special.digamma(a) - s,
                    lambda a: 1.0 / a - special.polygamma(1, a), a0, "gamma shape")
        return cls(a, mean / a)


class ChiSquare(Parametric):
    """Chi-square with a continuous degrees-of-freedom parameter."""

    kind = "ChiSquare"
    param_names = ("df",)

    def __init__(self, df: float = 1.0):
        _check_positive(df=df)
        self.df = float(df)

    def cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        return special.gammainc(self.df / 2.0, np.maximum(x, 0.0) / 2.0)

    def sf(self, x):
        x = np.asarray(x, dtype=np.float64)
        return special.gammaincc(self.df / 2.0, np.maximum(x, 0.0) / 2.0)

    def logpdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        h = self.df / 2.0
        return (h - 1.0) * np.log(x) - x / 2.0 - h * math.log(2.0) - special.gammaln(h)

    def rvs(self, rng, size):
        return rng.chisquare(self.df, size)

    @classmethod
    def fit(cls, x):
        x = _positive(x)
        # Score equation: digamma(df/2) = mean(log x) - log 2.
        y = float(np.mean(np.log(x))) - math.log(2.0)
        a0 = math.exp(y) + 0.5 if y >= -2.22 else -1.0 / (y - special.digamma(1.0))
        h = _newton(lambda a: special.digamma(a) - y,
                    lambda a: special.polygamma(1, a), a0, "chi-square dof")
        return cls(2.0 * h)


class EmpiricalReference(NullCdf):
    """Continuity-corrected CDF of a reference sample.

    ``F0(y) = (#{ref <= y} + 1/2) / (n + 1)``. The offsets keep F0 strictly
    inside (0, 1) so the Anderson-Darling logarithms stay finite for test
    samples beyond the reference range; they vanish as n grows.
    """

    kind = "EmpiricalReference"

    def __init__(self, samples):
        ref = np.sort(np.asarray(samples, dtype=np.float64), kind="stable")
        if ref.size == 0:
            raise ConfigError("empirical reference needs samples")
        self.samples = ref

    @property
    def n(self) -> int:
        return self.samples.size

    def cdf(self, x):
        counts = np.searchsorted(self.samples, np.asarray(x, dtype=np.float64), side="right")
        return (counts + 0.5) / (self.n + 1.0)

    @property
    def params(self):
        return {"n": float(self.n)}

    def to_dict(self):
        return {"kind": self.kind, "samples": self.samples.tolist()}

    def __eq__(self, other):
        return isinstance(other, EmpiricalReference) and np.array_equal(self.samples, other.samples)

    def __hash__(self):
        return hash((self.kind, self.samples.tobytes()))


FAMILIES: dict[str, type[Parametric]] = {
    cls.kind: cls for cls in (Normal, Lognormal, ChiSquare, Gamma, Exponential)
}


def from_dict(d: dict) -> NullCdf:
    d = dict(d)
    kind = d.pop("kind", None)
    if kind == EmpiricalReference.kind:
        return EmpiricalReference(d["samples"])
    if kind not in FAMILIES:
        raise ConfigError(f"unknown distribution kind {kind!r}")
    return FAMILIES[kind](**d)
