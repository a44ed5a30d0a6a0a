"""Eigenvalue-ratio test statistics.

All four statistics are ratios of eigenvalue summaries, so they are blind to
the absolute noise power: scaling the covariance leaves them unchanged.
Geometric means are taken as ``exp(mean(log lam))`` so that products of many
small eigenvalues cannot underflow.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .eig import EigSpectrum
from .errors import ConfigError, DegenerateSpectrumError


class StatKind(str, enum.Enum):
    MME = "MME"
    ME_AM = "ME_AM"
    ME_GM = "ME_GM"
    AM_GM = "AM_GM"

    @property
    def cli_name(self) -> str:
        return _CLI_NAMES[self]

    @classmethod
    def parse(cls, name: str) -> "StatKind":
        if isinstance(name, cls):
            return name
        key = name.strip().lower().replace("-", "").replace("_", "")
        for kind, cli in _CLI_NAMES.items():
            if key == cli:
                return kind
        raise ConfigError(f"unknown statistic {name!r}; expected one of {list(_CLI_NAMES.values())}")


_CLI_NAMES = {StatKind.MME: "mme", StatKind.ME_AM: "meam",
              StatKind.ME_GM: "megm", StatKind.AM_GM: "amgm"}

ALL_KINDS = tuple(StatKind)


@dataclass(frozen=True)
class TestStatistic:
    kind: StatKind
    value: float
    spectrum_dim: int

    __test__ = False  # keep pytest from collecting this class


def _values(s: EigSpectrum | np.ndarray) -> np.ndarray:
    return s.values if isinstance(s, EigSpectrum) else np.asarray(s, dtype=np.float64)


def _log_gm(lam: np.ndarray) -> float:
    if np.any(lam <= 0):
        raise DegenerateSpectrumError("geometric mean needs strictly positive eigenvalues")
    return float(np.mean(np.log(lam)))


def gamma_mme(s: EigSpectrum) -> TestStatistic:
    lam = _values(s)
    if lam[-1] <= 0:
        raise DegenerateSpectrumError("MME undefined for lam_min <= 0")
    return TestStatistic(StatKind.MME, float(lam[0] / lam[-1]), lam.size)


def gamma_me_am(s: EigSpectrum) -> TestStatistic:
    lam = _values(s)
    am = float(np.mean(lam))
    if am <= 0:
        raise DegenerateSpectrumError("ME-AM undefined for a zero-trace spectrum")
    return TestStatistic(StatKind.ME_AM, float(lam[0]) / am, lam.size)


def gamma_me_gm(s: EigSpectrum) -> TestStatistic:
    lam = _values(s)
    return TestStatistic(StatKind.ME_GM, float(np.exp(np.log(lam[0]) - _log_gm(lam))), lam.size)


def gamma_am_gm(s: EigSpectrum) -> TestStatistic:
    lam = _values(s)
    log_gm = _log_gm(lam)
    return TestStatistic(StatKind.AM_GM, float(np.exp(np.log(np.mean(lam)) - log_gm)), lam.size)


_SCALAR = {StatKind.MME: gamma_mme, StatKind.ME_AM: gamma_me_am,
           StatKind.ME_GM: gamma_me_gm, StatKind.AM_GM: gamma_am_gm}


def statistic(kind: StatKind, s: EigSpectrum) -> TestStatistic:
    return _SCALAR[StatKind(kind)](s)


def statistics_batch(lam: np.ndarray, diagonal_loading: float = 0.0) -> np.ndarray:
    """All four statistics for a stack of descending spectra.

    Parameters
    ----------
    lam : ndarray, shape (..., L)
        Eigenvalues, descending along the last axis.
    diagonal_loading : float
        Adds ``eps * trace / L`` to every eigenvalue first. Zero by default,
        since any loading biases the null distribution.

    Returns
    -------
    ndarray, shape (..., 4)
        Columns in ``ALL_KINDS`` order (MME, ME-AM, ME-GM, AM-GM).
    """
    lam = np.asarray(lam, dtype=np.float64)
    if diagonal_loading:
        lam = lam + diagonal_loading * lam.mean(axis=-1, keepdims=True)
    if np.any(lam[..., -1] <= 0):
        raise DegenerateSpectrumError(
            "spectrum has a nonpositive eigenvalue; consider diagonal loading")
    lmax = lam[..., 0]
    am = lam.mean(axis=-1)
    log_gm = np.log(lam).mean(axis=-1)
    return np.stack([
        lmax / lam[..., -1],
        lmax / am,
        np.exp(np.log(lmax) - log_gm),
        np.exp(np.log(am) - log_gm),
    ], axis=-1)
