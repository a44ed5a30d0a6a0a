"""Sample covariance matrices and their eigenvalues.

The default covariance is the temporal ("smoothed") one: the capture is cut
into ``N - L + 1`` overlapping windows of length ``L`` and the windows' outer
products are averaged. Passing several aligned receiver waveforms instead
stacks their windows into one ``ML x ML`` spatio-temporal covariance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, ConvergenceError, NumericError
from .signal import Waveform

DEFAULT_L = 8
PSD_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    entries: np.ndarray
    num_snapshots: int

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.entries)))


@dataclass(frozen=True, eq=False)
class EigSpectrum:
    """Eigenvalues sorted descending; ``values[0]`` is the largest."""

    values: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.size

    @property
    def lam_max(self) -> float:
        return float(self.values[0])

    @property
    def lam_min(self) -> float:
        return float(self.values[-1])


def _as_array(x) -> np.ndarray:
    if isinstance(x, Waveform):
        return x.samples
    return np.asarray(x, dtype=np.complex128)


def hermitize(a: np.ndarray) -> np.ndarray:
    """``(A + A^H) / 2``; the result is exactly Hermitian in floating point."""
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def covariance_batch(x: np.ndarray, smoothing_L: int) -> np.ndarray:
    """Temporal covariance of every row of ``x`` (shape ``(M, N)``) at once.

    Entry ``(i, j)`` is ``(1/K) sum_k x[k+i] conj(x[k+j])``; only the upper
    triangle is summed and the lower one mirrored, so the result is exactly
    Hermitian.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.complex128))
    m, n = x.shape
    k = n - smoothing_L + 1
    xc = np.conj(x)
    c = np.empty((m, smoothing_L, smoothing_L), dtype=np.complex128)
    for i in range(smoothing_L):
        for j in range(i, smoothing_L):
            v = np.einsum("mk,mk->m", x[:, i:i + k], xc[:, j:j + k])
            c[:, i, j] = v
            c[:, j, i] = np.conj(v)
    c /= k
    idx = np.arange(smoothing_L)
    c[:, idx, idx] = c[:, idx, idx].real
    return c


def sample_covariance(x: Waveform | Sequence[Waveform] | np.ndarray,
                      smoothing_L: int = DEFAULT_L) -> CovarianceMatrix:
    """Windowed sample covariance ``(1/K) sum_k v_k v_k^H``.

    Parameters
    ----------
    x : Waveform, array, or sequence of Waveforms
        One capture, or ``M`` aligned receiver captures for the stacked
        spatio-temporal mode.
    smoothing_L : int
        Window length ``L`` (>= 2); the capture needs at least ``2L`` samples.
    """
    if int(smoothing_L) != smoothing_L or smoothing_L < 2:
        raise ConfigError("smoothing_L must be an integer >= 2")
    if isinstance(x, (list, tuple)):
        rows = np.stack([_as_array(w) for w in x])
    else:
        rows = np.atleast_2d(_as_array(x))
    if rows.ndim != 2:
        raise ConfigError("expected one capture or a list of aligned captures")
    n = rows.shape[1]
    if n < 2 * smoothing_L:
        raise ConfigError(f"capture of {n} samples too short for L={smoothing_L}")
    k = n - smoothing_L + 1
    if rows.shape[0] == 1:
        return CovarianceMatrix(covariance_batch(rows, smoothing_L)[0], k)
    windows = sliding_window_view(rows, smoothing_L, axis=1)  # (M, K, L)
    stacked = np.transpose(windows, (1, 0, 2)).reshape(k, -1)  # (K, M*L)
    c = hermitize(stacked.T @ np.conj(stacked) / k)
    return CovarianceMatrix(c, k)


def jacobi_eigh(a: np.ndarray, tol: float = 1e-15, max_sweeps: int = 100):
    """Cyclic Jacobi eigendecomposition of a Hermitian matrix.

    Each rotation first removes the phase of ``a[p, q]`` with a diagonal
    unitary, then applies the real symmetric Jacobi rotation that zeros it.

    Returns eigenvalues (ascending) and the unitary matrix of eigenvectors.
    """
    a = hermitize(np.array(a, dtype=np.complex128))
    n = a.shape[0]
    v = np.eye(n, dtype=np.complex128)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            w = np.real(np.diag(a))
            order = np.argsort(w)
            return w[order], v[:, order]
        for p in range(n - 1):
            for q in range(p + 1, n):
                h = a[p, q]
                r = abs(h)
                if r <= 1e-300:
                    continue
                phase = h / r
                app, aqq = a[p, p].real, a[q, q].real
                theta = (aqq - app) / (2.0 * r)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                u = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ u
                a[idx, :] = np.conj(u.T) @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                v[:, idx] = v[:, idx] @ u
    raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")


def hermitian_eig(a: np.ndarray, method: str = "lapack"):
    """Eigenpairs of a Hermitian matrix, eigenvalues sorted descending."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigError("expected a square matrix")
    if method == "jacobi":
        w, v = jacobi_eigh(a)
    elif method == "lapack":
        try:
            w, v = np.linalg.eigh(hermitize(a))
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(str(exc)) from exc
    else:
        raise ConfigError(f"unknown eigensolver {method!r}")
    return w[::-1].copy(), v[:, ::-1].copy()


def clamp_psd(w: np.ndarray, trace: float) -> np.ndarray:
    """Zero rounding-level negatives; error on genuinely negative eigenvalues."""
    floor = -PSD_TOL * abs(trace)
    if np.any(w < floor):
        raise NumericError(f"matrix is not PSD: eigenvalue {w.min():.3e} < {floor:.3e}")
    return np.where(w < 0.0, 0.0, w)


def eigenvalues(c: CovarianceMatrix | np.ndarray, method: str = "lapack") -> EigSpectrum:
    m = c.entries if isinstance(c, CovarianceMatrix) else np.asarray(c)
    w, _ = hermitian_eig(m, method)
    return EigSpectrum(clamp_psd(w, float(np.real(np.trace(m)))))


def eigenvalues_batch(c: np.ndarray) -> np.ndarray:
    """Descending eigenvalues of a stack of Hermitian PSD matrices ``(..., L, L)``."""
    try:
        w = np.linalg.eigvalsh(c)[..., ::-1]
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(str(exc)) from exc
    tr = np.real(np.trace(c, axis1=-2, axis2=-1))[..., None]
    if np.any(w < -PSD_TOL * np.abs(tr)):
        raise NumericError("covariance is not PSD beyond rounding tolerance")
    return np.where(w < 0.0, 0.0, w)
