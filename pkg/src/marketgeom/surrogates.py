"""Surrogate windows and the effective market dimension.

Surrogates keep each stock's marginal behaviour but destroy the
cross-sectional correlation, either by shuffling every stock's observations
with its own permutation or by redrawing them from a Gaussian with the
stock's mean and standard deviation. Eigenvalues of the real window that
stay above the surrogate eigenvalues, rank by rank, mark the directions
that carry systematic structure.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError
from .geometry import center_of_mass_spectrum, origin_spectrum
from .returns import NormalizedWindow, normalize_rows

TIME_PERMUTED = "time_permuted"
GAUSSIAN = "gaussian"
SURROGATE_KINDS = (TIME_PERMUTED, GAUSSIAN)

ORIGIN = "origin"
CENTER_OF_MASS = "center_of_mass"
SPECTRUM_REFERENCES = (ORIGIN, CENTER_OF_MASS)

DEFAULT_N_SURROGATES = 100
DEFAULT_CONFIDENCE = 0.99


@dataclass(frozen=True, eq=False)
class SurrogateEnsemble:
    kind: str
    n_surrogates: int
    spectra: np.ndarray
    rank_quantiles: np.ndarray
    confidence: float
    reference: str = ORIGIN


@dataclass(frozen=True, eq=False)
class EffectiveDimensionResult:
    f: int
    actual_spectrum: np.ndarray
    threshold_spectrum: np.ndarray
    confidence: float


def permute_surrogate(window: NormalizedWindow, seed: int) -> NormalizedWindow:
    """Shuffle each stock's observations with an independent permutation."""
    rng = np.random.default_rng(seed)
    vectors = rng.permuted(window.vectors, axis=1)
    return NormalizedWindow(
        window.window_start, window.n, vectors, window.tickers, window.means, window.stds
    )


def gaussian_surrogate(
    shape: tuple[int, int],
    per_stock_mean: Sequence[float],
    per_stock_std: Sequence[float],
    seed: int,
) -> NormalizedWindow:
    """Independent normal draws per stock, normalized like a real window.

    ``shape`` is ``(N, n)``: stocks by observations.
    """
    N, n = shape
    mean = np.asarray(per_stock_mean, dtype=float).reshape(-1)
    std = np.asarray(per_stock_std, dtype=float).reshape(-1)
    if mean.size != N or std.size != N:
        raise ParameterError(f"need {N} per-stock means and standard deviations")
    if not np.all(std > 0):
        raise ParameterError("per-stock standard deviations must be positive")
    if n < 2:
        raise ParameterError("gaussian surrogates need at least 2 observations")
    rng = np.random.default_rng(seed)
    draws = mean[:, None] + std[:, None] * rng.standard_normal((N, n))
    vectors, means, stds = normalize_rows(draws)
    return NormalizedWindow(0, n, vectors, (), means, stds)


def window_spectrum(window: NormalizedWindow, reference: str = ORIGIN) -> np.ndarray:
    """Descending inertia spectrum of length ``N - 1`` about ``reference``."""
    if reference == ORIGIN:
        return origin_spectrum(window)
    if reference == CENTER_OF_MASS:
        return center_of_mass_spectrum(window)
    raise ParameterError(f"unknown spectrum reference {reference!r}")


def _surrogate(window: NormalizedWindow, kind: str, seed: int) -> NormalizedWindow:
    if kind == TIME_PERMUTED:
        return permute_surrogate(window, seed)
    N, n = window.vectors.shape
    mean = window.means if window.means is not None else np.zeros(N)
    std = window.stds if window.stds is not None else np.ones(N)
    return gaussian_surrogate((N, n), mean, std, seed)


def _check_confidence(q: float) -> None:
    if not 0.0 < q < 1.0:
        raise ParameterError(f"confidence must lie in (0, 1), got {q}")


def build_ensemble(
    window: NormalizedWindow,
    kind: str = TIME_PERMUTED,
    n_surrogates: int = DEFAULT_N_SURROGATES,
    confidence: float = DEFAULT_CONFIDENCE,
    seed: int = 0,
    reference: str = ORIGIN,
    threads: int | None = None,
) -> SurrogateEnsemble:
    """Spectra of ``n_surrogates`` surrogates of ``window``.

    Surrogate ``i`` uses seed ``seed + i``, so the ensemble does not depend
    on ``threads``.
    """
    if kind not in SURROGATE_KINDS:
        raise ParameterError(f"unknown surrogate kind {kind!r}")
    if n_surrogates < 1:
        raise ParameterError("n_surrogates must be at least 1")
    _check_confidence(confidence)
    window_spectrum(window, reference)  # validates reference early

    def one(i: int) -> np.ndarray:
        return window_spectrum(_surrogate(window, kind, seed + i), reference)

    threads = threads or os.cpu_count() or 1
    if threads > 1 and n_surrogates > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            spectra = list(pool.map(one, range(n_surrogates)))
    else:
        spectra = [one(i) for i in range(n_surrogates)]
    spectra = np.vstack(spectra)
    return SurrogateEnsemble(
        kind=kind,
        n_surrogates=n_surrogates,
        spectra=spectra,
        rank_quantiles=np.quantile(spectra, confidence, axis=0),
        confidence=confidence,
        reference=reference,
    )


def effective_dimension(
    actual: Sequence[float],
    ensemble: SurrogateEnsemble,
    confidence: float | None = None,
) -> EffectiveDimensionResult:
    """Count leading ranks where ``actual`` beats the surrogate quantile.

    The count stops at the first rank that does not exceed its threshold.
    """
    if ensemble.spectra.size == 0 or ensemble.n_surrogates < 1:
        raise ParameterError("surrogate ensemble is empty")
    actual = np.asarray(actual, dtype=float)
    if actual.shape != ensemble.spectra.shape[1:]:
        raise ParameterError(
            f"actual spectrum has length {actual.size}, ensemble spectra "
            f"have length {ensemble.spectra.shape[1]}"
        )
    if confidence is None or confidence == ensemble.confidence:
        confidence = ensemble.confidence
        threshold = ensemble.rank_quantiles
    else:
        _check_confidence(confidence)
        threshold = np.quantile(ensemble.spectra, confidence, axis=0)
    above = actual > threshold
    f = int(above.size if above.all() else np.argmin(above))
    return EffectiveDimensionResult(f, actual, np.asarray(threshold), confidence)


def estimate_effective_dimension(
    window: NormalizedWindow,
    kind: str = TIME_PERMUTED,
    n_surrogates: int = DEFAULT_N_SURROGATES,
    confidence: float = DEFAULT_CONFIDENCE,
    seed: int = 0,
    reference: str = ORIGIN,
    threads: int | None = None,
) -> EffectiveDimensionResult:
    """Effective dimension of ``window`` against its own surrogates."""
    ensemble = build_ensemble(
        window, kind, n_surrogates, confidence, seed, reference, threads
    )
    return effective_dimension(window_spectrum(window, reference), ensemble)


__all__ = [
    "CENTER_OF_MASS",
    "GAUSSIAN",
    "ORIGIN",
    "TIME_PERMUTED",
    "EffectiveDimensionResult",
    "SurrogateEnsemble",
    "build_ensemble",
    "effective_dimension",
    "estimate_effective_dimension",
    "gaussian_surrogate",
    "permute_surrogate",
    "window_spectrum",
]
