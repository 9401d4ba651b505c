"""Systematic covariance and Mardia multivariate kurtosis.

The observations fed to Mardia's statistic are the ``N`` stock positions in
the leading ``f`` embedding axes of one window, so ``p = f`` variables and
``N`` observations per window. The scatter is the population covariance of
those positions (the inertia tensor of the restricted cloud).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateBaselineError,
    DimensionError,
    NumericalIntegrityError,
    ParameterError,
    SingularCovarianceError,
)
from .geometry import MarketEmbedding

MAX_SCATTER_CONDITION = 1e12
RADICAND_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class EffectiveSubspace:
    """Restriction of every stock to the first ``f`` embedding axes.

    ``mu[k]`` is the share of stock ``k``'s position-vector length that lies
    inside the subspace.
    """

    f: int
    coordinates: np.ndarray
    mu: np.ndarray
    restricted_distances: np.ndarray


@dataclass(frozen=True, eq=False)
class SystematicCovariance:
    values: np.ndarray
    raw_means: np.ndarray
    raw_second_moments: np.ndarray


@dataclass(frozen=True)
class KurtosisPoint:
    """Kurtosis statistics of one rolling window.

    ``b2p``, ``t2`` and ``g`` are ``nan`` when the window could not be
    tested; ``note`` then says why.
    """

    window_index: int
    b2p: float
    t2: float
    g: float = math.nan
    end_date: object = None
    n_assets: int = 0
    note: str = ""

    @property
    def valid(self) -> bool:
        return math.isfinite(self.b2p)


@dataclass(frozen=True)
class Baseline:
    mean_b2p: float
    std_b2p: float
    period: tuple[int, int]
    n_windows: int = 0


def pairwise_distances(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def restrict_to_subspace(embedding: MarketEmbedding, f: int) -> EffectiveSubspace:
    """Keep the first ``f`` axes of ``embedding``."""
    if f < 1:
        raise DimensionError(f"subspace dimension must be >= 1, got {f}")
    if f > embedding.dimension:
        raise DimensionError(
            f"subspace dimension {f} exceeds the {embedding.dimension} "
            "retained embedding axes"
        )
    coords = np.array(embedding.coordinates[:, :f])
    restricted = np.sqrt(np.einsum("ij,ij->i", coords, coords))
    total = np.asarray(embedding.total_norms, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        mu = np.where(total > 0, restricted / np.where(total > 0, total, 1.0), 0.0)
    return EffectiveSubspace(f, coords, mu, pairwise_distances(coords))


def systematic_covariance(
    subspace: EffectiveSubspace, raw_window: np.ndarray
) -> SystematicCovariance:
    """Covariance rebuilt from distances inside the systematic subspace.

    ``raw_window`` holds the window's raw returns, observations by stocks,
    in the same stock order as ``subspace``.
    """
    r = np.asarray(raw_window, dtype=float)
    N = subspace.coordinates.shape[0]
    if r.ndim != 2 or r.shape[1] != N:
        raise ParameterError(
            f"raw window must be observations x {N} stocks, got shape {r.shape}"
        )
    means = r.mean(axis=0)
    second = np.einsum("ti,ti->i", r, r) / r.shape[0]
    radicand = second - means**2
    if radicand.min() < -RADICAND_TOL:
        k = int(np.argmin(radicand))
        raise NumericalIntegrityError(
            f"negative variance {radicand[k]!r} for stock {k}"
        )
    scale = subspace.mu * np.sqrt(np.maximum(radicand, 0.0))
    shape = 1.0 - 0.5 * subspace.restricted_distances**2
    values = np.outer(scale, scale) * shape
    return SystematicCovariance(0.5 * (values + values.T), means, second)


def population_scatter(points: np.ndarray) -> np.ndarray:
    z = np.asarray(points, dtype=float)
    zc = z - z.mean(axis=0)
    return zc.T @ zc / z.shape[0]


def mardia_b2p(points: np.ndarray, scatter: np.ndarray) -> float:
    """Mardia's multivariate kurtosis of ``points`` (observations x p).

    Squared Mahalanobis distances of the observations from their mean under
    ``scatter``, squared and averaged.
    """
    z = np.asarray(points, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    N, p = z.shape
    S = np.atleast_2d(np.asarray(scatter, dtype=float))
    if S.shape != (p, p):
        raise DimensionError(f"scatter must be {p}x{p}, got {S.shape}")
    if N <= p:
        raise DimensionError(f"need more observations than variables ({N} <= {p})")
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > MAX_SCATTER_CONDITION:
        raise SingularCovarianceError(
            f"scatter condition number {cond:.3e} exceeds {MAX_SCATTER_CONDITION:.0e}"
        )
    zc = z - z.mean(axis=0)
    m = np.einsum("ij,ij->i", zc, np.linalg.solve(S, zc.T).T)
    return float(np.mean(m**2))


def mardia_t2(b2p: float, p: int, N: int) -> float:
    """Asymptotically standard-normal standardization of ``b2p``."""
    if p < 1 or N < 1:
        raise ParameterError("p and N must be positive")
    return (b2p - (p * p + 2 * p)) / math.sqrt((8 * p * p + 16 * p) / N)


def subspace_kurtosis(subspace: EffectiveSubspace) -> tuple[float, float]:
    """``(b2p, t2)`` of the stock cloud inside ``subspace``."""
    z = subspace.coordinates
    b2p = mardia_b2p(z, population_scatter(z))
    return b2p, mardia_t2(b2p, subspace.f, z.shape[0])


def g_statistic(
    points: Sequence[KurtosisPoint], baseline: Baseline
) -> list[KurtosisPoint]:
    """Standardize every ``b2p`` by the baseline mean and standard deviation."""
    if not baseline.std_b2p > 0:
        raise DegenerateBaselineError(
            f"baseline standard deviation is {baseline.std_b2p!r}"
        )
    return [
        replace(pt, g=(pt.b2p - baseline.mean_b2p) / baseline.std_b2p) for pt in points
    ]


__all__ = [
    "Baseline",
    "EffectiveSubspace",
    "KurtosisPoint",
    "SystematicCovariance",
    "g_statistic",
    "mardia_b2p",
    "mardia_t2",
    "population_scatter",
    "restrict_to_subspace",
    "subspace_kurtosis",
    "systematic_covariance",
]
