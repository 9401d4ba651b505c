"""Correlation and distance matrices and the stock-cloud embedding.

Each stock is a point on the unit sphere (its normalized return vector).
:func:`embed` recovers Euclidean coordinates for the cloud from the
distance matrix by classical scaling: the squared distances are
double-centered about the center of mass and the resulting Gram matrix is
eigendecomposed. With unit masses that Gram matrix has the same nonzero
spectrum and principal axes as the cloud's inertia tensor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonEuclideanError, NumericalIntegrityError
from .returns import NormalizedWindow

RADICAND_TOL = 1e-12
NEGATIVE_EIG_RTOL = 1e-8
AXIS_FLOOR_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class MarketEmbedding:
    """Stock coordinates on the retained principal axes.

    ``coordinates[k]`` is stock ``k``; column ``j`` is the ``j``-th axis,
    ordered by descending ``eigenvalues``. ``total_norms[k]`` is the length
    of stock ``k``'s full position vector relative to the center of mass.
    """

    coordinates: np.ndarray
    eigenvalues: np.ndarray
    total_norms: np.ndarray

    @property
    def n_assets(self) -> int:
        return self.coordinates.shape[0]

    @property
    def dimension(self) -> int:
        return self.coordinates.shape[1]


def correlation_matrix(window: NormalizedWindow) -> CorrelationMatrix:
    """Pairwise correlations as dot products of the normalized vectors."""
    rho = window.vectors
    C = rho @ rho.T
    C = 0.5 * (C + C.T)
    np.fill_diagonal(C, 1.0)
    return CorrelationMatrix(np.clip(C, -1.0, 1.0))


def distance_matrix(corr: CorrelationMatrix) -> DistanceMatrix:
    """``d = sqrt(2 (1 - C))``, the chord length between unit vectors."""
    radicand = 2.0 * (1.0 - np.asarray(corr.values, dtype=float))
    worst = radicand.min() if radicand.size else 0.0
    if worst < -RADICAND_TOL:
        k, l = np.unravel_index(np.argmin(radicand), radicand.shape)
        raise NumericalIntegrityError(
            f"correlation {corr.values[k, l]!r} between assets {k} and {l} "
            "exceeds 1 beyond rounding"
        )
    D = np.sqrt(np.maximum(radicand, 0.0))
    np.fill_diagonal(D, 0.0)
    return DistanceMatrix(D)


def gram_matrix(distances: DistanceMatrix) -> np.ndarray:
    """Double-centered Gram matrix ``-1/2 J D^2 J``."""
    D2 = np.asarray(distances.values, dtype=float) ** 2
    # J D2 J without forming J
    row = D2.mean(axis=1, keepdims=True)
    col = D2.mean(axis=0, keepdims=True)
    B = -0.5 * (D2 - row - col + D2.mean())
    return 0.5 * (B + B.T)


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    # first component that is clearly nonzero made positive
    for j in range(vecs.shape[1]):
        v = vecs[:, j]
        big = np.flatnonzero(np.abs(v) > 1e-12 * max(np.abs(v).max(), 1e-300))
        if big.size and v[big[0]] < 0:
            vecs[:, j] = -v
    return vecs


def sorted_eigh(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of symmetric ``M``, eigenvalues descending.

    Equal eigenvalues keep the solver's index order.
    """
    vals, vecs = np.linalg.eigh(M)
    order = np.argsort(-vals, kind="stable")
    return vals[order], vecs[:, order]


def embed(distances: DistanceMatrix) -> MarketEmbedding:
    """Classical-scaling coordinates of the stock cloud."""
    B = gram_matrix(distances)
    N = B.shape[0]
    if N == 0:
        return MarketEmbedding(np.zeros((0, 0)), np.zeros(0), np.zeros(0))
    vals, vecs = sorted_eigh(B)
    top = max(vals[0], 0.0)
    if vals[-1] < -NEGATIVE_EIG_RTOL * top:
        raise NonEuclideanError(
            f"Gram matrix eigenvalue {vals[-1]:.3e} is negative beyond "
            f"tolerance (largest {top:.3e}); distances are not Euclidean"
        )
    keep = vals > AXIS_FLOOR_RTOL * top if top > 0 else np.zeros(N, dtype=bool)
    vals = vals[keep]
    vecs = _fix_signs(vecs[:, keep].copy())
    coords = vecs * np.sqrt(vals)
    norms = np.sqrt(np.einsum("ij,ij->i", coords, coords))
    return MarketEmbedding(coords, vals, norms)


def eigenvalue_spectrum(embedding: MarketEmbedding) -> np.ndarray:
    """Retained eigenvalues, descending, zero-padded to length ``N - 1``."""
    # the centering projector has rank N - 1, so at most N - 1 axes are retained
    out = np.zeros(max(embedding.n_assets - 1, 0))
    m = min(out.size, embedding.eigenvalues.size)
    out[:m] = embedding.eigenvalues[:m]
    return out


def origin_spectrum(window: NormalizedWindow) -> np.ndarray:
    """Inertia spectrum of the cloud about the origin, length ``N - 1``.

    These are the eigenvalues of the correlation matrix, so a common factor
    shared by every stock shows up as a leading eigenvalue instead of being
    absorbed into the center of mass.
    """
    rho = window.vectors
    N, n = rho.shape
    # the nonzero spectra of rho rho^T and rho^T rho coincide
    M = rho.T @ rho if n < N else rho @ rho.T
    vals = np.sort(np.linalg.eigvalsh(M))[::-1]
    out = np.zeros(max(N - 1, 0))
    m = min(out.size, vals.size)
    out[:m] = np.maximum(vals[:m], 0.0)
    return out


def center_of_mass_spectrum(window: NormalizedWindow) -> np.ndarray:
    """Embedding spectrum of ``window`` (inertia about the center of mass)."""
    rho = window.vectors
    N, n = rho.shape
    centered = rho - rho.mean(axis=0)
    M = centered.T @ centered if n < N else centered @ centered.T
    vals = np.sort(np.linalg.eigvalsh(M))[::-1]
    out = np.zeros(max(N - 1, 0))
    m = min(out.size, vals.size)
    out[:m] = np.maximum(vals[:m], 0.0)
    return out


__all__ = [
    "CorrelationMatrix",
    "DistanceMatrix",
    "MarketEmbedding",
    "center_of_mass_spectrum",
    "correlation_matrix",
    "distance_matrix",
    "eigenvalue_spectrum",
    "embed",
    "gram_matrix",
    "origin_spectrum",
    "sorted_eigh",
]
