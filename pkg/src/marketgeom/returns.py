"""Log returns and per-window normalized return vectors.

Moments inside a window are plain averages over the ``n`` observations
(divide by ``n``). Under that convention every normalized vector has zero
sum and unit Euclidean norm, so the dot product of two of them is the
correlation coefficient of the underlying returns.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .data_ingest import PricePanel
from .errors import DegenerateAssetError, InsufficientDataError, ParameterError, ValidationError

# relative size of the de-meaned returns below which a stock counts as constant
_DEGENERATE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class ReturnsPanel:
    dates: tuple[dt.date, ...]
    tickers: tuple[str, ...]
    returns: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "tickers", tuple(self.tickers))
        r = np.array(self.returns, dtype=float, copy=True)
        r.setflags(write=False)
        object.__setattr__(self, "returns", r)
        if r.shape != (len(self.dates), len(self.tickers)):
            raise ValidationError(
                f"returns has shape {r.shape}, expected "
                f"({len(self.dates)}, {len(self.tickers)})"
            )

    def __len__(self):
        return len(self.dates)


@dataclass(frozen=True, eq=False)
class NormalizedWindow:
    """Normalized return vectors of ``N`` stocks over ``n`` observations.

    Row ``k`` of ``vectors`` belongs to ``tickers[k]``. ``means`` and
    ``stds`` are the population moments of the raw returns the rows were
    built from.
    """

    window_start: int
    n: int
    vectors: np.ndarray
    tickers: tuple[str, ...] = ()
    means: np.ndarray | None = None
    stds: np.ndarray | None = None

    @property
    def n_assets(self) -> int:
        return self.vectors.shape[0]


def log_returns(panel: PricePanel) -> ReturnsPanel:
    """Daily log returns, labelled by the later date of each pair."""
    if panel.has_missing:
        raise ValidationError("panel has missing prices; align it first")
    T = len(panel.dates)
    if T < 2:
        raise InsufficientDataError(f"need at least 2 dates for returns, got {T}")
    logp = np.log(panel.prices)
    return ReturnsPanel(panel.dates[1:], panel.tickers, logp[1:] - logp[:-1])


def normalize_rows(x: np.ndarray, tickers=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normalize each row of ``x`` (stocks x observations).

    Returns ``(vectors, means, stds)``. Raises :class:`DegenerateAssetError`
    naming every stock whose row is constant.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ParameterError("expected a non-empty stocks x observations matrix")
    n = x.shape[1]
    means = x.mean(axis=1)
    dev = x - means[:, None]
    norms = np.sqrt(np.einsum("ij,ij->i", dev, dev))
    scale = np.sqrt(np.einsum("ij,ij->i", x, x))
    degenerate = ~(norms > _DEGENERATE_RTOL * np.maximum(scale, np.finfo(float).tiny))
    if degenerate.any():
        idx = np.flatnonzero(degenerate)
        names = [tickers[i] if tickers is not None else str(i) for i in idx]
        raise DegenerateAssetError(
            f"zero return variance for {', '.join(map(str, names))}", names
        )
    # ||r - <r>|| == sqrt(n (<r^2> - <r>^2))
    return dev / norms[:, None], means, norms / np.sqrt(n)


def normalize_window(returns: ReturnsPanel, start: int, n: int) -> NormalizedWindow:
    """Normalized vectors for return rows ``start .. start + n - 1``."""
    if n < 1 or start < 0:
        raise ParameterError("window start must be >= 0 and length >= 1")
    if start + n > len(returns):
        raise InsufficientDataError(
            f"window [{start}, {start + n}) runs past the {len(returns)} return rows"
        )
    raw = returns.returns[start : start + n].T
    vectors, means, stds = normalize_rows(raw, returns.tickers)
    return NormalizedWindow(start, n, vectors, returns.tickers, means, stds)


__all__ = [
    "NormalizedWindow",
    "ReturnsPanel",
    "log_returns",
    "normalize_rows",
    "normalize_window",
]
