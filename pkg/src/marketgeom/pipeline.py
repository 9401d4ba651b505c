"""Rolling-window kurtosis analysis with business-as-usual calibration.

Windows are trailing: window ``t`` covers return rows
``[t * step, t * step + n)`` and is labelled by the date of its last row.
Each window runs normalize -> correlation -> distance -> embedding ->
restriction to ``f`` axes -> Mardia ``b2p`` and ``t2``. A second pass
calibrates the baseline over the business-as-usual windows, fills ``g``
and flags windows whose ``|g|`` exceeds the normal critical value.
"""

from __future__ import annotations

import datetime as dt
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from statistics import NormalDist
from typing import Callable, Sequence

import numpy as np

from .data_ingest import PricePanel
from .errors import (
    CalibrationError,
    DegenerateAssetError,
    DegenerateBaselineError,
    DimensionError,
    InsufficientDataError,
    NumericalIntegrityError,
    ParameterError,
    SingularCovarianceError,
)
from .geometry import (
    CorrelationMatrix,
    DistanceMatrix,
    MarketEmbedding,
    correlation_matrix,
    distance_matrix,
    embed,
)
from .kurtosis import (
    Baseline,
    KurtosisPoint,
    g_statistic,
    restrict_to_subspace,
    subspace_kurtosis,
)
from .returns import NormalizedWindow, ReturnsPanel, log_returns, normalize_rows
from .surrogates import (
    DEFAULT_CONFIDENCE,
    DEFAULT_N_SURROGATES,
    ORIGIN,
    SPECTRUM_REFERENCES,
    SURROGATE_KINDS,
    TIME_PERMUTED,
    EffectiveDimensionResult,
    estimate_effective_dimension,
)

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 50
DEFAULT_F = 6
DEFAULT_ALPHA = 0.05


@dataclass(frozen=True)
class BaselinePeriod:
    """Business-as-usual windows used for calibration.

    Integer bounds select window indices ``start <= t < end``. Date bounds
    select windows whose end date lies in ``[start, end]``.
    """

    start: int | dt.date
    end: int | dt.date

    def __post_init__(self):
        if isinstance(self.start, int) != isinstance(self.end, int):
            raise ParameterError("baseline bounds must both be indices or both dates")
        if self.end < self.start:
            raise ParameterError("baseline end precedes its start")

    @property
    def by_index(self) -> bool:
        return isinstance(self.start, int)

    @classmethod
    def parse(cls, text: str) -> "BaselinePeriod":
        """Parse ``start:end`` with integer window indices or ISO dates."""
        parts = str(text).split(":")
        if len(parts) != 2 or not all(p.strip() for p in parts):
            raise ParameterError(f"baseline must look like start:end, got {text!r}")
        a, b = (p.strip() for p in parts)
        try:
            return cls(int(a), int(b))
        except ValueError:
            pass
        try:
            return cls(dt.date.fromisoformat(a), dt.date.fromisoformat(b))
        except ValueError:
            raise ParameterError(f"cannot parse baseline bounds {text!r}") from None

    def select(self, end_dates: Sequence[dt.date]) -> list[int]:
        if self.by_index:
            return list(range(max(self.start, 0), min(self.end, len(end_dates))))
        return [i for i, d in enumerate(end_dates) if self.start <= d <= self.end]

    def __str__(self):
        fmt = lambda v: v.isoformat() if isinstance(v, dt.date) else str(v)
        return f"{fmt(self.start)}:{fmt(self.end)}"


@dataclass(frozen=True)
class AnalysisConfig:
    baseline: BaselinePeriod
    window_length: int = DEFAULT_WINDOW
    step: int = 1
    f: int = DEFAULT_F
    alpha: float = DEFAULT_ALPHA
    two_sided: bool = True
    estimate_f: bool = False
    surrogate_kind: str = TIME_PERMUTED
    n_surrogates: int = DEFAULT_N_SURROGATES
    confidence: float = DEFAULT_CONFIDENCE
    spectrum_reference: str = ORIGIN
    seed: int = 0

    def __post_init__(self):
        if self.f < 1:
            raise ParameterError("f must be at least 1")
        if self.window_length < self.f + 2:
            raise ParameterError(
                f"window length {self.window_length} must be >= f + 2 = {self.f + 2}"
            )
        if self.step < 1:
            raise ParameterError("step must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError("alpha must lie in (0, 1)")
        if self.surrogate_kind not in SURROGATE_KINDS:
            raise ParameterError(f"unknown surrogate kind {self.surrogate_kind!r}")
        if self.spectrum_reference not in SPECTRUM_REFERENCES:
            raise ParameterError(f"unknown spectrum reference {self.spectrum_reference!r}")
        if self.n_surrogates < 1:
            raise ParameterError("n_surrogates must be at least 1")
        if not 0.0 < self.confidence < 1.0:
            raise ParameterError("confidence must lie in (0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["baseline"] = str(self.baseline)
        return d


@dataclass(frozen=True, eq=False)
class WindowGeometry:
    window_index: int
    end_date: dt.date
    tickers: tuple[str, ...]
    correlation: CorrelationMatrix
    distances: DistanceMatrix
    embedding: MarketEmbedding


@dataclass(frozen=True, eq=False)
class KurtosisSeries:
    points: list[KurtosisPoint]
    baseline: Baseline
    flags: list[bool]
    config: AnalysisConfig
    f: int
    critical_value: float
    baseline_windows: tuple[int, ...] = ()
    dimension_estimate: EffectiveDimensionResult | None = None

    @property
    def g(self) -> np.ndarray:
        return np.array([p.g for p in self.points])

    @property
    def b2p(self) -> np.ndarray:
        return np.array([p.b2p for p in self.points])


def window_count(n_returns: int, window_length: int, step: int) -> int:
    if n_returns < window_length:
        return 0
    return (n_returns - window_length) // step + 1


def critical_value(alpha: float, two_sided: bool = True) -> float:
    """Standard-normal critical value for a test at level ``alpha``."""
    if not 0.0 < alpha < 1.0:
        raise ParameterError("alpha must lie in (0, 1)")
    return NormalDist().inv_cdf(1.0 - alpha / 2.0 if two_sided else 1.0 - alpha)


def _normalize_dropping_degenerate(raw: np.ndarray, tickers: Sequence[str]):
    """Normalize rows of ``raw``, leaving out constant stocks."""
    keep = list(range(len(tickers)))
    try:
        vectors, means, stds = normalize_rows(raw, tickers)
        return keep, vectors, means, stds, ()
    except DegenerateAssetError as exc:
        bad = set(exc.tickers)
    keep = [k for k, t in enumerate(tickers) if t not in bad]
    if not keep:
        raise DegenerateAssetError("every stock is constant in the window", tickers)
    vectors, means, stds = normalize_rows(raw[keep], [tickers[k] for k in keep])
    return keep, vectors, means, stds, tuple(sorted(bad))


def analyze_window(
    returns: ReturnsPanel,
    index: int,
    start: int,
    n: int,
    f: int,
    geometry_sink: Callable[[WindowGeometry], None] | None = None,
) -> KurtosisPoint:
    """``b2p`` and ``t2`` of one window, or a gap point with a note."""
    end_date = returns.dates[start + n - 1]
    raw = returns.returns[start : start + n].T
    gap = dict(window_index=index, b2p=math.nan, t2=math.nan, end_date=end_date)
    try:
        keep, vectors, means, stds, dropped = _normalize_dropping_degenerate(
            raw, returns.tickers
        )
    except DegenerateAssetError as exc:
        return KurtosisPoint(**gap, note=str(exc))
    tickers = tuple(returns.tickers[k] for k in keep)
    note = f"constant returns dropped: {', '.join(dropped)}" if dropped else ""
    window = NormalizedWindow(start, n, vectors, tickers, means, stds)
    try:
        corr = correlation_matrix(window)
        dist = distance_matrix(corr)
        emb = embed(dist)
    except NumericalIntegrityError as exc:
        raise type(exc)(f"window {index} ending {end_date.isoformat()}: {exc}") from exc
    if geometry_sink is not None:
        geometry_sink(WindowGeometry(index, end_date, tickers, corr, dist, emb))
    N = len(tickers)
    if N <= f:
        return KurtosisPoint(
            **gap, n_assets=N, note=f"only {N} stocks for {f} variables"
        )
    try:
        sub = restrict_to_subspace(emb, f)
        b2p, t2 = subspace_kurtosis(sub)
    except (DimensionError, SingularCovarianceError) as exc:
        return KurtosisPoint(**gap, n_assets=N, note="; ".join(filter(None, [note, str(exc)])))
    return KurtosisPoint(index, b2p, t2, math.nan, end_date, N, note)


def calibrate_baseline(
    points: Sequence[KurtosisPoint] | Sequence[float],
    period: tuple[int, int] | Sequence[int],
) -> Baseline:
    """Sample mean and standard deviation of ``b2p`` over the baseline.

    ``period`` is either a half-open ``(start, end)`` index range or an
    explicit list of indices into ``points``. Gaps are skipped.
    """
    values = [p.b2p if isinstance(p, KurtosisPoint) else float(p) for p in points]
    if isinstance(period, tuple) and len(period) == 2:
        idx = list(range(max(period[0], 0), min(period[1], len(values))))
    else:
        idx = list(period)
    chosen = np.array([values[i] for i in idx if math.isfinite(values[i])])
    span = (min(idx), max(idx) + 1) if idx else (0, 0)
    if chosen.size < 2:
        raise CalibrationError(
            f"baseline period {span} holds {chosen.size} valid windows; need at least 2"
        )
    std = float(np.std(chosen, ddof=1))
    if not std > 0:
        raise DegenerateBaselineError(
            f"b2p is constant ({chosen[0]!r}) over the baseline period {span}"
        )
    return Baseline(float(np.mean(chosen)), std, span, int(chosen.size))


def flag_crises(
    series: KurtosisSeries | Sequence[KurtosisPoint],
    alpha: float = DEFAULT_ALPHA,
    two_sided: bool = True,
) -> list[bool]:
    """Flag points whose ``g`` lies beyond the normal critical value.

    One-sided mode flags only ``g`` above the critical value. Gaps are
    never flagged.
    """
    points = series.points if isinstance(series, KurtosisSeries) else series
    crit = critical_value(alpha, two_sided)
    flags = []
    for p in points:
        g = p.g
        if not math.isfinite(g):
            flags.append(False)
        else:
            flags.append(bool(abs(g) > crit if two_sided else g > crit))
    return flags


def _resolve_f(
    returns: ReturnsPanel, config: AnalysisConfig, baseline_idx: list[int], threads
) -> tuple[int, EffectiveDimensionResult | None]:
    if not config.estimate_f:
        return config.f, None
    n, step = config.window_length, config.step
    lo = baseline_idx[0] * step
    hi = baseline_idx[-1] * step + n
    raw = returns.returns[lo:hi].T
    _, vectors, means, stds, _ = _normalize_dropping_degenerate(raw, returns.tickers)
    window = NormalizedWindow(lo, hi - lo, vectors, (), means, stds)
    result = estimate_effective_dimension(
        window,
        kind=config.surrogate_kind,
        n_surrogates=config.n_surrogates,
        confidence=config.confidence,
        seed=config.seed,
        reference=config.spectrum_reference,
        threads=threads,
    )
    f = min(max(result.f, 1), n - 2, vectors.shape[0] - 1)
    if f != result.f:
        logger.warning("estimated f=%d clamped to %d", result.f, f)
    logger.info("effective dimension estimated on baseline rows [%d, %d): f=%d", lo, hi, f)
    return max(f, 1), result


def rolling_analysis(
    panel: PricePanel,
    config: AnalysisConfig,
    threads: int | None = None,
    geometry_sink: Callable[[WindowGeometry], None] | None = None,
) -> KurtosisSeries:
    """Kurtosis series over trailing windows of ``panel``."""
    returns = log_returns(panel)
    n, step = config.window_length, config.step
    n_windows = window_count(len(returns), n, step)
    if n_windows == 0:
        raise InsufficientDataError(
            f"{len(returns)} return rows are shorter than one window of {n}"
        )
    logger.info(
        "rolling analysis: window=%d step=%d windows=%d stocks=%d",
        n, step, n_windows, len(returns.tickers),
    )
    end_dates = [returns.dates[t * step + n - 1] for t in range(n_windows)]
    baseline_idx = config.baseline.select(end_dates)
    if not baseline_idx:
        raise CalibrationError(f"baseline period {config.baseline} selects no windows")

    f, estimate = _resolve_f(returns, config, baseline_idx, threads)

    def one(t: int) -> KurtosisPoint:
        return analyze_window(returns, t, t * step, n, f, geometry_sink)

    threads = threads or os.cpu_count() or 1
    if threads > 1 and n_windows > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(one, range(n_windows)))
    else:
        points = [one(t) for t in range(n_windows)]

    baseline = calibrate_baseline(points, baseline_idx)
    points = g_statistic(points, baseline)
    flags = flag_crises(points, config.alpha, config.two_sided)
    return KurtosisSeries(
        points=points,
        baseline=baseline,
        flags=flags,
        config=config,
        f=f,
        critical_value=critical_value(config.alpha, config.two_sided),
        baseline_windows=tuple(baseline_idx),
        dimension_estimate=estimate,
    )


__all__ = [
    "AnalysisConfig",
    "BaselinePeriod",
    "KurtosisSeries",
    "WindowGeometry",
    "analyze_window",
    "calibrate_baseline",
    "critical_value",
    "flag_crises",
    "rolling_analysis",
    "window_count",
]
