"""Price panel loading, alignment and synthetic generation.

A :class:`PricePanel` is a date x ticker matrix of strictly positive close
prices. Missing observations are carried as ``NaN`` until
:func:`align_panel` removes them; every analysis step downstream requires a
complete panel.

File formats
------------
CSV
    First column ``date`` (ISO-8601), one column per ticker, ``.`` decimal
    separator, empty cell for a missing price.
JSON
    ``{"dates": [...], "tickers": [...], "prices": [[...], ...]}`` with
    ``prices`` row-major (one row per date) and ``null`` for a missing price.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    EmptyPanelError,
    ParameterError,
    ParseError,
    StructureError,
    ValidationError,
)

logger = logging.getLogger(__name__)

DROP_ASSET_OVER_THRESHOLD = "drop_asset_over_threshold"
FORWARD_FILL = "forward_fill"
MISSING_POLICIES = (DROP_ASSET_OVER_THRESHOLD, FORWARD_FILL)
DEFAULT_MAX_MISSING_FRACTION = 0.05


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PricePanel:
    """Aligned date x ticker matrix of close prices.

    ``prices[t, k]`` is the close of ``tickers[k]`` on ``dates[t]``. ``NaN``
    marks a missing observation.
    """

    dates: tuple[dt.date, ...]
    tickers: tuple[str, ...]
    prices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "tickers", tuple(str(t) for t in self.tickers))
        object.__setattr__(self, "prices", _readonly(self.prices))
        T, N = len(self.dates), len(self.tickers)
        if self.prices.shape != (T, N):
            raise StructureError(
                f"prices has shape {self.prices.shape}, expected ({T}, {N})"
            )
        if len(set(self.tickers)) != N:
            raise ValidationError("duplicate ticker names")
        for i in range(1, T):
            if not self.dates[i] > self.dates[i - 1]:
                raise ValidationError(
                    f"dates not strictly increasing at row {i}: "
                    f"{self.dates[i - 1]} then {self.dates[i]}"
                )
        observed = ~np.isnan(self.prices)
        bad = observed & ~(np.isfinite(self.prices) & (self.prices > 0))
        if bad.any():
            t, k = np.argwhere(bad)[0]
            raise ValidationError(
                f"invalid price {self.prices[t, k]!r} for ticker "
                f"{self.tickers[k]!r} on {self.dates[t].isoformat()}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.prices.shape

    @property
    def has_missing(self) -> bool:
        return bool(np.isnan(self.prices).any())

    def missing_fraction(self) -> np.ndarray:
        if len(self.dates) == 0:
            return np.zeros(len(self.tickers))
        return np.isnan(self.prices).mean(axis=0)

    def select_tickers(self, keep: Sequence[int]) -> "PricePanel":
        keep = list(keep)
        return PricePanel(
            self.dates, [self.tickers[k] for k in keep], self.prices[:, keep]
        )

    def equals(self, other: "PricePanel") -> bool:
        return (
            self.dates == other.dates
            and self.tickers == other.tickers
            and np.array_equal(self.prices, other.prices, equal_nan=True)
        )


def _sorted_panel(dates, tickers, prices) -> PricePanel:
    order = sorted(range(len(dates)), key=lambda i: dates[i])
    dates = [dates[i] for i in order]
    for a, b in zip(dates, dates[1:]):
        if a == b:
            raise ValidationError(f"duplicate date {a.isoformat()}")
    prices = np.asarray(prices, dtype=float).reshape(len(order), len(tickers))
    return PricePanel(dates, tickers, prices[order])


def _parse_date(text, row: int) -> dt.date:
    try:
        return dt.date.fromisoformat(str(text).strip())
    except ValueError:
        # full timestamps are accepted; only the calendar day is kept
        try:
            return dt.datetime.fromisoformat(str(text).strip()).date()
        except ValueError:
            raise ParseError(f"row {row}: malformed date {text!r}") from None


def _parse_price(cell, row: int, ticker: str) -> float:
    if cell is None:
        return math.nan
    if isinstance(cell, (int, float)) and not isinstance(cell, bool):
        return float(cell)
    text = str(cell).strip()
    if text == "":
        return math.nan
    try:
        value = float(text)
    except ValueError:
        raise ParseError(
            f"row {row}: cannot parse price {text!r} for ticker {ticker!r}"
        ) from None
    if math.isnan(value):
        raise ParseError(
            f"row {row}: explicit NaN for ticker {ticker!r}; use an empty cell"
        )
    return value


def _check_prices(dates, tickers, prices):
    arr = np.asarray(prices, dtype=float)
    observed = ~np.isnan(arr)
    bad = observed & ~(np.isfinite(arr) & (arr > 0))
    if bad.any():
        t, k = np.argwhere(bad)[0]
        raise ValidationError(
            f"non-positive or non-finite price {arr[t, k]!r} for ticker "
            f"{tickers[k]!r} on {dates[t].isoformat()}"
        )


def _load_csv(path: Path) -> PricePanel:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise StructureError(f"{path}: empty file") from None
        if len(header) < 2 or header[0].strip().lower() != "date":
            raise StructureError(
                f"{path}: header must start with 'date' followed by tickers"
            )
        tickers = [h.strip() for h in header[1:]]
        dates, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise StructureError(
                    f"{path}: row {lineno} has {len(row)} fields, "
                    f"expected {len(header)}"
                )
            dates.append(_parse_date(row[0], lineno))
            rows.append([_parse_price(c, lineno, t) for c, t in zip(row[1:], tickers)])
    prices = np.array(rows, dtype=float).reshape(len(rows), len(tickers))
    _check_prices(dates, tickers, prices)
    return _sorted_panel(dates, tickers, prices)


def _load_json(path: Path) -> PricePanel:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(obj, dict) or not {"dates", "tickers", "prices"} <= obj.keys():
        raise StructureError(f"{path}: expected keys 'dates', 'tickers', 'prices'")
    tickers = [str(t) for t in obj["tickers"]]
    raw_rows = obj["prices"]
    if len(raw_rows) != len(obj["dates"]):
        raise StructureError(
            f"{path}: {len(obj['dates'])} dates but {len(raw_rows)} price rows"
        )
    dates, rows = [], []
    for i, (d, row) in enumerate(zip(obj["dates"], raw_rows)):
        if not isinstance(row, list) or len(row) != len(tickers):
            raise StructureError(
                f"{path}: price row {i} does not have {len(tickers)} entries"
            )
        dates.append(_parse_date(d, i))
        rows.append([_parse_price(c, i, t) for c, t in zip(row, tickers)])
    prices = np.array(rows, dtype=float).reshape(len(rows), len(tickers))
    _check_prices(dates, tickers, prices)
    return _sorted_panel(dates, tickers, prices)


def _infer_format(path: Path, format: str | None) -> str:
    if format is None:
        format = path.suffix.lstrip(".").lower()
    format = format.lower()
    if format not in ("csv", "json"):
        raise ParameterError(f"unsupported panel format {format!r}")
    return format


def load_price_panel(path, format: str | None = None) -> PricePanel:
    """Load a price panel from CSV or JSON, sorted by date.

    ``format`` defaults to the file suffix.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if _infer_format(path, format) == "csv":
        return _load_csv(path)
    return _load_json(path)


def write_panel(panel: PricePanel, path, format: str | None = None) -> None:
    """Write ``panel`` so that :func:`load_price_panel` reproduces it exactly."""
    path = Path(path)
    if _infer_format(path, format) == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["date", *panel.tickers])
            for d, row in zip(panel.dates, panel.prices):
                writer.writerow(
                    [d.isoformat()] + ["" if math.isnan(v) else repr(float(v)) for v in row]
                )
    else:
        obj = {
            "dates": [d.isoformat() for d in panel.dates],
            "tickers": list(panel.tickers),
            "prices": [
                [None if math.isnan(v) else float(v) for v in row]
                for row in panel.prices
            ],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(obj, fh)


@dataclass(frozen=True)
class DroppedAsset:
    ticker: str
    missing_fraction: float
    reason: str


def _fill_column(col: np.ndarray) -> np.ndarray:
    """Forward-fill NaNs; leading NaNs take the first observation."""
    out = col.copy()
    observed = np.flatnonzero(~np.isnan(out))
    if observed.size == 0:
        return out
    out[: observed[0]] = out[observed[0]]
    idx = np.where(np.isnan(out), 0, np.arange(out.size))
    np.maximum.accumulate(idx, out=idx)
    return out[idx]


def align_panel_with_report(
    panel: PricePanel,
    policy: str = DROP_ASSET_OVER_THRESHOLD,
    max_missing_fraction: float = DEFAULT_MAX_MISSING_FRACTION,
) -> tuple[PricePanel, list[DroppedAsset]]:
    """Like :func:`align_panel` but also return the list of dropped assets."""
    if policy not in MISSING_POLICIES:
        raise ParameterError(f"unknown missing-data policy {policy!r}")
    if not 0.0 <= max_missing_fraction <= 1.0:
        raise ParameterError("max_missing_fraction must lie in [0, 1]")

    frac = panel.missing_fraction()
    dropped: list[DroppedAsset] = []
    keep = []
    for k, ticker in enumerate(panel.tickers):
        if frac[k] >= 1.0:
            dropped.append(DroppedAsset(ticker, 1.0, "entirely missing"))
            warnings.warn(f"asset {ticker!r} has no observations; dropped", stacklevel=2)
        elif policy == DROP_ASSET_OVER_THRESHOLD and frac[k] > max_missing_fraction:
            dropped.append(
                DroppedAsset(ticker, float(frac[k]), "missing fraction over threshold")
            )
        else:
            keep.append(k)
    if not keep:
        raise EmptyPanelError("all assets were dropped during alignment")
    for d in dropped:
        logger.info("dropped %s (%.1f%% missing: %s)", d.ticker, 100 * d.missing_fraction, d.reason)

    filled = np.column_stack([_fill_column(panel.prices[:, k]) for k in keep])
    return PricePanel(panel.dates, [panel.tickers[k] for k in keep], filled), dropped


def align_panel(
    panel: PricePanel,
    policy: str = DROP_ASSET_OVER_THRESHOLD,
    max_missing_fraction: float = DEFAULT_MAX_MISSING_FRACTION,
) -> PricePanel:
    """Remove every missing entry from ``panel``.

    With ``drop_asset_over_threshold`` an asset whose missing fraction
    exceeds ``max_missing_fraction`` is dropped. Assets with no observation
    at all are dropped under either policy. Remaining gaps are
    forward-filled, with leading gaps back-filled from the first
    observation. Idempotent.
    """
    return align_panel_with_report(panel, policy, max_missing_fraction)[0]


@dataclass(frozen=True)
class Segment:
    """One regime: ``length`` return days at a common pairwise correlation."""

    length: int
    correlation: float
    volatility: float | tuple[float, ...] = 0.01
    drift: float = 0.0


@dataclass(frozen=True)
class RegimeSpec:
    n_assets: int
    segments: tuple[Segment, ...]
    seed: int = 0
    start_date: dt.date = dt.date(2000, 1, 3)
    initial_price: float = 100.0
    tickers: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if self.n_assets < 1:
            raise ParameterError("n_assets must be at least 1")
        if not self.segments:
            raise ParameterError("at least one segment is required")
        for i, s in enumerate(self.segments):
            if s.length < 2:
                raise ParameterError(f"segment {i}: length must be >= 2")
            if not 0.0 <= s.correlation < 1.0:
                raise ParameterError(f"segment {i}: correlation must lie in [0, 1)")
            vol = np.atleast_1d(np.asarray(s.volatility, dtype=float))
            if vol.size not in (1, self.n_assets):
                raise ParameterError(
                    f"segment {i}: volatility needs 1 or {self.n_assets} values"
                )
            if not np.all(vol > 0) or not np.all(np.isfinite(vol)):
                raise ParameterError(f"segment {i}: volatilities must be > 0")
            if not math.isfinite(s.drift):
                raise ParameterError(f"segment {i}: drift must be finite")
        if not (self.initial_price > 0 and math.isfinite(self.initial_price)):
            raise ParameterError("initial_price must be positive")
        if self.tickers is not None:
            object.__setattr__(self, "tickers", tuple(self.tickers))
            if len(self.tickers) != self.n_assets:
                raise ParameterError("tickers must name every asset")

    @property
    def total_days(self) -> int:
        return sum(s.length for s in self.segments)

    @classmethod
    def from_dict(cls, obj: dict) -> "RegimeSpec":
        try:
            segments = []
            for s in obj["segments"]:
                vol = s.get("volatility", 0.01)
                segments.append(
                    Segment(
                        length=int(s["length"]),
                        correlation=float(s["correlation"]),
                        volatility=tuple(vol) if isinstance(vol, list) else float(vol),
                        drift=float(s.get("drift", 0.0)),
                    )
                )
            kwargs = dict(
                n_assets=int(obj["n_assets"]),
                segments=segments,
                seed=int(obj.get("seed", 0)),
                initial_price=float(obj.get("initial_price", 100.0)),
                tickers=obj.get("tickers"),
            )
            if "start_date" in obj:
                kwargs["start_date"] = dt.date.fromisoformat(obj["start_date"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParameterError(f"invalid regime spec: {exc}") from None
        return cls(**kwargs)


def load_regime_spec(path) -> RegimeSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(obj, dict):
        raise ParameterError(f"{path}: regime spec must be a JSON object")
    return RegimeSpec.from_dict(obj)


def synthetic_log_returns(spec: RegimeSpec) -> np.ndarray:
    """Draw the (days x assets) log-return matrix behind a synthetic panel.

    Within a segment of correlation ``c`` every return is
    ``drift + vol * (sqrt(c) * F_t + sqrt(1 - c) * e_tk)`` with a common
    standard-normal factor ``F_t`` and independent noise ``e_tk``, which
    gives pairwise correlation exactly ``c``.
    """
    rng = np.random.default_rng(spec.seed)
    blocks = []
    for s in spec.segments:
        factor = rng.standard_normal((s.length, 1))
        noise = rng.standard_normal((s.length, spec.n_assets))
        shocks = math.sqrt(s.correlation) * factor + math.sqrt(1.0 - s.correlation) * noise
        vol = np.asarray(s.volatility, dtype=float)
        blocks.append(s.drift + vol * shocks)
    return np.vstack(blocks)


def generate_synthetic_panel(spec: RegimeSpec) -> PricePanel:
    """Geometric random walk prices following the regimes in ``spec``.

    The panel has ``spec.total_days + 1`` rows on consecutive weekdays.
    Deterministic for a fixed ``spec.seed``.
    """
    returns = synthetic_log_returns(spec)
    log_prices = np.vstack(
        [np.zeros((1, spec.n_assets)), np.cumsum(returns, axis=0)]
    ) + math.log(spec.initial_price)
    n_rows = log_prices.shape[0]
    days = np.busday_offset(
        np.datetime64(spec.start_date, "D"), np.arange(n_rows), roll="forward"
    )
    dates = [d.item() for d in days]
    width = max(4, len(str(spec.n_assets)))
    tickers = spec.tickers or tuple(f"S{k:0{width}d}" for k in range(spec.n_assets))
    return PricePanel(dates, tickers, np.exp(log_prices))


__all__ = [
    "DROP_ASSET_OVER_THRESHOLD",
    "FORWARD_FILL",
    "DroppedAsset",
    "PricePanel",
    "RegimeSpec",
    "Segment",
    "align_panel",
    "align_panel_with_report",
    "generate_synthetic_panel",
    "load_price_panel",
    "load_regime_spec",
    "synthetic_log_returns",
    "write_panel",
]
