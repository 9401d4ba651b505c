"""Command-line front end.

Commands
--------
analyze   rolling kurtosis series of a price panel -> gseries.csv, manifest.json
synth     synthetic regime-switching price panel from a JSON regime spec
spectrum  real vs surrogate eigenvalue spectra at one date -> spectrum.csv

Exit codes: 0 success, 2 bad arguments or spec, 3 data/validation error,
4 numerical-integrity error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import json
import logging
import math
import os
import secrets
import sys
import time
from contextlib import contextmanager
from pathlib import Path


from . import __version__
from .data_ingest import (
    DEFAULT_MAX_MISSING_FRACTION,
    MISSING_POLICIES,
    align_panel_with_report,
    generate_synthetic_panel,
    load_price_panel,
    load_regime_spec,
    write_panel,
)
from .errors import DataError, NumericalIntegrityError, ParameterError
from .pipeline import (
    DEFAULT_ALPHA,
    DEFAULT_F,
    AnalysisConfig,
    BaselinePeriod,
    KurtosisSeries,
    WindowGeometry,
    rolling_analysis,
)
from .returns import log_returns, normalize_window
from .surrogates import (
    DEFAULT_CONFIDENCE,
    DEFAULT_N_SURROGATES,
    ORIGIN,
    SPECTRUM_REFERENCES,
    SURROGATE_KINDS,
    TIME_PERMUTED,
    build_ensemble,
    effective_dimension,
    window_spectrum,
)

logger = logging.getLogger("marketgeom")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

GSERIES_COLUMNS = ("window_end_date", "b2p", "t2", "g", "flagged")
SPECTRUM_COLUMNS = ("rank", "actual", "threshold", "significant")


def _fmt(x: float) -> str:
    return "" if not math.isfinite(x) else repr(float(x))


def _csv_writer(fh):
    return csv.writer(fh, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_gseries(series: KurtosisSeries, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _csv_writer(fh)
        w.writerow(GSERIES_COLUMNS)
        for p, flag in zip(series.points, series.flags):
            w.writerow(
                [p.end_date.isoformat(), _fmt(p.b2p), _fmt(p.t2), _fmt(p.g), int(flag)]
            )


def write_spectrum(actual, threshold, f: int, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _csv_writer(fh)
        w.writerow(SPECTRUM_COLUMNS)
        for r, (a, t) in enumerate(zip(actual, threshold)):
            w.writerow([r + 1, _fmt(a), _fmt(t), int(r < f)])


def write_manifest(path, config: dict, input_sha256: str, timings_ms: dict) -> None:
    manifest = {
        "config": config,
        "input_sha256": input_sha256,
        "version": __version__,
        "timings_ms": {k: round(v, 3) for k, v in timings_ms.items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _write_matrix(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _csv_writer(fh)
        w.writerow(header)
        w.writerows(rows)


class GeometryDumper:
    """Write C, D, eigenvalues and coordinates of each window to ``directory``."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def __call__(self, geo: WindowGeometry) -> None:
        stem = self.directory / f"window_{geo.window_index:05d}"
        tickers = list(geo.tickers)
        for name, mat in (
            ("correlation", geo.correlation.values),
            ("distance", geo.distances.values),
        ):
            _write_matrix(
                f"{stem}_{name}.csv",
                ["ticker", *tickers],
                ([t, *map(_fmt, row)] for t, row in zip(tickers, mat)),
            )
        emb = geo.embedding
        _write_matrix(
            f"{stem}_eigenvalues.csv",
            ["rank", "eigenvalue"],
            ([r + 1, _fmt(v)] for r, v in enumerate(emb.eigenvalues)),
        )
        _write_matrix(
            f"{stem}_coordinates.csv",
            ["ticker", *(f"axis_{j + 1}" for j in range(emb.dimension))],
            ([t, *map(_fmt, row)] for t, row in zip(tickers, emb.coordinates)),
        )


@contextmanager
def _timed(timings: dict, stage: str):
    t0 = time.perf_counter()
    try:
        yield
    finally:
        timings[stage] = (time.perf_counter() - t0) * 1000.0


def _threads(args) -> int:
    if args.threads is not None:
        return max(args.threads, 1)
    env = os.environ.get("MG_THREADS")
    if env:
        try:
            return max(int(env), 1)
        except ValueError:
            raise ParameterError(f"MG_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _seed(args) -> int:
    return args.seed if args.seed is not None else secrets.randbits(32)


def _load_aligned(args, timings):
    with _timed(timings, "load"):
        panel = load_price_panel(args.input, args.format)
    with _timed(timings, "align"):
        panel, dropped = align_panel_with_report(panel, args.missing_policy, args.max_missing)
    for d in dropped:
        logger.warning("dropped %s: %s (%.1f%% missing)", d.ticker, d.reason, 100 * d.missing_fraction)
    return panel, dropped


def cmd_analyze(args) -> int:
    timings: dict[str, float] = {}
    threads = _threads(args)
    seed = _seed(args)
    config = AnalysisConfig(
        baseline=BaselinePeriod.parse(args.baseline),
        window_length=args.window,
        step=args.step,
        f=args.f,
        alpha=args.alpha,
        two_sided=not args.one_sided,
        estimate_f=args.estimate_f,
        surrogate_kind=args.kind,
        n_surrogates=args.surrogates,
        confidence=args.confidence,
        spectrum_reference=args.reference,
        seed=seed,
    )
    logger.info("window length n=%d", config.window_length)
    panel, dropped = _load_aligned(args, timings)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    sink = GeometryDumper(out / "geometry") if args.dump_geometry else None
    with _timed(timings, "analysis"):
        series = rolling_analysis(panel, config, threads=threads, geometry_sink=sink)
    with _timed(timings, "write"):
        write_gseries(series, out / "gseries.csv")
    gaps = [p for p in series.points if not p.valid]
    for p in gaps:
        logger.warning("window %d ending %s untestable: %s", p.window_index, p.end_date, p.note)
    resolved = config.to_dict()
    resolved.update(
        resolved_f=series.f,
        threads=threads,
        missing_policy=args.missing_policy,
        max_missing_fraction=args.max_missing,
        dropped_assets=[d.ticker for d in dropped],
        n_assets=len(panel.tickers),
        n_windows=len(series.points),
        n_gaps=len(gaps),
        baseline_mean_b2p=series.baseline.mean_b2p,
        baseline_std_b2p=series.baseline.std_b2p,
        critical_value=series.critical_value,
    )
    write_manifest(out / "manifest.json", resolved, file_sha256(args.input), timings)
    n_flag = sum(series.flags)
    print(
        f"{len(series.points)} windows, {n_flag} flagged "
        f"(|g| > {series.critical_value:.6f}), f={series.f}, output in {out}"
    )
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        spec = load_regime_spec(args.spec)
    except (OSError, ParameterError) as exc:
        print(f"error: invalid regime spec: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.seed is not None:
        spec = type(spec)(**{**spec.__dict__, "seed": args.seed})
    panel = generate_synthetic_panel(spec)
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    write_panel(panel, args.output)
    print(f"wrote {len(panel.dates)} rows x {len(panel.tickers)} assets to {args.output}")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    timings: dict[str, float] = {}
    threads = _threads(args)
    seed = _seed(args)
    try:
        at = dt.date.fromisoformat(args.at)
    except ValueError:
        raise ParameterError(f"--at must be an ISO date, got {args.at!r}") from None
    panel, dropped = _load_aligned(args, timings)
    returns = log_returns(panel)
    if at not in returns.dates:
        raise DataError(f"date {at.isoformat()} is not a return date of the panel")
    end = returns.dates.index(at)
    start = end - args.window + 1
    if start < 0:
        raise DataError(
            f"window of {args.window} returns ending {at.isoformat()} starts before the panel"
        )
    with _timed(timings, "spectrum"):
        window = normalize_window(returns, start, args.window)
        ensemble = build_ensemble(
            window, args.kind, args.surrogates, args.confidence, seed, args.reference, threads
        )
        result = effective_dimension(window_spectrum(window, args.reference), ensemble)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_spectrum(result.actual_spectrum, result.threshold_spectrum, result.f, out / "spectrum.csv")
    config = dict(
        command="spectrum",
        window_length=args.window,
        at=at.isoformat(),
        surrogate_kind=args.kind,
        n_surrogates=args.surrogates,
        confidence=args.confidence,
        spectrum_reference=args.reference,
        seed=seed,
        threads=threads,
        dropped_assets=[d.ticker for d in dropped],
        f=result.f,
    )
    write_manifest(out / "manifest.json", config, file_sha256(args.input), timings)
    print(f"f={result.f}")
    return EXIT_OK


def _add_panel_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="price panel (CSV or JSON)")
    p.add_argument("--format", choices=("csv", "json"), help="override format detection")
    p.add_argument("--missing-policy", choices=MISSING_POLICIES, default=MISSING_POLICIES[0])
    p.add_argument(
        "--max-missing", type=float, default=DEFAULT_MAX_MISSING_FRACTION,
        help="drop assets missing more than this fraction (default %(default)s)",
    )
    p.add_argument("--seed", type=int, help="master seed; generated and recorded if absent")
    p.add_argument("--threads", type=int, help="worker threads (env MG_THREADS)")
    p.add_argument("--kind", choices=SURROGATE_KINDS, default=TIME_PERMUTED)
    p.add_argument("--surrogates", type=int, default=DEFAULT_N_SURROGATES)
    p.add_argument("--confidence", type=float, default=DEFAULT_CONFIDENCE)
    p.add_argument(
        "--reference", choices=SPECTRUM_REFERENCES, default=ORIGIN,
        help="point about which spectra for the f comparison are taken",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="marketgeom",
        description="Market-space geometry and multivariate-kurtosis crisis detection.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="rolling g(t) series with crisis flags")
    _add_panel_options(a)
    a.add_argument("--window", type=int, required=True, help="window length in returns")
    a.add_argument(
        "--baseline", required=True,
        help="business-as-usual period, START:END as window indices or ISO dates",
    )
    a.add_argument("--f", type=int, default=DEFAULT_F, help="effective dimension")
    a.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    a.add_argument("--step", type=int, default=1)
    a.add_argument("--one-sided", action="store_true", help="flag only g above the band")
    a.add_argument("--estimate-f", action="store_true", help="estimate f on the baseline")
    a.add_argument("--dump-geometry", action="store_true")
    a.add_argument("--output", required=True, help="output directory")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("synth", help="generate a synthetic price panel")
    s.add_argument("--spec", required=True, help="regime spec JSON")
    s.add_argument("--output", required=True, help="panel CSV or JSON path")
    s.add_argument("--seed", type=int, help="override the spec's seed")
    s.set_defaults(func=cmd_synth)

    sp = sub.add_parser("spectrum", help="actual vs surrogate spectra at one date")
    _add_panel_options(sp)
    sp.add_argument("--window", type=int, required=True)
    sp.add_argument("--at", required=True, help="window end date (ISO)")
    sp.add_argument("--output", required=True, help="output directory")
    sp.set_defaults(func=cmd_spectrum)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalIntegrityError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
