"""Acceptance criteria.

Each test records one PASS/FAIL line, printed in the pytest terminal
summary under "acceptance criteria". Run alone with

    pytest tests/test_acceptance.py -v
"""

import datetime as dt
import os
import time

import numpy as np
import pytest

from marketgeom.cli import main
from marketgeom.data_ingest import (
    RegimeSpec,
    Segment,
    align_panel,
    generate_synthetic_panel,
    load_price_panel,
    synthetic_log_returns,
    write_panel,
)
from marketgeom.geometry import correlation_matrix, distance_matrix, embed
from marketgeom.kurtosis import (
    mardia_b2p,
    mardia_t2,
    population_scatter,
    restrict_to_subspace,
    systematic_covariance,
)
from marketgeom.pipeline import AnalysisConfig, BaselinePeriod, rolling_analysis
from marketgeom.returns import NormalizedWindow, normalize_rows
from marketgeom.surrogates import estimate_effective_dimension


def record(report, name, ok, detail):
    report.append((name, bool(ok), detail))
    print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


def make_window(raw):
    vectors, means, stds = normalize_rows(raw)
    return NormalizedWindow(0, raw.shape[1], vectors, (), means, stds)


def test_1_metric_identity(acceptance_report):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        factor = rng.uniform(0, 2)
        w = make_window(rng.standard_normal((20, 50)) + factor * rng.standard_normal((1, 50)))
        C = correlation_matrix(w).values
        rho = w.vectors
        chord = np.linalg.norm(rho[:, None, :] - rho[None, :, :], axis=2)
        worst = max(worst, np.abs(chord - np.sqrt(np.maximum(2 * (1 - C), 0))).max())
        worst = max(worst, np.abs(chord - distance_matrix(correlation_matrix(w)).values).max())
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 10
    record(acceptance_report, "1 metric identity", ok,
           f"max |chord - sqrt(2(1-C))| = {worst:.2e} (tol 1e-9), {elapsed:.1f}s (< 10s)")
    assert worst <= 1e-9
    assert elapsed < 10


def test_2_embedding_round_trip(acceptance_report):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    for N, n, reps in [(5, 50, 20), (20, 50, 20), (50, 50, 10), (100, 50, 5),
                       (100, 250, 5), (200, 50, 3), (200, 400, 3)]:
        for _ in range(reps):
            raw = rng.standard_normal((N, n)) + rng.uniform(0, 2) * rng.standard_normal((1, n))
            D = distance_matrix(correlation_matrix(make_window(raw)))
            z = embed(D).coordinates
            recon = np.linalg.norm(z[:, None, :] - z[None, :, :], axis=2)
            worst = max(worst, np.abs(recon - D.values).max())
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 30
    record(acceptance_report, "2 embedding round trip", ok,
           f"max pair error {worst:.2e} (tol 1e-6) up to N=200, {elapsed:.1f}s (< 30s)")
    assert worst <= 1e-6
    assert elapsed < 30


def test_3_mardia_null_calibration(acceptance_report):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    N, p = 471, 6
    b = np.empty(1000)
    for i in range(1000):
        z = rng.standard_normal((N, p))
        b[i] = mardia_b2p(z, population_scatter(z))
    t2 = np.array([mardia_t2(v, p, N) for v in b])
    rate = np.mean(np.abs(t2) > 1.96)
    elapsed = time.perf_counter() - t0
    ok = abs(b.mean() - 48) <= 0.5 and 0.03 <= rate <= 0.07 and elapsed < 60
    record(acceptance_report, "3 Mardia null calibration", ok,
           f"mean b2p {b.mean():.3f} (48 +/- 0.5), |t2|>1.96 rate {rate:.3f} "
           f"([0.03, 0.07]), {elapsed:.1f}s (< 60s)")
    assert abs(b.mean() - 48) <= 0.5
    assert 0.03 <= rate <= 0.07
    assert elapsed < 60


def test_4_systematic_covariance_consistency(acceptance_report):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        N, n = rng.integers(3, 40), rng.integers(10, 80)
        raw = 0.02 * (rng.standard_normal((N, n)) + rng.standard_normal((1, n))) + 0.001
        emb = embed(distance_matrix(correlation_matrix(make_window(raw))))
        sub = restrict_to_subspace(emb, emb.dimension)
        sigma = systematic_covariance(sub, raw.T).values
        worst = max(worst, np.abs(sigma - np.cov(raw, bias=True)).max())
    ok = worst <= 1e-9
    record(acceptance_report, "4 systematic covariance at full dimension", ok,
           f"max elementwise error {worst:.2e} (tol 1e-9) on 100 windows")
    assert worst <= 1e-9


def test_5_effective_dimension(acceptance_report):
    t0 = time.perf_counter()
    N, n = 30, 100
    counts = {}
    for c, target in [(0.0, 0), (0.5, 1)]:
        hits = 0
        for trial in range(100):
            spec = RegimeSpec(N, [Segment(n, c)], seed=1000 * int(10 * c) + trial)
            w = make_window(synthetic_log_returns(spec).T)
            res = estimate_effective_dimension(
                w, n_surrogates=100, confidence=0.99, seed=trial, threads=1
            )
            hits += res.f == target
        counts[c] = hits
    elapsed = time.perf_counter() - t0
    ok = counts[0.0] >= 95 and counts[0.5] >= 95 and elapsed < 300
    record(acceptance_report, "5 effective dimension", ok,
           f"iid f=0 in {counts[0.0]}/100, one-factor c=0.5 f=1 in {counts[0.5]}/100 "
           f"(>= 95 each), {elapsed:.1f}s (< 300s)")
    assert counts[0.0] >= 95
    assert counts[0.5] >= 95
    assert elapsed < 300


def test_6_end_to_end_detection(acceptance_report):
    t0 = time.perf_counter()
    spec = RegimeSpec(
        100, [Segment(500, 0.05), Segment(60, 0.7), Segment(300, 0.05)], seed=0
    )
    panel = generate_synthetic_panel(spec)
    cfg = AnalysisConfig(BaselinePeriod(0, 400), window_length=50, alpha=0.05)
    series = rolling_analysis(panel, cfg)
    flags = np.array(series.flags)
    # return rows 500..559 are the crash; window t covers rows t..t+49
    crash = [t for t in range(len(flags)) if t >= 500 and t + 50 <= 560]
    crash_rate = flags[crash].mean()
    base_rate = flags[:400].mean()
    elapsed = time.perf_counter() - t0
    ok = crash_rate >= 0.9 and base_rate <= 0.1 and elapsed < 120
    record(acceptance_report, "6 end-to-end detection", ok,
           f"crash windows flagged {crash_rate:.0%} of {len(crash)} (>= 90%), "
           f"baseline flagged {base_rate:.1%} (<= 10%), {elapsed:.1f}s (< 120s)")
    assert crash_rate >= 0.9
    assert base_rate <= 0.1
    assert elapsed < 120


def test_7_determinism(acceptance_report, tmp_path):
    spec = RegimeSpec(30, [Segment(200, 0.05), Segment(40, 0.6)], seed=7)
    panel_path = tmp_path / "panel.csv"
    write_panel(generate_synthetic_panel(spec), panel_path)
    args = ["analyze", "--input", str(panel_path), "--window", "40", "--baseline", "0:100",
            "--seed", "42", "--estimate-f", "--surrogates", "30"]
    codes = [main(args + ["--output", str(tmp_path / d)]) for d in ("a", "b")]
    a = (tmp_path / "a" / "gseries.csv").read_bytes()
    b = (tmp_path / "b" / "gseries.csv").read_bytes()
    ok = codes == [0, 0] and a == b
    record(acceptance_report, "7 determinism", ok,
           f"two analyze runs, exit codes {codes}, gseries.csv byte-identical: {a == b}")
    assert codes == [0, 0]
    assert a == b


REAL_PANEL = os.environ.get("MG_REAL_PANEL")


@pytest.mark.skipif(not REAL_PANEL, reason="set MG_REAL_PANEL to an S&P500 2005-2009 panel")
def test_8_real_data_smoke(acceptance_report):
    panel = align_panel(load_price_panel(REAL_PANEL))
    cfg = AnalysisConfig(
        BaselinePeriod(dt.date(2005, 1, 1), dt.date(2007, 6, 30)), window_length=50
    )
    series = rolling_analysis(panel, cfg)
    late_2008 = [
        p for p in series.points
        if dt.date(2008, 9, 1) <= p.end_date <= dt.date(2008, 12, 31) and p.valid
    ]
    peak = max((abs(p.g) for p in late_2008), default=float("nan"))
    ok = bool(late_2008) and peak > 1.96
    record(acceptance_report, "8 real-data smoke", ok,
           f"max |g| over {len(late_2008)} late-2008 windows = {peak:.2f} (band 1.96)")
    assert ok
