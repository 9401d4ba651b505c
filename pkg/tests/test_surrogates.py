import math

import numpy as np
import pytest

from marketgeom.data_ingest import RegimeSpec, Segment, synthetic_log_returns
from marketgeom.errors import ParameterError
from marketgeom.returns import NormalizedWindow, normalize_rows
from marketgeom.surrogates import (
    CENTER_OF_MASS,
    GAUSSIAN,
    SurrogateEnsemble,
    build_ensemble,
    effective_dimension,
    estimate_effective_dimension,
    gaussian_surrogate,
    permute_surrogate,
    window_spectrum,
)

from conftest import random_window


def window_from(raw):
    vectors, means, stds = normalize_rows(raw)
    return NormalizedWindow(0, raw.shape[1], vectors, (), means, stds)


def test_single_observation_window_unchanged():
    w = NormalizedWindow(0, 1, np.array([[0.0], [0.0]]))
    np.testing.assert_array_equal(permute_surrogate(w, 3).vectors, w.vectors)


def test_permutation_preserves_marginals(rng):
    w, _ = random_window(rng, 6, 40, factor=1.0)
    s = permute_surrogate(w, 11)
    np.testing.assert_array_equal(np.sort(s.vectors, axis=1), np.sort(w.vectors, axis=1))
    np.testing.assert_allclose(s.vectors.sum(axis=1), w.vectors.sum(axis=1), atol=1e-15)
    np.testing.assert_allclose(
        np.linalg.norm(s.vectors, axis=1), np.linalg.norm(w.vectors, axis=1), rtol=1e-15
    )
    # rows are shuffled with distinct permutations
    orders = [tuple(np.argsort(np.argsort(row))) for row in s.vectors]
    assert len(set(orders)) > 1


def test_permutation_deterministic(rng):
    w, _ = random_window(rng, 4, 20)
    a, b = permute_surrogate(w, 5), permute_surrogate(w, 5)
    np.testing.assert_array_equal(a.vectors, b.vectors)
    assert not np.array_equal(a.vectors, permute_surrogate(w, 6).vectors)


def test_gaussian_surrogate_uncorrelated():
    s = gaussian_surrogate((2, 500), [0.0, 0.0], [1.0, 1.0], seed=4)
    assert abs(s.vectors[0] @ s.vectors[1]) < 0.15


def test_gaussian_surrogate_normalized_and_reproducible():
    s = gaussian_surrogate((5, 60), np.arange(5), np.linspace(0.1, 2, 5), seed=8)
    np.testing.assert_allclose(s.vectors.sum(axis=1), 0.0, atol=1e-10)
    np.testing.assert_allclose(np.linalg.norm(s.vectors, axis=1), 1.0, atol=1e-10)
    again = gaussian_surrogate((5, 60), np.arange(5), np.linspace(0.1, 2, 5), seed=8)
    np.testing.assert_array_equal(s.vectors, again.vectors)


@pytest.mark.parametrize("std", [[1.0, 0.0], [1.0, -2.0]])
def test_gaussian_surrogate_rejects_bad_std(std):
    with pytest.raises(ParameterError):
        gaussian_surrogate((2, 10), [0.0, 0.0], std, seed=0)


def _quantile_oracle(column, q):
    """Linear-interpolation quantile from sorted values."""
    s = sorted(column)
    pos = q * (len(s) - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (pos - lo) * (s[hi] - s[lo])


@pytest.mark.parametrize("kind", ["time_permuted", "gaussian"])
@pytest.mark.parametrize("reference", ["origin", "center_of_mass"])
def test_ensemble_invariants(rng, kind, reference):
    w, _ = random_window(rng, 12, 30, factor=0.5)
    ens = build_ensemble(w, kind, 40, 0.9, seed=1, reference=reference, threads=1)
    assert ens.spectra.shape == (40, 11)
    assert np.all(np.diff(ens.spectra, axis=1) <= 1e-12)
    assert np.all(np.diff(ens.rank_quantiles) <= 1e-12)
    for r in range(11):
        assert ens.rank_quantiles[r] == pytest.approx(
            _quantile_oracle(ens.spectra[:, r], 0.9), abs=1e-12
        )


def test_ensemble_independent_of_threads(rng):
    w, _ = random_window(rng, 10, 25)
    a = build_ensemble(w, n_surrogates=16, seed=3, threads=1)
    b = build_ensemble(w, n_surrogates=16, seed=3, threads=4)
    np.testing.assert_array_equal(a.spectra, b.spectra)


def test_ensemble_member_seeds(rng):
    w, _ = random_window(rng, 6, 20)
    ens = build_ensemble(w, n_surrogates=3, seed=10, threads=1)
    np.testing.assert_array_equal(
        ens.spectra[2], window_spectrum(permute_surrogate(w, 12))
    )


@pytest.mark.parametrize("N,n", [(8, 50), (30, 12)])
def test_origin_spectrum_is_correlation_spectrum(rng, N, n):
    w, _ = random_window(rng, N, n, factor=0.3)
    C = w.vectors @ w.vectors.T
    eig = np.sort(np.linalg.eigvalsh(C))[::-1]
    np.testing.assert_allclose(window_spectrum(w), np.maximum(eig[: N - 1], 0), atol=1e-10)
    # unit-norm vectors: the full inertia about the origin has trace N
    assert eig.sum() == pytest.approx(N, abs=1e-10)


def test_f_zero_at_median(rng):
    w, _ = random_window(rng, 10, 30)
    ens = build_ensemble(w, n_surrogates=50, seed=0, threads=1)
    res = effective_dimension(np.median(ens.spectra, axis=0), ens)
    assert res.f == 0


def test_leading_run_rule():
    spectra = np.tile([3.0, 2.0, 1.0, 0.5], (10, 1))
    ens = SurrogateEnsemble("time_permuted", 10, spectra, spectra[0], 0.99)
    assert effective_dimension([4.0, 3.0, 0.9, 0.6], ens).f == 2
    assert effective_dimension([4.0, 3.0, 1.5, 0.6], ens).f == 4
    assert effective_dimension([2.0, 3.0, 1.5, 0.6], ens).f == 0


def test_effective_dimension_validation():
    ens = SurrogateEnsemble("time_permuted", 0, np.zeros((0, 3)), np.zeros(3), 0.99)
    with pytest.raises(ParameterError):
        effective_dimension([1.0, 0.0, 0.0], ens)
    ens = SurrogateEnsemble("time_permuted", 2, np.ones((2, 3)), np.ones(3), 0.99)
    with pytest.raises(ParameterError):
        effective_dimension([1.0, 0.0], ens)


def test_other_confidence_recomputes_threshold(rng):
    w, _ = random_window(rng, 10, 30)
    ens = build_ensemble(w, n_surrogates=50, seed=0, threads=1)
    res = effective_dimension(window_spectrum(w), ens, confidence=0.5)
    np.testing.assert_allclose(res.threshold_spectrum, np.median(ens.spectra, axis=0))


def _equicorrelated(c, N, n, seed):
    spec = RegimeSpec(N, [Segment(n, c)], seed=seed)
    return window_from(synthetic_log_returns(spec).T)


def test_one_factor_market_has_one_dimension():
    fs = [
        estimate_effective_dimension(_equicorrelated(0.5, 20, 100, s), seed=s, threads=1).f
        for s in range(10)
    ]
    assert fs.count(1) >= 9


def test_iid_market_has_no_dimension():
    fs = [
        estimate_effective_dimension(_equicorrelated(0.0, 20, 100, s), seed=s, threads=1).f
        for s in range(20)
    ]
    assert fs.count(0) >= 18


def test_centered_spectrum_misses_uniform_factor():
    # a factor loading equally on every stock moves the center of mass only
    fs = [
        estimate_effective_dimension(
            _equicorrelated(0.5, 20, 100, s), seed=s, reference=CENTER_OF_MASS, threads=1
        ).f
        for s in range(5)
    ]
    assert fs == [0] * 5


def test_centered_spectrum_sees_dispersed_loadings():
    rng = np.random.default_rng(5)
    hits = 0
    for s in range(10):
        loadings = np.linspace(-1.5, 1.5, 20)[:, None]
        raw = loadings * rng.standard_normal((1, 150)) + rng.standard_normal((20, 150))
        res = estimate_effective_dimension(
            window_from(raw), seed=s, reference=CENTER_OF_MASS, threads=1
        )
        hits += res.f == 1
    assert hits >= 9


def test_gaussian_kind_runs():
    w = _equicorrelated(0.6, 15, 80, 2)
    res = estimate_effective_dimension(w, kind=GAUSSIAN, n_surrogates=50, seed=0, threads=1)
    assert res.f == 1
