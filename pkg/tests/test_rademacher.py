"""Multiscale decomposition, quiet-scale search, and the accepted-slope set."""

import numpy as np
import pytest

from nlwave.errors import ConfigError, ResolutionExhausted
from nlwave.rademacher import (LipschitzSample, MultiscaleDecomposition,
                               ScaleWindow, approx_diff_set, decompose,
                               default_sigma, find_quiet_scale)


def test_sample_ingestion_and_normalization():
    s = LipschitzSample.from_function(lambda x: x + 0.7, 6)
    assert s.values[s.values.size // 2] == 0.0       # f(0) normalized away
    with pytest.raises(ConfigError):
        LipschitzSample.from_function(lambda x: 2.0 * x, 6)
    with pytest.raises(ConfigError):
        LipschitzSample(np.zeros(7))                 # not 2^n + 1 samples


def test_identity_function_decomposition():
    s = LipschitzSample.from_function(lambda x: x, 8)
    dec = decompose(s)
    assert np.all(dec.band_energies == 0.0)
    for n in range(s.n_max + 1):
        np.testing.assert_allclose(s.level_slopes(n), 1.0, atol=0)


def test_absolute_value_closed_form_bands():
    s = LipschitzSample.from_function(abs, 12)
    dec = decompose(s)
    assert dec.band_energies[0] == 2.0
    assert np.all(dec.band_energies[1:] == 0.0)
    # level 0 is the flat chord, level 1 the two-slope wedge
    np.testing.assert_array_equal(s.level_slopes(0), [0.0])
    np.testing.assert_array_equal(s.level_slopes(1), [-1.0, 1.0])


def _sawtooth_sample(level, amp, n_max):
    """Zero at level-(level-1) gridpoints, +-amp at the new midpoints."""
    def f(x):
        period = 2.0 ** (2 - level)
        y = (x + 1.0) % period
        return amp * (1.0 - abs(2.0 * y / period - 1.0))
    return LipschitzSample.from_function(f, n_max,
                                         lip_bound=amp / 2.0 ** (1 - level),
                                         normalize=False)


def test_sawtooth_band_concentration_vs_quadrature_oracle():
    level, n_max = 5, 10
    amp = 2.0 ** (1 - level)     # slopes +-1
    s = _sawtooth_sample(level, amp, n_max)
    dec = decompose(s)
    # all energy in the single band below the sawtooth level
    assert dec.band_energies[level - 1] == pytest.approx(2.0, rel=1e-12)
    others = np.delete(dec.band_energies, level - 1)
    np.testing.assert_allclose(others, 0.0, atol=1e-24)

    # independent oracle: fine-grid quadrature of the interpolant derivatives
    fine = s.xs
    for n in range(s.n_max):
        h_n = 2 ** (s.n_max - n)
        h_n1 = 2 ** (s.n_max - n - 1)
        f_n = np.interp(fine, fine[::h_n], s.values[::h_n])
        f_n1 = np.interp(fine, fine[::h_n1], s.values[::h_n1])
        d = np.diff(f_n1 - f_n) / s.spacing
        oracle = float(np.sum(d * d) * s.spacing)
        assert dec.band_energies[n] == pytest.approx(oracle, abs=1e-10)


def test_bessel_and_orthogonality_random_corpus():
    for seed in range(12):
        s = (LipschitzSample.random_walk(seed, 10) if seed % 2
             else LipschitzSample.coarse_random(seed, 10, 5))
        dec = decompose(s)
        assert dec.bessel_sum() <= 2.0 * s.lip_bound ** 2 + 1e-10
        gram = dec.band_gram()
        np.testing.assert_allclose(np.diag(gram), dec.band_energies,
                                   atol=1e-12)
        off = gram - np.diag(np.diag(gram))
        assert np.max(np.abs(off)) <= 1e-12


def test_band_energy_scaling_covariance():
    s = LipschitzSample.coarse_random(3, 10, 5)
    half = LipschitzSample(0.5 * s.values, lip_bound=1.0)
    e1 = decompose(s).band_energies
    e2 = decompose(half).band_energies
    np.testing.assert_array_equal(e2, 0.25 * e1)


def test_find_quiet_scale_examples():
    s = LipschitzSample.from_function(lambda x: x, 10)
    q = find_quiet_scale(decompose(s), 0.1, ScaleWindow(8))
    assert q.n0 == 1 and q.r == pytest.approx(0.05) and q.band_sum == 0.0

    s = LipschitzSample.from_function(abs, 10)
    q = find_quiet_scale(decompose(s), 0.1, ScaleWindow(3))
    assert q.n0 == 1 and q.band_sum == 0.0


def test_find_quiet_scale_probe_bound_constructed_spectrum():
    # energy 2/k at k separated levels: the pigeonhole succeeds within
    # ceil(2*lip^2/sigma) probes
    k, sigma = 4, 0.4
    energies = np.zeros(20)
    for lvl in (2, 5, 8, 11):
        energies[lvl] = 2.0 / k
    dec = MultiscaleDecomposition(slopes=(np.zeros(1),) * 21,
                                  band_energies=energies, lip_bound=1.0)
    q = find_quiet_scale(dec, sigma, ScaleWindow(2))
    assert q.n0 == 13 and q.band_sum <= sigma
    assert q.probes <= int(np.ceil(2.0 / sigma))


def test_find_quiet_scale_function_realized_multiscale():
    # three stacked sawtooths with 1/3 slopes at separated levels
    n_max = 12
    parts = [_sawtooth_sample(lvl, 2.0 ** (1 - lvl) / 3.0, n_max)
             for lvl in (3, 7, 11)]
    total = LipschitzSample(sum(p.values for p in parts), lip_bound=1.0)
    dec = decompose(total)
    loud = {2, 6, 10}
    for n, e in enumerate(dec.band_energies):
        if n in loud:
            assert e == pytest.approx(2.0 / 9.0, rel=1e-12)
        else:
            assert e <= 1e-20
    q = find_quiet_scale(dec, 0.2, ScaleWindow(2))
    assert q.probes <= int(np.ceil(2.0 / 0.2))
    assert q.band_sum <= 0.2


def test_find_quiet_scale_resolution_exhausted():
    s = LipschitzSample.random_walk(0, 10)
    with pytest.raises(ResolutionExhausted):
        find_quiet_scale(decompose(s), 1e-9, ScaleWindow(8))
    with pytest.raises(ConfigError):
        find_quiet_scale(decompose(s), -1.0)


def test_approx_diff_identity_function():
    s = LipschitzSample.from_function(lambda x: x, 10)
    q = find_quiet_scale(decompose(s), 0.1, ScaleWindow(8))
    r = approx_diff_set(s, q, delta=0.1)
    assert np.all(r.accepted)
    np.testing.assert_allclose(r.slopes, 1.0, atol=0)
    assert r.measure >= 2.0


def test_approx_diff_absolute_value_excludes_kink():
    s = LipschitzSample.from_function(abs, 10)
    q = find_quiet_scale(decompose(s), 0.1, ScaleWindow(3))
    r = approx_diff_set(s, q, delta=0.1)
    xs = s.xs
    mid = xs.size // 2
    assert not r.accepted[mid]                     # x = 0 rejected
    far = np.abs(xs) > r.r + 2 * s.spacing
    assert np.all(r.accepted[far])                 # away from the kink: kept
    rejected_width = np.ptp(xs[~r.accepted])
    assert rejected_width <= 2.0 * r.r + 4 * s.spacing   # O(r) neighborhood
    assert r.measure >= 2.0 - 0.1
    np.testing.assert_array_equal(r.slopes[r.accepted],
                                  np.sign(xs[r.accepted]))


def test_approx_diff_soundness_independent_scan():
    s = LipschitzSample.coarse_random(11, 12, 5)
    sigma = default_sigma(0.1)
    q = find_quiet_scale(decompose(s), sigma, ScaleWindow(8))
    r = approx_diff_set(s, q, delta=0.1)
    # re-verify every accepted point against all sampled annulus offsets,
    # walking the probes in the opposite order
    k_lo = int(np.ceil(r.eps1 / s.spacing))
    k_hi = int(np.floor(r.r / s.spacing))
    xs = s.xs
    for k in range(k_hi, k_lo - 1, -1):
        off = k * s.spacing
        for sign in (-1.0, 1.0):
            y = xs + sign * off
            ok = (y >= -1.0) & (y <= 1.0)
            q_val = np.zeros_like(xs)
            q_val[ok] = (s.evaluate(y[ok]) - s.values[ok]) / (sign * off)
            bad = ok & r.accepted & (np.abs(q_val - r.slopes) > 0.1 * (1 + 1e-9))
            assert not np.any(bad)


def test_approx_diff_measure_guarantee_on_corpus():
    hits = 0
    total = 12
    for seed in range(total):
        s = LipschitzSample.coarse_random(seed, 12, 6)
        q = find_quiet_scale(decompose(s), default_sigma(0.1), ScaleWindow(8))
        r = approx_diff_set(s, q, delta=0.1)
        if r.measure >= 2.0 - 0.1:
            hits += 1
    assert hits >= 0.95 * total
