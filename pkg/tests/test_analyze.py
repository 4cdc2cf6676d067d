import numpy as np
import pytest

from exasurf.analyze import (HistogramError, build_histogram, estimate_sigma,
                             estimate_snr, estimate_threshold)
from exasurf.volume import Volume3D


def mixture_volume(mu_low=0.0, mu_up=0.1, sigma=0.01, n=100, seed=7):
    """Half/half two-component Gaussian mixture as a volume."""
    rng = np.random.default_rng(seed)
    a = rng.normal(mu_low, sigma, size=n * n * n // 2)
    b = rng.normal(mu_up, sigma, size=n * n * n - a.size)
    vals = np.concatenate([a, b]).astype(np.float32)
    return Volume3D(vals.reshape(n, n, n))


def bruteforce_tau(mu_low, mu_up, sigma, f):
    """Scan the analytic mixture density from the valley toward mu_up."""
    def dens(x):
        return 0.5 * (np.exp(-0.5 * ((x - mu_low) / sigma) ** 2)
                      + np.exp(-0.5 * ((x - mu_up) / sigma) ** 2)) / (sigma * np.sqrt(2 * np.pi))
    xs = np.linspace(mu_low, mu_up, 20001)
    mid = xs[np.argmin(dens(xs))]
    pd_min = dens(mid)
    scan = xs[xs > mid]
    above = scan[dens(scan) > f * pd_min]
    return above[0]


def test_histogram_peaks_near_truth():
    vol = mixture_volume()
    h = build_histogram(vol, 1024)
    assert abs(h.mu_low - 0.0) <= 2 * h.bin_width
    assert abs(h.mu_up - 0.1) <= 2 * h.bin_width
    assert h.mu_low < h.min_loc < h.mu_up
    # pd normalizes to 1
    assert abs(float(h.pd.sum() * h.bin_width) - 1.0) < 1e-6


def test_histogram_constant_volume_fails():
    vol = Volume3D(np.full((8, 8, 8), 2.0, dtype=np.float32))
    with pytest.raises(HistogramError):
        build_histogram(vol)


def test_histogram_needs_64_bins():
    with pytest.raises(HistogramError):
        build_histogram(mixture_volume(n=16), 32)


def test_sigma_estimate_within_10pct():
    h = build_histogram(mixture_volume(sigma=0.01, n=100))
    assert abs(h.sigma - 0.01) / 0.01 < 0.10


def test_sigma_scale_equivariance():
    vol = mixture_volume(sigma=0.01, n=64)
    h1 = build_histogram(vol)
    h2 = build_histogram(Volume3D(vol.values * 2.0))
    assert abs(h2.sigma - 2.0 * h1.sigma) / (2.0 * h1.sigma) < 0.05


def test_sigma_halved_peak_width():
    h1 = build_histogram(mixture_volume(sigma=0.01, n=80, seed=3))
    h2 = build_histogram(mixture_volume(sigma=0.005, n=80, seed=3))
    assert abs(h2.sigma - 0.5 * h1.sigma) / (0.5 * h1.sigma) < 0.15


def test_threshold_between_valley_and_peak():
    h = build_histogram(mixture_volume())
    tau = estimate_threshold(h, 2.0)
    assert h.min_loc < tau < h.mu_up


def test_threshold_matches_bruteforce_density_scan():
    # sigma wide enough that the valley carries real sample mass, so the
    # empirical histogram tracks the analytic density it is compared against
    h = build_histogram(mixture_volume(sigma=0.02, n=128, seed=11))
    tau = estimate_threshold(h, 2.0)
    expect = bruteforce_tau(0.0, 0.1, 0.02, 2.0)
    assert h.min_loc < tau < h.mu_up
    assert abs(tau - expect) < 0.004


def test_threshold_f_to_one_approaches_valley():
    h = build_histogram(mixture_volume(n=128, seed=11))
    tau = estimate_threshold(h, 1.02)
    assert abs(tau - h.min_loc) < 0.01


def test_threshold_requires_f_above_one():
    h = build_histogram(mixture_volume(n=32))
    with pytest.raises(HistogramError):
        estimate_threshold(h, 0.9)


def test_snr_definition():
    h = build_histogram(mixture_volume(n=64))
    object.__setattr__(h, "sigma", 0.0141)
    object.__setattr__(h, "mu_low", 0.0)
    object.__setattr__(h, "mu_up", 0.1)
    assert abs(estimate_snr(h) - 17.0) < 0.05


def test_snr_zero_separation_ratio_one():
    h = build_histogram(mixture_volume(n=64))
    object.__setattr__(h, "sigma", h.mu_up - h.mu_low)
    assert abs(estimate_snr(h)) < 1e-9
