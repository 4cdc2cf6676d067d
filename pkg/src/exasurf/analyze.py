"""Histogram modelling of bimodal volume data and the derived estimators.

The density of CT data from clay-and-air scenes shows two dominant peaks
(air low, material high). The noise level sigma is read off the width of the
upper peak, the iso-threshold tau off the slope between the valley and the
upper peak, and both feed the automated pipeline parameterization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .volume import Volume3D


class HistogramError(ValueError):
    pass


@dataclass(frozen=True)
class HistogramModel:
    bin_count: int
    vmin: float
    vmax: float
    counts: np.ndarray          # int64 per bin
    pd: np.ndarray              # normalized probability density per bin
    mu_low: float               # location of the lower dominant maximum
    mu_up: float                # location of the upper dominant maximum
    pd_up: float                # density at mu_up
    min_loc: float              # local minimum between the peaks
    pd_min: float
    sigma: float                # estimated noise standard deviation

    @property
    def bin_width(self) -> float:
        return (self.vmax - self.vmin) / self.bin_count

    def centers(self) -> np.ndarray:
        return self.vmin + (np.arange(self.bin_count) + 0.5) * self.bin_width

    def density_at(self, x: float) -> float:
        """Density linearly interpolated between bin centers."""
        c = self.centers()
        return float(np.interp(x, c, self.pd))


def _smooth_pd(pd: np.ndarray, width: int = 5) -> np.ndarray:
    kernel = np.ones(width) / width
    pad = width // 2
    padded = np.pad(pd, pad, mode="edge")
    return np.convolve(padded, kernel, mode="valid")


def _local_maxima(y: np.ndarray) -> np.ndarray:
    left = np.r_[-np.inf, y[:-1]]
    right = np.r_[y[1:], -np.inf]
    return np.flatnonzero((y > left) & (y >= right))


def _refine_peak(centers: np.ndarray, y: np.ndarray, b: int) -> tuple[float, float]:
    """Sub-bin peak location: centroid of the contiguous region >= 80% of peak.

    The histogram's per-bin sampling noise exceeds the density curvature near
    a peak top, so the raw argmax jitters by several bins; the centroid over
    the near-peak region is unbiased for symmetric peaks.
    """
    level = 0.8 * y[b]
    lo = b
    while lo > 0 and y[lo - 1] >= level:
        lo -= 1
    hi = b
    while hi < len(y) - 1 and y[hi + 1] >= level:
        hi += 1
    w = y[lo:hi + 1]
    mu = float(np.dot(centers[lo:hi + 1], w) / w.sum())
    return mu, float(np.interp(mu, centers, y))


def build_histogram(vol: Volume3D, bin_count: int = 1024) -> HistogramModel:
    """Histogram the volume and locate the two dominant peaks and the valley.

    Raises HistogramError when the smoothed density has fewer than two local
    maxima (caller may supply tau manually in that case).
    """
    if bin_count < 64:
        raise HistogramError(f"bin_count {bin_count} < 64")
    v = vol.values.ravel()
    vmin = float(v.min())
    vmax = float(v.max())
    if vmax <= vmin:
        raise HistogramError("volume is constant; histogram is a single spike")
    counts, _ = np.histogram(v, bins=bin_count, range=(vmin, vmax))
    bw = (vmax - vmin) / bin_count
    pd = counts / (counts.sum() * bw)
    smoothed = _smooth_pd(pd)
    maxima = _local_maxima(smoothed)
    if len(maxima) < 2:
        raise HistogramError("fewer than two local maxima; data is not bimodal")
    # primary peak = global maximum; secondary = the other local maximum with
    # the largest prominence relative to the valley between them (plain
    # "two largest maxima" would pick two noise wiggles on one peak top)
    peak1 = int(maxima[np.argmax(smoothed[maxima])])
    best, best_prom = -1, 0.0
    for m in maxima:
        m = int(m)
        if m == peak1:
            continue
        lo, hi = min(m, peak1), max(m, peak1)
        valley = float(smoothed[lo:hi + 1].min())
        prom = float(smoothed[m]) - valley
        if prom > best_prom:
            best, best_prom = m, prom
    if best < 0 or best_prom <= 0.01 * float(smoothed[best]):
        raise HistogramError("no second peak with a real valley; data is not bimodal")
    lo_bin, up_bin = min(peak1, best), max(peak1, best)
    between = smoothed[lo_bin:up_bin + 1]
    min_bin = lo_bin + int(np.argmin(between))
    if min_bin in (lo_bin, up_bin):
        raise HistogramError("no local minimum between the two peaks")
    centers = vmin + (np.arange(bin_count) + 0.5) * bw
    mu_low, _ = _refine_peak(centers, smoothed, lo_bin)
    mu_up, pd_up = _refine_peak(centers, smoothed, up_bin)
    model = HistogramModel(
        bin_count=bin_count, vmin=vmin, vmax=vmax, counts=counts, pd=pd,
        mu_low=mu_low, mu_up=mu_up, pd_up=pd_up,
        min_loc=float(centers[min_bin]), pd_min=max(float(smoothed[min_bin]), 0.0),
        sigma=0.0)
    sigma = estimate_sigma(model)
    object.__setattr__(model, "sigma", sigma)
    return model


def _smoothed_curve(hist: HistogramModel) -> tuple[np.ndarray, np.ndarray]:
    return hist.centers(), _smooth_pd(hist.pd)


def estimate_sigma(hist: HistogramModel) -> float:
    """Peak-width noise estimate.

    Walk from the upper maximum down the slope toward the valley; sigma is the
    distance to the first location where the density drops to e^(-1/2) of the
    peak density (the Gaussian one-sigma attenuation), interpolating linearly
    between bins.
    """
    centers, pd = _smoothed_curve(hist)
    target = hist.pd_up * float(np.exp(-0.5))
    up_bin = int(np.argmin(np.abs(centers - hist.mu_up)))
    min_bin = int(np.argmin(np.abs(centers - hist.min_loc)))
    lo, hi = min(up_bin, min_bin), max(up_bin, min_bin)
    step = -1 if min_bin < up_bin else 1
    prev = up_bin
    for b in range(up_bin + step, min_bin + step, step):
        if pd[b] <= target:
            # linear interpolation between bin centers prev and b
            x0, y0 = centers[prev], pd[prev]
            x1, y1 = centers[b], pd[b]
            if y1 == y0:
                x = x1
            else:
                x = x0 + (target - y0) * (x1 - x0) / (y1 - y0)
            return abs(hist.mu_up - float(x))
        prev = b
    raise HistogramError("density never falls to pd_up*e^(-1/2) before the valley")


def estimate_threshold(hist: HistogramModel, f: float = 2.0) -> float:
    """Iso-threshold tau on the slope between the valley and the upper peak.

    Scans from the valley toward the upper maximum; tau is the first location
    where the density just exceeds f * pd_min.
    """
    if f <= 1.0:
        raise HistogramError(f"f must be > 1, got {f}")
    centers, pd = _smoothed_curve(hist)
    target = hist.pd_min * f
    min_bin = int(np.argmin(np.abs(centers - hist.min_loc)))
    up_bin = int(np.argmin(np.abs(centers - hist.mu_up)))
    prev = min_bin
    for b in range(min_bin + 1, up_bin + 1):
        if pd[b] > target:
            x0, y0 = centers[prev], pd[prev]
            x1, y1 = centers[b], pd[b]
            if y1 == y0:
                tau = float(x1)
            else:
                tau = float(x0 + (target - y0) * (x1 - x0) / (y1 - y0))
            # guaranteed strictly inside (min_loc, mu_up)
            return min(max(tau, np.nextafter(hist.min_loc, hist.mu_up)),
                       np.nextafter(hist.mu_up, hist.min_loc))
        prev = b
    raise HistogramError(f"density never exceeds {f} * pd_min before the upper peak")


def estimate_snr(hist: HistogramModel) -> float:
    """SNR in dB, defined here as 20*log10(peak separation / sigma)."""
    if hist.sigma <= 0.0:
        raise HistogramError("sigma is zero")
    return float(20.0 * np.log10((hist.mu_up - hist.mu_low) / hist.sigma))
