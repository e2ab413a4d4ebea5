"""Histogram and Gaussian-kernel density estimates from finite-difference derivatives.

Both estimators see the N - 1 forward differences of the samples.  Errors
are reported as the integrated squared error of this one deterministic
sample set ("ISE (fixed design)"); nothing is averaged over resamples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, NumericError
from .functions import AnalyticFunction, SampledFunction, finite_differences, sample
from .truth import default_eps_c, true_density

ISE_LABEL = "ISE (fixed design)"
RATE_CAVEAT = (
    "classical histogram/kernel rates assume i.i.d. random designs and smooth densities; "
    "fixed-grid slopes may differ"
)


@dataclass(frozen=True)
class DerivativeSamples:
    values: np.ndarray
    source: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise ConfigError("derivative samples must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_samples(cls, samples: SampledFunction) -> "DerivativeSamples":
        return cls(finite_differences(samples), samples.source)

    @property
    def n(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class HistogramDensity:
    edges: np.ndarray
    heights: np.ndarray
    dropped_mass: float

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        i = np.searchsorted(self.edges, u, side="right") - 1
        # the last bin is closed on the right, as in np.histogram
        i = np.where(u == self.edges[-1], len(self.heights) - 1, i)
        inside = (i >= 0) & (i < len(self.heights))
        return np.where(inside, self.heights[np.clip(i, 0, len(self.heights) - 1)], 0.0)

    def mass(self) -> float:
        return float(np.sum(self.heights * np.diff(self.edges)))


def histogram_density(ds: DerivativeSamples, bins: int, range: Optional[tuple[float, float]] = None) -> HistogramDensity:
    """counts / (n * binwidth) over ``range`` (the data range by default)."""
    if ds.n == 0:
        raise NumericError("no derivative samples")
    if bins < 2:
        raise ConfigError(f"need at least 2 bins, got {bins}")
    a, b = (float(ds.values.min()), float(ds.values.max())) if range is None else map(float, range)
    if not a < b:
        raise ConfigError(f"histogram range needs a < b, got [{a}, {b}]")
    counts, edges = np.histogram(ds.values, bins=bins, range=(a, b))
    heights = counts / (ds.n * (edges[1] - edges[0]))
    return HistogramDensity(edges=edges, heights=heights, dropped_mass=1.0 - counts.sum() / ds.n)


def kernel_density(ds: DerivativeSamples, bandwidth: float, u) -> np.ndarray:
    """Gaussian Parzen estimate (1 / (n h)) sum K((u - v_i) / h) at scalar or array u."""
    if not bandwidth > 0:
        raise ConfigError(f"bandwidth must be positive, got {bandwidth}")
    if ds.n == 0:
        raise NumericError("no derivative samples")
    u = np.asarray(u, dtype=float)
    flat = u.ravel()
    out = np.empty(flat.shape)
    chunk = max(1, 2_000_000 // ds.n)
    for s in np.arange(0, len(flat), chunk):
        z = (flat[s : s + chunk, None] - ds.values[None, :]) / bandwidth
        out[s : s + chunk] = np.exp(-0.5 * z * z).sum(axis=1)
    out /= ds.n * bandwidth * math.sqrt(2 * math.pi)
    return out.reshape(u.shape) if u.ndim else float(out[0])


def silverman_bandwidth(ds: DerivativeSamples, scale: float = 1.06) -> float:
    """scale * std * n^(-1/5)."""
    return scale * float(np.std(ds.values)) * ds.n ** (-0.2)


def default_bins(N: int) -> int:
    return math.ceil(N ** (1 / 3) - 1e-9)


def ise(
    est: Callable[[np.ndarray], np.ndarray],
    fn: AnalyticFunction,
    grid: int = 4000,
    eps_c: Optional[float] = None,
    breakpoints=(),
) -> float:
    """Midpoint-rule integral of (P - estimate)^2 over (-B + eps_C, B - eps_C).

    Cells are split at the points of C and at ``breakpoints`` (e.g. histogram
    edges), so piecewise-constant integrands are integrated exactly.
    """
    if grid < 1000:
        raise ConfigError(f"grid must be at least 1000, got {grid}")
    eps = default_eps_c(fn.B_true) if eps_c is None else eps_c
    a, b = -fn.B_true + eps, fn.B_true - eps
    cuts = np.asarray([*fn.C, *np.asarray(breakpoints, dtype=float).ravel()], dtype=float)
    pts = np.union1d(np.linspace(a, b, grid + 1), cuts[(cuts > a) & (cuts < b)])
    w = np.diff(pts)
    u = 0.5 * (pts[:-1] + pts[1:])
    diff = true_density(fn, u) - np.asarray(est(u), dtype=float)
    return float(np.sum(w * diff * diff))


def baseline_ise(fn: AnalyticFunction, N: int, method: str, grid: int = 4000) -> float:
    """ISE of one baseline at N samples with the default bin count or bandwidth."""
    ds = DerivativeSamples.from_samples(sample(fn, N))
    if method == "histogram":
        hist = histogram_density(ds, default_bins(N))
        return ise(hist, fn, grid, breakpoints=hist.edges)
    if method == "kernel":
        h = silverman_bandwidth(ds)
        return ise(lambda u: kernel_density(ds, h, u), fn, grid)
    raise ConfigError(f"unknown baseline {method!r}; use 'histogram' or 'kernel'")
