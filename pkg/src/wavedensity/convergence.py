"""Interval-measure comparison of the power spectrum against the true density.

For K disjoint neighborhoods [c_j - a, c_j + a] the Riemann sums
du * sum P_k over the bins in each neighborhood are compared with the same
sums of the true density at the same bins.  The averaged absolute discrepancy
``delta_stat`` is swept over N (tau at its lower bound) or over tau at
fixed N, and the decay rate is fitted by least squares.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import ConfigError, DegenerateNeighborhoodError, NeighborhoodError, RangeError
from .functions import AnalyticFunction, sample
from .spectrum import SpectrumEstimate, build_wavefield, scaled_dft, tau_lower_bound
from .truth import default_eps_c, true_density, true_interval_measure

GUARD_FRACTION = 0.4


@dataclass(frozen=True)
class NeighborhoodSet:
    centers: np.ndarray
    half_width: float
    B: float
    forbidden: tuple[float, ...] = ()
    eps_C: float = 0.0
    dropped: tuple[float, ...] = ()

    @property
    def K(self) -> int:
        return len(self.centers)

    def intervals(self) -> np.ndarray:
        return np.column_stack([self.centers - self.half_width, self.centers + self.half_width])


def build_neighborhoods(
    B: float,
    K: int,
    alpha: Optional[float] = None,
    C: Sequence[float] = (),
    eps_C: Optional[float] = None,
    centers: Optional[Sequence[float]] = None,
    skip_collisions: bool = False,
) -> NeighborhoodSet:
    """K equally spaced neighborhoods inside (-B + eps_C, B - eps_C).

    Centers default to the midpoints of K equal cells; ``alpha`` defaults to
    0.4 of the cell width, leaving guard bands between neighbors.  An interval
    meeting C +- eps_C raises :class:`NeighborhoodError` unless
    ``skip_collisions`` is set, in which case it is dropped and recorded.
    """
    if K < 1:
        raise NeighborhoodError(f"K must be at least 1, got {K}")
    if eps_C is None:
        eps_C = default_eps_c(B)
    span = 2.0 * (B - eps_C)
    if span <= 0:
        raise NeighborhoodError(f"eps_C={eps_C} leaves no room inside (-B, B)")
    cell = span / K
    if alpha is None:
        alpha = GUARD_FRACTION * cell
    if alpha <= 0:
        raise NeighborhoodError("alpha must be positive")
    if 2 * alpha * K > span:
        raise NeighborhoodError(f"{K} neighborhoods of half-width {alpha} do not fit in width {span}")

    if centers is None:
        c = -B + eps_C + (np.arange(1, K + 1) - 0.5) * cell
    else:
        c = np.sort(np.asarray(centers, dtype=float))
        if len(c) != K:
            raise NeighborhoodError(f"expected {K} centers, got {len(c)}")
    lo_lim, hi_lim = -B + eps_C, B - eps_C
    for cj in c:
        if cj - alpha < lo_lim - 1e-12 * B or cj + alpha > hi_lim + 1e-12 * B:
            raise NeighborhoodError(f"neighborhood around {cj} leaves ({lo_lim}, {hi_lim})")
    if np.any(np.diff(c) <= 2 * alpha):
        j = int(np.argmax(np.diff(c) <= 2 * alpha))
        raise NeighborhoodError(f"neighborhoods around {c[j]} and {c[j + 1]} overlap")

    keep, dropped = [], []
    for cj in c:
        hit = [z for z in C if cj - alpha <= z + eps_C and cj + alpha >= z - eps_C]
        if hit and not skip_collisions:
            raise NeighborhoodError(f"neighborhood around center {cj} meets C point {hit[0]} (margin {eps_C})")
        (dropped if hit else keep).append(float(cj))
    if not keep:
        raise NeighborhoodError("every neighborhood collides with C")
    return NeighborhoodSet(
        centers=np.array(keep), half_width=float(alpha), B=float(B),
        forbidden=tuple(float(z) for z in C), eps_C=float(eps_C), dropped=tuple(dropped),
    )


def _bin_mask(spec: SpectrumEstimate, a: float, b: float) -> np.ndarray:
    return (spec.u >= a) & (spec.u <= b)


def estimated_interval_measure(spec: SpectrumEstimate, a: float, b: float) -> float:
    """Riemann sum du * sum P_k over bins with u_k in [a, b]."""
    if a > b:
        raise ConfigError(f"need a <= b, got [{a}, {b}]")
    if a < spec.u[0] or b > spec.u[-1]:
        raise RangeError(
            f"[{a}, {b}] exceeds the spectral range [{spec.u[0]}, {spec.u[-1]}]; tau below its bound?"
        )
    return spec.du * float(np.sum(spec.P[_bin_mask(spec, a, b)]))


def neighborhood_measures(spec: SpectrumEstimate, fn: AnalyticFunction, nbs: NeighborhoodSet, exact_truth: bool = False):
    """Per-neighborhood (estimated, true) Riemann sums, as two arrays."""
    est = np.empty(nbs.K)
    tru = np.empty(nbs.K)
    for j, (a, b) in enumerate(nbs.intervals()):
        mask = _bin_mask(spec, a, b)
        if not mask.any():
            raise DegenerateNeighborhoodError(
                f"neighborhood [{a}, {b}] holds no bins (du={spec.du}); increase N or alpha"
            )
        est[j] = estimated_interval_measure(spec, a, b)
        if exact_truth:
            tru[j] = true_interval_measure(fn, a, b, eps_c=nbs.eps_C)
        else:
            tru[j] = spec.du * float(np.sum(true_density(fn, spec.u[mask])))
    return est, tru


def delta_stat(spec: SpectrumEstimate, fn: AnalyticFunction, nbs: NeighborhoodSet, exact_truth: bool = False) -> float:
    """Average over neighborhoods of |Riemann sum of (P_k - P_true(u_k))|.

    ``exact_truth`` replaces the bin-sampled true density by its exact
    integral over the neighborhood.
    """
    est, tru = neighborhood_measures(spec, fn, nbs, exact_truth)
    return float(np.mean(np.abs(est - tru)))


# -- sweeps ------------------------------------------------------------------


@dataclass(frozen=True)
class Fit:
    slope: Optional[float]
    intercept: Optional[float]
    r2: Optional[float]
    n_points: int
    slope_ci95: Optional[tuple[float, float]] = None

    def as_dict(self) -> dict:
        d = asdict(self)
        if self.slope_ci95 is not None:
            d["slope_ci95"] = list(self.slope_ci95)
        return d


def fit_line(x: Sequence[float], y: Sequence[float]) -> Fit:
    """Ordinary least squares with a t-based 95% interval on the slope."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    if n < 2:
        return Fit(None, None, None, n)
    res = stats.linregress(x, y)
    ci = None
    if n > 2:
        t = stats.t.ppf(0.975, n - 2)
        ci = (float(res.slope - t * res.stderr), float(res.slope + t * res.stderr))
    return Fit(float(res.slope), float(res.intercept), float(res.rvalue**2), n, ci)


def fit_loglog(x: Sequence[float], y: Sequence[float]) -> Fit:
    return fit_line(np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float)))


@dataclass(frozen=True)
class Row:
    N: int
    tau: float
    delta: float
    below_bound: bool = False


@dataclass(frozen=True)
class ConvergenceRecord:
    rows: tuple[Row, ...]
    fit: Fit
    kind: str
    config: dict = field(default_factory=dict)

    @property
    def slope(self) -> Optional[float]:
        return self.fit.slope

    @property
    def deltas(self) -> np.ndarray:
        return np.array([r.delta for r in self.rows])

    def halving_ratios(self) -> np.ndarray:
        d = self.deltas
        return d[1:] / d[:-1]

    def to_csv(self, path) -> None:
        Path(path).write_text(self.csv_text())

    def csv_text(self) -> str:
        if self.kind == "tau_sweep":
            lines = ["N,tau,delta,below_bound"]
            lines += [f"{r.N},{r.tau!r},{r.delta!r},{int(r.below_bound)}" for r in self.rows]
        else:
            lines = ["N,tau,delta"] + [f"{r.N},{r.tau!r},{r.delta!r}" for r in self.rows]
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {**self.fit.as_dict(), "kind": self.kind, "config": self.config,
                "flagged_rows": [i for i, r in enumerate(self.rows) if r.below_bound]}


def _default_nbs(fn: AnalyticFunction, B: float, K: int, alpha: Optional[float], eps_C: Optional[float]) -> NeighborhoodSet:
    return build_neighborhoods(B, K, alpha, C=fn.C, eps_C=eps_C, skip_collisions=True)


def _one_delta(fn, N, tau, B, nbs, exact_truth):
    spec = scaled_dft(build_wavefield(sample(fn, N), tau, B=B))
    return delta_stat(spec, fn, nbs, exact_truth)


def _run(jobs, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(lambda a: _one_delta(*a), jobs))
    return [_one_delta(*a) for a in jobs]


def n_sweep(
    fn: AnalyticFunction,
    Ns: Sequence[int],
    K: int = 255,
    alpha: Optional[float] = None,
    B: Optional[float] = None,
    eps_C: Optional[float] = None,
    exact_truth: bool = False,
    workers: int = 1,
) -> ConvergenceRecord:
    """Delta at tau = B L / (pi N) for each N; slope of log Delta against log N.

    ``B`` defaults to the catalog bound ``fn.B_true``.  Neighborhoods meeting
    C are skipped and listed in the config snapshot.
    """
    Ns = [int(n) for n in Ns]
    if not Ns:
        raise ConfigError("Ns must be nonempty")
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ConfigError("Ns must be strictly ascending")
    B = fn.B_true if B is None else float(B)
    nbs = _default_nbs(fn, B, K, alpha, eps_C)
    taus = [tau_lower_bound(B, fn.L, N) for N in Ns]
    deltas = _run([(fn, N, t, B, nbs, exact_truth) for N, t in zip(Ns, taus)], workers)
    rows = tuple(Row(N, t, d) for N, t, d in zip(Ns, taus, deltas))
    fit = fit_loglog(Ns, deltas) if len(rows) > 1 else Fit(None, None, None, len(rows))
    return ConvergenceRecord(rows, fit, "n_sweep", _config(fn, B, nbs, exact_truth, K))


def tau_sweep(
    fn: AnalyticFunction,
    N0: int,
    taus: Sequence[float],
    K: int = 255,
    alpha: Optional[float] = None,
    B: Optional[float] = None,
    eps_C: Optional[float] = None,
    exact_truth: bool = False,
    workers: int = 1,
) -> ConvergenceRecord:
    """Delta at fixed N0 for each tau (descending); linear fit of Delta against tau.

    Rows with tau below the lower bound are flagged; their delta is taken over
    the neighborhoods still inside the narrowed spectral range (NaN if none).
    """
    taus = [float(t) for t in taus]
    if not taus:
        raise ConfigError("taus must be nonempty")
    if any(b >= a for a, b in zip(taus, taus[1:])):
        raise ConfigError("taus must be strictly descending")
    B = fn.B_true if B is None else float(B)
    nbs = _default_nbs(fn, B, K, alpha, eps_C)
    tmin = tau_lower_bound(B, fn.L, N0)
    below = [t < tmin * (1 - 1e-9) for t in taus]

    def one(args):
        fn_, N_, t, B_, nbs_, exact = args
        spec = scaled_dft(build_wavefield(sample(fn_, N_), t, B=B_))
        inside = _inside_range(spec, nbs_)
        if inside is None:
            return math.nan
        return delta_stat(spec, fn_, inside, exact)

    jobs = [(fn, N0, t, B, nbs, exact_truth) for t in taus]
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            deltas = list(ex.map(one, jobs))
    else:
        deltas = [one(j) for j in jobs]
    rows = tuple(Row(N0, t, d, b) for t, d, b in zip(taus, deltas, below))
    ok = [(r.tau, r.delta) for r in rows if math.isfinite(r.delta)]
    fit = fit_line(*zip(*ok)) if len(ok) > 1 else Fit(None, None, None, len(ok))
    cfg = _config(fn, B, nbs, exact_truth, K)
    cfg["tau_lower_bound"] = tmin
    return ConvergenceRecord(rows, fit, "tau_sweep", cfg)


def _inside_range(spec: SpectrumEstimate, nbs: NeighborhoodSet) -> Optional[NeighborhoodSet]:
    keep = (nbs.centers - nbs.half_width >= spec.u[0]) & (nbs.centers + nbs.half_width <= spec.u[-1])
    if keep.all():
        return nbs
    if not keep.any():
        return None
    return NeighborhoodSet(nbs.centers[keep], nbs.half_width, nbs.B, nbs.forbidden, nbs.eps_C, nbs.dropped)


def _config(fn, B, nbs, exact_truth, K_requested) -> dict:
    return {
        "fn": fn.name,
        "L": fn.L,
        "B": B,
        "K_requested": K_requested,
        "K": nbs.K,
        "alpha": nbs.half_width,
        "eps_C": nbs.eps_C,
        "dropped_centers": list(nbs.dropped),
        "exact_truth": exact_truth,
    }
