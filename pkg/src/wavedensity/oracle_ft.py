"""Continuous scaled Fourier transform of the windowed wave function.

Small-N laboratory for checking the discrete spectrum against its continuous
counterpart.  The window H is 1 on [0, L] and ramps linearly to 0 at
rho1 = -delta/2 and rho2 = L + delta/2; S is continued linearly outside
[0, L].  Integrals use composite Simpson on the three smooth pieces with a
step small enough that the phase advances < 0.05 rad per step, and every
result is checked against a run at half the step.

Sampling on the half-sample grid shifts the Poisson summation replicas by
delta/2, so the l-th replica carries the phase (-1)^l:

    F^D_tau(u_k) = sum_l (-1)^l F_tau(u_k - gamma_l),  gamma_l = 2 pi tau l / delta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .errors import ConfigError, QuadratureInfeasibleError, SizingError
from .functions import AnalyticFunction, SampledFunction
from .spectrum import build_wavefield, scaled_dft_complex, tau_lower_bound
from .truth import find_roots

PHASE_STEP = 0.05
SELF_CHECK_TOL = 1e-6
MAX_NODES = 1 << 22
POISSON_MAX_N = 256
DEFAULT_LMAX = 50


@dataclass(frozen=True)
class WindowedIntegrand:
    fn: AnalyticFunction
    N: int
    tau: float
    B: Optional[float] = None

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigError("tau must be positive")
        if self.N < 4 or self.N % 2:
            raise SizingError(f"N must be even and >= 4, got {self.N}")

    @property
    def bound(self) -> float:
        return self.fn.B_true if self.B is None else self.B

    @property
    def L(self) -> float:
        return self.fn.L

    @property
    def delta(self) -> float:
        return self.fn.L / self.N

    @property
    def rho1(self) -> float:
        return -0.5 * self.delta

    @property
    def rho2(self) -> float:
        return self.fn.L + 0.5 * self.delta

    def H(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        left = (x - self.rho1) / (-self.rho1)
        right = (self.rho2 - x) / (self.rho2 - self.L)
        out = np.where(x < 0.0, left, np.where(x > self.L, right, 1.0))
        return np.clip(out, 0.0, 1.0)

    def phi(self, x) -> np.ndarray:
        return self.H(x) * np.exp(1j * self.fn.S_ext(x) / self.tau) / math.sqrt(self.L)


def at_lower_bound(fn: AnalyticFunction, N: int, B: Optional[float] = None) -> WindowedIntegrand:
    B = fn.B_true if B is None else B
    return WindowedIntegrand(fn, N, tau_lower_bound(B, fn.L, N), B)


# -- quadrature core -----------------------------------------------------------


def _simpson(n: int) -> np.ndarray:
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def _refinement(wi: WindowedIntegrand, u_abs: float) -> int:
    """Sub-steps per sample interval so that h <= tau / (20 (B + |u|)); a multiple of 4."""
    h_max = wi.tau * PHASE_STEP / (wi.bound + u_abs)
    r = math.ceil(wi.delta / h_max)
    return 4 * math.ceil(r / 4)


def _node_count(wi: WindowedIntegrand, r: int) -> int:
    return (wi.N + 1) * r + 1


def _nodes(wi: WindowedIntegrand, r: int):
    """Nodes x_j = rho1 + j h, h = delta / r, with Simpson-times-window weights."""
    h = wi.delta / r
    q = r // 2
    M = (wi.N + 1) * r
    x = wi.rho1 + h * np.arange(M + 1)
    w = np.zeros(M + 1)
    w[: q + 1] += _simpson(q)
    w[q : q + wi.N * r + 1] += _simpson(wi.N * r)
    w[q + wi.N * r :] += _simpson(q)
    H = np.ones(M + 1)
    H[: q + 1] = np.arange(q + 1) / q
    H[q + wi.N * r :] = np.arange(q, -1, -1) / q
    return x, h * w * H


def _check_budget(wi: WindowedIntegrand, r: int, max_nodes: int) -> None:
    if _node_count(wi, 2 * r) > max_nodes:
        raise QuadratureInfeasibleError(
            f"phase-resolving quadrature needs {_node_count(wi, 2 * r)} nodes (> {max_nodes}) "
            f"at N={wi.N}, tau={wi.tau:g}; use a smaller N"
        )


def _direct(wi: WindowedIntegrand, u: np.ndarray, r: int) -> np.ndarray:
    x, w = _nodes(wi, r)
    g = w * np.exp(1j * wi.fn.S_ext(x) / wi.tau)
    out = np.empty(len(u), dtype=complex)
    for i, ui in enumerate(u):
        out[i] = np.sum(g * np.exp(-1j * ui * x / wi.tau))
    return out / math.sqrt(2 * math.pi * wi.tau * wi.L)


def quadrature_scaled_ft(
    wi: WindowedIntegrand,
    u,
    tol: float = SELF_CHECK_TOL,
    max_nodes: int = MAX_NODES,
):
    """F_tau(u) = (2 pi tau)^(-1/2) * integral of phi_tau(x) exp(-i u x / tau) over [rho1, rho2].

    Accepts a scalar or an array of frequencies.  The result is accepted once
    halving the step changes it by less than ``tol``.
    """
    scalar = np.ndim(u) == 0
    uu = np.atleast_1d(np.asarray(u, dtype=float))
    r = _refinement(wi, float(np.max(np.abs(uu))))
    while True:
        _check_budget(wi, r, max_nodes)
        coarse = _direct(wi, uu, r)
        fine = _direct(wi, uu, 2 * r)
        if np.max(np.abs(fine - coarse)) < tol:
            break
        r *= 2
    return complex(fine[0]) if scalar else fine


def _lattice_values(wi: WindowedIntegrand, r: int, oversample: int) -> np.ndarray:
    """Quadrature sums at every u = 2 pi tau m / (oversample L), m in FFT order."""
    x, w = _nodes(wi, r)
    c = w * np.exp(1j * wi.fn.S_ext(x) / wi.tau)
    M = oversample * wi.N * r
    folded = np.zeros(M, dtype=complex)
    np.add.at(folded, np.arange(len(c)) % M, c)
    F = np.fft.fft(folded)
    m = np.fft.fftfreq(M, 1.0 / M)
    F *= np.exp(-2j * math.pi * m * wi.rho1 / (oversample * wi.L))
    return F / math.sqrt(2 * math.pi * wi.tau * wi.L)


def lattice_spacing(wi: WindowedIntegrand, oversample: int = 1) -> float:
    return 2 * math.pi * wi.tau / (oversample * wi.L)


def scaled_ft_lattice(
    wi: WindowedIntegrand,
    m: Sequence[int],
    oversample: int = 1,
    tol: float = SELF_CHECK_TOL,
    max_nodes: int = MAX_NODES,
) -> np.ndarray:
    """F_tau at u = m * lattice_spacing(wi, oversample) for integer m, via one FFT.

    With oversample = 1 the lattice is exactly the set of DFT bins and their
    aliases u_k - gamma_l.  Same quadrature rule and acceptance test as
    :func:`quadrature_scaled_ft`.
    """
    m = np.asarray(m, dtype=np.int64)
    u_abs = float(np.max(np.abs(m))) * lattice_spacing(wi, oversample)
    r = _refinement(wi, u_abs)
    while True:
        _check_budget(wi, r, max_nodes)
        M = oversample * wi.N * r
        coarse = _lattice_values(wi, r, oversample)[m % M]
        M2 = 2 * M
        fine = _lattice_values(wi, 2 * r, oversample)[m % M2]
        if np.max(np.abs(fine - coarse)) < tol:
            return fine
        r *= 2


# -- Poisson identity ------------------------------------------------------------


@dataclass(frozen=True)
class AliasingSum:
    u: float
    head: complex
    tail_bound: float
    l_max: int
    terms: np.ndarray  # signed replicas (-1)^l F_tau(u - gamma_l), l = -l_max..l_max, l != 0


def _tail_bound(wi: WindowedIntegrand, ls: np.ndarray, signed: np.ndarray, l_max: int) -> float:
    """Tail of the replica series from the c sqrt(tau) / (B(|l|-1) + beta)^2 decay.

    c is fitted as the largest scaled magnitude over the upper half of the
    computed replicas; the remaining sum is a trigamma value.
    """
    B = wi.bound
    beta = max(wi.bound - wi.fn.sup_abs_s, 1e-300) if math.isfinite(wi.fn.sup_abs_s) else 1e-6 * B
    upper = np.abs(ls) > l_max // 2
    denom = (B * (np.abs(ls[upper]) - 1) + beta) ** 2
    c = float(np.max(np.abs(signed[upper]) * denom)) / math.sqrt(wi.tau)
    series = 2.0 * float(special.polygamma(1, l_max + beta / B)) / B**2
    return c * math.sqrt(wi.tau) * series


def _lattice_index(wi: WindowedIntegrand, u: float) -> Optional[int]:
    m = u / lattice_spacing(wi)
    mi = round(m)
    return int(mi) if abs(m - mi) <= 1e-9 * max(1.0, abs(m)) else None


def aliasing_sum(wi: WindowedIntegrand, u_k: float, l_max: int = DEFAULT_LMAX, max_nodes: int = MAX_NODES) -> AliasingSum:
    """Signed replica sum over 0 < |l| <= l_max, with the estimated remainder."""
    return aliasing_sums(wi, [u_k], l_max, max_nodes)[0]


def aliasing_sums(wi: WindowedIntegrand, us: Sequence[float], l_max: int = DEFAULT_LMAX, max_nodes: int = MAX_NODES) -> list[AliasingSum]:
    if l_max < 1:
        raise ConfigError("l_max must be at least 1")
    ls = np.concatenate([np.arange(-l_max, 0), np.arange(1, l_max + 1)])
    sign = np.where(ls % 2, -1.0, 1.0)
    us = [float(u) for u in us]
    idx = [_lattice_index(wi, u) for u in us]
    out = []
    if all(i is not None for i in idx):
        ms = np.array([[i - wi.N * l for l in ls] for i in idx], dtype=np.int64)
        vals = scaled_ft_lattice(wi, ms.ravel(), max_nodes=max_nodes).reshape(ms.shape)
    else:
        gam = 2 * math.pi * wi.tau * ls / wi.delta
        vals = np.array([quadrature_scaled_ft(wi, u - gam, max_nodes=max_nodes) for u in us])
    for u, row in zip(us, vals):
        signed = sign * row
        out.append(AliasingSum(u, complex(np.sum(signed)), _tail_bound(wi, ls, signed, l_max), l_max, signed))
    return out


@dataclass(frozen=True)
class PoissonCheck:
    k: np.ndarray
    u: np.ndarray
    F_discrete: np.ndarray
    F_continuous: np.ndarray
    aliasing: np.ndarray
    tail_bound: np.ndarray

    @property
    def residual(self) -> np.ndarray:
        return np.abs(self.F_discrete - (self.F_continuous + self.aliasing))

    @property
    def scaled_residual(self) -> np.ndarray:
        return self.residual / (1.0 + np.abs(self.F_discrete))


def poisson_check(
    samples: SampledFunction,
    fn: AnalyticFunction,
    tau: float,
    k=None,
    l_max: int = DEFAULT_LMAX,
    max_nodes: int = MAX_NODES,
    B: Optional[float] = None,
) -> PoissonCheck:
    """Discrete transform vs continuous transform plus replicas, for bins ``k`` (all by default)."""
    N = samples.N
    if samples.L != fn.L:
        raise ConfigError("samples and function disagree on L")
    wi = WindowedIntegrand(fn, N, tau, B)
    # the resolution guard comes first: it is the binding limit for oscillatory S
    u_far = (N // 2 + l_max * N) * lattice_spacing(wi)
    _check_budget(wi, _refinement(wi, u_far), max_nodes)
    if N > POISSON_MAX_N:
        raise SizingError(f"Poisson check limited to N <= {POISSON_MAX_N}, got {N}")
    FD = scaled_dft_complex(build_wavefield(samples, tau, B=wi.bound))
    ks = np.arange(N) if k is None else np.atleast_1d(np.asarray(k, dtype=int))
    m0 = ks - N // 2
    Fc = scaled_ft_lattice(wi, m0, max_nodes=max_nodes)
    sums = aliasing_sums(wi, m0 * lattice_spacing(wi), l_max, max_nodes)
    return PoissonCheck(
        k=ks,
        u=m0 * lattice_spacing(wi),
        F_discrete=FD[ks],
        F_continuous=Fc,
        aliasing=np.array([a.head for a in sums]),
        tail_bound=np.array([a.tail_bound for a in sums]),
    )


def poisson_residual(samples: SampledFunction, fn: AnalyticFunction, tau: float, k: int, l_max: int = DEFAULT_LMAX) -> float:
    """|F^D_tau(u_k) - (F_tau(u_k) + signed replica sum)| for one bin."""
    return float(poisson_check(samples, fn, tau, k=[k], l_max=l_max).residual[0])


# -- stationary phase ------------------------------------------------------------


def stationary_phase_main_term(fn: AnalyticFunction, tau: float, u: float, grid_size: int = 100_000) -> complex:
    """Leading stationary-phase value of F_tau(u): one term per root of s(x) = u."""
    rs = find_roots(fn, u, grid_size)
    if rs.M == 0:
        return 0j
    xm = rs.roots
    spp = rs.Spp_at_roots
    phase = (np.asarray(fn.S(xm), dtype=float) - u * xm) / tau + np.sign(spp) * math.pi / 4
    return complex(np.sum(np.exp(1j * phase) / np.sqrt(np.abs(spp))) / math.sqrt(fn.L))


# -- decay under tau halving -------------------------------------------------------
#
# tau is halved by doubling N with tau held at its lower bound, so delta and
# tau shrink together as in the convergence analysis.  Probe frequencies are
# multiples of the coarsest bin spacing 2 pi tau_0 / L; they stay DFT bins
# (or aliases of bins) at every finer N, which keeps the endpoint phases
# S(0)/tau, S(L)/tau - u L/tau aligned across the halvings.


def halving_ratios(values: Sequence[float]) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    return v[1:] / v[:-1]


def bin_probe(fn: AnalyticFunction, N0: int, m: int, B: Optional[float] = None) -> float:
    """The frequency m * du at sample count N0 with tau at its lower bound."""
    return m * lattice_spacing(at_lower_bound(fn, N0, B))


def no_stationary_magnitudes(fn: AnalyticFunction, N0: int, u: float, halvings: int = 4) -> np.ndarray:
    """|F_tau(u)| sqrt(2 pi tau L) for N = N0 * 2^j, j = 0..halvings.

    ``u`` must stay clear of s([rho1, rho2]) so the integrand has no
    stationary point.
    """
    x = np.linspace(0.0, fn.L, 10_001)
    xi = float(np.min(np.abs(fn.s(x) - u)))
    if xi <= 0.0 or fn.in_forbidden(u, 0.0) or (np.min(fn.s(x)) <= u <= np.max(fn.s(x))):
        raise ConfigError(f"u={u} is attained by s; pick a frequency outside its image")
    out = []
    for j in range(halvings + 1):
        wi = at_lower_bound(fn, N0 * 2**j)
        out.append(abs(quadrature_scaled_ft(wi, u)) * math.sqrt(2 * math.pi * wi.tau * wi.L))
    return np.array(out)


def stationary_phase_residuals(fn: AnalyticFunction, N0: int, u: float, halvings: int = 4) -> np.ndarray:
    """|F_tau(u) - stationary-phase main term| for N = N0 * 2^j."""
    out = []
    for j in range(halvings + 1):
        wi = at_lower_bound(fn, N0 * 2**j)
        out.append(abs(quadrature_scaled_ft(wi, u) - stationary_phase_main_term(fn, wi.tau, u)))
    return np.array(out)


def neighborhood_errors(fn: AnalyticFunction, N: int, intervals: np.ndarray, oversample: int = 32,
                        B: Optional[float] = None) -> np.ndarray:
    """Signed integral of |F_tau|^2 - P over each interval, by a fine Riemann sum.

    |F_tau|^2 is sampled on a lattice ``oversample`` times finer than the DFT
    bins; the true density is sampled at the same points.
    """
    from .truth import true_density

    wi = at_lower_bound(fn, N, B)
    h = lattice_spacing(wi, oversample)
    lo = float(np.min(intervals[:, 0]))
    hi = float(np.max(intervals[:, 1]))
    m = np.arange(math.floor(lo / h), math.ceil(hi / h) + 1)
    u = m * h
    P = np.abs(scaled_ft_lattice(wi, m, oversample=oversample)) ** 2
    out = np.empty(len(intervals))
    for i, (a, b) in enumerate(intervals):
        sel = (u >= a) & (u <= b)
        out[i] = h * float(np.sum(P[sel] - true_density(fn, u[sel])))
    return out


def integrated_error_decay(fn: AnalyticFunction, N0: int, K: int = 31, halvings: int = 4,
                           oversample: int = 32) -> np.ndarray:
    """Mean over K neighborhoods of |integral of (|F_tau|^2 - P)|, for N = N0 * 2^j."""
    from .convergence import build_neighborhoods

    nbs = build_neighborhoods(fn.B_true, K, C=fn.C, skip_collisions=True)
    iv = nbs.intervals()
    return np.array([
        float(np.mean(np.abs(neighborhood_errors(fn, N0 * 2**j, iv, oversample))))
        for j in range(halvings + 1)
    ])
