"""Wave field and centered scaled discrete power spectrum.

The samples enter as the phase of phi_n = exp(i S(y_n) / tau) / sqrt(L).  Its
scaled DFT on the centered frequencies u_k = 2 pi tau (k - N/2) / (N delta)
is squared to give P_k; with bin width du = 2 pi tau / (N delta) the values
du * P_k sum to one and approximate the density of S'.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import polars as pl

from .errors import ConfigError, SizingError
from .functions import SampledFunction, estimate_bound

DIRECT_MAX_N = 4096
_BOUND_RTOL = 1e-9


def tau_lower_bound(B: float, L: float, N: int) -> float:
    """Smallest tau whose spectral range [-pi tau/delta, pi tau/delta] covers [-B, B]."""
    if B <= 0 or L <= 0:
        raise ConfigError("B and L must be positive")
    if N < 4:
        raise SizingError(f"N must be at least 4, got {N}")
    return B * L / (math.pi * N)


@dataclass(frozen=True)
class WaveField:
    tau: float
    L: float
    N: int
    phi: np.ndarray
    B: Optional[float] = None

    @property
    def delta(self) -> float:
        return self.L / self.N

    @property
    def tau_min(self) -> Optional[float]:
        return None if self.B is None else tau_lower_bound(self.B, self.L, self.N)

    @property
    def respects_bound(self) -> bool:
        t = self.tau_min
        return t is None or self.tau >= t * (1 - _BOUND_RTOL)

    @property
    def at_lower_bound(self) -> bool:
        t = self.tau_min
        return t is not None and math.isclose(self.tau, t, rel_tol=_BOUND_RTOL)


@dataclass(frozen=True)
class SpectrumEstimate:
    tau: float
    L: float
    N: int
    u: np.ndarray
    P: np.ndarray
    B: Optional[float] = None

    @property
    def delta(self) -> float:
        return self.L / self.N

    @property
    def du(self) -> float:
        return 2 * math.pi * self.tau / (self.N * self.delta)

    @property
    def u_max(self) -> float:
        return math.pi * self.tau / self.delta

    @property
    def tau_min(self) -> Optional[float]:
        return None if self.B is None else tau_lower_bound(self.B, self.L, self.N)

    @property
    def respects_bound(self) -> bool:
        t = self.tau_min
        return t is None or self.tau >= t * (1 - _BOUND_RTOL)

    @property
    def at_lower_bound(self) -> bool:
        t = self.tau_min
        return t is not None and math.isclose(self.tau, t, rel_tol=_BOUND_RTOL)

    def total_mass(self) -> float:
        return self.du * float(np.sum(self.P))

    def metadata(self) -> dict:
        return {
            "N": self.N,
            "L": self.L,
            "delta": self.delta,
            "tau": self.tau,
            "B": self.B,
            "tau_at_lower_bound": self.at_lower_bound,
            "tau_respects_bound": self.respects_bound,
        }

    def csv_bytes(self) -> bytes:
        """``k,u,P`` rows; floats in shortest round-trip form."""
        frame = pl.DataFrame({"k": np.arange(self.N), "u": self.u, "P": self.P})
        return frame.write_csv(None, line_terminator="\n").encode()

    def to_csv(self, path) -> None:
        Path(path).write_bytes(self.csv_bytes())

    def write_metadata(self, path, extra: Optional[dict] = None) -> None:
        meta = self.metadata()
        if extra:
            meta.update(extra)
        Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def build_wavefield(samples: SampledFunction, tau: float, B: Optional[float] = None) -> WaveField:
    """Wrap the samples as the phase of a unit-modulus field scaled by 1/sqrt(L).

    ``B`` is only recorded (for bound bookkeeping); when omitted it is
    estimated from the samples by finite differences.
    """
    if not tau > 0:
        raise ConfigError(f"tau must be positive, got {tau}")
    if B is None:
        B = estimate_bound(samples)
    phi = np.exp(1j * (samples.values / tau)) / math.sqrt(samples.L)
    return WaveField(tau=float(tau), L=samples.L, N=samples.N, phi=phi, B=B)


def scaled_frequencies(tau: float, L: float, N: int) -> np.ndarray:
    return 2 * math.pi * tau * (np.arange(N) - N // 2) / L


def scaled_dft(wf: WaveField) -> SpectrumEstimate:
    """Centered scaled power spectrum in O(N log N).

    With y_n = (n + 1/2) delta and u_k y_n / tau = 2 pi (k - N/2)(n + 1/2) / N,
    the kernel factors into exp(-2 pi i k n / N) (a stock FFT), a (-1)^n
    pre-modulation and a post twiddle exp(-i pi (k - N/2) / N).
    """
    spec = scaled_dft_complex(wf)
    P = spec.real**2 + spec.imag**2
    return SpectrumEstimate(tau=wf.tau, L=wf.L, N=wf.N, u=scaled_frequencies(wf.tau, wf.L, wf.N), P=P, B=wf.B)


def direct_scaled_dft(wf: WaveField) -> SpectrumEstimate:
    """Literal O(N^2) evaluation of the scaled DFT; reference for :func:`scaled_dft`."""
    N = wf.N
    if N > DIRECT_MAX_N:
        raise SizingError(f"direct evaluation limited to N <= {DIRECT_MAX_N}, got {N}")
    y = (np.arange(N) + 0.5) * wf.delta
    u = scaled_frequencies(wf.tau, wf.L, N)
    F = np.empty(N, dtype=complex)
    for k in range(N):
        F[k] = np.sum(wf.phi * np.exp(-1j * u[k] * y / wf.tau))
    F *= wf.delta / math.sqrt(2 * math.pi * wf.tau)
    return SpectrumEstimate(tau=wf.tau, L=wf.L, N=N, u=u, P=np.abs(F) ** 2, B=wf.B)


def scaled_dft_complex(wf: WaveField) -> np.ndarray:
    """The complex values F^D_tau(u_k) behind :func:`scaled_dft`."""
    N = wf.N
    k = np.arange(N)
    spec = np.fft.fft(wf.phi * np.where(k % 2, -1.0, 1.0))
    spec *= np.exp(-1j * math.pi * (k - N // 2) / N)
    return spec * (wf.delta / math.sqrt(2 * math.pi * wf.tau))


def estimate_spectrum(samples: SampledFunction, B: Optional[float] = None, tau: Optional[float] = None) -> SpectrumEstimate:
    """Full pipeline: bound, tau (lower bound unless given), field, spectrum."""
    if B is None:
        B = estimate_bound(samples)
    if tau is None:
        tau = tau_lower_bound(B, samples.L, samples.N)
    return scaled_dft(build_wavefield(samples, tau, B=B))
