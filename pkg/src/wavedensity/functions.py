"""Analytic test functions, uniform sampling and derivative-bound estimation.

A function enters the catalog as an :class:`AnalyticFunction`: closed-form
S, s = S', S'', the domain length L, the derivative bound B and the finite
set C of derivative values where the density of s is undefined.  The
samples the estimator consumes are a :class:`SampledFunction` on the
half-sample grid y_n = (n + 1/2) L / N.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, SizingError

ArrayFunc = Callable[[np.ndarray], np.ndarray]

MIN_SAMPLES = 4


def default_beta(sup_abs_s: float) -> float:
    """Slack added to sup|s| so that |s| < B holds strictly."""
    return 1e-6 * max(1.0, float(sup_abs_s))


@dataclass(frozen=True)
class AnalyticFunction:
    """Closed-form S with everything the oracles need.

    ``S``, ``s`` and ``Spp`` accept and return numpy arrays.  ``density`` is
    the closed-form density of s(X), X ~ U[0, L], when one is known; it must
    return 0 outside the image of s.
    """

    name: str
    L: float
    S: ArrayFunc
    s: ArrayFunc
    Spp: ArrayFunc
    B_true: float
    C: tuple[float, ...]
    density: Optional[ArrayFunc] = None
    sup_abs_s: float = field(default=float("nan"))

    @property
    def beta(self) -> float:
        return self.B_true - self.sup_abs_s

    def S_ext(self, x) -> np.ndarray:
        """S continued linearly beyond [0, L] with slopes s(0) and s(L)."""
        x = np.asarray(x, dtype=float)
        L = self.L
        s0 = float(self.s(np.array(0.0)))
        sL = float(self.s(np.array(L)))
        S0 = float(self.S(np.array(0.0)))
        SL = float(self.S(np.array(L)))
        inner = self.S(np.clip(x, 0.0, L))
        out = np.where(x < 0.0, S0 + s0 * x, inner)
        return np.where(x > L, SL + sL * (x - L), out)

    def s_ext(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.s(np.clip(x, 0.0, self.L))

    def in_forbidden(self, u: float, margin: float) -> bool:
        return any(abs(u - c) <= margin for c in self.C)


@dataclass(frozen=True)
class SampledFunction:
    """N samples S(y_n) at y_n = (n + 1/2) * delta, delta = L / N."""

    L: float
    N: int
    values: np.ndarray
    source: str = ""

    def __post_init__(self):
        _check_sample_count(self.N)
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.N,):
            raise SizingError(f"expected {self.N} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ConfigError("sample values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def delta(self) -> float:
        return self.L / self.N

    @property
    def y(self) -> np.ndarray:
        return sample_locations(self.L, self.N)

    def to_csv(self, path) -> None:
        """Write ``n,y,S`` rows with round-trippable decimals."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "y", "S"])
            for n, (y, v) in enumerate(zip(self.y, self.values)):
                w.writerow([n, repr(float(y)), repr(float(v))])

    @classmethod
    def from_csv(cls, path, L: Optional[float] = None) -> "SampledFunction":
        """Read a ``n,y,S`` file.  L is inferred from the grid when omitted."""
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["n", "y", "S"]:
                raise ConfigError(f"{path}: expected header n,y,S")
            rows = [(int(r["n"]), float(r["y"]), float(r["S"])) for r in reader]
        if not rows:
            raise ConfigError(f"{path}: no samples")
        rows.sort()
        if [r[0] for r in rows] != list(range(len(rows))):
            raise ConfigError(f"{path}: sample indices must be 0..N-1")
        N = len(rows)
        if L is None:
            # y_0 = delta / 2 on the half-sample grid
            L = 2.0 * rows[0][1] * N
        y = np.array([r[1] for r in rows])
        if not np.allclose(y, sample_locations(L, N), rtol=1e-9, atol=1e-12 * L):
            raise ConfigError(f"{path}: y column is not the grid (n + 1/2) L / N")
        return cls(L=L, N=N, values=np.array([r[2] for r in rows]), source=str(path))


def _check_sample_count(N) -> None:
    if isinstance(N, bool) or int(N) != N:
        raise SizingError(f"N must be an integer, got {N!r}")
    if N < MIN_SAMPLES:
        raise SizingError(f"N must be at least {MIN_SAMPLES}, got {N}")
    if N % 2:
        raise SizingError(f"N must be even, got {N}")


def sample_locations(L: float, N: int) -> np.ndarray:
    return (np.arange(N) + 0.5) * (L / N)


def sample(fn: AnalyticFunction, N: int) -> SampledFunction:
    """Evaluate ``fn.S`` on the half-sample grid of N points."""
    _check_sample_count(N)
    N = int(N)
    values = np.asarray(fn.S(sample_locations(fn.L, N)), dtype=float)
    return SampledFunction(L=fn.L, N=N, values=values, source=fn.name)


def finite_differences(samples: SampledFunction) -> np.ndarray:
    """Forward differences (S(y_{n+1}) - S(y_n)) / delta, N - 1 values."""
    return np.diff(samples.values) / samples.delta


def estimate_bound(samples: SampledFunction, beta: Optional[float] = None) -> float:
    """Derivative bound from samples: max forward-difference magnitude plus beta.

    With ``beta=None`` the catalog default ``1e-6 * max(1, estimate)`` is used.
    """
    raw = float(np.max(np.abs(finite_differences(samples))))
    if beta is None:
        beta = default_beta(raw)
    if beta <= 0:
        raise ConfigError("beta must be positive")
    return raw + beta


# -- catalog -----------------------------------------------------------------

_REGISTRY: dict[str, Callable[[], AnalyticFunction]] = {}


def _flat_fraction(fn: AnalyticFunction, grid: int = 100_001) -> float:
    x = np.linspace(0.0, fn.L, grid)
    spp = np.abs(np.asarray(fn.Spp(x), dtype=float))
    scale = max(1.0, float(np.max(spp)))
    return float(np.mean(spp <= 1e-12 * scale))


def validate(fn: AnalyticFunction) -> AnalyticFunction:
    """Reject functions the density theory does not cover.

    S'' must vanish only on a null set, |s| must stay below B_true, and C must
    contain the endpoint derivatives.
    """
    if fn.L <= 0:
        raise ConfigError(f"{fn.name}: L must be positive")
    if _flat_fraction(fn) > 1e-3:
        raise ConfigError(f"{fn.name}: S'' vanishes on a set of positive measure")
    x = np.linspace(0.0, fn.L, 100_001)
    if np.max(np.abs(fn.s(x))) >= fn.B_true:
        raise ConfigError(f"{fn.name}: |s| reaches B_true")
    for end in (0.0, fn.L):
        s_end = float(fn.s(np.array(end)))
        if not any(math.isclose(s_end, c, rel_tol=1e-12, abs_tol=1e-12) for c in fn.C):
            raise ConfigError(f"{fn.name}: C is missing s({end}) = {s_end}")
    return fn


def register(name: str, factory: Callable[[], AnalyticFunction]) -> None:
    validate(factory())
    _REGISTRY[name] = factory


def get_builtin(name: str) -> AnalyticFunction:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise ConfigError(f"unknown function {name!r}; choose from {sorted(_REGISTRY)}") from None


def builtin_names() -> list[str]:
    return sorted(_REGISTRY)


def builtin_sine() -> AnalyticFunction:
    """S(x) = sin(pi (x - 1)) on [0, 2]; two preimages for every |u| < pi."""
    pi = math.pi

    def density(u):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        inside = np.abs(u) < pi
        out[inside] = 1.0 / (pi**2 * np.sin(np.arccos(u[inside] / pi)))
        return out

    return AnalyticFunction(
        name="sine",
        L=2.0,
        S=lambda x: np.sin(pi * (np.asarray(x, dtype=float) - 1.0)),
        s=lambda x: pi * np.cos(pi * (np.asarray(x, dtype=float) - 1.0)),
        Spp=lambda x: -(pi**2) * np.sin(pi * (np.asarray(x, dtype=float) - 1.0)),
        B_true=pi + default_beta(pi),
        C=(-pi, pi),
        density=density,
        sup_abs_s=pi,
    )


def builtin_quadratic() -> AnalyticFunction:
    """S(x) = x^2 / 2 on [0, 1]; the derivative is uniform on (0, 1)."""

    def density(u):
        u = np.asarray(u, dtype=float)
        return ((u > 0.0) & (u < 1.0)).astype(float)

    return AnalyticFunction(
        name="quadratic",
        L=1.0,
        S=lambda x: 0.5 * np.asarray(x, dtype=float) ** 2,
        s=lambda x: np.asarray(x, dtype=float) * 1.0,
        Spp=lambda x: np.ones_like(np.asarray(x, dtype=float)),
        B_true=1.0 + default_beta(1.0),
        C=(0.0, 1.0),
        density=density,
        sup_abs_s=1.0,
    )


register("sine", builtin_sine)
register("quadratic", builtin_quadratic)
