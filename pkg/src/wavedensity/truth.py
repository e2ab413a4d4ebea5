"""Ground-truth densities of s = S' for analytic functions.

The density at u is (1/L) * sum over the roots x_m of s(x) = u of
1 / |S''(x_m)|.  Roots are enumerated by scanning a uniform grid for sign
changes and refining each bracket by bisection, which keeps the oracle
independent of the Fourier machinery it is used to validate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import ConfigError, ForbiddenValueError, SingularRootError
from .functions import AnalyticFunction

DEFAULT_GRID = 100_000
EPS_C_FRACTION = 0.01
_BISECT_STEPS = 200


def default_eps_c(B: float) -> float:
    """Exclusion margin around the set C."""
    return EPS_C_FRACTION * B


@dataclass(frozen=True)
class RootSet:
    u: float
    roots: np.ndarray
    Spp_at_roots: np.ndarray

    @property
    def M(self) -> int:
        return len(self.roots)


def _check_admissible(fn: AnalyticFunction, u: float, eps_c: Optional[float]) -> None:
    margin = default_eps_c(fn.B_true) if eps_c is None else eps_c
    if fn.in_forbidden(u, margin):
        raise ForbiddenValueError(f"u={u} lies within {margin:g} of the forbidden set C={fn.C}")


def find_roots(fn: AnalyticFunction, u: float, grid_size: int = DEFAULT_GRID, eps_c: Optional[float] = None) -> RootSet:
    """All x in [0, L] with s(x) = u, with S'' evaluated there."""
    if grid_size < 1000:
        raise ConfigError(f"grid_size must be at least 1000, got {grid_size}")
    u = float(u)
    _check_admissible(fn, u, eps_c)
    x = np.linspace(0.0, fn.L, int(grid_size))
    g = np.asarray(fn.s(x), dtype=float) - u
    tol = 1e-12 * (1.0 + abs(u))

    on_node = x[g == 0.0]
    idx = np.nonzero(g[:-1] * g[1:] < 0.0)[0]
    lo, hi = x[idx].copy(), x[idx + 1].copy()
    glo = g[idx]
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        gm = np.asarray(fn.s(mid), dtype=float) - u
        same = np.sign(gm) == np.sign(glo)
        lo = np.where(same, mid, lo)
        glo = np.where(same, gm, glo)
        hi = np.where(same, hi, mid)
        if np.all((hi - lo) <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(lo))):
            break
    bisected = 0.5 * (lo + hi)
    resid = np.abs(np.asarray(fn.s(bisected), dtype=float) - u)
    if np.any(resid > tol):
        bad = bisected[resid > tol][0]
        raise SingularRootError(f"bracket near x={bad} did not resolve to |s-u| <= {tol:g}; S'' vanishes there?")

    roots = np.sort(np.concatenate([on_node, bisected]))
    spp = np.asarray(fn.Spp(roots), dtype=float) * np.ones_like(roots)
    scale = max(1.0, float(np.max(np.abs(fn.Spp(x)))))
    if np.any(np.abs(spp) <= 1e-10 * scale):
        raise SingularRootError(f"S'' vanishes at a root of s(x) = {u}; u belongs to C")
    return RootSet(u=u, roots=roots, Spp_at_roots=spp)


def density_bruteforce(fn: AnalyticFunction, u: float, grid_size: int = DEFAULT_GRID, eps_c: Optional[float] = None) -> float:
    rs = find_roots(fn, u, grid_size, eps_c)
    if rs.M == 0:
        return 0.0
    return float(np.sum(1.0 / np.abs(rs.Spp_at_roots)) / fn.L)


def root_count(fn: AnalyticFunction, u: float, grid_size: int = DEFAULT_GRID, eps_c: Optional[float] = None) -> int:
    return find_roots(fn, u, grid_size, eps_c).M


def true_density(fn: AnalyticFunction, u, grid_size: int = DEFAULT_GRID) -> np.ndarray:
    """Closed form when the catalog has one, root enumeration otherwise.

    Callers are responsible for keeping ``u`` away from C.
    """
    u = np.asarray(u, dtype=float)
    if fn.density is not None:
        return np.asarray(fn.density(u), dtype=float)
    flat = [density_bruteforce(fn, v, grid_size, eps_c=0.0) for v in u.ravel()]
    return np.array(flat).reshape(u.shape)


def true_interval_measure(
    fn: AnalyticFunction,
    a: float,
    b: float,
    eps_c: Optional[float] = None,
    use_closed_form: bool = True,
    grid_size: int = DEFAULT_GRID,
) -> float:
    """Integral of the true density over [a, b] by adaptive quadrature (abs tol 1e-9)."""
    if not a < b:
        raise ConfigError(f"need a < b, got [{a}, {b}]")
    margin = default_eps_c(fn.B_true) if eps_c is None else eps_c
    if a <= -fn.B_true or b >= fn.B_true:
        raise ConfigError(f"[{a}, {b}] is not inside (-B, B) with B={fn.B_true}")
    for c in fn.C:
        if c + margin >= a and c - margin <= b:
            raise ForbiddenValueError(f"[{a}, {b}] touches C point {c} (margin {margin:g})")

    if use_closed_form and fn.density is not None:
        f = lambda v: float(fn.density(np.array(v)))
    else:
        f = lambda v: density_bruteforce(fn, v, grid_size, eps_c=0.0)
    val, _ = integrate.quad(f, a, b, epsabs=1e-9, epsrel=1e-10, limit=200)
    return float(val)

