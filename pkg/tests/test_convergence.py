import math

import numpy as np
import pytest

from oracles import loglog_slope, sine_interval_measure
from wavedensity import convergence as cv
from wavedensity import functions as f
from wavedensity import spectrum as sp
from wavedensity.errors import ConfigError, DegenerateNeighborhoodError, NeighborhoodError, RangeError


@pytest.fixture(scope="module")
def sine():
    return f.builtin_sine()


@pytest.fixture(scope="module")
def quad():
    return f.builtin_quadratic()


def spectrum_at_bound(fn, N, B=None):
    return sp.estimate_spectrum(f.sample(fn, N), B=fn.B_true if B is None else B)


# -- neighborhoods ------------------------------------------------------------------------


def test_default_neighborhoods_for_sine_case_study():
    nbs = cv.build_neighborhoods(math.pi, 255, C=(-math.pi, math.pi))
    iv = nbs.intervals()
    assert nbs.K == 255
    assert np.all(iv[1:, 0] > iv[:-1, 1])
    lim = math.pi - 0.01 * math.pi
    assert iv[0, 0] > -lim - 1e-12 and iv[-1, 1] < lim + 1e-12
    cell = 2 * lim / 255
    assert nbs.half_width == pytest.approx(0.4 * cell)
    assert np.diff(nbs.centers) == pytest.approx(np.full(254, cell))


def test_collision_with_forbidden_set_names_center():
    with pytest.raises(NeighborhoodError, match="center 0.0"):
        cv.build_neighborhoods(1.0, 1, alpha=0.25, C=(0.0, 1.0), eps_C=0.01)
    nbs = cv.build_neighborhoods(1.0, 1, alpha=0.25, C=(0.0, 1.0), eps_C=0.01, centers=[0.5])
    assert nbs.intervals().tolist() == [[0.25, 0.75]]


def test_collisions_can_be_skipped_and_recorded():
    nbs = cv.build_neighborhoods(1.0, 3, alpha=0.1, C=(0.0, 1.0), eps_C=0.01, skip_collisions=True)
    assert nbs.dropped == (0.0,)
    assert nbs.K == 2


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(B=math.pi, K=2, alpha=2 * math.pi),
        dict(B=1.0, K=0),
        dict(B=1.0, K=2, alpha=0.2, centers=[0.1, 0.3]),
        dict(B=1.0, K=1, alpha=0.2, centers=[0.9]),
        dict(B=1.0, K=2, alpha=0.1, centers=[0.5]),
    ],
)
def test_neighborhood_construction_errors(kwargs):
    with pytest.raises(NeighborhoodError):
        cv.build_neighborhoods(**kwargs)


# -- interval measures ---------------------------------------------------------------------


def test_point_mass_interval_measure():
    spec = sp.scaled_dft(sp.build_wavefield(f.SampledFunction(1.0, 64, np.zeros(64)), 0.01, B=1.0))
    assert cv.estimated_interval_measure(spec, -0.05, 0.05) == pytest.approx(1.0, rel=1e-12)
    assert cv.estimated_interval_measure(spec, 0.1, 0.5) == pytest.approx(0.0, abs=1e-20)


def test_interval_outside_spectral_range(quad):
    spec = sp.estimate_spectrum(f.sample(quad, 64), B=quad.B_true, tau=0.001)
    with pytest.raises(RangeError):
        cv.estimated_interval_measure(spec, 0.2, 0.5)


def test_sine_interval_measure_at_large_N(sine):
    spec = spectrum_at_bound(sine, 2**16, B=math.pi)
    assert spec.tau == pytest.approx(2 / 2**16, rel=1e-15)
    assert abs(cv.estimated_interval_measure(spec, -0.1, 0.1) - sine_interval_measure(-0.1, 0.1)) < 5e-3


def test_quadratic_interval_measure(quad):
    spec = spectrum_at_bound(quad, 2**14)
    assert abs(cv.estimated_interval_measure(spec, 0.2, 0.3) - 0.1) < 5e-3


# -- delta statistic -----------------------------------------------------------------------


def test_delta_vanishes_when_truth_is_the_estimate(sine):
    from dataclasses import replace

    spec = spectrum_at_bound(sine, 4096)
    mirror = replace(sine, density=lambda u: np.interp(u, spec.u, spec.P))
    nbs = cv.build_neighborhoods(sine.B_true, 63, C=sine.C)
    assert cv.delta_stat(spec, mirror, nbs) == 0.0


def test_delta_halves_with_N_for_sine(sine):
    nbs = cv.build_neighborhoods(math.pi, 255, C=sine.C)
    d1 = cv.delta_stat(spectrum_at_bound(sine, 2**16, B=math.pi), sine, nbs)
    d2 = cv.delta_stat(spectrum_at_bound(sine, 2**17, B=math.pi), sine, nbs)
    assert 0.35 <= d2 / d1 <= 0.7


def test_delta_quadratic_positive_and_decreasing(quad):
    nbs = cv.build_neighborhoods(quad.B_true, 63, C=quad.C, skip_collisions=True)
    d1 = cv.delta_stat(spectrum_at_bound(quad, 2**12), quad, nbs)
    d2 = cv.delta_stat(spectrum_at_bound(quad, 2**13), quad, nbs)
    assert 0 < d2 < d1 and math.isfinite(d1)


def test_degenerate_neighborhood(quad):
    nbs = cv.build_neighborhoods(quad.B_true, 63, C=quad.C, skip_collisions=True)
    with pytest.raises(DegenerateNeighborhoodError):
        cv.delta_stat(spectrum_at_bound(quad, 8), quad, nbs)


@pytest.mark.parametrize("name,N", [("sine", 4096), ("quadratic", 2048)])
def test_delta_bounds_and_mass(name, N):
    fn = f.get_builtin(name)
    spec = spectrum_at_bound(fn, N)
    nbs = cv.build_neighborhoods(fn.B_true, 63, C=fn.C, skip_collisions=True)
    est, tru = cv.neighborhood_measures(spec, fn, nbs)
    d = cv.delta_stat(spec, fn, nbs)
    assert 0 <= d <= np.mean(est + tru)
    assert np.sum(est) <= 1 + 1e-9


def test_exact_truth_variant_is_close(sine):
    spec = spectrum_at_bound(sine, 2**14)
    nbs = cv.build_neighborhoods(sine.B_true, 31, C=sine.C)
    sampled = cv.delta_stat(spec, sine, nbs)
    exact = cv.delta_stat(spec, sine, nbs, exact_truth=True)
    assert math.isfinite(exact) and exact < 10 * sampled + 1e-3


# -- fitting -----------------------------------------------------------------------------------


def test_loglog_fit_recovers_power_law():
    x = np.array([1.0, 2, 4, 8, 16])
    fit = cv.fit_loglog(x, 3 * x**-0.75)
    assert fit.slope == pytest.approx(-0.75, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0)
    assert fit.n_points == 5


def test_fit_confidence_interval_contains_slope():
    rng = np.random.default_rng(5)
    x = np.arange(10.0)
    fit = cv.fit_line(x, 2 * x + rng.normal(0, 0.1, 10))
    lo, hi = fit.slope_ci95
    assert lo < fit.slope < hi and lo < 2 < hi


def test_fit_single_point_has_no_slope():
    fit = cv.fit_line([1.0], [2.0])
    assert fit.slope is None and fit.n_points == 1


# -- sweeps -------------------------------------------------------------------------------------


def test_quadratic_n_sweep_slope(quad):
    rec = cv.n_sweep(quad, [2**k for k in range(9, 16)], K=63)
    assert -1.4 <= rec.slope <= -0.6
    assert rec.slope == pytest.approx(loglog_slope(rec_n(rec), rec.deltas), abs=1e-10)
    assert rec.config["dropped_centers"] == [0.0]


def rec_n(rec):
    return [r.N for r in rec.rows]


def test_single_n_sweep_has_null_slope(sine):
    rec = cv.n_sweep(sine, [1024])
    assert rec.slope is None
    assert rec.summary()["slope"] is None


def test_n_sweep_requires_ascending(sine):
    with pytest.raises(ConfigError):
        cv.n_sweep(sine, [2048, 1024])


def test_n_sweep_is_independent_of_worker_count(sine):
    Ns = [1024, 2048, 4096]
    a = cv.n_sweep(sine, Ns, workers=1)
    b = cv.n_sweep(sine, Ns, workers=3)
    assert a.csv_text() == b.csv_text()


@pytest.mark.parametrize("eps_frac", [0.005, 0.05])
def test_sine_slope_insensitive_to_forbidden_margin(sine, eps_frac):
    rec = cv.n_sweep(sine, [2**k for k in range(10, 16)], B=math.pi, eps_C=eps_frac * math.pi)
    assert -1.3 <= rec.slope <= -0.7


def test_single_tau_matches_n_sweep(sine):
    N = 65536
    rn = cv.n_sweep(sine, [N], B=math.pi)
    rt = cv.tau_sweep(sine, N, [rn.rows[0].tau], B=math.pi)
    assert rt.rows[0].delta == rn.rows[0].delta


def test_quadratic_tau_sweep_trend(quad):
    N = 2**14
    t0 = sp.tau_lower_bound(quad.B_true, 1.0, N)
    rec = cv.tau_sweep(quad, N, list(t0 * np.geomspace(32, 1, 8)), K=63)
    inversions = sum(b > a for a, b in zip(rec.deltas, rec.deltas[1:]))
    assert inversions <= 1
    assert rec.slope > 0


def test_tau_sweep_flags_rows_below_bound(sine):
    N = 4096
    t0 = sp.tau_lower_bound(sine.B_true, 2.0, N)
    rec = cv.tau_sweep(sine, N, [2 * t0, t0, t0 / 2, t0 / 4], K=63)
    assert [r.below_bound for r in rec.rows] == [False, False, True, True]
    assert all(math.isfinite(r.delta) for r in rec.rows)
    assert rec.summary()["flagged_rows"] == [2, 3]
    assert rec.csv_text().splitlines()[0] == "N,tau,delta,below_bound"
    assert rec.config["tau_lower_bound"] == t0


def test_tau_sweep_requires_descending(sine):
    with pytest.raises(ConfigError):
        cv.tau_sweep(sine, 1024, [0.001, 0.002])


def test_sweep_csv_and_summary(tmp_path, sine):
    rec = cv.n_sweep(sine, [1024, 2048])
    path = tmp_path / "c.csv"
    rec.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "N,tau,delta"
    assert [float(x) for x in lines[1].split(",")] == [1024, rec.rows[0].tau, rec.rows[0].delta]
    assert {"slope", "intercept", "r2", "n_points", "config"} <= set(rec.summary())
