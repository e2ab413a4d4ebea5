import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wavedensity import cli
from wavedensity import functions as f
from wavedensity.errors import ConfigError


def run(tmp_path, *argv):
    return cli.main([*argv, "--out", str(tmp_path)])


def read_csv(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def config_line(path):
    first = path.read_text().splitlines()[0]
    assert first.startswith("# config ")
    return json.loads(first[len("# config "):])


# -- list syntax ------------------------------------------------------------------------------


def test_parse_n_list_forms():
    assert cli.parse_n_list("1024..65536x2") == [1024, 2048, 4096, 8192, 16384, 32768, 65536]
    assert cli.parse_n_list("64,128") == [64, 128]
    assert cli.parse_n_list(4096) == [4096]
    assert cli.parse_n_list([8, 16]) == [8, 16]
    with pytest.raises(ConfigError):
        cli.parse_n_list("64.5")


@given(lo=st.integers(1, 12), span=st.integers(0, 8))
def test_parse_n_list_geometric_property(lo, span):
    Ns = cli.parse_n_list(f"{2**lo}..{2**(lo + span)}x2")
    assert Ns == [2 ** (lo + j) for j in range(span + 1)]


def test_parse_tau_list_forms():
    taus = cli.parse_tau_list("32x..1x", 0.5)
    assert len(taus) == 8
    assert taus[0] == pytest.approx(16.0) and taus[-1] == pytest.approx(0.5)
    assert np.diff(np.log(taus)) == pytest.approx(np.full(7, math.log(1 / 32) / 7))
    assert cli.parse_tau_list("4x..1x:3", 1.0) == pytest.approx([4, 2, 1])
    assert cli.parse_tau_list("2x,1x,0.5x", 0.1) == pytest.approx([0.2, 0.1, 0.05])
    assert cli.parse_tau_list("0.01,0.005", 99.0) == [0.01, 0.005]
    for bad in ("abc", "-1", "0x"):
        with pytest.raises(ConfigError):
            cli.parse_tau_list(bad, 1.0)


# -- estimate ---------------------------------------------------------------------------------


def test_estimate_sine_4096(tmp_path):
    assert run(tmp_path, "estimate", "--fn", "sine", "--N", "4096") == 0
    rows = read_csv(tmp_path / "spectrum.csv")
    assert len(rows) == 4096 and list(rows[0]) == ["k", "u", "P"]
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["tau"] == pytest.approx(2 / 4096, rel=1e-5)
    assert meta["tau_at_lower_bound"] is True
    assert meta["config"]["fn"] == "sine"
    assert config_line(tmp_path / "spectrum.csv")["command"] == "estimate"


def test_estimate_odd_n_is_config_error(tmp_path, capsys):
    assert run(tmp_path, "estimate", "--fn", "sine", "--N", "4095") == 2
    assert "even" in capsys.readouterr().err


def test_estimate_below_bound_warns(tmp_path, capsys):
    assert run(tmp_path, "estimate", "--fn", "quadratic", "--N", "64", "--tau", "0.001") == 0
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["tau_at_lower_bound"] is False
    assert meta["tau"] == 0.001
    assert 1 / (64 * math.pi) == pytest.approx(0.00497, abs=1e-5)
    assert "warning" in capsys.readouterr().err


def test_estimate_from_samples_csv(tmp_path):
    q = f.builtin_quadratic()
    src = tmp_path / "samples.csv"
    f.sample(q, 256).to_csv(src)
    assert run(tmp_path / "o", "estimate", "--fn", str(src)) == 0
    meta = json.loads((tmp_path / "o" / "meta.json").read_text())
    assert meta["N"] == 256 and meta["L"] == pytest.approx(1.0)
    assert meta["B"] == pytest.approx(f.estimate_bound(f.sample(q, 256)))


def test_unknown_function_is_config_error(tmp_path):
    assert run(tmp_path, "estimate", "--fn", "nope", "--N", "64") == 2


def test_missing_n_is_config_error(tmp_path):
    assert run(tmp_path, "estimate", "--fn", "sine") == 2


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"fn": "quadratic", "N": 128}))
    assert cli.main(["estimate", "--config", str(cfg), "--N", "64", "--out", str(tmp_path / "a")]) == 0
    meta = json.loads((tmp_path / "a" / "meta.json").read_text())
    assert meta["N"] == 64 and meta["config"]["fn"] == "quadratic"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"colour": 1}))
    assert cli.main(["estimate", "--config", str(bad)]) == 2


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["estimate", "--fn", "sine", "--N", "64"]) == 0
    assert (tmp_path / "env" / "spectrum.csv").exists()
    assert cli.main(["estimate", "--fn", "sine", "--N", "64", "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "spectrum.csv").exists()


# -- converge / tausweep --------------------------------------------------------------------------


def test_converge_sine_slope_and_determinism(tmp_path):
    args = ["converge", "--fn", "sine", "--N", "1024..65536x2", "--K", "255"]
    assert run(tmp_path / "a", *args) == 0
    assert run(tmp_path / "b", *args) == 0
    fit = json.loads((tmp_path / "a" / "fit.json").read_text())
    assert -1.3 <= fit["slope"] <= -0.7
    for name in ("converge.csv", "fit.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = read_csv(tmp_path / "a" / "converge.csv")
    assert list(rows[0]) == ["N", "tau", "delta"] and len(rows) == 7


def test_converge_single_n(tmp_path, capsys):
    assert run(tmp_path, "converge", "--fn", "sine", "--N", "1024") == 0
    assert json.loads((tmp_path / "fit.json").read_text())["slope"] is None
    assert "warning" in capsys.readouterr().err


def test_converge_needs_analytic_function(tmp_path):
    src = tmp_path / "s.csv"
    f.sample(f.builtin_sine(), 64).to_csv(src)
    assert run(tmp_path, "converge", "--fn", str(src), "--N", "64") == 2


def test_tausweep_sine_minimum_at_bottom(tmp_path):
    assert run(tmp_path, "tausweep", "--fn", "sine", "--N", "65536", "--taus", "32x..1x") == 0
    rows = read_csv(tmp_path / "tausweep.csv")
    deltas = [float(r["delta"]) for r in rows]
    assert len(rows) == 8
    assert int(np.argmin(deltas)) >= 6


def test_tausweep_flags_rows_below_bound(tmp_path):
    assert run(tmp_path, "tausweep", "--fn", "sine", "--N", "4096", "--taus", "2x,1x,0.5x") == 0
    rows = read_csv(tmp_path / "tausweep.csv")
    assert [r["below_bound"] for r in rows] == ["0", "0", "1"]
    assert all(math.isfinite(float(r["delta"])) for r in rows)
    assert json.loads((tmp_path / "tausweep_fit.json").read_text())["flagged_rows"] == [2]


def test_tausweep_quadratic_trend(tmp_path):
    assert run(tmp_path, "tausweep", "--fn", "quadratic", "--N", "16384", "--K", "63") == 0
    deltas = [float(r["delta"]) for r in read_csv(tmp_path / "tausweep.csv")]
    assert sum(b > a for a, b in zip(deltas, deltas[1:])) <= 1


# -- verify / truth / baselines -------------------------------------------------------------------


def test_verify_quadratic_passes(tmp_path):
    assert run(tmp_path, "verify", "--fn", "quadratic", "--N", "32") == 0
    report = json.loads((tmp_path / "verify.json").read_text())
    check = report["checks"][0]
    assert report["pass"] and check["pass"] and check["name"] == "poisson_identity"
    assert len(check["bins"]) == 32 and all(b["pass"] for b in check["bins"])


def test_verify_sine_reports_tail_estimates(tmp_path):
    assert run(tmp_path, "verify", "--fn", "sine", "--N", "64", "--lmax", "50") == 0
    report = json.loads((tmp_path / "verify.json").read_text())
    assert report["config"]["lmax"] == 50
    assert all("tail_estimate" in b and b["tail_estimate"] > 0 for b in report["checks"][0]["bins"])


def test_verify_infeasible_size(tmp_path, capsys):
    assert run(tmp_path, "verify", "--fn", "sine", "--N", "1024") == 3
    assert "quadrature" in capsys.readouterr().err


def test_truth_spot_check(tmp_path):
    assert run(tmp_path, "truth", "--fn", "sine", "--u", "0", "--interval", "-0.1", "0.1") == 0
    report = json.loads((tmp_path / "truth.json").read_text())
    assert report["points"][0]["roots"] == pytest.approx([0.5, 1.5])
    assert report["points"][0]["density"] == pytest.approx(1 / math.pi**2)
    assert report["interval"]["measure"] == pytest.approx(0.0202677, abs=1e-6)
    assert run(tmp_path, "truth", "--fn", "sine", "--u", str(math.pi)) == 3


def test_baselines_schema(tmp_path):
    assert run(tmp_path, "baselines", "--fn", "quadratic", "--N", "1024,2048") == 0
    rows = read_csv(tmp_path / "baselines.csv")
    assert list(rows[0]) == ["N", "method", "ise"]
    assert {(r["N"], r["method"]) for r in rows} == {(n, m) for n in ("1024", "2048") for m in ("histogram", "kernel")}
    assert all(float(r["ise"]) > 0 for r in rows)
    assert config_line(tmp_path / "baselines.csv")["metric"] == "ISE (fixed design)"


def test_baselines_unknown_method(tmp_path):
    assert run(tmp_path, "baselines", "--fn", "quadratic", "--N", "1024", "--methods", "mixture") == 2
