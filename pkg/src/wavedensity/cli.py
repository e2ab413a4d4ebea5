"""Command-line entry point.

Every subcommand reads flags, optionally layered over a JSON config file
(``--config``; flags win), and writes its artifacts to the output directory.
The environment variable WAVEDENSITY_OUT, when set, replaces the output
directory from the config file; an explicit ``--out`` still takes precedence.
Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, NumericError
from .functions import AnalyticFunction, SampledFunction, builtin_names, get_builtin, sample
from .spectrum import estimate_spectrum, tau_lower_bound

OUT_ENV = "WAVEDENSITY_OUT"
DEFAULT_TAUS = "32x..1x"
DEFAULT_TAU_COUNT = 8
POISSON_TOL = 1e-3

DEFAULTS = {
    "fn": "sine",
    "L": None,
    "N": None,
    "tau": "lower_bound",
    "taus": DEFAULT_TAUS,
    "B": None,
    "K": 255,
    "alpha": None,
    "eps_C": None,
    "exact_truth": False,
    "workers": 1,
    "seed": 0,
    "lmax": None,
    "u": None,
    "interval": None,
    "methods": "histogram,kernel",
    "out": "out",
}


def warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


# -- list syntax ----------------------------------------------------------------


def parse_n_list(text) -> list[int]:
    """``4096``, ``1024,2048`` or ``1024..65536x2`` (geometric, factor 2)."""
    if isinstance(text, int):
        return [text]
    if isinstance(text, (list, tuple)):
        return [_as_int(v) for v in text]
    text = str(text).strip()
    m = re.fullmatch(r"(\d+)\.\.(\d+)x(\d+)", text)
    if m:
        lo, hi, f = (int(g) for g in m.groups())
        if f < 2 or lo > hi or lo < 1:
            raise ConfigError(f"bad N range {text!r}")
        out = [lo]
        while out[-1] * f <= hi:
            out.append(out[-1] * f)
        return out
    return [_as_int(v) for v in text.split(",") if v.strip()]


def _as_int(v) -> int:
    try:
        f = float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"not an integer: {v!r}") from None
    if not f.is_integer():
        raise ConfigError(f"not an integer: {v!r}")
    return int(f)


def parse_tau_list(text, tau0: float) -> list[float]:
    """Taus as absolute values or multiples of the lower bound ``tau0``.

    ``32x..1x`` (optionally ``:count``, default 8) is log-spaced between the
    two multiples; ``2x,1x,0.5x`` and ``0.01,0.005`` are explicit lists.
    """
    if isinstance(text, (list, tuple)):
        return [_tau_item(str(v), tau0) for v in text]
    text = str(text).strip()
    m = re.fullmatch(r"([0-9.eE+-]+)x\.\.([0-9.eE+-]+)x(?::(\d+))?", text)
    if m:
        a, b = float(m.group(1)), float(m.group(2))
        count = int(m.group(3)) if m.group(3) else DEFAULT_TAU_COUNT
        if count < 2 or a <= 0 or b <= 0:
            raise ConfigError(f"bad tau range {text!r}")
        return list(tau0 * np.geomspace(a, b, count))
    return [_tau_item(v.strip(), tau0) for v in text.split(",") if v.strip()]


def _tau_item(v: str, tau0: float) -> float:
    try:
        t = tau0 * float(v[:-1]) if v.endswith("x") else float(v)
    except ValueError:
        raise ConfigError(f"bad tau value {v!r}") from None
    if not t > 0:
        raise ConfigError(f"tau must be positive, got {v!r}")
    return t


# -- config ---------------------------------------------------------------------


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    if os.environ.get(OUT_ENV):
        cfg["out"] = os.environ[OUT_ENV]
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None and val is not False:
            cfg[key] = val
    return cfg


def snapshot(cfg: dict, command: str) -> dict:
    """The config as recorded in artifacts; the output directory is left out."""
    return {"command": command, **{k: v for k, v in sorted(cfg.items()) if k != "out"}}


def load_function(cfg: dict) -> tuple[Optional[AnalyticFunction], Optional[SampledFunction]]:
    """A builtin name gives an analytic function; anything else is read as a samples CSV."""
    name = str(cfg["fn"])
    if name in builtin_names():
        return get_builtin(name), None
    path = Path(name)
    if not path.exists():
        raise ConfigError(f"{name!r} is neither a builtin ({', '.join(builtin_names())}) nor a file")
    L = None if cfg["L"] is None else float(cfg["L"])
    return None, SampledFunction.from_csv(path, L=L)


def require_analytic(cfg: dict, command: str) -> AnalyticFunction:
    fn, _ = load_function(cfg)
    if fn is None:
        raise ConfigError(f"{command} needs ground truth; pass a builtin function ({', '.join(builtin_names())})")
    return fn


def single_n(cfg: dict) -> int:
    if cfg["N"] is None:
        raise ConfigError("--N is required")
    Ns = parse_n_list(cfg["N"])
    if len(Ns) != 1:
        raise ConfigError(f"expected a single N, got {Ns}")
    return Ns[0]


def out_dir(cfg: dict) -> Path:
    p = Path(cfg["out"])
    p.mkdir(parents=True, exist_ok=True)
    return p


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def write_csv(path: Path, body, snap: dict) -> None:
    """CSV with a leading ``# config`` comment line carrying the snapshot."""
    if isinstance(body, str):
        body = body.encode()
    path.write_bytes(("# config " + json.dumps(snap, sort_keys=True) + "\n").encode() + body)


# -- commands ---
# scipy-backed modules are imported per command to keep ``estimate`` start-up light----------------------------------------------------------------


def cmd_estimate(cfg: dict) -> int:
    fn, samples = load_function(cfg)
    if samples is None:
        samples = sample(fn, single_n(cfg))
    elif cfg["N"] is not None and single_n(cfg) != samples.N:
        raise ConfigError(f"--N {cfg['N']} disagrees with {samples.N} samples in {cfg['fn']}")
    B = cfg["B"] if cfg["B"] is not None else (fn.B_true if fn is not None else None)
    tau = None if cfg["tau"] in (None, "lower_bound") else _tau_item(str(cfg["tau"]), 1.0)
    spec = estimate_spectrum(samples, B=B, tau=tau)
    if not spec.respects_bound:
        warn(f"tau={spec.tau:g} is below the lower bound {spec.tau_min:g}; the spectral range no longer covers [-B, B]")
    out = out_dir(cfg)
    snap = snapshot(cfg, "estimate")
    write_csv(out / "spectrum.csv", spec.csv_bytes(), snap)
    spec.write_metadata(out / "meta.json", {"config": snap, "total_mass": spec.total_mass()})
    return 0


def _sweep_kwargs(cfg: dict) -> dict:
    return {
        "K": int(cfg["K"]),
        "alpha": None if cfg["alpha"] is None else float(cfg["alpha"]),
        "B": None if cfg["B"] is None else float(cfg["B"]),
        "eps_C": None if cfg["eps_C"] is None else float(cfg["eps_C"]),
        "exact_truth": bool(cfg["exact_truth"]),
        "workers": int(cfg["workers"]),
    }


def _progress(rec) -> None:
    for r in rec.rows:
        flag = " (below bound)" if r.below_bound else ""
        print(f"N={r.N} tau={r.tau:.6g} delta={r.delta:.6g}{flag}", file=sys.stderr)


def cmd_converge(cfg: dict) -> int:
    from . import convergence

    fn = require_analytic(cfg, "converge")
    if cfg["N"] is None:
        raise ConfigError("--N is required")
    rec = convergence.n_sweep(fn, parse_n_list(cfg["N"]), **_sweep_kwargs(cfg))
    _progress(rec)
    if rec.slope is None:
        warn("a single N gives no slope; fit.slope is null")
    out = out_dir(cfg)
    snap = snapshot(cfg, "converge")
    write_csv(out / "converge.csv", rec.csv_text(), snap)
    write_json(out / "fit.json", {**rec.summary(), "run": snap})
    return 0


def cmd_tausweep(cfg: dict) -> int:
    from . import convergence

    fn = require_analytic(cfg, "tausweep")
    N = single_n(cfg)
    kw = _sweep_kwargs(cfg)
    B = fn.B_true if kw["B"] is None else kw["B"]
    taus = parse_tau_list(cfg["taus"], tau_lower_bound(B, fn.L, N))
    rec = convergence.tau_sweep(fn, N, taus, **kw)
    _progress(rec)
    if any(r.below_bound for r in rec.rows):
        warn("some taus are below the lower bound; those rows are flagged")
    out = out_dir(cfg)
    snap = snapshot(cfg, "tausweep")
    write_csv(out / "tausweep.csv", rec.csv_text(), snap)
    write_json(out / "tausweep_fit.json", {**rec.summary(), "run": snap})
    return 0


def cmd_verify(cfg: dict) -> int:
    from . import oracle_ft

    fn = require_analytic(cfg, "verify")
    N = single_n(cfg)
    if cfg["lmax"] is None:
        cfg["lmax"] = oracle_ft.DEFAULT_LMAX
    l_max = int(cfg["lmax"])
    B = fn.B_true if cfg["B"] is None else float(cfg["B"])
    tau = tau_lower_bound(B, fn.L, N) if cfg["tau"] in (None, "lower_bound") else _tau_item(str(cfg["tau"]), 1.0)
    pc = oracle_ft.poisson_check(sample(fn, N), fn, tau, l_max=l_max, B=B)
    threshold = POISSON_TOL * (1.0 + np.abs(pc.F_discrete))
    bins = [
        {
            "k": int(k),
            "u": float(u),
            "abs_F_discrete": float(abs(fd)),
            "residual": float(r),
            "threshold": float(t),
            "tail_estimate": float(tb),
            "pass": bool(r <= t),
        }
        for k, u, fd, r, t, tb in zip(pc.k, pc.u, pc.F_discrete, pc.residual, threshold, pc.tail_bound)
    ]
    check = {
        "name": "poisson_identity",
        "measured": {"max_residual": float(pc.residual.max()), "max_scaled_residual": float(pc.scaled_residual.max())},
        "thresholds": {"residual_over_1_plus_abs_FD": POISSON_TOL},
        "pass": all(b["pass"] for b in bins),
        "bins": bins,
    }
    report = {"config": snapshot(cfg, "verify"), "tau": tau, "checks": [check], "pass": check["pass"]}
    write_json(out_dir(cfg) / "verify.json", report)
    return 0 if report["pass"] else 3


def cmd_truth(cfg: dict) -> int:
    from . import truth

    fn = require_analytic(cfg, "truth")
    report: dict = {"config": snapshot(cfg, "truth"), "points": [], "interval": None}
    us = [] if cfg["u"] is None else [float(v) for v in (cfg["u"] if isinstance(cfg["u"], list) else [cfg["u"]])]
    eps = None if cfg["eps_C"] is None else float(cfg["eps_C"])
    for u in us:
        rs = truth.find_roots(fn, u, eps_c=eps)
        report["points"].append({
            "u": u,
            "roots": rs.roots.tolist(),
            "Spp": rs.Spp_at_roots.tolist(),
            "density": truth.density_bruteforce(fn, u, eps_c=eps),
        })
    if cfg["interval"] is not None:
        a, b = (float(v) for v in cfg["interval"])
        report["interval"] = {"a": a, "b": b, "measure": truth.true_interval_measure(fn, a, b, eps_c=eps)}
    if not us and cfg["interval"] is None:
        raise ConfigError("truth needs --u and/or --interval")
    write_json(out_dir(cfg) / "truth.json", report)
    return 0


def cmd_baselines(cfg: dict) -> int:
    from . import baselines

    fn = require_analytic(cfg, "baselines")
    if cfg["N"] is None:
        raise ConfigError("--N is required")
    Ns = parse_n_list(cfg["N"])
    methods = [m.strip() for m in str(cfg["methods"]).split(",") if m.strip()]
    lines = ["N,method,ise"]
    for N in Ns:
        for m in methods:
            val = baselines.baseline_ise(fn, N, m)
            lines.append(f"{N},{m},{val!r}")
            print(f"N={N} {m} {baselines.ISE_LABEL}={val:.6g}", file=sys.stderr)
    print(f"note: {baselines.RATE_CAVEAT}", file=sys.stderr)
    snap = {**snapshot(cfg, "baselines"), "metric": baselines.ISE_LABEL}
    write_csv(out_dir(cfg) / "baselines.csv", "\n".join(lines) + "\n", snap)
    return 0


COMMANDS = {
    "estimate": cmd_estimate,
    "converge": cmd_converge,
    "tausweep": cmd_tausweep,
    "verify": cmd_verify,
    "truth": cmd_truth,
    "baselines": cmd_baselines,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wavedensity", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON file with default options")
        s.add_argument("--fn", help=f"builtin ({', '.join(builtin_names())}) or samples CSV path")
        s.add_argument("--L", type=float, help="domain length for a samples CSV")
        s.add_argument("--N", help="sample count or list (4096, 1024,2048, 1024..65536x2)")
        s.add_argument("--B", type=float, help="derivative bound (default: catalog bound or finite differences)")
        s.add_argument("--out", help=f"output directory (env {OUT_ENV})")
        s.add_argument("--seed", type=int)
        if name in ("estimate", "verify"):
            s.add_argument("--tau", help="'lower_bound' or a positive value")
        if name in ("converge", "tausweep"):
            s.add_argument("--K", type=int)
            s.add_argument("--alpha", type=float)
            s.add_argument("--eps-C", dest="eps_C", type=float)
            s.add_argument("--exact-truth", dest="exact_truth", action="store_true")
            s.add_argument("--workers", type=int)
        if name == "tausweep":
            s.add_argument("--taus", help="e.g. 32x..1x, 32x..1x:8, 2x,1x or absolute values")
        if name == "verify":
            s.add_argument("--lmax", type=int)
        if name == "truth":
            s.add_argument("--u", type=float, nargs="+")
            s.add_argument("--interval", type=float, nargs=2, metavar=("A", "B"))
            s.add_argument("--eps-C", dest="eps_C", type=float)
        if name == "baselines":
            s.add_argument("--methods", help="comma list of histogram,kernel")
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except NumericError as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return 3
    except FloatingPointError as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
