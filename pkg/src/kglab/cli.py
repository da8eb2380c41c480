"""Command-line experiment runner.

    lab run <config.json>
    lab validate <config.json>
    lab admissible --n 3 --theta 1/2
    lab version

Exit status: 0 when every asserted bound passed, 1 on a numerical
failure, 2 on a configuration error.  LAB_OUTPUT_DIR overrides the output
directory and LAB_WORKERS sets the size of the worker pool.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from . import admissibility as adm
from . import experiments as ex
from .geometry import GeometryError, make_model
from .nlkg import YM, ContractionFailure, leapfrog_oracle, picard_solve, power, ym_solve
from .norms import mixed_norm, mixed_spec, sobolev_norm
from .oscillatory import AmplitudeModel, QuadratureError, kernel_low_sup
from .spectral import SpectralError, solve_eigenfunctions, uniform_lambda_grid

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2

KINDS = ["decay-scan", "strichartz-scan", "admissible-region", "nlkg-evolve",
         "ym-evolve", "vdc-check", "square-function"]

_positive = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "type": "object",
    "required": ["experiment"],
    "additionalProperties": False,
    "properties": {
        "experiment": {"enum": KINDS},
        "name": {"type": "string", "minLength": 1},
        "seed": {"type": "integer", "minimum": 0},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["euclidean", "perturbed_conic"]},
                "params": {"type": "array", "items": {"type": "number"}},
                "n": {"type": "integer", "minimum": 3},
                "r_max": _positive,
                "dr": _positive,
                "lam_max": _positive,
            },
        },
        "params": {"type": "object"},
        "tolerances": {"type": "object", "additionalProperties": _positive},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string", "minLength": 1}},
        },
    },
}

CLAIMS = {
    "decay-scan": "|K_low(t)| <= C (1+|t|)^(-n/2); high bands C 2^(k(n+1+theta)/2) (2^-k+|t|)^(-(n-1+theta)/2)",
    "strichartz-scan": "||e^(it sqrt(1+H)) f_m||_(L^q_t L^r_z) <= C 2^(m s) ||f_m||_(L^2)",
    "admissible-region": "2/q + (n-1+theta)/r <= (n-1+theta)/2, s = (n+theta)/2 - (n+theta)/r - 1/q",
    "nlkg-evolve": "||Phi(u1) - Phi(u2)|| <= 1/2 ||u1 - u2|| in L^(q0)_(t,z)",
    "ym-evolve": "exists T > 0 with a contraction in C_t H^(1+delta) and L^2_t L^inf",
    "vdc-check": "|int e^(i lam phase) psi| <= c_k lam^(-1/k) (|psi(b)| + int |psi'|)",
    "square-function": "c_p ||f||_p <= ||(sum_k |phi_k(sqrt H) f|^2)^(1/2)||_p <= C_p ||f||_p",
}


class ConfigError(ValueError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

def load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}", "path") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", "document") from None
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        field = ".".join(str(p) for p in exc.absolute_path) or "document"
        raise ConfigError(exc.message, field) from None
    p = cfg.get("params", {})
    for key in ("count", "t_lo", "t_hi", "T", "dt"):
        if key in p and not (isinstance(p[key], (int, float)) and p[key] > 0):
            raise ConfigError(f"{key} must be positive", f"params.{key}")
    if "t_lo" in p and "t_hi" in p and p["t_lo"] >= p["t_hi"]:
        raise ConfigError("sweep range is empty: need t_lo < t_hi", "params.t_lo")
    for key in ("ms", "ks", "thetas"):
        if key in p and (not isinstance(p[key], list) or not p[key]):
            raise ConfigError(f"{key} must be a non-empty list", f"params.{key}")
    if "model" in cfg:
        m = cfg["model"]
        try:
            make_model(m.get("kind", "euclidean"), m.get("params", []), m.get("n", 3),
                       m.get("r_max", 40.0), m.get("dr", 0.025))
        except GeometryError as exc:
            raise ConfigError(str(exc), "model") from None


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(x) for x in row])


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (float, np.floating)):
        return float(format(float(x), ".17g"))
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, Fraction):
        return str(x)
    return x


def workers() -> int:
    try:
        return max(1, int(os.environ.get("LAB_WORKERS", "1")))
    except ValueError:
        return 1


def pool_map(fn, items):
    """Ordered map over a process pool (serial when LAB_WORKERS <= 1)."""
    items = list(items)
    n = workers()
    if n <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# experiment runners: each returns (header, rows, summary, passed)
# ---------------------------------------------------------------------------

def _amp(p) -> AmplitudeModel:
    return AmplitudeModel(p.get("amplitude", "paper_a"), 3, int(p.get("K", 10)))


def _low_sup(args):
    t, kind, K = args
    return kernel_low_sup(t, AmplitudeModel(kind, 3, K))


def _model_and_table(cfg, defaults):
    m = {**defaults, **cfg.get("model", {})}
    model = make_model(m["kind"], m.get("params", []), m.get("n", 3), m["r_max"], m["dr"])
    table = solve_eigenfunctions(model, uniform_lambda_grid(model, m["lam_max"]))
    return model, table


def run_decay_scan(cfg):
    p, tol = cfg.get("params", {}), cfg.get("tolerances", {})
    mode = p.get("mode", "low-kernel")
    etol = tol.get("exponent", 0.15)
    if mode == "low-kernel":
        amp = _amp(p)
        ts = np.logspace(math.log10(p.get("t_lo", 10.0)), math.log10(p.get("t_hi", 1e3)),
                         int(p.get("count", 17)))
        vals = pool_map(_low_sup, [(float(t), amp.kind, amp.K) for t in ts])
        fit = ex.fit_decay(list(zip(ts, vals)))
        env = (1 + ts) ** -1.5
        rows = [(t, v, e, v / e) for t, v, e in zip(ts, vals, env)]
        summary = {"fitted_exponent": fit.exponent, "fit_residual": fit.residual,
                   "claimed_exponent": -1.5}
        return ["t", "abs_kernel", "bound", "ratio"], rows, summary, \
            abs(fit.exponent + 1.5) <= etol
    if mode == "low-simulation":
        rows, summary = ex.decay_scan_simulation(
            p.get("sigma", 2.0), t_lo=p.get("t_lo", 10.0), t_hi=p.get("t_hi", 1e3),
            count=int(p.get("count", 17)))
        return ["t", "sup_abs_u"], rows, summary, abs(summary["fitted_exponent"] + 1.5) <= etol
    if mode == "high-envelope":
        rows, summary = ex.high_envelope_sweep(_amp(p), p.get("thetas", [0, 1]),
                                               p.get("ks", list(range(2, 7))),
                                               int(p.get("count", 12)))
        return (["theta", "k", "t", "r", "abs_kernel", "bound", "ratio"], rows, summary,
                summary["envelope_constant"] <= tol.get("envelope_constant", 10.0))
    if mode == "ih-stationary":
        rows, summary = ex.ih_stationary_fit(_amp(p), p.get("ks", list(range(2, 7))))
        ok = (abs(summary["exp_th"] - summary["claimed_th"]) <= etol
              and abs(summary["exp_t_over_h"] - summary["claimed_t_over_h"]) <= etol)
        return ["t", "h", "abs_Ih"], rows, summary, ok
    raise ConfigError(f"unknown decay-scan mode {mode!r}", "params.mode")


def run_strichartz(cfg):
    p, tol = cfg.get("params", {}), cfg.get("tolerances", {})
    rows, summary = ex.strichartz_scan(p.get("ms", list(range(2, 7))),
                                       T=p.get("T", 4.0), dt=p.get("dt", 2.0**-9))
    ok = abs(summary["slope"] - summary["claimed_s"]) <= tol.get("slope", 0.2)
    return ["m", "L4_norm"], rows, summary, ok


def run_admissible(cfg):
    p = cfg.get("params", {})
    n = int(p.get("n", 3))
    thetas = [Fraction(str(x)) for x in p.get("thetas", ["0", "1/2", "1"])]
    rows = ex.admissible_region(n, thetas, int(p.get("denom", 16)))
    count, bad = ex.lattice_identity(n, thetas)
    summary = {"n": n, "boundary_points": len(rows), "lattice_points": count,
               "identity_failures": len(bad)}
    return ["theta", "q", "r", "s"], rows, summary, not bad


def _gaussian(model, center, width):
    return np.exp(-((model.r - center) / width) ** 2)


def run_nlkg(cfg):
    p, tol = cfg.get("params", {}), cfg.get("tolerances", {})
    model, table = _model_and_table(
        cfg, {"kind": "euclidean", "r_max": 24.0, "dr": 0.0125, "lam_max": 12.0})
    u0 = p.get("amplitude", 1e-3) * _gaussian(model, p.get("center", 0.0), p.get("width", 1.0))
    u1 = np.zeros_like(u0)
    run = picard_solve(u0, u1, Fraction(str(p.get("p", 3))), int(p.get("sign", 1)),
                       float(p.get("T", 10.0)), table, tol.get("picard", 1e-13))
    orc = leapfrog_oracle(u0, u1, power(Fraction(str(p.get("p", 3))), int(p.get("sign", 1))),
                          run.solution.t, model)
    spec = mixed_spec(model, orc.t, 2, 2)
    delta = mixed_norm(run.solution.u - orc.u, spec) / max(mixed_norm(orc.u, spec), 1e-300)
    rows = [(i + 1, d, run.ratios[i - 1] if i >= 1 else float("nan"))
            for i, d in enumerate(run.differences)]
    summary = {**run.report(), "oracle_relative_l2": delta}
    ok = (run.converged and all(r <= 0.5 for r in run.ratios)
          and delta <= tol.get("oracle", 1e-3))
    return ["iteration", "difference_Lq0", "ratio"], rows, summary, ok


def run_ym(cfg):
    p, tol = cfg.get("params", {}), cfg.get("tolerances", {})
    model, table = _model_and_table(
        cfg, {"kind": "perturbed_conic", "params": [0.1, 1.0, 3.0], "r_max": 24.0,
              "dr": 0.0125, "lam_max": 12.0})
    delta = float(Fraction(str(p.get("delta", "1/16"))))
    u0 = _gaussian(model, p.get("center", 4.0), p.get("width", 1.0))
    u0 *= p.get("size", 1e-2) / sobolev_norm(u0, 1 + delta, table)
    u1 = np.zeros_like(u0)
    run = ym_solve(u0, u1, delta, float(p.get("T", 4.0)), table, tol.get("picard", 1e-12))
    orc = leapfrog_oracle(u0, u1, YM, run.solution.t, model)
    spec = mixed_spec(model, orc.t, 2, 2)
    diff = mixed_norm(run.solution.u - orc.u, spec) / max(mixed_norm(orc.u, spec), 1e-300)
    rows = [(i + 1, d) for i, d in enumerate(run.differences)]
    summary = {**run.report(), "oracle_relative_l2": diff}
    ok = run.converged and diff <= tol.get("oracle", 1e-2)
    return ["iteration", "difference_L2"], rows, summary, ok


def run_vdc(cfg):
    p, tol = cfg.get("params", {}), cfg.get("tolerances", {})
    fres, exact = ex.vdc_fresnel(p.get("lam", 1e4))
    rows, summary = ex.vdc_phi_minus(p.get("ks", list(range(2, 7))))
    out = [("fresnel", float("nan"), float("nan"), fres.lhs, fres.rhs, fres.passed)]
    out += [("phi_minus", t, h, lhs, rhs, ok) for t, h, lhs, rhs, ok in rows]
    summary = {**summary, "fresnel_lhs": fres.lhs, "fresnel_exact": exact,
               "fresnel_passed": fres.passed}
    ok = (fres.passed and summary["all_passed"]
          and abs(summary["exp_th"] + 0.5) <= tol.get("exponent", 0.15))
    return ["case", "t", "h", "lhs", "rhs", "passed"], out, summary, ok


def run_square(cfg):
    p = cfg.get("params", {})
    ratios, summary = ex.square_function_corpus(p.get("p", 4), int(p.get("count", 50)),
                                                int(cfg.get("seed", 20240601)))
    rows = list(enumerate(ratios))
    ok = all(math.isfinite(r) and r > 0 for r in ratios)
    return ["index", "ratio"], rows, summary, ok


RUNNERS = {
    "decay-scan": run_decay_scan,
    "strichartz-scan": run_strichartz,
    "admissible-region": run_admissible,
    "nlkg-evolve": run_nlkg,
    "ym-evolve": run_ym,
    "vdc-check": run_vdc,
    "square-function": run_square,
}


def output_dir(cfg) -> Path:
    env = os.environ.get("LAB_OUTPUT_DIR")
    d = Path(env) if env else Path(cfg.get("output", {}).get("dir", "lab_output"))
    d.mkdir(parents=True, exist_ok=True)
    return d


def run(cfg: dict) -> int:
    validate_config(cfg)
    kind = cfg["experiment"]
    name = cfg.get("name", kind)
    out = output_dir(cfg)
    base = {"experiment": kind, "config_hash": config_hash(cfg), "claimed_bound": CLAIMS[kind],
            "version": __version__}
    try:
        header, rows, summary, passed = RUNNERS[kind](cfg)
    except (QuadratureError, ContractionFailure, SpectralError) as exc:
        report = {**base, "status": "numerical_failure", "error": str(exc),
                  "diagnostics": getattr(exc, "diagnostics", {})}
        (out / f"{name}.json").write_text(json.dumps(_jsonable(report), sort_keys=True, indent=2))
        print(json.dumps({"error": "numerical", "message": str(exc)}), file=sys.stderr)
        return EXIT_NUMERIC
    write_csv(out / f"{name}.csv", header, rows)
    report = {**base, "status": "passed" if passed else "failed", "passed": bool(passed),
              "summary": summary}
    (out / f"{name}.json").write_text(json.dumps(_jsonable(report), sort_keys=True, indent=2))
    return EXIT_OK if passed else EXIT_NUMERIC


def _config_error(exc: ConfigError) -> int:
    print(json.dumps({"error": "config", "field": exc.field, "message": str(exc)}),
          file=sys.stderr)
    return EXIT_CONFIG


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_val = sub.add_parser("validate", help="validate a config without running it")
    p_val.add_argument("config")
    p_adm = sub.add_parser("admissible", help="print the admissible-region boundary as CSV")
    p_adm.add_argument("--n", type=int, default=3)
    p_adm.add_argument("--theta", default="0")
    p_adm.add_argument("--denom", type=int, default=16)
    sub.add_parser("version")
    args = parser.parse_args(argv)

    if args.command == "version":
        print(__version__)
        return EXIT_OK
    if args.command == "admissible":
        try:
            theta = adm.as_exponent(args.theta)
            rows = ex.admissible_region(args.n, [theta], args.denom)
        except (ValueError, ZeroDivisionError) as exc:
            return _config_error(ConfigError(str(exc), "theta"))
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["theta", "q", "r", "s"])
        w.writerows(rows)
        return EXIT_OK
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        return _config_error(exc)
    if args.command == "validate":
        print(json.dumps({"valid": True, "config_hash": config_hash(cfg)}))
        return EXIT_OK
    try:
        return run(cfg)
    except ConfigError as exc:
        return _config_error(exc)


if __name__ == "__main__":
    sys.exit(main())
