"""Experiment runner driven by flat ``key = value`` configuration files.

Grammar
-------
One assignment per line, ``section.key = value``. Blank lines and lines
starting with ``#`` are ignored; a trailing ``# comment`` is stripped.
Vectors are comma-separated numbers or ``ones`` / ``zeros`` (sized by the
problem dimension). Sections:

``problem``  name (quadratic2d | logbarrier2d | l2reg), seed, m, n
``flow``     alpha, beta, a, p, q, delta_c, delta_theta, t0, K1
``ipga``     h, alpha, beta, a, p, q, delta_c, delta_theta
``init``     x0, v0 (flow) and x0, x1 (ipga)
``run``      t_end, rtol, atol, samples, system (6 | 8 | 9), K, baseline,
             target (ode | ipga), slope_lo, slope_hi
``lyapunov`` b, lambda, kind (Eb | strong | calE | E)
``growth``   c, c0, k_max
``appendix`` lambda, s, k_max
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import ipga as ip
from . import lyapunov as ly
from .ode import FlowParams, StiffnessError, integrate, special_case
from .problems import DomainError, SolverError, make_problem, min_norm_solution
from .rates import SeriesExhausted, fit_loglog_slope, iterations_to_tolerance, predict_rates

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "run_experiment", "main"]

SUBCOMMANDS = ("run-ode", "run-ipga", "compare", "predict", "audit", "check-appendix")

_KEYS = {
    "problem": {"name": str, "seed": int, "m": int, "n": int},
    "flow": {k: float for k in ("alpha", "beta", "a", "p", "q", "delta_c", "delta_theta", "t0", "K1")},
    "ipga": {k: float for k in ("h", "alpha", "beta", "a", "p", "q", "delta_c", "delta_theta")},
    "init": {"x0": "vec", "v0": "vec", "x1": "vec"},
    "run": {"t_end": float, "rtol": float, "atol": float, "samples": int, "system": str, "K": int,
            "baseline": str, "target": str, "slope_lo": float, "slope_hi": float},
    "lyapunov": {"b": float, "lambda": float, "kind": str},
    "growth": {"c": float, "c0": float, "k_max": int},
    "appendix": {"lambda": float, "s": float, "k_max": int},
}


class ConfigError(ValueError):
    def __init__(self, path, line, message):
        loc = f"{path}:{line}" if line else str(path)
        super().__init__(f"{loc}: {message}")


@dataclass
class ExperimentConfig:
    path: str
    values: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.values.get(key, default)

    def has_section(self, section):
        return any(k.startswith(section + ".") for k in self.values)

    def line_of(self, section):
        nums = [ln for k, ln in self.lines.items() if k.startswith(section + ".")]
        return min(nums) if nums else 0


def _parse_value(kind, raw):
    if kind == "vec":
        raw = raw.strip()
        if raw in ("ones", "zeros"):
            return raw
        return np.array([float(v) for v in raw.split(",")])
    return kind(raw)


def parse_config(path):
    """Parse a configuration file; errors carry ``path:line``."""
    cfg = ExperimentConfig(path=str(path))
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(path, 0, f"cannot read config: {exc}") from exc
    for num, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(path, num, f"expected 'key = value', got {body!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        if "." not in key:
            raise ConfigError(path, num, f"key {key!r} lacks a section prefix")
        section, name = key.split(".", 1)
        if section not in _KEYS:
            raise ConfigError(path, num, f"unknown section {section!r}")
        if name not in _KEYS[section]:
            raise ConfigError(path, num, f"unknown key {key!r}")
        if key in cfg.values:
            raise ConfigError(path, num, f"duplicate key {key!r} (first on line {cfg.lines[key]})")
        try:
            cfg.values[key] = _parse_value(_KEYS[section][name], raw)
        except ValueError:
            raise ConfigError(path, num, f"bad value {raw!r} for {key!r}") from None
        cfg.lines[key] = num
    return cfg


# ---------------------------------------------------------------------------
# Building objects from a config


def _problem(cfg):
    name = cfg.get("problem.name")
    if name is None:
        raise ConfigError(cfg.path, 0, "missing problem.name")
    try:
        return make_problem(name, seed=cfg.get("problem.seed", 42), m=cfg.get("problem.m", 40),
                            n=cfg.get("problem.n", 50))
    except (KeyError, ValueError) as exc:
        raise ConfigError(cfg.path, cfg.lines.get("problem.name", 0), str(exc)) from None


def _flow_params(cfg):
    if not cfg.has_section("flow"):
        raise ConfigError(cfg.path, 0, "missing flow section")
    kw = {k.split(".", 1)[1]: v for k, v in cfg.values.items() if k.startswith("flow.")}
    try:
        return FlowParams(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(cfg.path, cfg.line_of("flow"), f"invalid flow parameters: {exc}") from None


def _step_params(cfg):
    if not cfg.has_section("ipga"):
        raise ConfigError(cfg.path, 0, "missing ipga section")
    kw = {k.split(".", 1)[1]: v for k, v in cfg.values.items() if k.startswith("ipga.")}
    try:
        return ip.StepParams(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(cfg.path, cfg.line_of("ipga"), f"invalid ipga parameters: {exc}") from None


def _vector(cfg, key, dim, default):
    v = cfg.get(key, default)
    if isinstance(v, str):
        return np.ones(dim) if v == "ones" else np.zeros(dim)
    v = np.asarray(v, dtype=float)
    if v.shape != (dim,):
        raise ConfigError(cfg.path, cfg.lines.get(key, 0), f"{key} needs {dim} entries, got {v.size}")
    return v


def _check_choice(cfg, key, value, choices):
    if value not in choices:
        raise ConfigError(cfg.path, cfg.lines.get(key, 0), f"{key} must be one of {choices}, got {value!r}")


# ---------------------------------------------------------------------------
# Output helpers


class Outputs:
    """Tracks written files; the MANIFEST is written once, last."""

    def __init__(self, out_dir):
        self.dir = out_dir
        os.makedirs(out_dir, exist_ok=True)
        self.files = []

    def path(self, name):
        self.files.append(name)
        return os.path.join(self.dir, name)

    def write_rows(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])

    def write_text(self, name, text):
        with open(self.path(name), "w", newline="") as fh:
            fh.write(text)

    def manifest(self, status, detail=""):
        with open(os.path.join(self.dir, "MANIFEST"), "w", newline="") as fh:
            fh.write(f"status = {status}\n")
            if detail:
                fh.write(f"detail = {detail}\n")
            for name in self.files:
                fh.write(f"file = {name}\n")


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if np.isnan(v) else repr(v)
    if v is None:
        return ""
    return str(v)


STATS_HEADER = ["system", "wall_clock_s", "avg_step", "points"]
SLOPE_HEADER = ["run", "quantity", "slope", "intercept", "r_squared", "window_lo", "window_hi",
                "envelope", "predicted", "conforms"]


def _slope_rows(label, x, series, predicted, window, bounds):
    rows = []
    for qty, values in series.items():
        pred = predicted.get(qty)
        try:
            fit = fit_loglog_slope(x, values, window=window, envelope=True, bounds=bounds)
        except SeriesExhausted:
            rows.append([label, qty, "exhausted", "", "", "", "", True, pred, ""])
            continue
        except ValueError as exc:
            rows.append([label, qty, f"unfit: {exc}", "", "", "", "", True, pred, ""])
            continue
        ok = "" if pred is None else bool(fit.slope <= pred + 0.3)
        rows.append([label, qty, fit.slope, fit.intercept, fit.r_squared, fit.window[0], fit.window[1],
                     True, pred, ok])
    return rows


# ---------------------------------------------------------------------------
# Modes


def _fill_flow_energies(traj, params, oracle, cfg):
    knobs = _flow_knobs(cfg, params)
    try:
        traj.energy_Eb[:] = ly.energy_series(traj, "Eb", knobs, params, oracle)
    except Exception:
        pass
    if params.a > 0:
        try:
            traj.energy_E[:] = ly.energy_series(traj, "strong", knobs, params, oracle)
        except Exception:
            pass
    return knobs


def _flow_knobs(cfg, params):
    b = cfg.get("lyapunov.b")
    lam = cfg.get("lyapunov.lambda")
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        base = ly.default_knobs(params)
    return ly.LyapunovKnobs(b=base.b if b is None else b, lam=base.lam if lam is None else lam).validate(params)


def _ode_run(cfg, out, system=None, label=None):
    oracle = _problem(cfg)
    base = _flow_params(cfg)
    system = system if system is not None else str(cfg.get("run.system", "9"))
    _check_choice(cfg, "run.system", system, ("6", "8", "9"))
    params = special_case(base, system)
    x0 = _vector(cfg, "init.x0", oracle.dimension, "ones")
    v0 = _vector(cfg, "init.v0", oracle.dimension, "zeros")
    traj = integrate(params, oracle, x0, v0, cfg.get("run.t_end", 100.0),
                     rtol=cfg.get("run.rtol", 1e-6), atol=cfg.get("run.atol", 1e-9),
                     n_samples=cfg.get("run.samples", 400))
    _fill_flow_energies(traj, params, oracle, cfg)
    label = label or f"system{system}"
    traj.to_csv(out.path(f"trajectory_{label}.csv"))
    return label, params, traj


def _ode_slopes(cfg, runs):
    rows = []
    bounds = None
    if cfg.get("run.slope_lo") is not None:
        bounds = (cfg.get("run.slope_lo"), cfg.get("run.slope_hi", cfg.get("run.t_end", 100.0)))
    for label, params, traj in runs:
        rep = predict_rates(params, "continuous")
        pred = dict(rep.predicted_exponents)
        if rep.strong_case is not None:
            pred["dist_to_path"] = rep.strong_exponents["dist_to_path"]
        speed = np.linalg.norm(traj.velocity, axis=1)
        aux = np.linalg.norm(traj.y, axis=1)  # ||x' + beta grad g||
        series = {"gap": traj.g_gap, "velocity": aux, "dist_min_norm": traj.dist_min_norm,
                  "speed": speed}
        rows += _slope_rows(label, traj.t, series, pred, (0.5, 1.0), bounds)
    return rows


def _ipga_run(cfg, out, baseline=None):
    oracle = _problem(cfg)
    params = _step_params(cfg)
    baseline = baseline or cfg.get("run.baseline", "full")
    _check_choice(cfg, "run.baseline", baseline, ("full", "no_hessian", "no_decay"))
    x0 = _vector(cfg, "init.x0", oracle.dimension, "ones")
    x1 = _vector(cfg, "init.x1", oracle.dimension, "ones") if "init.x1" in cfg.values else x0.copy()
    log = ip.run_ipga(params, oracle, x0, x1, cfg.get("run.K", 100), baseline)
    rp = log.params
    if rp.q + 1 < rp.p <= 2 and rp.alpha * rp.h > rp.h ** rp.q:
        log.energy_calE[:] = ip.discrete_energy(log, "calE", None, rp, oracle)
    if 1 < rp.p < rp.q + 1 and rp.a > 0:
        log.energy_E[:] = ip.discrete_energy(log, "E", None, rp, oracle)
    log.to_csv(out.path(f"iterates_{baseline}.csv"))
    return baseline, rp, log


def _ipga_slopes(runs):
    rows = []
    for label, params, log in runs:
        rep = predict_rates(params, "discrete")
        pred = dict(rep.predicted_exponents)
        k = log.k.astype(float)
        series = {"gap": log.g_gap, "dist_to_path": log.dist_min_norm, "gradient": log.grad_norm,
                  "step_norm": log.step_norm}
        rows += _slope_rows(label, k, series, pred, (0.5, 1.0), None)
    return rows


def _regime(out, params, setting):
    rep = predict_rates(params, setting)
    out.write_text("regime.txt", rep.to_text())
    out.write_text("regime.csv", rep.to_csv())
    return rep


def _mode_run_ode(cfg, out):
    label, params, traj = _ode_run(cfg, out)
    out.write_rows("stats.csv", STATS_HEADER, [[label, traj.wall_time, traj.avg_step, traj.accepted]])
    _regime(out, params, "continuous")
    out.write_rows("slopes.csv", SLOPE_HEADER, _ode_slopes(cfg, [(label, params, traj)]))
    return True


def _mode_run_ipga(cfg, out):
    label, params, log = _ipga_run(cfg, out)
    out.write_rows("stats.csv", STATS_HEADER, [[label, log.wall_time, params.h, len(log)]])
    _regime(out, params, "discrete")
    out.write_rows("slopes.csv", SLOPE_HEADER, _ipga_slopes([(label, params, log)]))
    return True


def _compare_target(cfg):
    target = cfg.get("run.target")
    if target is None:
        target = "ipga" if cfg.has_section("ipga") and not cfg.has_section("flow") else "ode"
    _check_choice(cfg, "run.target", target, ("ode", "ipga"))
    return target


def _mode_compare(cfg, out):
    target = _compare_target(cfg)
    if target == "ode":
        runs = [_ode_run(cfg, out, system=s) for s in ("6", "8", "9")]
        out.write_rows("stats.csv", STATS_HEADER,
                       [[lb, tr.wall_time, tr.avg_step, tr.accepted] for lb, _, tr in runs])
        _regime(out, runs[-1][1], "continuous")
        out.write_rows("slopes.csv", SLOPE_HEADER, _ode_slopes(cfg, runs))
        out.write_rows("final.csv", ["system", "g_gap", "dist_min_norm", "grad_norm"],
                       [[lb, tr.g_gap[-1], tr.dist_min_norm[-1], tr.grad_norm[-1]] for lb, _, tr in runs])
        return True
    runs = [_ipga_run(cfg, out, baseline=b) for b in ("full", "no_hessian", "no_decay")]
    out.write_rows("stats.csv", STATS_HEADER,
                   [[lb, lg.wall_time, pr.h, len(lg)] for lb, pr, lg in runs])
    _regime(out, runs[0][1], "discrete")
    out.write_rows("slopes.csv", SLOPE_HEADER, _ipga_slopes(runs))
    rows = []
    for lb, _, lg in runs:
        rows.append([lb, lg.g_gap[-1], lg.dist_min_norm[-1], lg.step_norm[-1], lg.grad_norm[-1],
                     iterations_to_tolerance(lg.k, lg.g_gap), iterations_to_tolerance(lg.k, lg.dist_min_norm),
                     iterations_to_tolerance(lg.k, lg.step_norm), iterations_to_tolerance(lg.k, lg.grad_norm)])
    out.write_rows("final.csv", ["baseline", "g_gap", "dist_min_norm", "step_norm", "grad_norm",
                                 "iters_gap", "iters_dist", "iters_step", "iters_grad"], rows)
    return True


def _mode_predict(cfg, out):
    if cfg.has_section("flow"):
        _regime(out, _flow_params(cfg), "continuous")
    if cfg.has_section("ipga"):
        rep = predict_rates(_step_params(cfg), "discrete")
        name = "regime_discrete" if cfg.has_section("flow") else "regime"
        out.write_text(f"{name}.txt", rep.to_text())
        out.write_text(f"{name}.csv", rep.to_csv())
    if not (cfg.has_section("flow") or cfg.has_section("ipga")):
        raise ConfigError(cfg.path, 0, "predict needs a flow or ipga section")
    return True


def _mode_audit(cfg, out):
    kind = cfg.get("lyapunov.kind")
    rows = []
    passed = True
    if cfg.has_section("flow"):
        kind = kind or "Eb"
        _check_choice(cfg, "lyapunov.kind", kind, ("Eb", "strong"))
        label, params, traj = _ode_run(cfg, out)
        oracle = _problem(cfg)
        knobs = _flow_knobs(cfg, params)
        energies = traj.energy_Eb if kind == "Eb" else traj.energy_E
        rep = ly.decay_audit(traj, kind, knobs, params, oracle, energies=energies)
        rows.append(rep.csv_row())
        passed &= rep.passed
    if cfg.has_section("ipga") and cfg.has_section("problem") and not cfg.has_section("flow"):
        dkind = "calE" if kind in (None, "Eb", "calE") else "E"
        if cfg.has_section("flow") and kind == "strong":
            dkind = "E"
        oracle = _problem(cfg)
        params = _step_params(cfg)
        x0 = _vector(cfg, "init.x0", oracle.dimension, "ones")
        x1 = _vector(cfg, "init.x1", oracle.dimension, "ones") if "init.x1" in cfg.values else x0.copy()
        log = ip.run_ipga(params, oracle, x0, x1, cfg.get("run.K", 100), "full")
        lam = cfg.get("lyapunov.lambda", ip.default_lambda(params, dkind))
        E = ip.discrete_energy(log, dkind, lam, params, oracle)
        if dkind == "calE":
            log.energy_calE[:] = E
            xs = float(np.linalg.norm(min_norm_solution(oracle)))
            onset, ok = ip.energy_decrement_audit(log, E, params, lam, xs)
            rows.append(["calE", "" if onset is None else repr(float(onset)), "", "", "true" if ok else "false"])
            passed &= bool(ok)
        else:
            log.energy_E[:] = E
            k0 = ly._first_index_always(np.nan_to_num(E, nan=0.0) >= 0)
            ok = k0 >= 0
            rows.append(["E", repr(float(log.k[k0])) if ok else "", "", "", "true" if ok else "false"])
            passed &= bool(ok)
        log.to_csv(out.path("iterates_audit.csv"))
    if cfg.has_section("growth"):
        params = _step_params(cfg)
        c = cfg.get("growth.c", params.delta_theta / params.p + 0.5 if params.p > 0 else 1.0)
        rep = ip.growth_condition_check(params, params.p, c, (1, cfg.get("growth.k_max", 10**6)),
                                        c0=cfg.get("growth.c0"), q=params.q)
        rows.append(["growth", "" if rep.first_index is None else repr(float(rep.first_index)), repr(float(c)),
                     "", "true" if rep.holds_beyond else "false"])
        passed &= rep.holds_beyond
    if not rows:
        raise ConfigError(cfg.path, 0, "audit needs a flow, ipga or growth section")
    out.write_rows("audit.csv", ly.AUDIT_COLUMNS, rows)
    return passed


def _mode_check_appendix(cfg, out):
    params = _step_params(cfg)
    lam = cfg.get("appendix.lambda", ip.default_lambda(params, "E"))
    s = cfg.get("appendix.s", params.h * params.a / (8 * params.alpha) if params.a > 0 else None)
    k_max = cfg.get("appendix.k_max", 10**6)
    onsets = ip.scan_appendix(params, lam, s, k_max=k_max)
    out.write_rows("appendix_onsets.csv", ["condition", "onset_k", "k_max", "found"],
                   [[nm, "" if k is None else k, k_max, k is not None] for nm, k in onsets.items()])
    rec = ip.appendix_sequences(float(k_max), params, lam, s)
    rec_next = ip.appendix_sequences(float(k_max) + 1, params, lam, s)
    h, q, p, a, al = params.h, params.q, params.p, params.a, params.alpha
    kk = float(k_max)
    limits = [
        ("n_k/k^(q-p)", rec.n / kk ** (q - p), 0.5 * a * lam * h ** (q - p + 2)),
        ("ell_k", rec.ell, al * h - lam),
        ("eta_k/k^q", rec_next.eta_km1 / kk ** q, 2 * h ** q * (al * h - 2 * lam)),
    ]
    if s is not None:
        limits.append(("omega_k/k^(q-p)", rec.omega / kk ** (q - p),
                       0.25 * lam * a * h ** (q - p + 2) - lam * s * al * h ** (q - p + 1)))
    out.write_rows("appendix_limits.csv", ["quantity", "k", "measured", "limit", "rel_err"],
                   [[nm, k_max, m, lim, abs(m - lim) / abs(lim) if lim else abs(m)] for nm, m, lim in limits])
    return all(k is not None for k in onsets.values())


_MODES = {
    "run-ode": _mode_run_ode,
    "run-ipga": _mode_run_ipga,
    "compare": _mode_compare,
    "predict": _mode_predict,
    "audit": _mode_audit,
    "check-appendix": _mode_check_appendix,
}


def run_experiment(mode, cfg, out_dir):
    """Run one mode; returns the process exit code.

    0 when every requested audit passes, 1 when an audit fails, 3 when the
    run itself fails (partial files are kept and the MANIFEST says so).
    Configuration problems raise ConfigError before anything is written.
    """
    out = Outputs(out_dir)
    try:
        ok = _MODES[mode](cfg, out)
    except ConfigError:
        out.manifest("incomplete", "configuration error")
        raise
    except (StiffnessError, DomainError, SolverError, ArithmeticError, RuntimeError, ValueError) as exc:
        out.manifest("incomplete", f"{type(exc).__name__}: {exc}")
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    out.manifest("complete" if ok else "complete-audit-failed")
    return 0 if ok else 1


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment configuration file")
    common.add_argument("--out-dir", default="out", help="directory for CSV artifacts")
    common.add_argument("--format", default="csv", choices=["csv"], help="output format")
    common.add_argument("--seed", type=int, default=None, help="overrides problem.seed")
    parser = argparse.ArgumentParser(prog="tikhonov-inertial", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="mode", required=True)
    helps = {
        "run-ode": "integrate one member of the flow family",
        "run-ipga": "run the proximal algorithm or one baseline",
        "compare": "run the flow family or the algorithm against both baselines",
        "predict": "classify parameters and predict rate exponents",
        "audit": "check energy inequalities and growth conditions",
        "check-appendix": "scan coefficient-sequence sign onsets and limits",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg.values["problem.seed"] = args.seed
        return run_experiment(args.mode, cfg, args.out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
