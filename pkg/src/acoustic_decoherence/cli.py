"""Command-line driver: ``acoustic-decoherence <command> [options]``.

Commands ``decoherence``, ``correlation``, ``er`` and ``mc-validate`` read an
optional TOML config, resolve defaults, and write CSV (or JSON-lines)
tables plus ``summary.json`` into the output directory.  Every file starts
with the SHA-256 of the resolved config.  The whole config is validated
before any file is written.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import correlations as corr
from . import decoherence as dec
from . import environment as env
from . import stochastic as sto
from .collapse import CollapseProfile, SigmaKind, hawking_temperature
from .errors import AcousticError, ConfigError
from .geometry import Branch, PhysParams, RingProfile

COMMANDS = ("decoherence", "correlation", "er", "mc-validate")

PHYSICAL = {"c": 1.0, "L": 2.0 * math.pi, "N_ions": 1000, "rho": 1.0, "hbar": 1.0,
            "tau": 2.0 * math.pi}
RING = {"v_min": 0.9, "v_max": 1.1, "theta_H": math.pi / 2, "gamma1": 0.05 * 2 * math.pi,
        "gamma2": 0.05 * 2 * math.pi, "constrain_revolution": False}
COLLAPSE = {"a": 1.0, "kappa": None, "v_min": 0.9, "v_max": 1.1, "tau_c": 1.0,
            "sigma_kind": "tanh"}
MC = {"realizations": 10_000, "seed": 0, "dx_over_a": 0.1, "window_factor": 20.0}

# bath.temperature is in units of omega_1 (ring) or T_H (collapse);
# bath.cutoff_ratio is relative to omega_max (ring) or pi/dx (collapse)
BATH = {
    "decoherence": {"zeta": 2e-8, "temperature": 0.0, "cutoff_ratio": 1e3},
    "correlation": {"zeta": 0.0, "temperature": 0.0, "cutoff_ratio": 1.0},
    "er": {"zeta": 0.02, "temperature": 0.0, "cutoff_ratio": 1.0},
    "mc-validate": {"zeta": 0.0, "temperature": 0.0, "cutoff_ratio": 1.0},
}

_CORR_GRID = {"x1_over_a": -10.0, "t_over_tau_c": 100.0, "x_min_over_a": -8.0,
              "x_max_over_a": 8.0}
EXPERIMENT = {
    "decoherence": {"axis": "zeta", "values": None, "start": 1e-9, "stop": 1e-5, "num": 9,
                    "spacing": "log", "method": "numeric_root", "branch": "u",
                    "calibrate_target_over_tau": 100.0, "calibrate_zeta": 2e-8},
    "correlation": {**_CORR_GRID, "points": 161, "temperatures_over_TH": [0.0, 1.0, 3.0],
                    "dx_over_a": 0.1, "window_factor": 20.0},
    "er": {"k_index": 1, "x1_over_a": -10.0, "x_over_a": 2.0, "t_end_over_tau_c": 100.0,
           "t_min_over_tau_c": 0.1, "t_max_over_tau_c": 2.0e4, "points_per_decade": 8,
           "dx_over_a": 0.1, "window_factor": 20.0, "renormalize": True},
    "mc-validate": {**_CORR_GRID, "points": 33, "temperature_over_TH": 0.0},
}
OUTPUT = {"dir": "out", "format": "csv"}

PROFILE_FOR = {"decoherence": "ring", "correlation": "collapse", "er": "collapse",
               "mc-validate": "collapse"}


# ---------------------------------------------------------------------------
# configuration

def _merge(section: str, defaults: dict, given) -> dict:
    if given is None:
        given = {}
    if not isinstance(given, dict):
        raise ConfigError(f"[{section}] must be a table")
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(unknown)}")
    out = copy.deepcopy(defaults)
    out.update(given)
    return out


def resolve_config(command: str, raw: dict | None = None) -> dict:
    """Merge a parsed TOML document with the command defaults.

    Unknown sections or keys, two profile sections, or a profile kind the
    command cannot use all raise :class:`ConfigError`.
    """
    raw = copy.deepcopy(raw or {})
    known = {"physical", "profile", "bath", "mc", "experiment", "output"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    profile = raw.get("profile", {})
    if not isinstance(profile, dict):
        raise ConfigError("[profile] must be a table")
    extra = sorted(set(profile) - {"ring", "collapse"})
    if extra:
        raise ConfigError(f"unknown profile kind(s): {', '.join(extra)}")
    if len(profile) > 1:
        raise ConfigError("exactly one profile section may be given")
    kind = PROFILE_FOR[command]
    if profile and kind not in profile:
        raise ConfigError(f"command {command!r} needs [profile.{kind}]")
    cfg = {
        "command": command,
        "physical": _merge("physical", PHYSICAL, raw.get("physical")),
        "profile": {kind: _merge(f"profile.{kind}", RING if kind == "ring" else COLLAPSE,
                                 profile.get(kind))},
        "bath": _merge("bath", BATH[command], raw.get("bath")),
        "mc": _merge("mc", MC, raw.get("mc")),
        "experiment": _merge("experiment", EXPERIMENT[command], raw.get("experiment")),
        "output": _merge("output", OUTPUT, raw.get("output")),
    }
    build(cfg)      # surfaces value errors before any output is written
    return cfg


def config_hash(cfg: dict) -> str:
    """SHA-256 of the resolved config, excluding the output section."""
    body = {k: v for k, v in cfg.items() if k != "output"}
    text = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _num(section, key, value, positive=False, nonneg=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"[{section}] {key} must be a number")
    if integer and int(value) != value:
        raise ConfigError(f"[{section}] {key} must be an integer")
    if positive and not value > 0:
        raise ConfigError(f"[{section}] {key} must be > 0")
    if nonneg and value < 0:
        raise ConfigError(f"[{section}] {key} must be >= 0")
    return int(value) if integer else float(value)


def build(cfg: dict) -> dict:
    """Construct the model objects named by a resolved config."""
    command = cfg["command"]
    ph = cfg["physical"]
    try:
        params = PhysParams(c=_num("physical", "c", ph["c"]), L=_num("physical", "L", ph["L"]),
                            N_ions=_num("physical", "N_ions", ph["N_ions"], integer=True),
                            rho=_num("physical", "rho", ph["rho"]),
                            hbar=_num("physical", "hbar", ph["hbar"]),
                            tau=_num("physical", "tau", ph["tau"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    b = cfg["bath"]
    zeta = _num("bath", "zeta", b["zeta"], nonneg=True)
    temp = _num("bath", "temperature", b["temperature"], nonneg=True)
    ratio = _num("bath", "cutoff_ratio", b["cutoff_ratio"], positive=True)
    ex = cfg["experiment"]
    out = cfg["output"]
    if out["format"] not in ("csv", "jsonl"):
        raise ConfigError("[output] format must be 'csv' or 'jsonl'")
    if not isinstance(out["dir"], str):
        raise ConfigError("[output] dir must be a string")
    mc = cfg["mc"]
    M = _num("mc", "realizations", mc["realizations"], integer=True)
    if command == "mc-validate" and M < sto.MIN_REALIZATIONS:
        raise ConfigError(f"[mc] realizations must be >= {sto.MIN_REALIZATIONS}")
    seed = _num("mc", "seed", mc["seed"], integer=True, nonneg=True)
    built = {"params": params, "zeta": zeta, "temperature": temp, "cutoff_ratio": ratio,
             "M": M, "seed": seed}

    if command == "decoherence":
        r = cfg["profile"]["ring"]
        shape = {k: _num("profile.ring", k, r[k], positive=True)
                 for k in ("theta_H", "gamma1", "gamma2")}
        try:
            if r["constrain_revolution"]:
                profile = RingProfile.constrained(params.tau,
                                                  v_min=_num("profile.ring", "v_min", r["v_min"]),
                                                  **shape)
            else:
                profile = RingProfile(v_min=_num("profile.ring", "v_min", r["v_min"]),
                                      v_max=_num("profile.ring", "v_max", r["v_max"]), **shape)
            method = dec.Method(ex["method"])
            branch = Branch(ex["branch"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if ex["axis"] not in ("zeta", "temperature", "v_min"):
            raise ConfigError("[experiment] axis must be zeta, temperature or v_min")
        setup = dec.DecoherenceSetup(params, profile, zeta, temp, ratio, branch,
                                     bool(r["constrain_revolution"]), method)
        target = ex["calibrate_target_over_tau"]
        if target is not None:
            base = dec.apply_axis(setup, "zeta", _num("experiment", "calibrate_zeta",
                                                       ex["calibrate_zeta"], positive=True))
            cal = dec.calibrate_density(base, _num("experiment", "calibrate_target_over_tau",
                                                    target, positive=True) * params.tau)
            setup = dec.DecoherenceSetup(cal.params, profile, zeta, temp, ratio, branch,
                                         bool(r["constrain_revolution"]), method)
        built.update(setup=setup, grid=_axis_grid(ex))
        return built

    c = cfg["profile"]["collapse"]
    try:
        sk = SigmaKind(c["sigma_kind"])
        a = _num("profile.collapse", "a", c["a"], positive=True)
        tau_c = _num("profile.collapse", "tau_c", c["tau_c"], positive=True)
        if c["kappa"] is not None:
            profile = CollapseProfile(a=a, kappa=_num("profile.collapse", "kappa", c["kappa"],
                                                      nonneg=True), tau_c=tau_c, sigma_kind=sk)
        else:
            profile = CollapseProfile.from_velocities(
                _num("profile.collapse", "v_min", c["v_min"]),
                _num("profile.collapse", "v_max", c["v_max"]), a=a, tau_c=tau_c, sigma_kind=sk)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    t_h = hawking_temperature(profile)
    built.update(profile=profile, T_H=t_h)
    if command in ("correlation", "mc-validate"):
        n = _num("experiment", "points", ex["points"], integer=True, positive=True)
        xs = profile.a * np.linspace(_num("experiment", "x_min_over_a", ex["x_min_over_a"]),
                                     _num("experiment", "x_max_over_a", ex["x_max_over_a"]), n)
        t = _num("experiment", "t_over_tau_c", ex["t_over_tau_c"], positive=True) * tau_c
        x1 = _num("experiment", "x1_over_a", ex["x1_over_a"]) * profile.a
        if command == "correlation":
            dxa = _num("experiment", "dx_over_a", ex["dx_over_a"], positive=True)
            wf = _num("experiment", "window_factor", ex["window_factor"], positive=True)
            temps = ex["temperatures_over_TH"]
            if not isinstance(temps, list) or not temps:
                raise ConfigError("[experiment] temperatures_over_TH must be a nonempty list")
            temps = [_num("experiment", "temperatures_over_TH", v, nonneg=True) for v in temps]
            if t_h == 0 and any(temps):
                raise ConfigError("kappa = 0 has no Hawking temperature; use temperature 0")
        else:
            dxa = _num("mc", "dx_over_a", mc["dx_over_a"], positive=True)
            wf = _num("mc", "window_factor", mc["window_factor"], positive=True)
            temps = [_num("experiment", "temperature_over_TH", ex["temperature_over_TH"],
                          nonneg=True)]
        built.update(xs=xs, t=t, x1=x1, temps=temps,
                     modes=corr.default_modes(profile, t, dxa, wf))
        return built

    # er
    dxa = _num("experiment", "dx_over_a", ex["dx_over_a"], positive=True)
    wf = _num("experiment", "window_factor", ex["window_factor"], positive=True)
    t_end = _num("experiment", "t_end_over_tau_c", ex["t_end_over_tau_c"], positive=True) * tau_c
    modes = corr.default_modes(profile, t_end, dxa, wf)
    k_index = _num("experiment", "k_index", ex["k_index"], integer=True, positive=True)
    lo = _num("experiment", "t_min_over_tau_c", ex["t_min_over_tau_c"], positive=True)
    hi = _num("experiment", "t_max_over_tau_c", ex["t_max_over_tau_c"], positive=True)
    if hi <= lo:
        raise ConfigError("[experiment] t_max_over_tau_c must exceed t_min_over_tau_c")
    per = _num("experiment", "points_per_decade", ex["points_per_decade"], positive=True)
    bath = env.OhmicBath.from_zeta(zeta, params, profile, temperature=temp * t_h,
                                   cutoff=ratio * modes.k_cut)
    built.update(k=k_index * modes.dk, bath=bath,
                 times=corr.default_er_times(tau_c, lo, hi, per),
                 x1=_num("experiment", "x1_over_a", ex["x1_over_a"]) * profile.a,
                 x=_num("experiment", "x_over_a", ex["x_over_a"]) * profile.a,
                 renormalize=bool(ex["renormalize"]))
    return built


def _axis_grid(ex):
    if ex["values"] is not None:
        vals = ex["values"]
        if not isinstance(vals, list) or not vals:
            raise ConfigError("[experiment] values must be a nonempty list")
        return [_num("experiment", "values", v) for v in vals]
    num = _num("experiment", "num", ex["num"], integer=True, positive=True)
    start = _num("experiment", "start", ex["start"])
    stop = _num("experiment", "stop", ex["stop"])
    if ex["spacing"] == "log":
        if start <= 0 or stop <= 0:
            raise ConfigError("log spacing needs positive start and stop")
        return np.geomspace(start, stop, num).tolist()
    if ex["spacing"] == "linear":
        return np.linspace(start, stop, num).tolist()
    raise ConfigError("[experiment] spacing must be 'log' or 'linear'")


def load_config(command: str, path: str | None) -> dict:
    raw = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML: {exc}") from exc
    return resolve_config(command, raw)


# ---------------------------------------------------------------------------
# output

def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_table(records: list[dict], columns, fmt: str, digest: str) -> str:
    buf = io.StringIO()
    if fmt == "csv":
        buf.write(f"# config_sha256: {digest}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in records:
            w.writerow([_cell(r[c]) for c in columns])
    else:
        buf.write(json.dumps({"config_sha256": digest}) + "\n")
        for r in records:
            buf.write(json.dumps({c: _json_safe(r[c]) for c in columns}) + "\n")
    return buf.getvalue()


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return _json_safe(v.item())
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


def _write(files: dict, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out_dir / name).write_text(text)


def _summary(cfg, digest, body) -> str:
    # the output directory is left out so reruns elsewhere stay byte-identical
    shown = {**cfg, "output": {"format": cfg["output"]["format"]}}
    doc = {"command": cfg["command"], "config_sha256": digest, "config": shown, **body}
    return json.dumps(_json_safe(doc), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# commands

def run_decoherence_sweep(cfg, built, threads=1):
    ex = cfg["experiment"]
    rows = dec.sweep(ex["axis"], built["grid"], built["setup"], threads=threads)
    recs = [r.as_record() for r in rows]
    digest = config_hash(cfg)
    ext = cfg["output"]["format"]
    verdicts = [{"axis_value": r.value, "n": r.n, "t_D": r.t_D,
                 "measurement_feasible": r.measurement_feasible} for r in rows]
    body = {"axis": ex["axis"], "rows": len(rows), "rho": built["setup"].params.rho,
            "errors": sum(bool(r.error) for r in rows), "feasibility": verdicts}
    return {f"tdec_vs_{ex['axis']}.{ext}": render_table(recs, dec.SweepRow.COLUMNS, ext, digest),
            "summary.json": _summary(cfg, digest, body)}


def _t_label(v):
    return f"{v:g}".replace(".", "p")


def run_correlation_map(cfg, built, threads=1):
    profile, xs, t, x1 = built["profile"], built["xs"], built["t"], built["x1"]
    chars = corr.CharacteristicData.build(x1, xs, t, profile)
    digest = config_hash(cfg)
    ext = cfg["output"]["format"]
    files, peaks = {}, []
    cols = ("x/a", "region", "C_raw", "C_signal")
    for tt in built["temps"]:
        grid = corr.closed_correlation(xs, profile, tt * built["T_H"], x1=x1, t=t,
                                       modes=built["modes"], chars=chars)
        m = corr.peak_metrics(grid)
        peaks.append({"temperature_over_TH": tt, "peak_x_over_a": m.peak_x / profile.a,
                      "peak_height": m.peak_height, "fwhm_over_a": m.fwhm / profile.a,
                      "present": m.present, "background": m.background})
        files[f"correlation_T{_t_label(tt)}TH.{ext}"] = render_table(
            list(grid.records(profile.a)), cols, ext, digest)
    body = {"T_H": built["T_H"], "separatrix_over_a": chars.boundary / profile.a,
            "peaks": peaks}
    files["summary.json"] = _summary(cfg, digest, body)
    return files


def run_er_series(cfg, built, threads=1):
    rows = corr.er_table(built["k"], built["times"], built["profile"], built["bath"],
                         built["x1"], built["x"], built["renormalize"])
    tau_c = built["profile"].tau_c
    recs = [{"t/tau_c": r.t / tau_c, "e_r": r.e_r, "error": r.error} for r in rows]
    er = np.array([r.e_r for r in rows])
    ok = np.isfinite(er)
    t_star = corr.crossing_time(built["times"][ok], er[ok]) if ok.any() else None
    digest = config_hash(cfg)
    ext = cfg["output"]["format"]
    body = {"k": built["k"], "gamma": built["bath"].gamma, "cutoff": built["bath"].cutoff,
            "first_e_r": float(er[0]),
            "nondecreasing": bool(np.all(np.diff(er[ok]) >= 0)),
            "t_star_over_tau_c": None if t_star is None else t_star / tau_c}
    return {f"er_series.{ext}": render_table(recs, ("t/tau_c", "e_r", "error"), ext, digest),
            "summary.json": _summary(cfg, digest, body)}


def run_mc_validate(cfg, built, threads=1):
    profile, xs, t, x1 = built["profile"], built["xs"], built["t"], built["x1"]
    temp = built["temps"][0] * built["T_H"]
    chars = corr.CharacteristicData.build(x1, xs, t, profile)
    closed = corr.correlation_from_characteristics(chars, temp, built["modes"], profile.a)
    mc = sto.mc_correlation(xs, profile, temp, M=built["M"], seed=built["seed"], x1=x1, t=t,
                            modes=built["modes"], chars=chars, threads=threads)
    ok, verdict = sto.agreement(mc, closed)
    recs = [{"x/a": x / profile.a, "region": reg.value, "closed": c, "mc": m, "stderr": e,
             "within_3sigma": bool(o)}
            for x, reg, c, m, e, o in zip(xs, closed.regions, closed.values,
                                          mc.grid.values, mc.stderr, ok)]
    digest = config_hash(cfg)
    ext = cfg["output"]["format"]
    body = {"verdict": "pass" if verdict else "fail",
            "insufficient_statistics": mc.insufficient_statistics,
            "warning": "standard error above 20% of the value at the peak"
            if mc.insufficient_statistics else "",
            "points_within_3sigma": int(ok.sum()), "points": int(ok.size),
            "realizations": mc.M, "seed": mc.seed}
    cols = ("x/a", "region", "closed", "mc", "stderr", "within_3sigma")
    return {f"mc_validate.{ext}": render_table(recs, cols, ext, digest),
            "summary.json": _summary(cfg, digest, body)}


RUNNERS = {"decoherence": run_decoherence_sweep, "correlation": run_correlation_map,
           "er": run_er_series, "mc-validate": run_mc_validate}


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="acoustic-decoherence",
                                description="Decoherence and Hawking-pair correlations "
                                            "in acoustic black holes.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="TOML configuration file")
        s.add_argument("--out", help="output directory (overrides [output] dir)")
        s.add_argument("--seed", type=int, help="master seed (overrides [mc] seed)")
        s.add_argument("--threads", type=int, default=1,
                       help="worker threads; never changes results")
        s.add_argument("--format", choices=("csv", "jsonl"),
                       help="table format (overrides [output] format)")
    return p


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    try:
        cfg = load_config(args.command, args.config)
        if args.out is not None:
            cfg["output"]["dir"] = args.out
        if args.format is not None:
            cfg["output"]["format"] = args.format
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg["mc"]["seed"] = args.seed
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        built = build(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        files = RUNNERS[args.command](cfg, built, threads=args.threads)
    except AcousticError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    _write(files, Path(cfg["output"]["dir"]))
    for name in files:
        print(Path(cfg["output"]["dir"]) / name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
