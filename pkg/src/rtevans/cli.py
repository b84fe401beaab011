"""Command-line front end.

Every command writes one table, as CSV with a ``#`` metadata header or as a
JSON document ``{"meta": ..., "rows": [...]}``.  The metadata holds the
package version and the fully resolved configuration, so a file can be
regenerated from its own header.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 I/O error.
Failures print a one-line JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .evans import (
    InvalidEvaluation,
    RootError,
    b0_matched,
    dispersion,
    evans,
    expansion_fit,
)
from .linevolve import (
    EvolveState,
    PoorFitError,
    eigen_state,
    evolve,
    measure_growth,
    random_state,
)
from .lowdense import NonContractionError
from .overdense import BranchError, ModeContext
from .profile import PhysicalParams, get_profile, l_eff_and_cap
from .spectral import SpectralError, eigenmode_diagnostics, gamma_spectral, make_xgrid

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
OUTPUT_DIR_ENV = "RTEVANS_OUTPUT_DIR"

NUMERICAL_ERRORS = (
    RootError,
    InvalidEvaluation,
    NonContractionError,
    BranchError,
    SpectralError,
    PoorFitError,
    np.linalg.LinAlgError,
    ArithmeticError,
)

# command -> defaults of its own numerics
COMMAND_DEFAULTS: dict[str, dict] = {
    "profile": {"points": 200, "y_min": -20.0, "y_max": 5.0},
    "evans-scan": {"lam_min": 0.9, "lam_max": 1.3, "lam_points": 41, "lam": None, "eps": 1e-4},
    "dispersion": {"k": None, "k_min": 1e-3, "k_max": 10.0, "k_points": 9, "spectral_fallback": True},
    "expansion-check": {"eps_min": 1e-6, "eps_max": 1e-3, "eps_points": 8, "b0_eps": [1e-12, 1e-11, 1e-10, 1e-9]},
    "spectral": {"k": None, "k_min": 5.0, "k_max": 100.0, "k_points": 5, "ds": None},
    "evolve": {"k": 5.0, "init": "eigen", "init_file": None, "T": None, "seed": 0, "dt": None},
}
PHYSICAL_DEFAULTS = asdict(PhysicalParams())


class UsageError(ValueError):
    """Invalid configuration (exit code 2)."""


@dataclass
class RunConfig:
    """Resolved configuration of one run.

    Parameters
    ----------
    command : str
        Subcommand name.
    physical : dict
        ``nu``, ``g``, ``L0``, ``rho_a``.
    numerics : dict
        Command-specific settings (grids, sweeps, tolerances, seeds).
    output : str or None
        Output path; ``None`` writes to stdout.
    format : str
        ``"csv"`` or ``"json"``.
    jobs : int
        Worker processes for sweeps.
    """

    command: str
    physical: dict = field(default_factory=lambda: dict(PHYSICAL_DEFAULTS))
    numerics: dict = field(default_factory=dict)
    output: str | None = None
    format: str = "csv"
    jobs: int = 1

    def params(self) -> PhysicalParams:
        return PhysicalParams(**self.physical)

    def to_dict(self) -> dict:
        # jobs only changes scheduling, never the output
        d = asdict(self)
        d.pop("jobs")
        return d


# configuration -------------------------------------------------------------------
def _load_config_file(path: str) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise OSError(f"cannot read config file {path}: {exc}") from exc
    if p.suffix == ".toml":
        try:
            import tomllib
        except ImportError:  # Python < 3.11
            raise UsageError("TOML config files need Python >= 3.11; use JSON") from None
        return tomllib.loads(text)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from exc


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then config-file values, then command-line flags."""
    cmd = args.command
    physical = dict(PHYSICAL_DEFAULTS)
    numerics = {key: (list(v) if isinstance(v, list) else v) for key, v in COMMAND_DEFAULTS[cmd].items()}
    top = {"output": None, "format": "csv", "jobs": 1}
    if args.config:
        data = _load_config_file(args.config)
        section = data.get(cmd.replace("-", "_"), data.get(cmd, {}))
        for source in (data, section):
            for key, value in source.items():
                if isinstance(value, dict):
                    continue
                key = key.replace("-", "_")
                if key in physical:
                    physical[key] = value
                elif key in numerics:
                    numerics[key] = value
                elif key in top:
                    top[key] = value
                else:
                    raise UsageError(f"unknown config key {key!r} for {cmd}")
    flags = vars(args)
    for key in physical:
        if flags.get(key) is not None:
            physical[key] = flags[key]
    for key in numerics:
        if flags.get(key) is not None:
            numerics[key] = flags[key]
    for key in top:
        if flags.get(key) is not None:
            top[key] = flags[key]
    if top["format"] not in ("csv", "json"):
        raise UsageError(f"unknown format {top['format']!r}")
    if int(top["jobs"]) < 1:
        raise UsageError("--jobs must be >= 1")
    cfg = RunConfig(cmd, physical, numerics, top["output"], top["format"], int(top["jobs"]))
    try:
        cfg.params()
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    return cfg


# output ---------------------------------------------------------------------------
def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def render(cfg: RunConfig, columns: list[str], rows: list[dict], summary: dict | None = None) -> str:
    meta = {"artifact": "artifact", "version": __version__, "config": cfg.to_dict()}
    if summary:
        meta["summary"] = summary
    if cfg.format == "json":
        doc = {"meta": _jsonable(meta), "rows": [_jsonable({c: r[c] for c in columns}) for r in rows]}
        return json.dumps(doc, indent=1, sort_keys=False) + "\n"
    buf = io.StringIO()
    buf.write(f"# artifact {__version__}\n")
    buf.write(f"# config: {json.dumps(_jsonable(cfg.to_dict()), sort_keys=True)}\n")
    if summary:
        buf.write(f"# summary: {json.dumps(_jsonable(summary), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def _output_path(cfg: RunConfig) -> Path | None:
    if cfg.output is None or cfg.output == "-":
        return None
    p = Path(cfg.output)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def emit(cfg: RunConfig, text: str) -> None:
    path = _output_path(cfg)
    if path is None:
        sys.stdout.write(text)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _sweep(numerics: dict, key: str, log: bool) -> list[float]:
    if numerics.get(key) is not None:
        vals = numerics[key]
        return [float(v) for v in (vals if isinstance(vals, list) else [vals])]
    lo, hi, n = numerics[f"{key}_min"], numerics[f"{key}_max"], int(numerics[f"{key}_points"])
    if n < 1 or not lo <= hi or (log and lo <= 0.0):
        raise UsageError(f"bad {key} sweep [{lo}, {hi}] x {n}")
    return [float(v) for v in (np.geomspace(lo, hi, n) if log else np.linspace(lo, hi, n))]


# commands -------------------------------------------------------------------------
def cmd_profile(cfg: RunConfig):
    num = cfg.numerics
    n = int(num["points"])
    if n < 2 or not num["y_min"] < num["y_max"]:
        raise UsageError("profile needs points >= 2 and y_min < y_max")
    params = cfg.params()
    y = np.linspace(num["y_min"], num["y_max"], n)
    ev = get_profile(params.nu).evaluate(y)
    rows = [{"y": a, "xi": b, "k0_scaled": c} for a, b, c in zip(y, ev.xi, ev.k0_scaled)]
    return ["y", "xi", "k0_scaled"], rows, None


def _evans_row(item):
    lam, eps, physical = item
    params = PhysicalParams(**physical)
    e = evans(ModeContext.scaled(eps, lam), params)
    return {"lam": lam, "eps": eps, "value": e.value, "spread": e.spread, "valid": e.valid}


def cmd_evans_scan(cfg: RunConfig):
    num = cfg.numerics
    lams = _sweep(num, "lam", log=False)
    eps = float(num["eps"])
    if eps < 0.0:
        raise UsageError("eps must be >= 0")
    rows = _map(_evans_row, [(lam, eps, cfg.physical) for lam in lams], cfg.jobs)
    signs = np.sign([r["value"] for r in rows])
    changes = int(np.sum(signs[1:] * signs[:-1] < 0))
    return ["lam", "eps", "value", "spread", "valid"], rows, {"sign_changes": changes}


def _dispersion_row(item):
    k, physical, fallback = item
    return dispersion(PhysicalParams(**physical), [k], spectral_fallback=fallback)[0].as_dict()


def cmd_dispersion(cfg: RunConfig):
    num = cfg.numerics
    ks = _sweep(num, "k", log=True)
    if any(k <= 0.0 for k in ks):
        raise UsageError("k must be positive")
    rows = _map(_dispersion_row, [(k, cfg.physical, bool(num["spectral_fallback"])) for k in ks], cfg.jobs)
    columns = ["k", "epsilon", "lambda_root", "gamma", "gamma_asym", "gamma_cap", "admissible", "source", "error"]
    return columns, rows, None


def cmd_expansion_check(cfg: RunConfig):
    num = cfg.numerics
    nu = cfg.params().nu
    eps = _sweep(num, "eps", log=True)
    fit = expansion_fit(nu, eps)
    b0 = b0_matched(nu, num["b0_eps"])
    rows = [{"eps": e, "lambda": l, "delta": d} for e, l, d in zip(fit["eps"], fit["lambda"], fit["delta"])]
    summary = {k: v for k, v in fit.items() if k not in ("eps", "lambda", "delta")}
    summary.update({"b0_derivative": b0["derivative"], "b0_root": b0["root"], "b0_closed_form": b0["closed_form"]})
    return ["eps", "lambda", "delta"], rows, summary


def _spectral_row(item):
    k, physical, ds = item
    params = PhysicalParams(**physical)
    if ds is None:
        res = gamma_spectral(k, params)
    else:
        res = gamma_spectral(k, params, make_xgrid(params, k, ds=float(ds)))
    diag = eigenmode_diagnostics(res)
    return {
        "k": k,
        "gamma": res.gamma,
        "lambda": res.lambda_value,
        "eigenvalue_residual": res.eigenvalue_residual,
        "n": res.n,
        "norm_du": diag["du"],
        "norm_d2u": diag["d2u"],
        "norm_sqrt_rho_u": diag["sqrt_rho_u"],
        "ode_mismatch": diag["ode_mismatch"],
    }


def cmd_spectral(cfg: RunConfig):
    num = cfg.numerics
    ks = _sweep(num, "k", log=True)
    if any(k <= 0.0 for k in ks):
        raise UsageError("k must be positive")
    rows = _map(_spectral_row, [(k, cfg.physical, num["ds"]) for k in ks], cfg.jobs)
    cap = l_eff_and_cap(cfg.params())[1]
    columns = ["k", "gamma", "lambda", "eigenvalue_residual", "n", "norm_du", "norm_d2u", "norm_sqrt_rho_u", "ode_mismatch"]
    return columns, rows, {"gamma_cap": cap}


def _read_init_file(path: str, grid, k: float) -> EvolveState:
    """CSV with columns tau_re, tau_im, b_re, b_im on the interior grid nodes."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.DictReader(line for line in fh if not line.startswith("#"))]
    try:
        tau = np.array([float(r["tau_re"]) + 1j * float(r["tau_im"]) for r in rows])
        b = np.array([float(r["b_re"]) + 1j * float(r["b_im"]) for r in rows])
    except (KeyError, ValueError) as exc:
        raise UsageError(f"init file {path}: need columns tau_re,tau_im,b_re,b_im ({exc})") from exc
    if tau.size != grid.n - 2:
        raise UsageError(f"init file has {tau.size} rows, grid has {grid.n - 2} interior nodes")
    return EvolveState(0.0, tau, b, k, grid)


def cmd_evolve(cfg: RunConfig):
    num = cfg.numerics
    params = cfg.params()
    k = float(num["k"])
    if not k > 0.0:
        raise UsageError("k must be positive")
    cap = l_eff_and_cap(params)[1]
    res = gamma_spectral(k, params)
    init = num["init"]
    if init == "eigen":
        state = eigen_state(res)
    elif init == "random":
        state = random_state(res.grid, k, np.random.default_rng(int(num["seed"])))
    elif init == "file":
        if not num["init_file"]:
            raise UsageError("--init file needs --init-file")
        state = _read_init_file(num["init_file"], res.grid, k)
    else:
        raise UsageError(f"unknown init {init!r}")
    T = float(num["T"]) if num["T"] is not None else (5.0 / res.gamma if init == "eigen" else 60.0 / cap)
    traj = evolve(state, T, params, dt=num["dt"])
    dlog = traj.log_derivative()
    rows = [
        {"t": a, "norm_tau": b, "norm_b": c, "log_derivative": d}
        for a, b, c, d in zip(traj.t, traj.norm_tau, traj.norm_b, dlog)
    ]
    summary = {"gamma_spectral": res.gamma, "gamma_cap": cap}
    try:
        fit = measure_growth(traj)
        summary.update({"gamma_measured": fit.gamma_measured, "fit_window": list(fit.fit_window), "r_squared": fit.r_squared})
    except PoorFitError as exc:
        summary["fit_error"] = str(exc)
    return ["t", "norm_tau", "norm_b", "log_derivative"], rows, summary


COMMANDS = {
    "profile": cmd_profile,
    "evans-scan": cmd_evans_scan,
    "dispersion": cmd_dispersion,
    "expansion-check": cmd_expansion_check,
    "spectral": cmd_spectral,
    "evolve": cmd_evolve,
}


# parser ---------------------------------------------------------------------------
def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("physical parameters")
    g.add_argument("--nu", type=float, help="thermal conduction index (> 1)")
    g.add_argument("--g", type=float, help="gravity")
    g.add_argument("--L0", type=float, help="profile length scale")
    g.add_argument("--rho-a", dest="rho_a", type=float, help="dense-side density")
    o = common.add_argument_group("run")
    o.add_argument("--config", help="JSON (or TOML on Python >= 3.11) config file")
    o.add_argument("-o", "--output", help=f"output file (default stdout; relative paths go under ${OUTPUT_DIR_ENV})")
    o.add_argument("--format", choices=["csv", "json"], help="output format (default csv)")
    o.add_argument("--jobs", type=int, help="worker processes for sweeps")

    parser = argparse.ArgumentParser(prog="rtevans", description="Ablative Rayleigh-Taylor growth rates.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", parents=[common], help="tabulate the density profile")
    p.add_argument("--points", type=int)
    p.add_argument("--y-min", dest="y_min", type=float)
    p.add_argument("--y-max", dest="y_max", type=float)

    p = sub.add_parser("evans-scan", parents=[common], help="Evans function over a lambda grid")
    p.add_argument("--lam", type=_floats, help="explicit comma-separated lambda values")
    p.add_argument("--lam-min", dest="lam_min", type=float)
    p.add_argument("--lam-max", dest="lam_max", type=float)
    p.add_argument("--lam-points", dest="lam_points", type=int)
    p.add_argument("--eps", type=float)

    p = sub.add_parser("dispersion", parents=[common], help="growth rate gamma(k) from the Evans root")
    p.add_argument("--k", type=_floats, help="explicit comma-separated wavenumbers")
    p.add_argument("--k-min", dest="k_min", type=float)
    p.add_argument("--k-max", dest="k_max", type=float)
    p.add_argument("--k-points", dest="k_points", type=int)
    p.add_argument("--no-spectral-fallback", dest="spectral_fallback", action="store_const", const=False)

    p = sub.add_parser("expansion-check", parents=[common], help="small-eps expansion of the root")
    p.add_argument("--eps-min", dest="eps_min", type=float)
    p.add_argument("--eps-max", dest="eps_max", type=float)
    p.add_argument("--eps-points", dest="eps_points", type=int)
    p.add_argument("--b0-eps", dest="b0_eps", type=_floats)

    p = sub.add_parser("spectral", parents=[common], help="gamma(k) from the Schrodinger-form eigenproblem")
    p.add_argument("--k", type=_floats)
    p.add_argument("--k-min", dest="k_min", type=float)
    p.add_argument("--k-max", dest="k_max", type=float)
    p.add_argument("--k-points", dest="k_points", type=int)
    p.add_argument("--ds", type=float, help="fixed grid step in the stretched coordinate (default: converge)")

    p = sub.add_parser("evolve", parents=[common], help="time evolution of one Fourier mode")
    p.add_argument("--k", type=float)
    p.add_argument("--init", choices=["eigen", "random", "file"])
    p.add_argument("--init-file", dest="init_file")
    p.add_argument("--T", type=float, help="final time")
    p.add_argument("--dt", type=float)
    p.add_argument("--seed", type=int)
    return parser


def _fail(code: int, exc: BaseException) -> int:
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(record) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        columns, rows, summary = COMMANDS[cfg.command](cfg)
        emit(cfg, render(cfg, columns, rows, summary))
    except UsageError as exc:
        return _fail(EXIT_INVALID, exc)
    except NUMERICAL_ERRORS as exc:
        return _fail(EXIT_NUMERICAL, exc)
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    except ValueError as exc:
        return _fail(EXIT_INVALID, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
