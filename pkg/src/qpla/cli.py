"""Command-line front end.

Every subcommand writes one CSV or JSON file and prints a one-line summary.
Exit codes: 0 success, 2 invalid configuration, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import canonical, classical, groundstate, locallimit, puoperator
from .errors import ConfigurationError, NumericalError
from .puoperator import PUParams
from .timegrid import make_grid

COMMANDS = ("kernel", "spectrum", "classical", "canonical-check", "ground-state", "trace", "local-limit")
FORMATS = ("csv", "json")
OUT_DIR_ENV = "QPLA_OUT_DIR"


@dataclass(frozen=True)
class RunConfig:
    command: str
    r: float | None = None
    T: float = 1.0
    N: int = 2000
    n_max: int | None = None
    alpha: float | str = "auto"
    hbar: float = 1.0
    q0: float = 0.0
    qT: float = 0.0
    dt: float = 1e-3
    steps: int = 100_000
    r_list: tuple[float, ...] = (0.01, 0.005, 0.001)
    output: str | None = None
    format: str = "csv"
    seed: int = 0
    draws: int = 20
    sample_every: int = 100
    initial: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)

    def params(self) -> PUParams:
        alpha = None if self.alpha == "auto" else float(self.alpha)
        return PUParams(self.r, self.T, self.hbar, alpha, self.n_max)

    def output_path(self) -> Path:
        name = self.output or f"{self.command}.{self.format}"
        out_dir = os.environ.get(OUT_DIR_ENV)
        if out_dir:
            return Path(out_dir) / Path(name).name
        return Path(name)


FILE_KEYS = {f.name for f in fields(RunConfig)} - {"command"}


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _alpha(text: str):
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"alpha must be a number or 'auto', got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option values; flags override it")
    common.add_argument("--r", type=float)
    common.add_argument("--T", type=float)
    common.add_argument("--N", type=int)
    common.add_argument("--n-max", dest="n_max", type=int)
    common.add_argument("--alpha", type=_alpha)
    common.add_argument("--hbar", type=float)
    common.add_argument("--q0", type=float)
    common.add_argument("--qT", type=float)
    common.add_argument("--dt", type=float)
    common.add_argument("--steps", type=int)
    common.add_argument("--r-list", dest="r_list", type=_float_list)
    common.add_argument("--output", "-o")
    common.add_argument("--format", choices=FORMATS)
    common.add_argument("--seed", type=int)
    common.add_argument("--draws", type=int)
    common.add_argument("--sample-every", dest="sample_every", type=int)
    common.add_argument("--initial", type=_float_list, help="q,y,p_q,p_y for the classical run")

    parser = argparse.ArgumentParser(prog="qpla", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "kernel": "analytic vs numeric Green's kernel",
        "spectrum": "discrete eigenvalues of L against the closed form",
        "classical": "RK4 run of the Ostrogradsky Hamiltonian flow",
        "canonical-check": "Lagrangian vs canonical action on random trajectories",
        "ground-state": "Gaussian ground state, residuals and action eigenvalue",
        "trace": "trace series of L^(-1/2) and its integral estimates",
        "local-limit": "convergence of Lambda to the oscillator reference",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _load_file(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError("config file must hold a JSON object")
    unknown = sorted(set(data) - FILE_KEYS)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
    for key in ("r_list", "initial"):
        if key in data:
            data[key] = tuple(float(x) for x in data[key])
    return data


def validate(cfg: RunConfig) -> None:
    if cfg.format not in FORMATS:
        raise ConfigurationError(f"format must be one of {FORMATS}, got {cfg.format!r}")
    if cfg.N < 8:
        raise ConfigurationError(f"N must be >= 8, got {cfg.N}")
    if not cfg.T > 0:
        raise ConfigurationError(f"T must be positive, got {cfg.T}")
    if cfg.command == "local-limit":
        if not cfg.r_list or min(cfg.r_list) <= 0:
            raise ConfigurationError("--r-list needs positive values")
        for r in cfg.r_list:
            PUParams(r, cfg.T, cfg.hbar).check_resonance()
        return
    if cfg.r is None:
        raise ConfigurationError(f"{cfg.command} needs --r")
    params = cfg.params()
    if cfg.command == "classical":
        if cfg.r == 0:
            raise ConfigurationError("classical needs r > 0")
        if not cfg.dt > 0 or cfg.steps < 0 or cfg.sample_every < 1:
            raise ConfigurationError("classical needs dt > 0, steps >= 0, sample-every >= 1")
        if len(cfg.initial) != 4:
            raise ConfigurationError("--initial needs four values q,y,p_q,p_y")
        return
    params.check_resonance()
    if cfg.n_max is not None and cfg.n_max > cfg.N and cfg.command in ("spectrum", "ground-state"):
        raise ConfigurationError(f"n_max = {cfg.n_max} exceeds N = {cfg.N}")
    if cfg.command == "trace":
        if cfg.r == 0:
            raise ConfigurationError("trace needs r > 0")
        params.check_poles(params.cutoff())
    if cfg.command == "ground-state" and cfg.alpha == "auto":
        if cfg.r == 0:
            raise ConfigurationError("alpha 'auto' needs r > 0")
        locallimit.calibrate_alpha(params)


def parse_config(argv=None) -> RunConfig:
    """Parse flags (and an optional JSON file) into a validated RunConfig.

    Raises ConfigurationError or NumericalError subclasses on guard
    violations; argparse itself exits with status 2 on malformed flags.
    """
    ns = build_parser().parse_args(argv)
    values: dict = {}
    if ns.config:
        values.update(_load_file(ns.config))
    values.update({k: v for k, v in vars(ns).items() if k in FILE_KEYS and v is not None})
    cfg = RunConfig(command=ns.command, **values)
    validate(cfg)
    return cfg


# ---------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v) + 0.0, ".17g")


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": float(v.real), "im": float(v.imag)}
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


@dataclass
class Result:
    columns: list[str]
    rows: list[list]
    summary: dict
    line: str
    document: dict | None = None


def render(cfg: RunConfig, res: Result) -> str:
    if cfg.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(res.columns)
        for row in res.rows:
            writer.writerow([_fmt(v) for v in row])
        return buf.getvalue()
    doc = res.document or {
        "command": cfg.command,
        "summary": res.summary,
        "columns": res.columns,
        "rows": res.rows,
    }
    doc = {"schema_version": 1, **doc}
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def run_kernel(cfg: RunConfig) -> Result:
    params = cfg.params()
    grid = make_grid(cfg.T, cfg.N)
    Ka = puoperator.green_kernel_analytic(grid, params).values
    Kn = puoperator.green_kernel_numeric(grid, params).values
    diff = float(np.max(np.abs(Ka - Kn)))
    idx = np.arange(0, grid.N, max(1, grid.N // 40))
    t = grid.nodes
    rows = [[int(i), int(j), t[i], t[j], Ka[i, j], Kn[i, j], abs(Ka[i, j] - Kn[i, j])] for i in idx for j in idx]
    summary = {"max_abs_diff": diff, "r": cfg.r, "T": cfg.T, "N": cfg.N}
    cols = ["i", "j", "t", "s", "K_analytic", "K_numeric_inverse", "abs_diff"]
    return Result(cols, rows, summary, f"max|K_analytic - K_numeric| = {diff:.3e}")


def run_spectrum(cfg: RunConfig) -> Result:
    params = cfg.params()
    grid = make_grid(cfg.T, cfg.N)
    n_max = cfg.n_max or min(10, grid.N)
    spec = puoperator.spectrum(grid, params, n_max)
    exact = puoperator.continuum_eigenvalues(params, n_max)
    rows = [[n + 1, spec.eigenvalues[n], exact[n], abs(spec.eigenvalues[n] - exact[n])] for n in range(n_max)]
    rel = float(np.max(np.abs(spec.eigenvalues - exact) / np.abs(exact)))
    summary = {"n_c": spec.n_c, "max_rel_diff": rel}
    cols = ["n", "lambda_n_grid", "lambda_n_closed_form", "abs_diff"]
    return Result(cols, rows, summary, f"n_c = {spec.n_c}, max relative deviation = {rel:.3e}")


def run_classical(cfg: RunConfig) -> Result:
    params = cfg.params()
    state0 = classical.OstrogradskyState(*cfg.initial)
    run = classical.integrate(state0, params, cfg.dt, cfg.steps, cfg.sample_every)
    rows = [[t, *s, e] for t, s, e in zip(run.times, run.states, run.energy)]
    summary = {"energy_drift": run.energy_drift, "growth": run.growth, "energy_initial": run.energy[0]}
    if cfg.r < 0.5:
        slow, fast = classical.normal_frequencies(params)
        summary.update(omega_slow=slow, omega_fast=fast)
    cols = ["t", "q", "y", "p_q", "p_y", "ostrogradsky_energy"]
    return Result(cols, rows, summary, f"relative energy drift = {run.energy_drift:.3e}, growth = {run.growth:.3g}")


def run_canonical_check(cfg: RunConfig) -> Result:
    params = cfg.params()
    grid = make_grid(cfg.T, cfg.N)
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for draw in range(cfg.draws):
        c = rng.uniform(-1.0, 1.0, 5)
        q = canonical.random_sine_trajectory(grid, c)
        p = canonical.momentum_from_velocity(q, params)
        lag = classical.lagrangian_action(q, params)
        can = canonical.canonical_action(q, p, params)
        rows.append([draw, lag, can, abs(can - lag) / abs(lag)])
    worst = max(row[3] for row in rows)
    cols = ["draw", "lagrangian_action", "canonical_action", "rel_diff"]
    return Result(cols, rows, {"max_rel_diff": worst}, f"max relative |canonical - lagrangian| = {worst:.3e}")


def run_ground_state(cfg: RunConfig) -> Result:
    params = cfg.params()
    grid = make_grid(cfg.T, cfg.N)
    alpha = params.alpha if params.alpha is not None else locallimit.calibrate_alpha(params).alpha_star
    hbt = locallimit.hbar_tilde(alpha, params.r, params.hbar) if params.r > 0 else 0.0
    gs = groundstate.ground_state(grid, params, hbar_tilde=hbt, q0=cfg.q0, qT=cfg.qT)
    norm = groundstate.normalizability(gs.M, hbt)
    w = grid.weights
    Md = np.diag(gs.M.values) * w
    rows = [[i + 1, grid.nodes[i], Md[i].real, Md[i].imag, gs.k[i].real, gs.k[i].imag] for i in range(grid.N)]
    summary = {
        "Lambda": gs.Lambda,
        "alpha": alpha,
        "hbar_tilde": hbt,
        "n_max": gs.n_max,
        "trace_weighted": gs.trace.weighted,
        "trace_spectral": gs.trace.spectral,
        "normalizable": norm.normalizable,
        "min_eigenvalue_re_M": norm.min_eigenvalue,
        **gs.residuals,
    }
    cols = ["i", "t", "M_diag_w_re", "M_diag_w_im", "k_re", "k_im"]
    line = (
        f"Lambda = {gs.Lambda.real:.10g}{gs.Lambda.imag:+.10g}i, "
        f"kernel derivative residual = {gs.residuals['kernel_derivative']:.3e}"
    )
    return Result(cols, rows, summary, line)


def run_trace(cfg: RunConfig) -> Result:
    params = cfg.params()
    n_max = params.cutoff()
    lam = puoperator.continuum_eigenvalues(params, n_max)
    terms = 1.0 / puoperator.principal_sqrt(lam)
    partial = np.cumsum(terms)
    rows = [[n + 1, lam[n], terms[n].real, terms[n].imag, partial[n].real, partial[n].imag] for n in range(n_max)]
    S = puoperator.trace_inv_sqrt(params, n_max)
    approx = puoperator.trace_integral_approx(params)
    summary = {
        "S": S.value,
        "n_max": n_max,
        "n_c": S.n_c,
        "r_ReS_over_T": params.r * S.real / params.T,
        "integral_pi2": approx.pi2,
        "integral_derived": approx.derived,
    }
    cols = ["n", "lambda_n", "term_re", "term_im", "partial_re", "partial_im"]
    line = (
        f"S = {S.real:.10g}{S.imag:+.10g}i (n_max = {n_max}), r Re S / T = {summary['r_ReS_over_T']:.6f}, "
        f"pi^2 T/r = {approx.pi2:.6g}"
    )
    return Result(cols, rows, summary, line)


def run_local_limit(cfg: RunConfig) -> Result:
    report = locallimit.convergence_sweep(cfg.r_list, cfg.T, cfg.q0, cfg.qT, cfg.hbar, N=cfg.N)
    rows = [
        [e.r, e.N_lambda, e.n_max, e.Lambda.real, e.Lambda.imag, e.Lambda_with_phase.real,
         e.Lambda_with_phase.imag, e.Lambda_ref.real, e.Lambda_ref.imag, e.deviation, e.D]
        for e in report.entries
    ]
    cols = ["r", "N_lambda", "n_max", "Lambda_re", "Lambda_im", "Lambda_phase_re", "Lambda_phase_im",
            "Lambda_ref_re", "Lambda_ref_im", "deviation", "derivative_residual"]
    last = report.entries[-1]
    line = f"alpha* = {report.alpha_star:.6f}, deviation at r = {last.r:g}: {last.deviation:.3e}"
    doc = report.to_dict()
    doc.pop("schema_version")
    doc["command"] = cfg.command
    return Result(cols, rows, {}, line, document=doc)


RUNNERS = {
    "kernel": run_kernel,
    "spectrum": run_spectrum,
    "classical": run_classical,
    "canonical-check": run_canonical_check,
    "ground-state": run_ground_state,
    "trace": run_trace,
    "local-limit": run_local_limit,
}


def run(cfg: RunConfig) -> int:
    try:
        res = RUNNERS[cfg.command](cfg)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    path = cfg.output_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(render(cfg, res))
    print(f"{cfg.command}: {res.line} -> {path}")
    return 0


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except (ConfigurationError, NumericalError) as exc:
        print(f"qpla: invalid configuration: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
