"""Command-line interface: ``ferrosim <command> [--config PATH] [--set key=value] [--out DIR] [--seed N]``.

Commands: simulate, analyze, minconn, renorm, optimize-defects, profile,
core-energy, seed-state.  Exit codes: 0 ok, 2 solver failure, 3 I/O error,
4 malformed input.
"""

from __future__ import annotations

import os

# cap BLAS/OpenMP workers before numpy is loaded
_THREADS = os.environ.get("FERROSIM_THREADS", "").strip()
if _THREADS.isdigit() and int(_THREADS) > 0:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _THREADS)

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import diagnostics, fields, flow, geometry, potential, profile1d

log = logging.getLogger("ferrosim")

EXIT_OK, EXIT_SOLVER, EXIT_IO, EXIT_PARSE = 0, 2, 3, 4


class ConfigError(ValueError):
    def __init__(self, msg, line=None, column=None, source=None):
        where = ", ".join(p for p in (source, None if line is None else f"line {line}",
                                      None if column is None else f"column {column}") if p)
        super().__init__(f"{where}: {msg}" if where else msg)
        self.line, self.column = line, column


class UsageError(ValueError):
    pass


# -------------------------------------------------------------------- config

def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip()) if text.strip() else ()


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _eta2(text):
    return None if text.strip() == "eps" else float(text)


# key -> (parser, default text, description)
KEYS = {
    "beta": (float, "1.0", "coupling strength"),
    "eps": (float, "0.05", "elastic/coherence parameter"),
    "eta1": (float, "1.0", "friction of Q"),
    "eta2": (_eta2, "eps", "friction of M ('eps' ties it to eps)"),
    "k": (int, "1", "degree of the boundary magnetisation"),
    "n": (int, "50", "grid intervals per side"),
    "tau": (float, "0.001", "time step"),
    "t_end": (float, "1.0", "final time"),
    "snapshot_times": (_floats, "0.02,0.05,1.0", "comma-separated snapshot times"),
    "picard_tol": (float, "1e-10", "nonlinear iteration tolerance (max-norm update)"),
    "picard_max": (int, "50", "maximum nonlinear iterations per step"),
    "linsolve_tol": (float, "1e-10", "linear solver tolerance (direct solver: informational)"),
    "steady_tol": (float, "1e-08", "steady-state threshold on max_update / tau"),
    "max_halvings": (int, "3", "time-step halvings before a step failure"),
    "stop_when_steady": (_bool, "true", "stop early once steady"),
    "sigmas": (_floats, "", "sigma ladder for renorm (empty: 4h, 8h, 16h)"),
    "renorm_n": (int, "200", "grid intervals for renorm"),
    "n_starts": (int, "6", "random starts for optimize-defects"),
    "eps_list": (_floats, "0.2,0.1,0.05,0.025", "decreasing eps values for core-energy"),
    "core_n": (int, "2000", "radial intervals for core-energy"),
    "t_max": (float, "0", "profile interval length (0: 20 / lambda*)"),
    "n_samples": (int, "10000", "profile samples"),
}


def _parse_line(text, lineno, source):
    if "=" not in text:
        raise ConfigError("expected 'key = value'", lineno, 1, source)
    key, value = (s.strip() for s in text.split("=", 1))
    if key not in KEYS:
        raise ConfigError(f"unknown key {key!r}", lineno, 1, source)
    try:
        parsed = KEYS[key][0](value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}", lineno, text.index("=") + 2, source) from None
    return key, value, parsed


def load_config(path=None, overrides=()):
    """Resolve defaults, then the config file, then ``--set`` overrides.

    Returns ``(values, texts)``: typed values and their source strings.
    """
    texts = {k: d for k, (_, d, _) in KEYS.items()}
    values = {k: KEYS[k][0](d) for k, d in texts.items()}
    if path is not None:
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                key, txt, val = _parse_line(line, lineno, str(path))
                texts[key], values[key] = txt, val
    for i, item in enumerate(overrides, start=1):
        key, txt, val = _parse_line(item, i, "--set")
        texts[key], values[key] = txt, val
    return values, texts


def write_config(path, texts):
    lines = ["# resolved ferrosim configuration"]
    for key, (_, _, desc) in KEYS.items():
        lines.append(f"{key} = {texts[key]}  # {desc}")
    Path(path).write_text("\n".join(lines) + "\n")


def model_params(cfg) -> potential.ModelParams:
    return potential.ModelParams(cfg["beta"], cfg["eps"], cfg["eta1"], cfg["eta2"])


def flow_config(cfg) -> flow.FlowConfig:
    return flow.FlowConfig(
        params=model_params(cfg), grid_n=cfg["n"], tau=cfg["tau"], t_end=cfg["t_end"], k=cfg["k"],
        snapshot_times=cfg["snapshot_times"], picard_tol=cfg["picard_tol"], picard_max=cfg["picard_max"],
        linsolve_tol=cfg["linsolve_tol"], steady_tol=cfg["steady_tol"], max_halvings=cfg["max_halvings"],
        stop_when_steady=cfg["stop_when_steady"])


def _dump(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _need_input(args, what):
    if args.input is None:
        raise UsageError(f"{args.command} needs an input {what}")
    return args.input


# ------------------------------------------------------------------ commands

def cmd_simulate(args, cfg, out):
    fc = flow_config(cfg)
    with open(out / "report.csv", "w") as rep:
        rep.write("time,energy,delta,picard_iters,max_update\n")

        def record(state, r):
            rep.write(f"{r.time!r},{r.energy_total!r},{r.energy_delta!r},{r.picard_iters},{r.max_update!r}\n")

        res = flow.run(fc, callback=record)
    for t, snap in sorted(res.snapshots.items()):
        fields.write_state_csv(out / f"snapshot_t{t!r}.csv", snap, fc.params)
    fields.write_state_csv(out / "final.csv", res.final, fc.params)
    consts = potential.potential_constants(fc.params)
    summary = diagnostics.analysis_summary(res.final, consts)
    summary["final_time"] = res.final.time
    summary["steady"] = res.steady
    summary["steps"] = len(res.reports)
    _dump(out / "summary.json", summary)
    print(f"simulate: t={res.final.time:g}, E={summary['energy']['total']:.10g}, "
          f"{len(summary['defects'])} defects, {len(summary['jump_components'])} jump components")


def cmd_analyze(args, cfg, out):
    state, beta, eps = fields.read_state_csv(_need_input(args, "state CSV"))
    params = potential.ModelParams(beta, eps, cfg["eta1"], cfg["eta2"])
    summary = diagnostics.analysis_summary(state, potential.potential_constants(params))
    _dump(out / "analysis.json", summary)
    print(f"analyze: {len(summary['defects'])} defects, {len(summary['jump_components'])} jump components, "
          f"total winding {summary['total_winding']}")


def cmd_minconn(args, cfg, out):
    pts = geometry.read_points_csv(_need_input(args, "points CSV"))
    conn = geometry.minimal_connection(pts)
    _dump(out / "connection.json", conn.to_json())
    print(f"minconn: pairs {conn.pairing}, length {conn.total_length!r}")


def cmd_renorm(args, cfg, out):
    pts = geometry.read_points_csv(_need_input(args, "points CSV"))
    k = len(pts) // 2
    grid = fields.Grid(cfg["renorm_n"])
    res = geometry.renormalized_energy(pts, k, grid, cfg["sigmas"] or None)
    rep = res.to_json()
    rep["W_boundary"] = geometry.renormalized_energy_boundary(pts, k)
    rep["k"] = k
    rep["n"] = grid.n
    _dump(out / "renorm.json", rep)
    print(f"renorm: W = {res.W!r} (ladder), {rep['W_boundary']!r} (boundary integrals)")


def _random_starts(k, grid, n_starts, seed):
    rng = np.random.default_rng(seed)
    lo, hi = 0.1, 0.9
    starts = []
    while len(starts) < n_starts:
        p = rng.uniform(lo, hi, size=(2 * k, 2))
        d = np.linalg.norm(p[:, None] - p[None], axis=-1) + np.eye(2 * k)
        if d.min() > 8 * grid.h:
            starts.append(p)
    return starts


def cmd_optimize(args, cfg, out):
    params = model_params(cfg)
    grid = fields.Grid(cfg["n"])
    starts = _random_starts(cfg["k"], grid, cfg["n_starts"], args.seed)
    res = geometry.minimize_w_beta(cfg["k"], params, grid, starts)
    conn = geometry.minimal_connection(res.points)
    _dump(out / "optimum.json", {
        "points": res.points, "value": res.value, "connection": conn.to_json(),
        "start_values": res.start_values,
        "local_minima": [{"points": m.points, "value": m.value} for m in res.minima],
        "seed": args.seed,
    })
    geometry.write_points_csv(out / "optimum_points.csv", res.points)
    print(f"optimize-defects: W_beta = {res.value!r} at {res.points.tolist()}")


def cmd_profile(args, cfg, out):
    beta = cfg["beta"]
    prof = profile1d.optimal_profile(beta, cfg["t_max"] or None, cfg["n_samples"])
    with open(out / "profile.csv", "w") as f:
        f.write("t,u\n")
        f.writelines(f"{t!r},{u!r}\n" for t, u in zip(prof.ts.tolist(), prof.us.tolist()))
    rep = {
        "beta": beta,
        "cost": prof.energy,
        "half_c_beta": profile1d.half_cost(beta),
        "cost_by_substitution": profile1d.interface_cost_by_substitution(beta),
        "first_integral_residual": profile1d.first_integral_residual(prof),
        "max_error_vs_tanh": float(np.max(np.abs(prof.us - profile1d.tanh_profile(prof.ts, beta)))),
    }
    _dump(out / "profile_cost.json", rep)
    print(f"profile: cost {rep['cost']!r}, c_beta/2 = {rep['half_c_beta']!r}")


def cmd_core_energy(args, cfg, out):
    res = geometry.core_energy(cfg["eps_list"], cfg["core_n"])
    _dump(out / "core_energy.json", res.to_json())
    print(f"core-energy: gamma* estimate {res.gamma_star!r}")


def cmd_seed(args, cfg, out):
    pts = geometry.read_points_csv(_need_input(args, "points CSV"))
    params = model_params(cfg)
    conn = geometry.minimal_connection(pts)
    state = fields.seeded_state(fields.Grid(cfg["n"]), params, pts, conn)
    fields.write_state_csv(out / "seeded.csv", state, params)
    _dump(out / "connection.json", conn.to_json())
    print(f"seed-state: {len(pts)} defects, connection length {conn.total_length!r}")


COMMANDS = {
    "simulate": (cmd_simulate, "run the gradient flow from the degree-k initial data"),
    "analyze": (cmd_analyze, "energies, defects and jump lines of a state CSV"),
    "minconn": (cmd_minconn, "minimal connection of a points CSV"),
    "renorm": (cmd_renorm, "renormalised energy of the points in a points CSV"),
    "optimize-defects": (cmd_optimize, "minimise W_beta over defect positions"),
    "profile": (cmd_profile, "optimal 1-d transition profile and its cost"),
    "core-energy": (cmd_core_energy, "radial core energy gamma(eps) and its limit"),
    "seed-state": (cmd_seed, "recovery-type state with defects at the given points"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_PARSE)


def build_parser():
    p = _Parser(prog="ferrosim", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_) in COMMANDS.items():
        s = sub.add_parser(name, help=help_)
        if name in ("analyze", "minconn", "renorm", "seed-state"):
            s.add_argument("input", help="input file")
        else:
            s.set_defaults(input=None)
        s.add_argument("--config", type=Path, help="flat 'key = value' config file")
        s.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        s.add_argument("--out", type=Path, default=Path("ferrosim_out"), help="output directory")
        s.add_argument("--seed", type=int, default=0, help="random seed for optimizer starts")
        if name == "profile":
            s.add_argument("--beta", type=float, help="shorthand for --set beta=...")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if _THREADS and not (_THREADS.isdigit() and int(_THREADS) > 0):
        print(f"error: FERROSIM_THREADS must be a positive integer, got {_THREADS!r}", file=sys.stderr)
        return EXIT_PARSE
    func = COMMANDS[args.command][0]
    overrides = list(args.overrides)
    if getattr(args, "beta", None) is not None:
        overrides.append(f"beta={args.beta!r}")
    try:
        cfg, texts = load_config(args.config, overrides)
        args.out.mkdir(parents=True, exist_ok=True)
        write_config(args.out / "config.txt", texts)
        func(args, cfg, args.out)
    except (flow.StepFailure, geometry.NewtonDivergence, potential.RootSolveError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, fields.FieldFormatError, UsageError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
