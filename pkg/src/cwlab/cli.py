"""Command-line entry point (`xlab`).

Subcommands: spectrum, evolve, simulate, ode, experiment, plot.
Exit codes: 0 success / criteria pass, 1 criterion failure, 2 usage
error, 3 numerical-convergence failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import config as _config
from .errors import (
    ConvergenceError,
    CwlabError,
    StarvationError,
    StepSizeError,
)
from .evolution import DiscreteLaw, conditional_law
from .experiments import (
    EXPERIMENT_NAMES,
    ExperimentSpec,
    calibrate_expected,
    load_expected,
    run_experiment,
)
from .mean_field import integrate_limit, integrate_modified
from .model import ModelParams, build_generator, full_grid
from .plotsvg import emit_plot
from .sampler import SimConfig, full_endpoints, killed_endpoints
from .spectral import perron_eigenpair

DEFAULTS = {
    "n": 100,
    "beta": 1.2,
    "eps": 0.1,
    "eta": "",
    "seed": 1234,
    "tol": 1e-12,
    "out": ".",
}


def _add_common(sp):
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--beta", type=float, default=None)
    sp.add_argument("--eps", type=float, default=None)
    sp.add_argument("--eta", type=float, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", type=str, default=None)
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--config", type=str, default=None,
                    help="flat key = value file; flags override it")


def _settings(args) -> dict:
    values = dict(DEFAULTS)
    if getattr(args, "config", None):
        values.update(_config.parse_config_file(args.config))
    for key in ("n", "beta", "eps", "eta", "seed", "out", "tol"):
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return values


def _params(values) -> ModelParams:
    eta = values.get("eta")
    eta = float(eta) if eta not in ("", None) else None
    return ModelParams(
        n=_config.as_int(values, "n", 100),
        beta=_config.as_float(values, "beta", 1.2),
        epsilon=_config.as_float(values, "eps", 0.1),
        eta=eta,
    )


def _cmd_spectrum(args):
    values = _settings(args)
    p = _params(values)
    p.require_qsd_regime()
    pack = perron_eigenpair(build_generator(p, killed=True),
                            tol=_config.as_float(values, "tol", 1e-12))
    print(f"n = {p.n}  beta = {p.beta}  eps = {p.epsilon}")
    print(f"b_n = {pack.b_n:.17g}")
    print(f"h_n(eps_n) = {pack.h_n[0]:.17g}")
    print(f"qsd mean = {float(pack.qsd @ build_generator(p, killed=True).grid.points):.17g}")
    print(f"residuals: right {pack.resid_right:.3e}  left {pack.resid_left:.3e}")
    print(f"iterations: {pack.iterations}")
    return 0


def _cmd_evolve(args):
    values = _settings(args)
    p = _params(values)
    G = build_generator(p, killed=True)
    m0 = G.grid.points[G.grid.nearest_index(args.m0)]
    nu, survival = conditional_law(
        p, DiscreteLaw.dirac(G.grid, m0), args.t,
        tol=_config.as_float(values, "tol", 1e-12))
    print(f"t = {args.t}  m0 = {m0}")
    print(f"survival = {survival:.17g}")
    print(f"conditioned mean = {nu.mean():.17g}")
    if values.get("out") not in (None, "", "."):
        out = Path(values["out"])
        out.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(out, np.column_stack([G.grid.points, nu.weights]),
                   header="state conditioned_weight")
        print(f"wrote {out}")
    return 0


def _cmd_simulate(args):
    values = _settings(args)
    p = _params(values)
    cfg = SimConfig(seed=_config.as_int(values, "seed", 1234),
                    replicas=args.replicas, t_max=args.t)
    g = full_grid(p)
    m0 = g.points[g.nearest_index(args.m0)]
    if args.kind == "killed":
        idx, alive = killed_endpoints(p, m0, args.t, cfg)
        surv = int(alive.sum())
        print(f"replicas = {cfg.replicas}  survivors = {surv}")
        if surv:
            print(f"conditioned empirical mean = "
                  f"{float(g.points[idx[alive]].mean()):.17g}")
    else:
        idx = full_endpoints(p, m0, args.t, cfg)
        print(f"replicas = {cfg.replicas}")
        print(f"empirical mean = {float(g.points[idx].mean()):.17g}")
    return 0


def _cmd_ode(args):
    values = _settings(args)
    beta = _config.as_float(values, "beta", 1.2)
    ts = np.linspace(args.t / 10.0, args.t, 10)
    if args.modified:
        p = _params(values)
        sol = integrate_modified(p, args.m0, ts, step=args.step)
    else:
        sol = integrate_limit(beta, args.m0, ts, step=args.step)
    for t, v in zip(sol.times, sol.values):
        print(f"t = {t:10.4f}   value = {v:.12f}")
    return 0


def _cmd_experiment(args):
    values = _settings(args)
    seed = _config.as_int(values, "seed", 1234)
    out_dir = str(values.get("out", "."))
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise CwlabError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    names = EXPERIMENT_NAMES if args.name == "all" else (args.name,)
    if args.calibrate:
        expected = calibrate_expected(names=names, seed=seed)
        path = Path(out_dir) / "expected.txt"
        path.parent.mkdir(parents=True, exist_ok=True)
        header = ("# Acceptance thresholds regenerated by --calibrate; "
                  "review before committing.\n")
        path.write_text(header + _config.dump_config(expected),
                        encoding="utf-8")
        print(f"wrote {path}")
        return 0
    expected = load_expected(args.expected) if args.expected else None
    all_pass = True
    for name in names:
        spec = ExperimentSpec(name=name, params=overrides, seed=seed,
                              out_dir=str(Path(out_dir) / name))
        result = run_experiment(spec, expected=expected)
        for line in result.summary:
            print(f"[{name}] {line}")
        all_pass = all_pass and result.passed
    return 0 if all_pass else 1


def _cmd_plot(args):
    emit_plot(args.csv, args.svg, logy=args.logy, logx=args.logx)
    print(f"wrote {args.svg}")
    return 0


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="xlab",
        description="experiment harness for the conditioned magnetization "
                    "laboratory")
    ap.add_argument("--dump-config", action="store_true",
                    help="print the built-in defaults and exit")
    sub = ap.add_subparsers(dest="command")

    sp = sub.add_parser("spectrum", help="decay rate, eigenfunction, "
                                         "quasi-stationary law")
    _add_common(sp)
    sp.set_defaults(func=_cmd_spectrum)

    sp = sub.add_parser("evolve", help="conditioned law at a fixed time")
    _add_common(sp)
    sp.add_argument("--m0", type=float, required=True)
    sp.add_argument("--t", type=float, required=True)
    sp.set_defaults(func=_cmd_evolve)

    sp = sub.add_parser("simulate", help="Monte Carlo endpoint summary")
    _add_common(sp)
    sp.add_argument("--m0", type=float, required=True)
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--replicas", type=int, default=1000)
    sp.add_argument("--kind", choices=("full", "killed"), default="full")
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("ode", help="deterministic limit flow")
    _add_common(sp)
    sp.add_argument("--m0", type=float, required=True)
    sp.add_argument("--t", type=float, default=10.0)
    sp.add_argument("--step", type=float, default=1e-3)
    sp.add_argument("--modified", action="store_true",
                    help="use the flattened potential on [0, 1]")
    sp.set_defaults(func=_cmd_ode)

    sp = sub.add_parser("experiment", help="run a named experiment")
    _add_common(sp)
    sp.add_argument("name", choices=EXPERIMENT_NAMES + ("all",))
    sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                    help="experiment parameter override (repeatable)")
    sp.add_argument("--calibrate", action="store_true",
                    help="regenerate measured thresholds into expected.txt")
    sp.add_argument("--expected", type=str, default=None,
                    help="alternative expected.txt")
    sp.set_defaults(func=_cmd_experiment)

    sp = sub.add_parser("plot", help="render a result CSV as SVG")
    sp.add_argument("csv")
    sp.add_argument("svg")
    sp.add_argument("--logy", action="store_true")
    sp.add_argument("--logx", action="store_true")
    sp.set_defaults(func=_cmd_plot)
    return ap


def main(argv=None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    if args.dump_config:
        sys.stdout.write(_config.dump_config(DEFAULTS))
        return 0
    if not getattr(args, "command", None):
        ap.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ConvergenceError, StarvationError, StepSizeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (CwlabError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
