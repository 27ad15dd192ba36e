"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 fit did not converge.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import scaling, statmech
from .circuit import CircuitConfig, ConfigError
from .experiment import (
    WORKERS_ENV,
    ExperimentSpec,
    load_samples,
    row_key,
    run_experiment,
    write_outputs,
)

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_FIT = 0, 2, 3, 4


class FitError(RuntimeError):
    pass


def _number(text: str) -> float:
    return float(Fraction(text))


def _progress(k, n, cfg, secs):
    print(f"[{k}/{n}] L={cfg.L} T={cfg.T} p_m={cfg.p_m:g} p={cfg.p:g} alpha={cfg.alpha:g}  {secs:.1f}s",
          file=sys.stderr, flush=True)


def _execute(spec: ExperimentSpec, out_dir, workers, quiet) -> int:
    print(f"{spec.name}: {spec.size} grid points x {spec.trajectories} trajectories "
          f"(spec {spec.spec_hash})", file=sys.stderr)
    result = run_experiment(spec, workers, None if quiet else _progress)
    paths = write_outputs(result, out_dir)
    print(json.dumps({k: str(v) for k, v in paths.items()}))
    return EXIT_OK


def cmd_run(args) -> int:
    spec = ExperimentSpec.from_json(args.spec)
    spec.seed = args.seed
    if args.trajectories:
        spec.trajectories = args.trajectories
    return _execute(spec, args.out, args.workers, args.quiet)


def cmd_sweep(args) -> int:
    base = {"boundary": args.boundary,
            "noise_placement": args.noise_placement, "encoding": args.encoding, "T_scr": args.T_scr}
    if base["T_scr"] not in ("T", "L"):
        base["T_scr"] = int(base["T_scr"])
    sweep = {"L": args.L, "p": args.p}
    for key, vals in (("p_m", args.p_m), ("alpha", args.alpha), ("T_over_L", args.T_over_L)):
        if len(vals) > 1:
            sweep[key] = vals
        else:
            base[key] = vals[0]
    spec = ExperimentSpec(name=args.name, seed=args.seed, trajectories=args.trajectories,
                          observables=args.observables, base=base, sweep=sweep, mode=args.mode,
                          sample_every=args.sample_every)
    return _execute(spec, args.out, args.workers, args.quiet)


def _filters(items):
    out = {}
    for item in items or []:
        key, _, val = item.partition("=")
        if not val:
            raise ConfigError(f"filter {item!r} must look like key=value")
        out[key] = float(Fraction(val))
    return out


def _attach_samples(table, csv_path, observable, filters):
    """Per-trajectory arrays for the table rows, read from the sibling .samples.npz."""
    path = Path(csv_path).with_suffix(".samples.npz")
    if not path.exists():
        raise ConfigError(f"bootstrap needs {path}")
    raw = load_samples(path)
    keys = []
    for r in _read_rows(csv_path, observable):
        if all(np.isclose(float(r[k]), v) for k, v in filters.items()):
            d = {"observable": observable, **{k: int(r[k]) for k in ("L", "T", "T_scr")},
                 **{k: float(r[k]) for k in ("p_m", "p", "alpha")}}
            keys.append(row_key(d))
    table.samples = [raw[k] for k in keys]
    return table


def _read_rows(csv_path, observable):
    with open(csv_path, newline="", encoding="utf-8") as fh:
        return [r for r in csv.DictReader(fh) if r["observable"] == observable]


def cmd_collapse(args) -> int:
    filters = _filters(args.filter)
    table = scaling.SweepTable.from_csv(args.csv, args.observable, args.x, **filters)
    fit = scaling.collapse_fit(table, args.rescale_power, args.fix_nu)
    if args.bootstrap:
        _attach_samples(table, args.csv, args.observable, filters)

        def refit(t):
            f = scaling.collapse_fit(t, args.rescale_power, args.fix_nu, pc_points=40,
                                     nu_grid=np.linspace(1, 4, 16))
            return {"p_c": f.p_c, "nu": f.nu}

        sd = scaling.bootstrap(table, refit, args.bootstrap, args.seed)
        fit.bootstrap_sd = (sd["p_c"], sd["nu"])
    report = fit.to_dict()
    text = json.dumps(report, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    if not fit.converged or not np.isfinite(fit.quality):
        raise FitError("collapse optimizer did not converge")
    return EXIT_OK


def cmd_powerfit(args) -> int:
    filters = _filters(args.filter)
    table = scaling.SweepTable.from_csv(args.csv, args.observable, args.x, **filters)
    fit = scaling.power_fit_table(table)
    print(json.dumps(asdict(fit), indent=2))
    return EXIT_OK


def cmd_timescale(args) -> int:
    rows = _read_rows(args.csv, args.observable)
    if not rows or "t" not in rows[0]:
        raise ConfigError("timescale needs a dynamics CSV with a 't' column")
    groups = {}
    for r in rows:
        groups.setdefault((int(r["L"]), float(r["p"])), []).append((int(r["t"]), float(r["mean"])))
    curves = [scaling.DynamicsCurve(L, p, np.array([t for t, _ in v], float), np.array([m for _, m in v]))
              for (L, p), v in sorted(groups.items())]
    res = scaling.timescale_collapse(curves)
    print(json.dumps({"residuals": {f"{k:.6g}": v for k, v in res.residuals.items()}, "best": res.best}, indent=2))
    return EXIT_OK


def _prediction_dict(pred) -> dict:
    d = asdict(pred)
    return {k: (None if isinstance(v, float) and not np.isfinite(v) else v) for k, v in d.items()}


def cmd_oracle(args) -> int:
    kwargs = dict(L=args.L, T=args.T, p=args.p, p_m=args.p_m, alpha=args.alpha,
                  noise_placement=args.noise_placement)
    if args.noise_placement == "left_boundary":
        kwargs["boundary"] = "open"
    cfg = CircuitConfig(**kwargs)
    if args.noise_placement == "left_boundary":
        pred = statmech.boundary_scenario_compare(cfg, args.t0)
    elif args.pattern:
        try:
            pattern = statmech.NoisePattern.from_csv(args.pattern, cfg.L, cfg.T)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        pred = statmech.free_energy_compare(cfg, pattern, args.s0, args.kpz)
    else:
        pred = statmech.expected_compare(cfg, args.s0, args.kpz)
    report = _prediction_dict(pred)
    if args.p_grid:
        grid = [statmech.expected_compare(CircuitConfig(**{**kwargs, "p": p}), args.s0, args.kpz).dominant
                for p in args.p_grid]
        report["grid"] = dict(zip(map(str, args.p_grid), grid))
    print(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_xeb(args) -> int:
    spec = ExperimentSpec(name=args.name, seed=args.seed, trajectories=args.trajectories,
                          observables=["xeb", "fidelity", "F_over_XEB"],
                          base={"p_m": 0.0, "alpha": args.alpha, "T_over_L": args.T_over_L},
                          sweep={"L": args.L, "p": args.p}, mode="paired")
    return _execute(spec, args.out, args.workers, args.quiet)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hybridnoise", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common_run(p):
        p.add_argument("--out", default="results", help="output directory")
        p.add_argument("--workers", type=int, default=None, help=f"worker processes (env {WORKERS_ENV} wins)")
        p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("run", help="execute a JSON experiment spec")
    p.add_argument("spec")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--trajectories", type=int, default=None, help="override the spec's ensemble size")
    common_run(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="build a spec from flags and run it")
    p.add_argument("--name", default="sweep")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--L", type=int, nargs="+", required=True)
    p.add_argument("--p", type=_number, nargs="+", default=[0.0])
    p.add_argument("--p-m", dest="p_m", type=_number, nargs="+", default=[0.0])
    p.add_argument("--alpha", type=_number, nargs="+", default=[1.0])
    p.add_argument("--T-over-L", dest="T_over_L", type=_number, nargs="+", default=[4.0])
    p.add_argument("--T-scr", dest="T_scr", default="0", help="integer, 'T' or 'L'")
    p.add_argument("--boundary", default="periodic")
    p.add_argument("--noise-placement", default="bulk")
    p.add_argument("--encoding", default="none")
    p.add_argument("--observables", nargs="+", default=["I_AB"])
    p.add_argument("--mode", default="final")
    p.add_argument("--sample-every", type=int, default=1)
    p.add_argument("--trajectories", type=int, default=100)
    common_run(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("collapse", help="finite-size collapse of a sweep CSV")
    p.add_argument("csv")
    p.add_argument("--observable", required=True)
    p.add_argument("--x", default="p", help="sweep column (p or p_m)")
    p.add_argument("--rescale-power", type=_number, default=0.0)
    p.add_argument("--fix-nu", type=_number, default=None)
    p.add_argument("--filter", nargs="*", help="column=value selections")
    p.add_argument("--bootstrap", type=int, default=0, help="resamples (needs the .samples.npz file)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_collapse)

    p = sub.add_parser("powerfit", help="log-log fit of an observable against L/p")
    p.add_argument("csv")
    p.add_argument("--observable", required=True)
    p.add_argument("--x", default="p")
    p.add_argument("--filter", nargs="*")
    p.set_defaults(func=cmd_powerfit)

    p = sub.add_parser("timescale", help="compare time rescalings of dynamics curves")
    p.add_argument("csv")
    p.add_argument("--observable", default="I_ABR")
    p.set_defaults(func=cmd_timescale)

    p = sub.add_parser("oracle", help="large-d free-energy prediction")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--p", type=_number, default=0.0)
    p.add_argument("--p-m", dest="p_m", type=_number, default=0.0)
    p.add_argument("--alpha", type=_number, default=1.0)
    p.add_argument("--s0", type=_number, default=1.0)
    p.add_argument("--kpz", type=_number, default=0.0)
    p.add_argument("--pattern", default=None, help="noise CSV with header x,t")
    p.add_argument("--noise-placement", default="bulk")
    p.add_argument("--t0", type=int, default=None)
    p.add_argument("--p-grid", type=_number, nargs="*", default=None)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("xeb", help="paired noiseless/noisy runs: XEB, fidelity and their ratio")
    p.add_argument("--name", default="xeb")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--L", type=int, nargs="+", required=True)
    p.add_argument("--p", type=_number, nargs="+", required=True)
    p.add_argument("--alpha", type=_number, default=1.0)
    p.add_argument("--T-over-L", dest="T_over_L", type=_number, default=1.0)
    p.add_argument("--trajectories", type=int, default=200)
    common_run(p)
    p.set_defaults(func=cmd_xeb)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FitError as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
