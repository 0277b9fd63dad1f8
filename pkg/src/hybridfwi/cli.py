"""Command-line interface: ``hybridfwi <subcommand> ...``.

Exit codes: 0 success, 1 invalid input, 2 numerical divergence.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import kernels
from .config import ConfigError, load_config

log = logging.getLogger("hybridfwi")


class Divergence(RuntimeError):
    pass


def _outdir(path):
    os.makedirs(path, exist_ok=True)
    return path


def cmd_forward(args):
    from .data import build_phantom
    from .forward import run_forward
    from .grid import ScalarField
    from .io import read_field, write_field, write_record
    case = load_config(args.config)
    out = _outdir(args.out or case.output_dir)
    gamma = read_field(args.gamma) if args.gamma else case.truth()
    if gamma.grid.dims != case.grid.dims:
        raise ConfigError("--gamma", "field grid does not match [grid] dims")
    gamma = ScalarField(case.grid, gamma.values)
    src = case.sources[args.source]
    hist, rec = run_forward(gamma, case.material, case.time, src, case.sensors,
                            store_history=args.stride > 0)
    if not np.all(np.isfinite(rec.values)):
        raise Divergence("forward simulation produced non-finite values")
    write_record(os.path.join(out, f"record_{args.source}.csv"), rec)
    if hist is not None:
        for n in range(0, case.time.n_steps + 1, args.stride):
            write_field(os.path.join(out, f"u_{args.source}_{n:06d}.fwif"),
                        ScalarField(case.grid, hist.snapshots[n]))
    print(f"wrote shot record for source {args.source} to {out}")


def cmd_make_data(args):
    from .io import write_field, write_record
    case = load_config(args.config)
    out = _outdir(args.out or case.output_dir)
    refine = args.refine if args.refine is not None else case.refine
    if refine < 1:
        raise ConfigError("--refine", "must be >= 1")
    prob = case.problem(refine)
    for k, rec in enumerate(prob.data):
        if not np.all(np.isfinite(rec.values)):
            raise Divergence("reference simulation produced non-finite values")
        write_record(os.path.join(out, f"data_{k}.csv"), rec)
    write_field(os.path.join(out, "truth.fwif"), prob.truth)
    print(f"wrote {len(prob.data)} reference records (refine={refine}) to {out}")


def _load_problem(case, data_dir):
    from .data import Problem
    from .io import read_record
    if data_dir is None:
        return case.problem()
    recs = []
    for k in range(len(case.sources)):
        rec = read_record(os.path.join(data_dir, f"data_{k}.csv"))
        if rec.sensors != case.sensors:
            raise ConfigError("[sensors]", f"data_{k}.csv sensors differ from the configuration")
        if rec.time.n_steps != case.time.n_steps or abs(rec.time.dt - case.time.dt) > 1e-12 * case.time.dt:
            raise ConfigError("[time]", f"data_{k}.csv time axis differs from the configuration")
        recs.append(type(rec)(case.sensors, case.time, rec.values))
    return Problem(case.grid, case.material, case.time, case.sources, case.sensors,
                   tuple(recs), case.truth())


def cmd_invert(args):
    from .inversion import (current_field, full_domain_pinn_invert, invert, pinn_field,
                            wavefield_problem)
    from .io import save_ansatz, write_field
    case = load_config(args.config)
    cfg = case.train
    if args.strategy:
        from .inversion import TrainConfig
        cfg = TrainConfig(**{**cfg.__dict__, "strategy": args.strategy, "alpha_min": None})
    if args.epochs:
        cfg.epochs = args.epochs
    out = _outdir(args.out or case.output_dir)
    if cfg.strategy == "full-domain-pinn":
        wp = wavefield_problem(case.grid, case.material, case.time, case.sources, case.truth())
        ansatz, hist, _, _ = full_domain_pinn_invert(wp, cfg)
        final = pinn_field(ansatz) if not hist.diverged else None
    else:
        prob = _load_problem(case, args.data)
        ansatz, hist = invert(cfg.strategy, prob, cfg)
        final = current_field(ansatz) if not hist.diverged else None
    hist.write(os.path.join(out, "history.csv"), os.path.join(out, "timing.csv"))
    if hist.diverged or final is None:
        raise Divergence(f"training diverged after {len(hist)} epochs")
    write_field(os.path.join(out, "gamma.fwif"), final)
    save_ansatz(os.path.join(out, "checkpoint.fwic"), ansatz)
    print(f"{cfg.strategy}: {len(hist)} epochs, final normalized cost "
          f"{hist.column('cost_norm')[-1]:.6g}, normalized mse {hist.column('mse_norm')[-1]:.6g}")


def cmd_gradcheck(args):
    from .gradcheck import gradient_report, write_report
    rep = gradient_report(nx=args.nx, ny=args.ny, n_steps=args.steps, seed=args.seed)
    path = args.out or "gradcheck.csv"
    write_report(path, rep)
    for k, v in rep["summary"].items():
        print(f"{k} = {v:.3e}")


def cmd_metrics(args):
    from .grid import field_mse
    from .inversion import sharpness_metric
    from .io import read_field
    a, b = read_field(args.field), read_field(args.reference)
    if a.grid != b.grid:
        raise ConfigError("reference", "fields live on different grids")
    mse = field_mse(a, b)
    _, mean_a, empty_a = sharpness_metric(a, args.threshold)
    _, mean_b, empty_b = sharpness_metric(b, args.threshold)
    print(f"mse = {mse!r}")
    print(f"sharpness_field = {mean_a!r}{' (empty)' if empty_a else ''}")
    print(f"sharpness_reference = {mean_b!r}{' (empty)' if empty_b else ''}")


def cmd_export(args):
    from .io import export_text, export_vtk, read_field
    fld = read_field(args.field)
    stem = args.out or os.path.splitext(args.field)[0]
    export_text(stem + ".txt", fld)
    export_vtk(stem + ".vtk", fld)
    print(f"wrote {stem}.txt and {stem}.vtk")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hybridfwi", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--backend", choices=("compiled", "python"))
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("forward", help="simulate one shot")
    s.add_argument("config")
    s.add_argument("--gamma", help="indicator FieldFile (default: configured phantom)")
    s.add_argument("--source", type=int, default=0)
    s.add_argument("--stride", type=int, default=0, help="snapshot stride (0: no snapshots)")
    s.add_argument("--out")
    s.set_defaults(fn=cmd_forward)

    s = sub.add_parser("make-data", help="reference shot records on a refined grid")
    s.add_argument("config")
    s.add_argument("--refine", type=int)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_make_data)

    s = sub.add_parser("invert", help="run an inversion strategy")
    s.add_argument("config")
    s.add_argument("--data", help="directory with data_<k>.csv (default: generate)")
    s.add_argument("--strategy")
    s.add_argument("--epochs", type=int)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_invert)

    s = sub.add_parser("gradcheck", help="compare the gradient engines on a small case")
    s.add_argument("--nx", type=int, default=8)
    s.add_argument("--ny", type=int, default=6)
    s.add_argument("--steps", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_gradcheck)

    s = sub.add_parser("metrics", help="MSE and sharpness between two fields")
    s.add_argument("field")
    s.add_argument("reference")
    s.add_argument("--threshold", type=float, default=1.0)
    s.set_defaults(fn=cmd_metrics)

    s = sub.add_parser("export", help="text matrix and VTK export of a field")
    s.add_argument("field")
    s.add_argument("--out", help="output stem")
    s.set_defaults(fn=cmd_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.backend:
            kernels.use_backend(args.backend)
        args.fn(args)
    except Divergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FloatingPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
