"""Command line interface.

Subcommands: simulate, diagnose, worldline, rademacher, decay, sweep,
report.  Exit codes: 0 success, 2 config error, 3 numerical fault,
4 resource cap.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError, NumericalFault, ResourceCapError
from .fields import ModelParams, Profile
from .harness import (ExperimentConfig, config_hash, decay_curve,
                      load_config, rademacher_stage, run_experiment,
                      simulate, write_decay_csv,
                      _conservation_stage, _parallelogram_stage, _ray_stage,
                      _scaling_stage, _worldline_stage)
from .integrator import write_snapshot
from .kernels import BACKEND


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlwave",
        description="Desk-scale laboratory for the 1D defocusing "
                    "nonlinear wave equation")
    parser.add_argument("--config", type=Path, help="key=value config file")
    parser.add_argument("--out", type=Path, default=Path("nlwave-out"),
                        help="output directory")
    parser.add_argument("--seed", type=int, help="override the run seed")
    parser.add_argument("--dx", type=float, help="override grid spacing")
    parser.add_argument("--cfl", type=float, help="override the CFL number")
    parser.add_argument("--p", type=float, help="override the exponent p")
    parser.add_argument("--linear", action="store_true",
                        help="disable the nonlinearity (linear contrast runs)")
    parser.add_argument("--tfinal", type=float, help="override t_final")
    parser.add_argument("command",
                        choices=["simulate", "diagnose", "worldline",
                                 "rademacher", "decay", "sweep", "report"])
    return parser


def _effective_config(args) -> ExperimentConfig:
    if args.config is not None:
        cfg = load_config(args.config)
    else:
        cfg = ExperimentConfig(profile=Profile("gaussian"),
                               model=ModelParams(3.0))
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.dx is not None:
        cfg = replace(cfg, dx=args.dx)
    if args.cfl is not None:
        cfg = replace(cfg, cfl=args.cfl)
    if args.tfinal is not None:
        cfg = replace(cfg, t_final=args.tfinal)
    if args.p is not None or args.linear:
        model = ModelParams(p=args.p if args.p is not None else cfg.model.p,
                            defocusing_on=not args.linear)
        cfg = replace(cfg, model=model)
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _effective_config(args)
        out = args.out
        out.mkdir(parents=True, exist_ok=True)

        if args.command == "report":
            manifest = run_experiment(cfg, out)
            print(f"report bundle in {out} (backend={BACKEND}, "
                  f"config={config_hash(cfg)[:12]})")
            for name, info in sorted(manifest["stages"].items()):
                print(f"  {name}: {info['status']}")
            return 0

        if args.command == "rademacher":
            result = rademacher_stage(cfg, out)
            print(f"rademacher.json written; corpus measures: "
                  f"{[round(m, 4) for m in result['measures']]}")
            return 0

        traj = simulate(cfg)
        if args.command == "simulate":
            write_snapshot(traj, out / "trajectory.nlwt")
            drift = abs(traj.energies[-1] - traj.energies[0]) \
                / max(abs(traj.energies[0]), 1e-300)
            print(f"{traj.n_frames} frames over t in "
                  f"[{traj.times[0]:.3f}, {traj.times[-1]:.3f}], "
                  f"energy drift {drift:.3e}, snapshot in {out}")
        elif args.command == "diagnose":
            _conservation_stage(traj, out)
            _ray_stage(cfg, traj, out)
            print(f"conservation.csv and ray_flux.csv written to {out}")
        elif args.command == "worldline":
            _worldline_stage(cfg, traj, out)
            print(f"worldline.csv and extraction.json written to {out}")
        elif args.command == "decay":
            curve = decay_curve(traj, cfg.decay_t_list)
            write_decay_csv(out / "decay.csv",
                            [(float(T), 0.0, float(A))
                             for T, A in zip(curve.T, curve.A)])
            print(f"decay.csv written to {out}")
        elif args.command == "sweep":
            rows = _parallelogram_stage(cfg, traj, out)
            report = _scaling_stage(rows, out)
            print(f"parallelogram.csv and scaling.json written to {out}; "
                  f"max ratio {report['max_ratio']:.3f}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalFault as exc:
        print(f"numerical fault: {exc}", file=sys.stderr)
        return 3
    except ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
