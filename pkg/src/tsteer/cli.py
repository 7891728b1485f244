"""Command line entry point ``tsteer``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path


from .config import FIELD_PRESETS, load_config, preset_config
from .errors import ConfigError, TargetUnreachable, TsteerError

EXIT_OK = 0
EXIT_UNREACHED = 2
EXIT_CONFIG = 3


def _config(args):
    if args.config:
        return load_config(args.config)
    return preset_config(args.preset)


def _cmd_steer(args) -> int:
    from .experiments import run_vorticity_steering

    cfg = _config(args)
    report = run_vorticity_steering(cfg)
    out = report.write(args.output or cfg.output)
    print(report.summary())
    print(f"written to {out}")
    return EXIT_OK if report.success else EXIT_UNREACHED


def _cmd_velocity(args) -> int:
    from .experiments import run_velocity_steering

    cfg = _config(args)
    report = run_velocity_steering(cfg)
    out = report.write(args.output or cfg.output)
    print(report.summary())
    print(f"written to {out}")
    return EXIT_OK if report.success else EXIT_UNREACHED


def _cmd_convergence(args) -> int:
    from .experiments import run_delta_convergence, write_convergence_csv

    cfg = _config(args)
    targets = args.targets.split(",") if args.targets else None
    rows = run_delta_convergence(cfg, targets)
    path = write_convergence_csv(rows, Path(args.output or cfg.output) / "convergence.csv")
    for r in rows:
        print(f"{r.target} delta={r.delta:.4g} error={r.error:.6e} relative={r.relative:.6e}")
    print(f"written to {path}")
    return EXIT_OK


def _cmd_flow_check(args) -> int:
    from .experiments import return_flow_check

    res = return_flow_check(K=args.K)
    print(f"P1 rest speed: {res.rest_speed:.3e}")
    print(f"P2 max |Y(x,0,1) - x|: {res.return_error:.3e}")
    print(f"P3 corner excess: {res.corner_excess:.3e}")
    print("PASS" if res.passed() else "FAIL")
    return EXIT_OK if res.passed() else 1


def _cmd_saturation(args) -> int:
    from .saturation import GeneratorSet, is_generator, saturation_sequence

    modes = GeneratorSet.parse(args.modes)
    seq = saturation_sequence(modes, args.j)
    print(f"generator: {is_generator(modes)}")
    for j, layer in enumerate(seq):
        box = max((max(abs(a), abs(b)) for a, b in layer), default=0)
        full = all((a, b) in set(layer) for a in range(-j, j + 1) for b in range(-j, j + 1) if (a, b) != (0, 0))
        print(f"E_{j}: {len(layer)} modes, max |l|_inf = {box}, covers |l|_inf <= {j}: {full}")
    return EXIT_OK


def _cmd_emit_fields(args) -> int:
    from .experiments import parse_cut
    from .lift import build_cut_fields
    from .spectral import ScalarField, grid_of
    from .tsf import write_tsf
    from .cutoffs import build_covering, build_partition

    cfg = _config(args)
    out = Path(args.output or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    grid = grid_of(cfg.n)
    for name, func in FIELD_PRESETS.items():
        if name == "zero":
            continue
        write_tsf(out / f"{name}.tsf", ScalarField.from_function(grid, func, average_free=True))
    bundle = build_partition(build_covering(cfg.omega, cfg.K), grid)
    x1, x2 = grid.nodes
    write_tsf(out / "chi.tsf", ScalarField(grid, bundle.chi(x1, x2)))
    write_tsf(out / "chi_tilde.tsf", ScalarField(grid, bundle.chi_tilde(x1, x2)))
    cuts = build_cut_fields(parse_cut(cfg.cut1, cfg.cut_width, cfg.base_dir),
                            parse_cut(cfg.cut2, cfg.cut_width, cfg.base_dir), grid)
    write_tsf(out / "Lambda.tsf", cuts.Lambda)
    write_tsf(out / "Sigma.tsf", cuts.Sigma)
    print(f"fields written to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsteer", description="Steering of 2-D Navier-Stokes flows on the torus.")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", help="configuration file")
        p.add_argument("--preset", default="low-mode", help="preset used when no config is given")
        p.add_argument("--output", help="output directory (overrides the config)")
        return p

    with_config(sub.add_parser("steer", help="vorticity steering with a delta sweep")).set_defaults(func=_cmd_steer)
    with_config(sub.add_parser("velocity", help="velocity steering with lift and mean-force audits")).set_defaults(
        func=_cmd_velocity)
    conv = with_config(sub.add_parser("convergence", help="delta convergence table"))
    conv.add_argument("--targets", help="comma-separated target presets or TSF1 paths")
    conv.set_defaults(func=_cmd_convergence)
    flow = sub.add_parser("flow-check", help="check the return-flow properties")
    flow.add_argument("--K", type=int, default=36)
    flow.set_defaults(func=_cmd_flow_check)
    sat = sub.add_parser("saturation", help="saturation sequence of a mode set")
    sat.add_argument("--modes", required=True, help='modes such as "1,0;0,1"')
    sat.add_argument("--j", type=int, default=6)
    sat.set_defaults(func=_cmd_saturation)
    with_config(sub.add_parser("emit-fields", help="write preset fields, cutoffs and cut fields as TSF1")).set_defaults(
        func=_cmd_emit_fields)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TargetUnreachable as exc:
        print(f"target unreachable: {exc}", file=sys.stderr)
        return EXIT_UNREACHED
    except (TsteerError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
