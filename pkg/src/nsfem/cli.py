"""Command-line benchmark runner.

Usage:
    nsfem run --problem planar_lattice --scheme coupled_cn --form emac \
        --nx 24 --dt 2e-3 --t-end 0.1 --out results/

A flat key=value config file can seed any option; command-line flags
override it.  Each run writes diagnostics.csv (fixed 10-column schema), a
config_echo.txt with every resolved setting, and optional legacy-VTK
snapshots.  Exit status 0 on success, 1 on a failed time step (partial
CSV is flushed), 2 on usage errors.
"""

import argparse
import sys
from pathlib import Path

from .csvio import write_diagnostics_csv
from .linsolve import NewtonConfig
from .problems import get_problem, PROBLEM_NAMES
from .runner import ProbeSchedule, run_simulation, SimulationAborted
from .schemes import SchemeConfig, SCHEMES, FORMS
from .vtkio import write_vtk_snapshot


class UsageError(Exception):
    pass


def _parse_config_file(path):
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, val = line.split("=", 1)
        values[key.strip().replace("-", "_")] = val.strip()
    return values


_DEFAULTS = dict(
    problem=None, scheme=None, form=None, nx=None, ny=None, dt=None,
    t_end=None, nu=None, grad_div=None, out="nsfem_out", vtk_stride=0,
    probe_stride=1, preset="desk", pattern="right", deterministic=False,
    newton_tol=1e-10, skip_errors=False,
)

_CASTS = dict(
    nx=int, ny=int, dt=float, t_end=float, nu=float, grad_div=float,
    vtk_stride=int, probe_stride=int, newton_tol=float,
    deterministic=lambda s: str(s).lower() in ("1", "true", "yes", "on"),
    skip_errors=lambda s: str(s).lower() in ("1", "true", "yes", "on"),
)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="nsfem", description="Incompressible flow benchmark runner")
    sub = parser.add_subparsers(dest="command")
    run = sub.add_parser("run", help="run one simulation")
    run.add_argument("--config", help="flat key=value config file")
    run.add_argument("--problem", choices=PROBLEM_NAMES)
    run.add_argument("--scheme", choices=SCHEMES)
    run.add_argument("--form", choices=FORMS)
    run.add_argument("--nx", type=int)
    run.add_argument("--ny", type=int)
    run.add_argument("--dt", type=float)
    run.add_argument("--t-end", dest="t_end", type=float)
    run.add_argument("--nu", type=float)
    run.add_argument("--grad-div", dest="grad_div", type=float)
    run.add_argument("--out")
    run.add_argument("--vtk-stride", dest="vtk_stride", type=int)
    run.add_argument("--probe-stride", dest="probe_stride", type=int)
    run.add_argument("--preset", choices=("desk", "paper"))
    run.add_argument("--pattern", choices=("right", "left", "crisscross"))
    run.add_argument("--newton-tol", dest="newton_tol", type=float)
    run.add_argument("--deterministic", action="store_const", const=True)
    run.add_argument("--skip-errors", dest="skip_errors",
                     action="store_const", const=True,
                     help="skip exact-solution error columns")
    return parser


def _resolve_options(args):
    options = dict(_DEFAULTS)
    if args.config:
        for key, val in _parse_config_file(args.config).items():
            if key not in options:
                raise UsageError(f"unknown config key {key!r}")
            cast = _CASTS.get(key, str)
            try:
                options[key] = cast(val)
            except ValueError as exc:
                raise UsageError(f"bad value for {key!r}: {val!r} ({exc})")
    for key in options:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            options[key] = flag_val

    for key, choices in (("problem", PROBLEM_NAMES), ("scheme", SCHEMES),
                         ("form", FORMS)):
        if options[key] is None:
            raise UsageError(
                f"--{key} is required (choose from {', '.join(choices)})")
        if options[key] not in choices:
            raise UsageError(
                f"unknown {key} {options[key]!r} "
                f"(choose from {', '.join(choices)})")
    return options


def _echo_config(path, options, result):
    lines = {}
    for key, val in options.items():
        lines[key] = val
    for key, val in result.metadata.items():
        lines[f"meta_{key}"] = val
    lines["n_steps"] = result.cfg.n_steps
    lines["resolved_nu"] = result.cfg.nu
    lines["resolved_dt"] = result.cfg.dt
    lines["resolved_t_end"] = result.cfg.t_end
    lines["resolved_grad_div_gamma"] = result.cfg.grad_div_gamma
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(lines):
            fh.write(f"{key}={lines[key]}\n")


def run_command(options):
    problem = get_problem(options["problem"], nu=options["nu"])
    preset = problem.preset(options["preset"])
    cfg = SchemeConfig(
        scheme=options["scheme"],
        form=options["form"],
        nu=problem.nu,
        dt=options["dt"] if options["dt"] is not None else preset["dt"],
        t_end=options["t_end"] if options["t_end"] is not None
        else preset["t_end"],
        grad_div_gamma=options["grad_div"] if options["grad_div"] is not None
        else problem.grad_div_gamma,
        newton=NewtonConfig(abs_tol=options["newton_tol"],
                            rel_tol=options["newton_tol"]),
        deterministic=bool(options["deterministic"]),
    )
    probes = ProbeSchedule(stride=options["probe_stride"],
                           vtk_stride=options["vtk_stride"],
                           compute_errors=not options["skip_errors"])
    out_dir = Path(options["out"])
    out_dir.mkdir(parents=True, exist_ok=True)

    def flush(result):
        write_diagnostics_csv(out_dir / "diagnostics.csv", result.records)
        _echo_config(out_dir / "config_echo.txt", options, result)
        for step, u, p in result.snapshots:
            write_vtk_snapshot(out_dir / f"snapshot_{step:06d}.vtk",
                               result.mesh, velocity=u, pressure=p)

    try:
        result = run_simulation(problem, cfg, probes=probes,
                                nx=options["nx"], ny=options["ny"],
                                preset=options["preset"],
                                pattern=options["pattern"])
    except SimulationAborted as exc:
        flush(exc.result)
        print(f"nsfem: {exc}", file=sys.stderr)
        return 1
    flush(result)
    return 0


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command != "run":
        parser.print_help()
        return 2
    try:
        options = _resolve_options(args)
        return run_command(options)
    except UsageError as exc:
        print(f"nsfem: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
