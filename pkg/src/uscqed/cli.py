"""Command-line entry point.

Exit codes: 0 success, 1 physics or numerical failure, 2 invalid config or
arguments.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

from .checks import run_checks
from .config import Config, ConfigError, Numerics, load_config, serialize_config
from .eigen import DiagonalizationError, convergence_check, ground_vev
from .lindblad import IntegrationError
from .model import DriveSpec, QubitSpec, ResonatorSpec, SpecError, SystemSpec, modulated_emitter_spec, probe_readout_spec
from .sweep import Axis, PlanError, SweepFailure, SweepPlan, SweepResult, run_plan, set_parameter

EXIT_OK, EXIT_PHYSICS, EXIT_CONFIG = 0, 1, 2

EMISSION_RANGE = (0.8, 2.1, 131)
ABSORPTION_RANGE = (0.15, 1.4, 126)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, help="write results here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--cutoff", type=int, help="Fock cutoff override")
    p.add_argument("--parallel", type=int, default=1, metavar="K", help="worker processes")
    p.add_argument("--seed", type=int, default=0, help="reserved; only seeds the random specs of `check`")


def _spectrum_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", nargs="?", type=Path, help="config file; built-in example system when omitted")
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--count", type=int)
    p.add_argument("--theta", type=float, help="set the flux angle of every USC qubit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uscqed", description="Ultrastrong-coupling circuit QED simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vev", help="ground-state field expectation <X>")
    p.add_argument("config", nargs="?", type=Path)
    p.add_argument("--g", type=float, help="coupling of every USC qubit")
    p.add_argument("--theta", type=float, help="flux angle of every USC qubit")
    p.add_argument("--detuning", type=float, help="qubit minus resonator frequency")
    p.add_argument("--qubits", type=int, help="number of identical qubits (without a config)")
    _common(p)

    p = sub.add_parser("emit", help="emission spectrum versus coupling-modulation frequency")
    _spectrum_args(p)
    _common(p)

    p = sub.add_parser("absorb", help="probe absorption spectrum versus drive frequency")
    _spectrum_args(p)
    p.add_argument("--amplitude", type=float, help="drive amplitude")
    _common(p)

    p = sub.add_parser("sweep", help="run the plan section of a config file")
    p.add_argument("plan", type=Path)
    _common(p)

    p = sub.add_parser("check", help="cross-check numerics against closed-form limits")
    _common(p)
    return parser


def _write(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        out.write_text(text if text.endswith("\n") else text + "\n")


def _emit_result(result: SweepResult, args) -> None:
    _write(result.to_json() if args.format == "json" else result.to_csv(), args.out)
    unconverged = result.meta["unconverged"]
    if unconverged:
        print(f"warning: {unconverged} of {len(result.rows)} points did not converge "
              "(window average moved by more than 1 %)", file=sys.stderr)
    for f in result.meta["failures"]:
        print(f"warning: point {f['point']} failed: {f['error']}", file=sys.stderr)


def _numerics(cfg: Config, args) -> Numerics:
    return replace(cfg.numerics, cutoff=args.cutoff) if args.cutoff is not None else cfg.numerics


def _cmd_vev(args) -> int:
    if args.config is not None:
        spec = load_config(args.config).spec
        if args.qubits is not None:
            raise ConfigError("--qubits only applies without a config file", "--qubits")
    else:
        n = 1 if args.qubits is None else args.qubits
        if n < 1:
            raise ConfigError("must be >= 1", "--qubits")
        spec = SystemSpec(ResonatorSpec(1.0, 30), (QubitSpec.from_detuning(0.7, 0.0, 0.0),) * n)
    for name in ("g", "theta", "detuning"):
        value = getattr(args, name)
        if value is not None:
            spec = set_parameter(spec, name, value)
    if args.cutoff is not None:
        spec = spec.with_cutoff(args.cutoff)
    v = ground_vev(spec)
    v = 0.0 if v == 0 else v  # drop the sign of negative zero
    report = convergence_check(spec, "vev", threshold=1e-6)
    if report.flagged:
        print(f"warning: vev changes by {report.abs_change:.2e} between cutoffs {report.cutoffs}",
              file=sys.stderr)
    if args.format == "json":
        meta = {"spec": dict(_items(spec)), "cutoff_change": report.abs_change}
        _write(json.dumps({"vev": v, "meta": meta}, indent=2), args.out)
    else:
        _write(f"{v:.17g}", args.out)
    return EXIT_OK


def _items(spec: SystemSpec):
    from .config import config_items

    return config_items(Config(spec))


def _spectrum_plan(args, kind: str) -> SweepPlan:
    if kind == "emission_spectrum":
        axis_name, (start, stop, count) = "modulation.frequency", EMISSION_RANGE
        cfg = load_config(args.config) if args.config else Config(modulated_emitter_spec(math.pi / 10))
    else:
        axis_name, (start, stop, count) = "drive.frequency", ABSORPTION_RANGE
        cfg = load_config(args.config) if args.config else Config(probe_readout_spec(drive=DriveSpec(0.02, 0.3)))
    spec = cfg.spec
    outputs, peaks, contrast = (), True, 1e-3
    if cfg.plan is not None and cfg.plan.kind == kind and len(cfg.plan.axes) == 1:
        a = cfg.plan.axes[0]
        axis_name, start, stop, count = a.name, a.start, a.stop, a.count
        outputs, peaks, contrast = cfg.plan.outputs, cfg.plan.peaks, cfg.plan.min_contrast
    start = args.start if args.start is not None else start
    stop = args.stop if args.stop is not None else stop
    count = args.count if args.count is not None else count
    if args.theta is not None:
        spec = set_parameter(spec, "theta", args.theta)
    if getattr(args, "amplitude", None) is not None:
        spec = set_parameter(spec, "drive.amplitude", args.amplitude)
    return SweepPlan(kind, (Axis(axis_name, start, stop, count),), spec, outputs,
                     _numerics(cfg, args), peaks, contrast)


def _run(plan: SweepPlan, args) -> int:
    try:
        result = run_plan(plan, max(1, args.parallel))
    except SweepFailure as exc:
        _emit_result(exc.result, args)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    _emit_result(result, args)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = load_config(args.plan)
    if cfg.plan is None:
        raise ConfigError("missing plan section (plan.kind, plan.axis.N.*)", "plan", None, str(args.plan))
    plan = SweepPlan.from_config(replace(cfg, numerics=_numerics(cfg, args)))
    return _run(plan, args)


def _cmd_check(args) -> int:
    results = run_checks(args.seed)
    if args.format == "json":
        _write(json.dumps([r.__dict__ for r in results], indent=2), args.out)
    else:
        _write("\n".join(r.line() for r in results), args.out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_PHYSICS


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad usage and 0 on --help
        return int(exc.code or 0)
    try:
        if args.command == "vev":
            return _cmd_vev(args)
        if args.command == "emit":
            return _run(_spectrum_plan(args, "emission_spectrum"), args)
        if args.command == "absorb":
            return _run(_spectrum_plan(args, "absorption_spectrum"), args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_check(args)
    except (ConfigError, PlanError, SpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, DiagonalizationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
