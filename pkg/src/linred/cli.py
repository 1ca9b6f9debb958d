"""Command-line front door: synthesize, verify, linearize.

Exit codes are a stable contract: 0 success, 1 usage or input errors,
2 lattice exhausted, 3 solver unknown, 4 reduction refuted.

Every flag can also be set through an environment variable (prefix
``LINRED_``, flag name upper-cased with dashes as underscores) or a JSON
config file passed via ``--config``.  Precedence: flags, then environment,
then config file, then built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from dataclasses import dataclass
from fractions import Fraction
from os import environ
from pathlib import Path

from .cegis import (
    CegisConfig,
    ExhaustedLattice,
    SynthesisSuccess,
    SynthesisUnknown,
    cegis_synthesize,
)
from .lang import rat_to_str
from .parser import DslError, parse_model, parse_spec
from .reduction import (
    DimensionMismatch,
    encodes_at,
    reduction_from_json,
    reduction_to_json,
)
from .smt import SolverConfig, SolverFailure, default_solver_command
from .transform import SynthesisFailed, emit_lp, lift_objective, linearize_model
from .verify import (
    BudgetExceeded,
    Refuted,
    Unknown,
    Valid,
    brute_force_verify,
    verify_reduction,
)

__all__ = ["RunConfig", "build_parser", "main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_EXHAUSTED = 2
EXIT_UNKNOWN = 3
EXIT_REFUTED = 4

_ENV_PREFIX = "LINRED_"


@dataclass
class RunConfig:
    solver_cmd: list[str] | None
    timeout: float
    max_l: int
    max_k: int
    schedule: str
    seed: int
    samples: int
    coeff_bound: Fraction | None
    integer_coeffs: bool
    resolution: Fraction
    json_mode: bool
    output: Path | None
    report: Path | None


class CliError(Exception):
    def __init__(self, message: str, exit_code: int = EXIT_USAGE):
        super().__init__(message)
        self.exit_code = exit_code


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors, which collides with the exhausted
    # code; route through an exception so main can return 1
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_cmd(value) -> list[str]:
    if isinstance(value, list):
        return [str(part) for part in value]
    return shlex.split(str(value))


# flag dest -> (parser for env/file strings, default)
_SETTINGS = {
    "solver_cmd": (_parse_cmd, None),
    "timeout": (float, 60.0),
    "max_l": (int, 6),
    "max_k": (int, 2),
    "schedule": (str, "min-size"),
    "seed": (int, 0),
    "samples": (int, 16),
    "coeff_bound": (Fraction, None),
    "integer_coeffs": (_parse_bool, False),
    "resolution": (Fraction, Fraction(1, 4)),
    "json_mode": (_parse_bool, False),
    "output": (Path, None),
    "report": (Path, None),
}

_ENV_NAMES = {
    "solver_cmd": "SOLVER_CMD",
    "timeout": "TIMEOUT",
    "max_l": "MAX_L",
    "max_k": "MAX_K",
    "schedule": "SCHEDULE",
    "seed": "SEED",
    "samples": "SAMPLES",
    "coeff_bound": "COEFF_BOUND",
    "integer_coeffs": "INTEGER_COEFFS",
    "resolution": "RESOLUTION",
    "json_mode": "JSON",
    "output": "OUTPUT",
    "report": "REPORT",
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--solver-cmd", dest="solver_cmd", metavar="CMD",
                        help="SMT solver command line (default: auto-detect)")
    common.add_argument("--timeout", type=float, metavar="SECONDS",
                        help="per-query solver timeout (default 60)")
    common.add_argument("--max-l", dest="max_l", type=int, metavar="N",
                        help="row-count ceiling (default 6)")
    common.add_argument("--max-k", dest="max_k", type=int, metavar="N",
                        help="binary-auxiliary ceiling (default 2)")
    common.add_argument("--schedule", choices=("min-size", "diagonal"),
                        help="cell enumeration order (default min-size)")
    common.add_argument("--seed", type=int, metavar="N",
                        help="seed for all randomness (default 0)")
    common.add_argument("--samples", type=int, metavar="N",
                        help="random initial samples on top of corners")
    common.add_argument("--coeff-bound", dest="coeff_bound", metavar="Q",
                        help="symmetric bound on matrix entries (rational)")
    common.add_argument("--integer-coeffs", dest="integer_coeffs",
                        action="store_const", const=True,
                        help="search integer coefficient matrices only")
    common.add_argument("--resolution", metavar="Q",
                        help="oracle grid resolution (default 1/4)")
    common.add_argument("--json", dest="json_mode", action="store_const",
                        const=True,
                        help="suppress human output; one JSON object on stdout")
    common.add_argument("-o", "--output", metavar="PATH",
                        help="where to write the main artifact")
    common.add_argument("--report", metavar="PATH",
                        help="where to write the run or transform report")
    common.add_argument("--config", metavar="PATH",
                        help="JSON config file with flag defaults")

    parser = _Parser(prog="linred",
                     description="Synthesize and verify MILP linearization "
                                 "reductions for piecewise-linear predicates.")
    sub = parser.add_subparsers(dest="command", required=True)
    synth = sub.add_parser("synth", parents=[common],
                           help="synthesize a reduction for a predicate spec")
    synth.add_argument("spec", help="predicate spec file (.pred)")
    verify = sub.add_parser("verify", parents=[common],
                            help="check a reduction against a predicate spec")
    verify.add_argument("spec", help="predicate spec file (.pred)")
    verify.add_argument("reduction", help="reduction JSON file")
    linearize = sub.add_parser("linearize", parents=[common],
                               help="lower an optimization model to LP format")
    linearize.add_argument("model", help="model file (.opt)")
    return parser


def _load_config_file(args) -> dict:
    path = args.config or environ.get(_ENV_PREFIX + "CONFIG")
    if not path:
        return {}
    try:
        raw = Path(path).read_text(encoding="utf-8")
        values = json.loads(raw)
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}")
    except json.JSONDecodeError as exc:
        raise CliError(f"config file {path}: {exc}")
    if not isinstance(values, dict):
        raise CliError(f"config file {path}: expected a JSON object")
    unknown = set(values) - set(_SETTINGS)
    if unknown:
        raise CliError(f"config file {path}: unknown keys {sorted(unknown)}")
    return values


def resolve_config(args) -> RunConfig:
    """Merge flags > environment > config file > defaults."""
    file_values = _load_config_file(args)
    resolved = {}
    for dest, (convert, default) in _SETTINGS.items():
        value = getattr(args, dest, None)
        source = "flag"
        if value is None:
            env_name = _ENV_PREFIX + _ENV_NAMES[dest]
            if env_name in environ:
                value, source = environ[env_name], env_name
            elif dest in file_values:
                value, source = file_values[dest], "config file"
        if value is None:
            resolved[dest] = default
            continue
        try:
            # flags/env arrive as strings; config files may carry native
            # JSON types, and solver_cmd accepts either a string or a list
            if dest == "solver_cmd":
                value = _parse_cmd(value)
            elif isinstance(value, str):
                value = convert(value)
            elif dest in ("coeff_bound", "resolution"):
                value = Fraction(value)
            elif dest == "timeout":
                value = float(value)
            resolved[dest] = value
        except (ValueError, TypeError, ZeroDivisionError) as exc:
            raise CliError(f"bad value for {dest} (from {source}): {exc}")
    if resolved["schedule"] not in ("min-size", "diagonal"):
        raise CliError(f"bad value for schedule: {resolved['schedule']!r}")
    return RunConfig(**resolved)


def _cegis_config(cfg: RunConfig) -> CegisConfig:
    try:
        return CegisConfig(
            max_rows=cfg.max_l, max_aux=cfg.max_k, samples=cfg.samples,
            seed=cfg.seed, schedule=cfg.schedule,
            query_timeout_s=cfg.timeout, coeff_bound=cfg.coeff_bound,
            integer_coeffs=cfg.integer_coeffs)
    except ValueError as exc:
        raise CliError(str(exc))


def _solver_config(cfg: RunConfig) -> SolverConfig:
    if cfg.solver_cmd:
        return SolverConfig(command=cfg.solver_cmd, timeout_s=cfg.timeout)
    try:
        command, extra_env = default_solver_command()
    except SolverFailure as exc:
        raise CliError(str(exc), EXIT_UNKNOWN)
    return SolverConfig(command=command, timeout_s=cfg.timeout,
                        extra_env=extra_env)


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(str(exc))


def _write_text(path: Path, text: str):
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}")


def _report_path(cfg: RunConfig) -> Path | None:
    if cfg.report is not None:
        return cfg.report
    if cfg.output is not None:
        return cfg.output.with_suffix(".report.json")
    return None


def _emit(cfg: RunConfig, payload: dict, human_lines: list[str]):
    if cfg.json_mode:
        print(json.dumps(payload, indent=2))
    else:
        for line in human_lines:
            print(line)


def cmd_synth(args, cfg: RunConfig) -> int:
    text = _read_text(args.spec)
    try:
        decls, phi = parse_spec(text)
    except DslError as exc:
        raise CliError(f"{args.spec}: {exc}")
    try:
        outcome = cegis_synthesize(phi, decls, _cegis_config(cfg),
                                   _solver_config(cfg))
    except SolverFailure as exc:
        raise CliError(f"solver failure: {exc}", EXIT_UNKNOWN)

    report_path = _report_path(cfg)
    if report_path is not None:
        _write_text(report_path, json.dumps(outcome.report, indent=2) + "\n")

    if isinstance(outcome, SynthesisSuccess):
        red_json = reduction_to_json(outcome.reduction)
        rendered = json.dumps(red_json, indent=2) + "\n"
        lines = [f"Success: cell (l={red_json['l']}, k={red_json['k']}) "
                 f"after {outcome.iterations} iterations"]
        if cfg.output is not None:
            _write_text(cfg.output, rendered)
            lines.append(f"reduction written to {cfg.output}")
        else:
            lines.append(rendered.rstrip("\n"))
        _emit(cfg, {"command": "synth", "verdict": "success",
                    "exit_code": EXIT_OK, "iterations": outcome.iterations,
                    "reduction": red_json, "report": outcome.report}, lines)
        return EXIT_OK
    if isinstance(outcome, ExhaustedLattice):
        _emit(cfg, {"command": "synth", "verdict": "exhausted",
                    "exit_code": EXIT_EXHAUSTED, "report": outcome.report},
              [f"ExhaustedLattice: no reduction within ceilings "
               f"(max_l={outcome.max_rows}, max_k={outcome.max_aux})"])
        return EXIT_EXHAUSTED
    assert isinstance(outcome, SynthesisUnknown)
    _emit(cfg, {"command": "synth", "verdict": "unknown",
                "exit_code": EXIT_UNKNOWN, "phase": outcome.phase,
                "diagnostic": outcome.diagnostic, "report": outcome.report},
          [f"Unknown in {outcome.phase}: {outcome.diagnostic}"])
    return EXIT_UNKNOWN


def cmd_verify(args, cfg: RunConfig) -> int:
    text = _read_text(args.spec)
    try:
        decls, phi = parse_spec(text)
    except DslError as exc:
        raise CliError(f"{args.spec}: {exc}")
    raw = _read_text(args.reduction)
    try:
        reduction = reduction_from_json(json.loads(raw))
    except (json.JSONDecodeError, DimensionMismatch, KeyError,
            TypeError, ValueError) as exc:
        raise CliError(f"{args.reduction}: {exc}")

    try:
        result = verify_reduction(phi, reduction, decls, _solver_config(cfg))
    except DimensionMismatch as exc:
        raise CliError(str(exc))
    if isinstance(result, Unknown):
        # the grid oracle can still refute soundly; a grid pass proves nothing
        try:
            oracle = brute_force_verify(phi, reduction, decls,
                                        resolution=cfg.resolution,
                                        seed=cfg.seed)
        except BudgetExceeded:
            oracle = None
        if isinstance(oracle, Refuted):
            result = oracle

    if isinstance(result, Refuted):
        # never trust a solver witness without the exact evaluator's agreement
        if encodes_at(reduction, decls, phi, result.counterexample):
            result = Unknown("solver witness failed evaluator confirmation")

    if isinstance(result, Valid):
        _emit(cfg, {"command": "verify", "verdict": "valid",
                    "exit_code": EXIT_OK}, ["Valid"])
        return EXIT_OK
    if isinstance(result, Refuted):
        witness = {"point": [rat_to_str(v) for v in result.counterexample],
                   "phi": result.phi_value}
        _emit(cfg, {"command": "verify", "verdict": "refuted",
                    "exit_code": EXIT_REFUTED, "counterexample": witness},
              ["Refuted", json.dumps(witness)])
        return EXIT_REFUTED
    _emit(cfg, {"command": "verify", "verdict": "unknown",
                "exit_code": EXIT_UNKNOWN, "diagnostic": result.diagnostic},
          [f"Unknown: {result.diagnostic}"])
    return EXIT_UNKNOWN


def cmd_linearize(args, cfg: RunConfig) -> int:
    text = _read_text(args.model)
    try:
        model = parse_model(text)
    except DslError as exc:
        raise CliError(f"{args.model}: {exc}")
    lifted = lift_objective(model)
    try:
        linear, report = linearize_model(lifted, _cegis_config(cfg),
                                         _solver_config(cfg))
    except SolverFailure as exc:
        raise CliError(f"solver failure: {exc}", EXIT_UNKNOWN)
    except SynthesisFailed as exc:
        code = (EXIT_EXHAUSTED if isinstance(exc.outcome, ExhaustedLattice)
                else EXIT_UNKNOWN)
        verdict = "exhausted" if code == EXIT_EXHAUSTED else "unknown"
        _emit(cfg, {"command": "linearize", "verdict": verdict,
                    "exit_code": code, "constraint": exc.index,
                    "text": exc.text, "report": exc.outcome.report},
              [f"constraint {exc.index} ({exc.text}) could not be "
               f"linearized: {verdict}"])
        return code

    lp_text = emit_lp(linear)
    lp_path = cfg.output or Path(args.model).with_suffix(".lp")
    _write_text(lp_path, lp_text)
    report["lp_path"] = str(lp_path)
    report_path = _report_path(cfg) or lp_path.with_suffix(".report.json")
    _write_text(report_path, json.dumps(report, indent=2) + "\n")
    _emit(cfg, {"command": "linearize", "verdict": "success",
                "exit_code": EXIT_OK, "lp_path": str(lp_path),
                "lp": lp_text, "report": report},
          [f"LP written to {lp_path}", f"report written to {report_path}"])
    return EXIT_OK


_HANDLERS = {"synth": cmd_synth, "verify": cmd_verify,
             "linearize": cmd_linearize}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = resolve_config(args)
        return _HANDLERS[args.command](args, cfg)
    except CliError as exc:
        print(f"linred: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
