"""Command-line entry point.

    python cli.py construct --xi "x" --e1 1 --e2 3 --domain -8 8 --n 4001
    python cli.py classify  --xi "(x-1)/(x+1)" --e1 0 --e2 1
    python cli.py deform    --eta "x/sqrt(x^2+1)" --e1 0 --e2 1 --beta 0.5
    python cli.py radial    --xi "x" --l1 0 --l2 1 --e1 3 --e2 5 --radius 8
    python cli.py verify    --catalog sextic --param a=1 --param b=1 --param beta=0.5
    python cli.py catalog list
    python cli.py catalog verify-all --jobs 4

Tables go out as CSV, reports as JSON with a "schema" key. Diagnostics are
single-line JSON records on stderr; the exit code reflects the failure class.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, replace
from typing import Any, Mapping, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from catalog import ENTRIES, Instance, instantiate_entry, list_entries
from classify import analyze_singularities, predict_quantum_numbers
from config import RunConfig, load_defaults
from construct import ConstructionResult, Grid, LevelPair, build_construction, residual_check
from deform import MobiusParams, apply_mobius, canonical_from_beta, canonical_params
from errors import ConfigError, TwoLevelError, VerificationFailure
from exprlang import ParsedFunction, to_text
from radial import RadialSpec, channel_residual, synthesize_radial
from spectral import VerificationReport, verify_two_levels

logger = logging.getLogger("twolevel")

SCHEMA = "twolevel/1"
_RECORD_FIELDS = set(vars(logging.makeLogRecord({}))) | {"message", "asctime"}


class JsonLineFormatter(logging.Formatter):
    """One JSON object per record: level, logger, message and any ``extra`` fields."""

    def format(self, record: logging.LogRecord) -> str:
        payload = {"level": record.levelname.lower(), "logger": record.name, "message": record.getMessage()}
        for key, value in vars(record).items():
            if key not in _RECORD_FIELDS and not key.startswith("_"):
                payload[key] = jsonable(value)
        if record.exc_info and record.levelno >= logging.ERROR:
            payload["traceback"] = self.formatException(record.exc_info)
        return json.dumps(payload, sort_keys=True)


def setup_logging(verbose: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JsonLineFormatter())
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.WARNING)


def jsonable(value: Any) -> Any:
    """Plain JSON values; non-finite floats become null."""
    if isinstance(value, Mapping):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if value is None or isinstance(value, str):
        return value
    if hasattr(value, "to_dict"):
        return jsonable(value.to_dict())
    return str(value)


def write_json(document: Mapping[str, Any], path: str | None) -> None:
    text = json.dumps(jsonable({"schema": SCHEMA, **document}), indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as file:
            file.write(text)


def write_csv(frame: pd.DataFrame, path: str | None) -> None:
    frame.to_csv(sys.stdout if path is None else path, float_format="%.17g", index=False)


# ------------------------------------------------------------------ parsing

def parse_param(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"parameter {key.strip()!r} needs a number, got {value!r}") from None


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--xi", help="generating function of x, e.g. \"2*x^2-3\"")
    parser.add_argument("--catalog", metavar="NAME", help=f"built-in construction: {', '.join(ENTRIES)}")
    parser.add_argument("--param", action="append", type=parse_param, default=[], metavar="KEY=VALUE",
                        help="catalog parameter (repeatable)")
    parser.add_argument("--e1", type=float, help="lower energy")
    parser.add_argument("--e2", type=float, help="upper energy")
    parser.add_argument("--domain", type=float, nargs=2, metavar=("A", "B"), help="working interval")
    _add_output_flags(parser)


def _add_output_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", dest="grid_points", type=int, help="grid points (odd, >= 101)")
    parser.add_argument("--format", dest="output_format", choices=("json", "csv"),
                        help="table output format (default csv)")
    parser.add_argument("--output", dest="output_path", help="output file (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twolevel", description="Potentials with two prescribed bound states.")
    parser.add_argument("--verbose", action="store_true", help="debug-level diagnostics on stderr")
    parser.add_argument("--defaults", help="alternative defaults YAML file")
    sub = parser.add_subparsers(dest="command", required=True)

    construct_cmd = sub.add_parser("construct", help="potential, wave functions and superpotentials on a grid")
    _add_run_flags(construct_cmd)

    classify_cmd = sub.add_parser("classify", help="poles, zeros, critical points and predicted node counts")
    _add_run_flags(classify_cmd)

    deform_cmd = sub.add_parser("deform", help="linear-fractional deformation of a base function eta")
    deform_cmd.add_argument("--eta", required=True, help="base function of x")
    deform_cmd.add_argument("--mobius", type=float, nargs=4, metavar=("C1", "C2", "D1", "D2"),
                            help="xi = (C2 eta + D2)/(C1 eta + D1)")
    deform_cmd.add_argument("--beta", type=float, help="canonical deformation parameter")
    deform_cmd.add_argument("--delta-bar", dest="delta_bar", type=float, help="canonical shift (default: E2 - E1)")
    deform_cmd.add_argument("--e1", type=float, required=True)
    deform_cmd.add_argument("--e2", type=float, required=True)
    deform_cmd.add_argument("--domain", type=float, nargs=2, metavar=("A", "B"))
    _add_output_flags(deform_cmd)

    radial_cmd = sub.add_parser("radial", help="reduced radial states with angular momenta l1, l2")
    radial_cmd.add_argument("--xi", required=True)
    radial_cmd.add_argument("--l1", type=int, required=True)
    radial_cmd.add_argument("--l2", type=int, required=True)
    radial_cmd.add_argument("--e1", type=float, required=True)
    radial_cmd.add_argument("--e2", type=float, required=True)
    radial_cmd.add_argument("--radius", type=float, default=10.0, help="outer radius R; the grid is (0, R]")
    _add_output_flags(radial_cmd)

    verify_cmd = sub.add_parser("verify", help="check the constructed levels with the eigensolver")
    _add_run_flags(verify_cmd)

    catalog_cmd = sub.add_parser("catalog", help="built-in constructions")
    catalog_sub = catalog_cmd.add_subparsers(dest="catalog_command", required=True)
    list_cmd = catalog_sub.add_parser("list", help="entries with parameter schemas")
    list_cmd.add_argument("--output", dest="output_path")
    all_cmd = catalog_sub.add_parser("verify-all", help="verify every entry at its default parameters")
    all_cmd.add_argument("--jobs", type=int, default=4)
    all_cmd.add_argument("--quiet", action="store_true", help="no progress bar")
    all_cmd.add_argument("--n", dest="grid_points", type=int)
    all_cmd.add_argument("--output", dest="output_path")
    return parser


def make_config(args: argparse.Namespace, defaults: Mapping[str, Any]) -> RunConfig:
    params = dict(getattr(args, "param", []) or [])
    domain = getattr(args, "domain", None)
    return RunConfig.from_defaults(
        defaults,
        xi=getattr(args, "xi", None),
        catalog=getattr(args, "catalog", None),
        params=params or None,
        e1=getattr(args, "e1", None),
        e2=getattr(args, "e2", None),
        domain=tuple(domain) if domain else None,
        grid_points=getattr(args, "grid_points", None),
        output_format=getattr(args, "output_format", None),
        output_path=getattr(args, "output_path", None),
    )


# ------------------------------------------------------------------ inputs

@dataclass(frozen=True)
class Problem:
    label: str
    xi: ParsedFunction
    levels: LevelPair
    domain: tuple[float, float]
    instance: Instance | None = None


def resolve_problem(config: RunConfig) -> Problem:
    if (config.xi is None) == (config.catalog is None):
        raise ConfigError("give exactly one of --xi and --catalog")
    if config.catalog is not None:
        if config.e1 is not None or config.e2 is not None:
            raise ConfigError("catalog levels come from its parameters; use --param instead of --e1/--e2",
                              catalog=config.catalog)
        instance = instantiate_entry(config.catalog, config.params)
        return Problem(config.catalog, instance.xi, instance.levels, config.domain or instance.domain, instance)
    if config.params:
        raise ConfigError("--param applies to catalog entries only")
    if config.e1 is None or config.e2 is None:
        raise ConfigError("--xi needs --e1 and --e2")
    xi = ParsedFunction.from_text(config.xi)
    return Problem(config.xi, xi, LevelPair(config.e1, config.e2), config.domain or config.default_domain)


def _edge_ratio(psi: np.ndarray) -> float:
    peak = float(np.max(np.abs(psi)))
    return max(abs(psi[0]), abs(psi[-1])) / peak if peak > 0 else 0.0


def _widen(domain: tuple[float, float], factor: float) -> tuple[float, float]:
    centre, half = 0.5 * (domain[0] + domain[1]), 0.5 * (domain[1] - domain[0])
    return centre - factor * half, centre + factor * half


def construct_with_expansion(problem: Problem, config: RunConfig,
                             verify: bool = False) -> tuple[ConstructionResult, VerificationReport | None]:
    """Build (and optionally verify), widening the domain while the states are cut off at its ends."""
    tol = config.tolerances
    domain = problem.domain
    for attempt in range(tol.max_expansions + 1):
        result = build_construction(problem.xi, problem.levels, domain, config.grid_points,
                                    config.scan_points, tol.b_tolerance, tol.tail_limit)
        truncated = max(_edge_ratio(result.psi1), _edge_ratio(result.psi2)) > tol.boundary_amplitude
        verification = None
        if verify and not truncated:
            verification = verify_two_levels(result, result.report, tol.node_floor, tol.overlap_min,
                                             tol.tol_coefficient, tol.boundary_amplitude, raise_on_failure=False)
            truncated = any(w.startswith("TruncationWarning") for w in verification.warnings)
        if not truncated or attempt == tol.max_expansions:
            break
        domain = _widen(domain, tol.expand_factor)
        logger.info("states reach the boundary; widening the domain", extra={"domain": list(domain)})
    if truncated:
        logger.warning("states still reach the boundary after %d expansions", tol.max_expansions,
                       extra={"domain": list(domain)})
    if verify and verification is None:
        verification = verify_two_levels(result, result.report, tol.node_floor, tol.overlap_min,
                                         tol.tol_coefficient, tol.boundary_amplitude, raise_on_failure=False)
    return result, verification


def construction_document(problem: Problem, result: ConstructionResult) -> dict[str, Any]:
    frame = result.to_frame()
    document: dict[str, Any] = {
        "command": "construct",
        "xi": result.xi.describe() if result.xi is not None else problem.label,
        "levels": result.levels.to_dict(),
        "domain": [result.grid.a, result.grid.b],
        "grid_points": result.grid.n,
        "inverted": result.inverted,
        "advisory": result.advisory,
        "psi2_scale": result.psi2_scale,
        "residuals": [residual_check(result, 1), residual_check(result, 2)],
        "analytic_node_factors": [vars(f) for f in result.analytic_node_factors],
        "columns": {name: frame[name].to_numpy() for name in frame.columns},
    }
    if result.report is not None:
        document["report"] = result.report.to_dict()
    if problem.instance is not None:
        document["catalog"] = problem.instance.to_dict()
    return document


# ---------------------------------------------------------------- commands

def cmd_construct(config: RunConfig) -> int:
    problem = resolve_problem(config)
    result, _ = construct_with_expansion(problem, config)
    if config.output_format == "csv":
        write_csv(result.to_frame(), config.output_path)
    else:
        write_json(construction_document(problem, result), config.output_path)
    return 0


def cmd_classify(config: RunConfig) -> int:
    problem = resolve_problem(config)
    report = analyze_singularities(problem.xi, problem.levels.deltaE, problem.domain, config.scan_points,
                                   config.tolerances.b_tolerance)
    numbers = predict_quantum_numbers(report)
    if numbers.advisory:
        logger.warning(numbers.advisory)
    write_json({"command": "classify", "xi": problem.xi.describe(), "levels": problem.levels.to_dict(),
                "report": report.to_dict(), "advisory": numbers.advisory}, config.output_path)
    return 0


def deformation_from_args(args: argparse.Namespace, levels: LevelPair) -> tuple[MobiusParams, dict[str, Any]]:
    if (args.mobius is None) == (args.beta is None):
        raise ConfigError("give exactly one of --mobius and --beta")
    if args.mobius is not None:
        mobius = MobiusParams(*args.mobius)
        mobius.check()
        info: dict[str, Any] = {"mobius": mobius.to_dict()}
        if mobius.c1 == mobius.c2 and mobius.c1 != 0.0:
            canonical = canonical_params(mobius.c1, mobius.d1, mobius.d2, levels.deltaE)
            info["canonical"] = canonical.to_dict()
        return mobius, info
    delta_bar = levels.deltaE if args.delta_bar is None else args.delta_bar
    canonical = canonical_from_beta(args.beta, delta_bar, levels.deltaE)
    mobius = canonical.to_mobius()
    return mobius, {"mobius": mobius.to_dict(), "canonical": canonical.to_dict()}


def cmd_deform(args: argparse.Namespace, config: RunConfig) -> int:
    eta = ParsedFunction.from_text(args.eta)
    levels = LevelPair(args.e1, args.e2)
    mobius, info = deformation_from_args(args, levels)
    expression = apply_mobius(eta, mobius)
    xi = ParsedFunction(expression, to_text(expression))
    problem = Problem(xi.describe(), xi, levels, config.domain or config.default_domain)
    result, _ = construct_with_expansion(problem, config)
    if config.output_format == "csv":
        write_csv(result.to_frame(), config.output_path)
    else:
        document = construction_document(problem, result)
        document.update(command="deform", eta=eta.describe(), deformation=info)
        write_json(document, config.output_path)
    return 0


def cmd_radial(args: argparse.Namespace, config: RunConfig) -> int:
    spec = RadialSpec(args.l1, args.l2, LevelPair(args.e1, args.e2))
    if not args.radius > 0:
        raise ConfigError(f"--radius must be positive, got {args.radius}")
    n = config.grid_points
    grid = Grid.uniform(args.radius / n, args.radius, n)
    result = synthesize_radial(ParsedFunction.from_text(args.xi), spec, grid, config.scan_points,
                               config.tolerances.tail_limit)
    frame = result.to_frame().drop(columns=["Wplus", "Wminus"]).rename(columns={"x": "r", "psi1": "u1", "psi2": "u2"})
    if config.output_format == "csv":
        write_csv(frame, config.output_path)
    else:
        write_json({
            "command": "radial",
            "xi": args.xi,
            "spec": spec.to_dict(),
            "radius": args.radius,
            "grid_points": n,
            "residuals": [channel_residual(result, spec, 1), channel_residual(result, spec, 2)],
            "columns": {name: frame[name].to_numpy() for name in frame.columns},
        }, config.output_path)
    return 0


def cmd_verify(config: RunConfig) -> int:
    problem = resolve_problem(config)
    result, verification = construct_with_expansion(problem, config, verify=True)
    document = {"command": "verify", "xi": problem.xi.describe(), "levels": problem.levels.to_dict(),
                "inverted": result.inverted, "verification": verification.to_dict()}
    if problem.instance is not None:
        document["catalog"] = problem.instance.to_dict()
    write_json(document, config.output_path)
    if not verification.passed:
        raise VerificationFailure("constructed levels not confirmed by the eigensolver", verification)
    return 0


def verify_entry(name: str, config: RunConfig) -> dict[str, Any]:
    """Verify one catalog entry at its defaults; failures are reported, not raised."""
    try:
        problem = resolve_problem(replace(config, catalog=name, xi=None, e1=None, e2=None, params={}, domain=None))
        result, verification = construct_with_expansion(problem, config, verify=True)
        expected = problem.instance.expected
        predicted = (verification.predicted[0], verification.predicted[2])
        passed = verification.passed and predicted == tuple(expected)
        return {"name": name, "pass": passed, "expected": list(expected), "gap": verification.gap,
                "verification": verification.to_dict()}
    except TwoLevelError as exc:
        return {"name": name, "pass": False, "error": type(exc).__name__, "message": str(exc)}


def cmd_catalog(args: argparse.Namespace, config: RunConfig) -> int:
    if args.catalog_command == "list":
        write_json({"command": "catalog list", "entries": list_entries()}, config.output_path)
        return 0
    results: dict[str, dict[str, Any]] = {}
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        futures = {pool.submit(verify_entry, name, config): name for name in ENTRIES}
        for future in tqdm(as_completed(futures), total=len(futures), desc="catalog", disable=args.quiet,
                           file=sys.stderr):
            outcome = future.result()
            results[outcome["name"]] = outcome
    ordered = [results[name] for name in ENTRIES]
    write_json({"command": "catalog verify-all", "results": ordered,
                "passed": sum(r["pass"] for r in ordered), "total": len(ordered)}, config.output_path)
    failed = [r["name"] for r in ordered if not r["pass"]]
    if failed:
        logger.warning("catalog entries failed verification", extra={"failed": failed})
        return VerificationFailure.exit_code
    return 0


def run_command(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)
    try:
        defaults = load_defaults(args.defaults) if args.defaults else load_defaults()
        config = make_config(args, defaults)
        if args.command == "construct":
            return cmd_construct(config)
        if args.command == "classify":
            return cmd_classify(config)
        if args.command == "deform":
            return cmd_deform(args, config)
        if args.command == "radial":
            return cmd_radial(args, config)
        if args.command == "verify":
            return cmd_verify(config)
        return cmd_catalog(args, config)
    except TwoLevelError as exc:
        logger.error(str(exc), extra={"error": type(exc).__name__, "exit_code": exc.exit_code,
                                      "details": exc.details()})
        return exc.exit_code


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
