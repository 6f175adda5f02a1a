# Copyright (c) 2023 Graphcore Ltd. All rights reserved.
import argparse
import logging
import pathlib
from fractions import Fraction
from typing import Any, Dict, List, Optional

import yaml

from ..algebra.jetfield import DivisionByZero
from ..algebra.orematrix import DecompositionIncomplete
from ..analysis.cartan import CartanSystem, DegenerateRank, SystemValidationError, pfaffian_to_cartan, validate
from ..analysis.noether import BudgetExceeded, ExpansionFailure, analyze
from ..analysis.verify import (
    check_gauge,
    check_reducibility,
    compare_specialization,
    dof_count,
    linearize,
)
from .expressions import ExpressionSyntaxError
from .report import build_report, check_schema, fixture_mismatches, render_machine, render_text
from .system_spec import (
    FORMATS,
    PipelineOptions,
    SpecFormatError,
    build_pfaffian,
    build_system,
    dump_system,
    load_spec,
)

__all__ = [
    "EXIT_OK",
    "EXIT_PARSE_ERROR",
    "EXIT_VALIDATION_ERROR",
    "EXIT_BUDGET_EXCEEDED",
    "EXIT_VERIFICATION_FAILURE",
    "EXIT_DECOMPOSITION_INCOMPLETE",
    "EXIT_CODES",
    "exit_code_for",
    "run_pipeline",
    "analyze_parser",
    "validate_parser",
    "reduce_pfaffian_parser",
    "run_analyze",
    "run_validate",
    "run_reduce_pfaffian",
]

EXIT_OK = 0
EXIT_PARSE_ERROR = 2
EXIT_VALIDATION_ERROR = 3
EXIT_BUDGET_EXCEEDED = 4
EXIT_VERIFICATION_FAILURE = 5
EXIT_DECOMPOSITION_INCOMPLETE = 6

# Checked in order, first match wins
EXIT_CODES = [
    (ExpressionSyntaxError, EXIT_PARSE_ERROR),
    (SpecFormatError, EXIT_PARSE_ERROR),
    (yaml.YAMLError, EXIT_PARSE_ERROR),
    (SystemValidationError, EXIT_VALIDATION_ERROR),
    (DegenerateRank, EXIT_VALIDATION_ERROR),
    (DivisionByZero, EXIT_VALIDATION_ERROR),
    (BudgetExceeded, EXIT_BUDGET_EXCEEDED),
    (ExpansionFailure, EXIT_VERIFICATION_FAILURE),
    (DecompositionIncomplete, EXIT_DECOMPOSITION_INCOMPLETE),
]


def exit_code_for(error: BaseException) -> Optional[int]:
    for error_class, code in EXIT_CODES:
        if isinstance(error, error_class):
            return code
    return None


def run_pipeline(sys: CartanSystem, options: PipelineOptions) -> Dict[str, Any]:
    """Analyze a validated system and verify every result.

    Returns:
        The report tree, see `report.build_report`. `report["verified"]` is
        True only when all checks pass.
    """
    analysis = analyze(sys, options.max_k)
    resolution = analysis.resolution
    gauge = check_gauge(linearize(sys), resolution)
    reducibility = check_reducibility(resolution, sys, options.injectivity_levels)
    dof = dof_count(resolution, sys)
    logging.info(f"Degree of freedom count {dof.dof} ({dof.flag})")
    specialization = None
    if options.specialize:
        specialization = compare_specialization(analysis, options.specialize, options.max_k)
    return build_report(sys, analysis, gauge, reducibility, dof, specialization)


def _specialization(text: str) -> tuple:
    name, sep, value = text.partition("=")
    if not sep or not name.strip():
        raise argparse.ArgumentTypeError(f"Expected name=value, got {text!r}")
    try:
        return name.strip(), Fraction(value.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"{value!r} is not a rational number")


def _spec_file_argument(parser: argparse.ArgumentParser):
    parser.add_argument("spec_file", type=pathlib.Path, help="TOML system file")


def _output_argument(parser: argparse.ArgumentParser):
    parser.add_argument("--output", type=pathlib.Path, default=None, help="Write to a file instead of stdout")


def analyze_parser(parser: argparse.ArgumentParser):
    """Add analyze arguments to argparse parser"""
    _spec_file_argument(parser)
    parser.add_argument("--max-k", type=int, default=None, help="Maximum number of D-steps")
    parser.add_argument("--format", choices=FORMATS, default=None, help="Report format")
    parser.add_argument(
        "--fixture-check",
        type=pathlib.Path,
        default=None,
        help="YAML file with expected report values, a mismatch exits with a verification failure",
    )
    parser.add_argument(
        "--specialize",
        type=_specialization,
        action="append",
        default=[],
        metavar="NAME=VALUE",
        help="Specialize a parameter and compare with the generic result, may be repeated",
    )
    parser.add_argument("--order-bound", type=int, default=None, help="Jet order bound for checks and mixing")
    parser.add_argument("--injectivity-levels", type=int, default=None, help="D-levels of the injectivity check")
    _output_argument(parser)


def validate_parser(parser: argparse.ArgumentParser):
    """Add validate arguments to argparse parser"""
    _spec_file_argument(parser)
    parser.add_argument("--order-bound", type=int, default=None, help="Jet order bound of the compatibility check")


def reduce_pfaffian_parser(parser: argparse.ArgumentParser):
    """Add reduce-pfaffian arguments to argparse parser"""
    _spec_file_argument(parser)
    parser.add_argument(
        "--allow-parametric-pivots",
        action="store_true",
        default=None,
        help="Accept pivots with a factor that depends on parameters only",
    )
    _output_argument(parser)


def _options(spec_options: PipelineOptions, args: argparse.Namespace) -> PipelineOptions:
    """Command line flags override the [options] table of the system file."""
    overrides = {}
    for key in PipelineOptions._fields:
        value = getattr(args, key, None)
        if key == "specialize":
            if value:
                overrides[key] = {**spec_options.specialize, **dict(value)}
        elif value is not None:
            overrides[key] = value
    return spec_options._replace(**overrides)


def _emit(text: str, output: Optional[pathlib.Path]):
    if output is None:
        print(text, end="")
    else:
        output.write_text(text)
        logging.info(f"Wrote {output}")


def run_analyze(args: argparse.Namespace) -> int:
    """Run the full pipeline on a system file.

    Args:
        args (argparse.Namespace): Arguments from `analyze_parser`

    Returns:
        The exit code, 0 when every check passes.
    """
    spec = load_spec(args.spec_file.read_text())
    options = _options(spec.options, args)
    unknown = sorted(set(options.specialize) - set(spec.params))
    if unknown:
        raise SpecFormatError(f"Cannot specialize undeclared parameters {unknown}")
    sys = build_system(spec, options.order_bound)
    report = validate(sys)
    if not report.valid:
        raise SystemValidationError(report.violations)
    result = run_pipeline(sys, options)
    schema_errors = check_schema(result)
    for error in schema_errors:
        logging.error(f"Report schema: {error}")
    rendered = render_machine(result) if options.format == "machine" else render_text(result)
    _emit(rendered, args.output)
    code = EXIT_OK if result["verified"] and not schema_errors else EXIT_VERIFICATION_FAILURE
    if args.fixture_check is not None:
        expected = yaml.safe_load(args.fixture_check.read_text()) or {}
        # Compare through YAML so both sides use the same scalar types
        mismatches = fixture_mismatches(yaml.safe_load(render_machine(result)), expected)
        for mismatch in mismatches:
            logging.error(f"Fixture mismatch {mismatch}")
        if mismatches:
            code = EXIT_VERIFICATION_FAILURE
        else:
            logging.info(f"Report matches {args.fixture_check}")
    return code


def run_validate(args: argparse.Namespace) -> int:
    spec = load_spec(args.spec_file.read_text())
    order_bound = args.order_bound if args.order_bound is not None else spec.options.order_bound
    sys = build_system(spec, order_bound)
    report = validate(sys)
    if not report.valid:
        lines: List[str] = ["invalid"] + [f"  {violation}" for violation in report.violations]
        print("\n".join(lines))
        return EXIT_VALIDATION_ERROR
    print(f"valid: n={sys.n} m={sys.m} l={sys.l}, compatibility checked on {report.checked_jets} jets")
    return EXIT_OK


def run_reduce_pfaffian(args: argparse.Namespace) -> int:
    """Reduce a Pfaffian system to Cartan normal form and write it as a system file."""
    spec = load_spec(args.spec_file.read_text(), require_evolution=False)
    options = _options(spec.options, args)
    pfaffian = build_pfaffian(spec)
    sys = pfaffian_to_cartan(
        pfaffian,
        lambda_names=spec.lambdas or None,
        allow_parametric_pivots=options.allow_parametric_pivots,
    )
    for condition in sys.genericity:
        logging.warning(f"Reduced system is valid where {condition.render()} is nonzero")
    _emit(dump_system(sys, options), args.output)
    return EXIT_OK
