# Copyright (c) 2023 Graphcore Ltd. All rights reserved.
"""
Report tree of a pipeline run and its two renderings.

The tree is plain dicts, lists and scalars in a fixed key order. The text
rendering and the YAML machine rendering are both produced from it, so they
always carry the same data.
"""
from typing import Any, Dict, List, Optional

import yaml

from ..analysis.cartan import CartanSystem
from ..analysis.noether import Analysis, Resolution
from ..analysis.verify import DofReport, GaugeReport, ReducibilityReport, SpecializationReport

__all__ = [
    "REPORT_SCHEMA",
    "build_report",
    "render_text",
    "render_machine",
    "check_schema",
    "fixture_mismatches",
]

REPORT_SCHEMA = {
    "system": {
        "fields": list,
        "constrained": list,
        "lambdas": list,
        "params": list,
        "n": int,
        "m": int,
        "l": int,
        "genericity": list,
    },
    "K": int,
    "r1": int,
    "r2": int,
    "generators": list,
    "reducibility": list,
    "compatibility_identities": int,
    "dof": {"n": int, "m": int, "rank_Rbar": int, "dof": int, "flag": str, "consistent": bool},
    "checks": {
        "gauge": bool,
        "gauge_residuals": list,
        "reducibility": bool,
        "reducibility_residuals": list,
        "injective": bool,
        "rank_law": bool,
    },
    "verified": bool,
}

SPECIALIZATION_SCHEMA = {
    "values": dict,
    "generic_r1": int,
    "specialized_r1": int,
    "substituted_generators_valid": (bool, type(None)),
    "failure": bool,
    "notes": list,
    "generators": list,
    "reducibility": list,
}


def gauge_parameter(I: int) -> str:
    return f"eps{I + 1}"


def reducibility_parameter(A: int) -> str:
    return f"eta{A + 1}"


def _residuals(residuals) -> List[Dict[str, Any]]:
    return [{"row": r.row, "column": r.column, "value": r.value} for r in residuals]


def _generators(res: Resolution, variables: List[str]) -> List[Dict[str, Any]]:
    return [
        {
            "parameter": gauge_parameter(I),
            "delta": {name: res.R_gen[row, I].render() for row, name in enumerate(variables)},
        }
        for I in range(res.r1)
    ]


def _relations(res: Resolution) -> List[Dict[str, Any]]:
    return [
        {
            "parameter": reducibility_parameter(A),
            "delta": {gauge_parameter(I): res.Z_gen[I, A].render() for I in range(res.r1)},
        }
        for A in range(res.r2)
    ]


def build_report(
    sys: CartanSystem,
    analysis: Analysis,
    gauge: GaugeReport,
    reducibility: ReducibilityReport,
    dof: DofReport,
    specialization: Optional[SpecializationReport] = None,
) -> Dict[str, Any]:
    space = sys.space
    res = analysis.resolution
    variables = list(space.fields) + list(space.lambdas)
    report = {
        "system": {
            "fields": list(space.fields),
            "constrained": list(space.constrained),
            "lambdas": list(space.lambdas),
            "params": list(space.params),
            "n": sys.n,
            "m": sys.m,
            "l": sys.l,
            "genericity": [condition.render() for condition in sys.genericity],
        },
        "K": analysis.K,
        "r1": res.r1,
        "r2": res.r2,
        "generators": _generators(res, variables),
        "reducibility": _relations(res),
        "compatibility_identities": sys.m,
        "dof": dict(dof._asdict()),
        "checks": {
            "gauge": gauge.passed,
            "gauge_residuals": _residuals(gauge.residuals),
            "reducibility": reducibility.passed,
            "reducibility_residuals": _residuals(reducibility.residuals),
            "injective": reducibility.injective,
            "rank_law": reducibility.rank_law,
        },
        "verified": gauge.passed and reducibility.passed,
    }
    if specialization is not None:
        report["specialization"] = {
            "values": {name: str(value) for name, value in specialization.values.items()},
            "generic_r1": specialization.generic_r1,
            "specialized_r1": specialization.specialized_r1,
            "substituted_generators_valid": specialization.substituted_generators_valid,
            "failure": specialization.failure,
            "notes": list(specialization.notes),
            "generators": _generators(specialization.resolution, variables),
            "reducibility": _relations(specialization.resolution),
        }
    return report


def _render_lines(value: Any, indent: int) -> List[str]:
    pad = "  " * indent
    lines = []
    if isinstance(value, dict):
        for key, item in value.items():
            if isinstance(item, (dict, list)) and item:
                lines.append(f"{pad}{key}:")
                lines.extend(_render_lines(item, indent + 1))
            else:
                lines.append(f"{pad}{key}: {_scalar(item)}")
    elif isinstance(value, list):
        for index, item in enumerate(value):
            if isinstance(item, (dict, list)) and item:
                lines.append(f"{pad}[{index}]")
                lines.extend(_render_lines(item, indent + 1))
            else:
                lines.append(f"{pad}[{index}] {_scalar(item)}")
    else:
        lines.append(f"{pad}{_scalar(value)}")
    return lines


def _scalar(value: Any) -> str:
    if isinstance(value, bool):
        return "pass" if value else "FAIL"
    if value is None:
        return "-"
    if isinstance(value, (dict, list)):
        return "none"
    return str(value)


def render_text(report: Dict[str, Any]) -> str:
    header = ["Gauge symmetry analysis", "======================="]
    return "\n".join(header + _render_lines(report, 0)) + "\n"


def render_machine(report: Dict[str, Any]) -> str:
    return yaml.safe_dump(report, sort_keys=False, default_flow_style=False)


def _check(value: Any, schema: Any, path: str) -> List[str]:
    if isinstance(schema, dict):
        if not isinstance(value, dict):
            return [f"{path or 'report'} should be a mapping"]
        errors = [f"{path}{key} is missing" for key in schema if key not in value]
        for key, sub in schema.items():
            if key in value:
                errors += _check(value[key], sub, f"{path}{key}.")
        return errors
    if not isinstance(value, schema) or (schema is int and isinstance(value, bool)):
        return [f"{path.rstrip('.')} has type {type(value).__name__}"]
    return []


def check_schema(report: Dict[str, Any]) -> List[str]:
    """Schema violations of a report tree, empty when it conforms."""
    errors = _check(report, REPORT_SCHEMA, "")
    if "specialization" in report:
        errors += _check(report["specialization"], SPECIALIZATION_SCHEMA, "specialization.")
    extra = set(report) - set(REPORT_SCHEMA) - {"specialization"}
    errors += [f"{key} is not a report key" for key in sorted(extra)]
    return errors


def fixture_mismatches(report: Any, expected: Any, path: str = "") -> List[str]:
    """Differences between a report and the subset of keys in an expected fixture."""
    if isinstance(expected, dict):
        if not isinstance(report, dict):
            return [f"{path.rstrip('.') or 'report'}: expected a mapping"]
        mismatches = []
        for key, value in expected.items():
            if key not in report:
                mismatches.append(f"{path}{key}: missing")
            else:
                mismatches += fixture_mismatches(report[key], value, f"{path}{key}.")
        return mismatches
    if report != expected:
        return [f"{path.rstrip('.')}: expected {expected!r}, got {report!r}"]
    return []
