# Copyright (c) 2023 Graphcore Ltd. All rights reserved.
"""
Independent checks of a computed resolution.

Nothing here trusts the construction in `noether`: gauge invariance is
checked against the universal linearization of the field equations, and
reducibility by composing the generator matrices.
"""
import logging
from typing import List, Mapping, NamedTuple, Optional

from ..algebra.jetfield import Coercible, DivisionByZero, JetKind
from ..algebra.ore import OreOp
from ..algebra.orematrix import OreMatrix, jacobson
from .cartan import CartanSystem, SystemValidationError, validate
from .noether import Analysis, Resolution, analyze, flatten_covector

__all__ = [
    "Linearization",
    "Residual",
    "GaugeReport",
    "ReducibilityReport",
    "DofReport",
    "SpecializationReport",
    "linearize",
    "check_gauge",
    "check_rank_law",
    "check_reducibility",
    "dof_count",
    "compare_specialization",
]

CONJECTURAL = "conjectural"


class Linearization(NamedTuple):
    """E acting on (delta phi; delta lambda), rows are the evolution equations then the constraints."""

    E: OreMatrix


class Residual(NamedTuple):
    row: int
    column: int
    value: str


class GaugeReport(NamedTuple):
    passed: bool
    residuals: List[Residual]


class ReducibilityReport(NamedTuple):
    passed: bool
    residuals: List[Residual]
    injective: bool
    rank_law: bool


class DofReport(NamedTuple):
    n: int
    m: int
    rank_Rbar: int
    dof: int
    flag: str
    consistent: bool


class SpecializationReport(NamedTuple):
    values: Mapping[str, Coercible]
    generic_r1: int
    specialized_r1: int
    substituted_generators_valid: Optional[bool]
    failure: bool
    notes: List[str]
    resolution: Resolution


def linearize(sys: CartanSystem) -> Linearization:
    """Frechet derivative of D phi^i - Z^i and Dbar phi^J - Z^J as operators."""
    space = sys.space
    ncols = sys.n + sys.l
    rows = []
    equations = [(i, z, OreOp.D(sys)) for i, z in enumerate(sys.Z_evolution)]
    equations += [
        (space.fields.index(name), z, OreOp.Dbar(sys)) for name, z in zip(space.constrained, sys.Z_constraint)
    ]
    for i, z, derivative in equations:
        row = [OreOp.zero(sys) for _ in range(ncols)]
        row[i] = derivative
        for symbol in z.symbols:
            coord = space.coord_of(symbol)
            if coord is None:
                continue
            column = sys.n + coord.index if coord.kind == JetKind.LAMBDA else space.field_index(coord)
            row[column] = row[column] - OreOp.monomial(coord.p, coord.q, sys, z.partial(symbol))
        rows.append(row)
    return Linearization(OreMatrix(rows, sys, (len(rows), ncols)))


def _residuals(product: OreMatrix) -> List[Residual]:
    return [
        Residual(i, j, entry.render())
        for i, row in enumerate(product.entries)
        for j, entry in enumerate(row)
        if not entry.is_zero
    ]


def check_gauge(E: Linearization, res: Resolution) -> GaugeReport:
    """E R = 0 on-shell, entry by entry."""
    if E.E.ncols != res.R_gen.nrows:
        return GaugeReport(False, [Residual(-1, -1, f"shape mismatch {E.E.shape} x {res.R_gen.shape}")])
    residuals = _residuals(E.E @ res.R_gen)
    for residual in residuals:
        logging.error(f"Gauge invariance fails at ({residual.row}, {residual.column}): {residual.value}")
    return GaugeReport(not residuals, residuals)


def check_rank_law(res: Resolution, sys: CartanSystem) -> bool:
    return res.r1 - res.r2 == sys.l


def _is_injective(res: Resolution, levels: int) -> bool:
    """No nonzero covector of D-degree <= levels annihilates the reducibility relations."""
    if not res.r2:
        return True
    sys = res.Z_gen.sys
    N = res.Z_gen.adjoint()
    degree = max((entry.degree for row in N.entries for entry in row), default=0)
    D = OreOp.D(sys)
    for level in range(levels + 1):
        rows = []
        for row in N.entries:
            shifted = list(row)
            for k in range(level + 1):
                rows.append(flatten_covector(shifted, degree + level + 1, sys))
                shifted = [D * entry for entry in shifted]
        stacked = OreMatrix(rows, sys, (len(rows), res.r1 * (degree + level + 1)))
        if jacobson(stacked, sys.order_bound).rank != len(rows):
            return False
    return True


def check_reducibility(res: Resolution, sys: Optional[CartanSystem] = None, injectivity_levels: int = 1) -> ReducibilityReport:
    """R Z = 0, Z injective and r1 - r2 = l."""
    residuals = []
    if res.r2:
        if res.R_gen.ncols != res.Z_gen.nrows:
            residuals = [Residual(-1, -1, f"shape mismatch {res.R_gen.shape} x {res.Z_gen.shape}")]
        else:
            residuals = _residuals(res.R_gen @ res.Z_gen)
    for residual in residuals:
        logging.error(f"Reducibility relation fails at ({residual.row}, {residual.column}): {residual.value}")
    injective = not residuals and _is_injective(res, injectivity_levels)
    rank_law = check_rank_law(res, sys) if sys is not None else True
    if not rank_law:
        logging.error(f"Rank law fails: r1 - r2 = {res.r1 - res.r2}, l = {sys.l}")
    return ReducibilityReport(not residuals and injective and rank_law, residuals, injective, rank_law)


def dof_count(res: Resolution, sys: CartanSystem) -> DofReport:
    """n - m - rank of the field components, split by powers of D acting on the gauge parameters."""
    columns = []
    for I in range(res.r1):
        parts = [res.R_gen[i, I].d_coefficients() for i in range(sys.n)]
        degree = max((max(p) for p in parts if p), default=-1)
        for k in range(degree + 1):
            columns.append([p.get(k, OreOp.zero(sys)) for p in parts])
    if columns:
        Rbar = OreMatrix([[column[i] for column in columns] for i in range(sys.n)], sys, (sys.n, len(columns)))
        rank = jacobson(Rbar, sys.order_bound).rank
    else:
        rank = 0
    dof = sys.n - sys.m - rank
    if dof < 0:
        logging.error(f"Negative degree of freedom count {dof}")
    return DofReport(n=sys.n, m=sys.m, rank_Rbar=rank, dof=dof, flag=CONJECTURAL, consistent=dof >= 0)


def _substitute_resolution(res: Resolution, sys: CartanSystem, values) -> Resolution:
    symbols = {sys.space.param(name): value for name, value in values.items()}

    def substitute(entry: OreOp) -> OreOp:
        return OreOp({mono: coef.subs(symbols) for mono, coef in entry.terms.items()}, sys)

    R_gen = OreMatrix([[substitute(e) for e in row] for row in res.R_gen.entries], sys, res.R_gen.shape)
    Z_gen = OreMatrix([[substitute(e) for e in row] for row in res.Z_gen.entries], sys, res.Z_gen.shape)
    return Resolution(R_gen, Z_gen, res.r1, res.r2)


def compare_specialization(
    analysis: Analysis, values: Mapping[str, Coercible], max_k: Optional[int] = None
) -> SpecializationReport:
    """Specialize parameters in a generic result and compare with a fresh run.

    The generic generators are only guaranteed away from the parameter values
    that change the structure of the gauge algebra, so a mismatch in the
    number of generators is reported, not raised.
    """
    notes = []
    specialized = analysis.sys.substitute(values)
    report = validate(specialized)
    if not report.valid:
        raise SystemValidationError(report.violations)
    fresh = analyze(specialized, max_k)
    substituted_valid = None
    try:
        substituted = _substitute_resolution(analysis.resolution, specialized, values)
    except DivisionByZero as error:
        notes.append(f"SpecializationFailure: generic generators are singular at {dict(values)}: {error}")
    else:
        substituted_valid = check_gauge(linearize(specialized), substituted).passed
        if not substituted_valid:
            notes.append("SpecializationFailure: substituted generic generators are not gauge symmetries")
    generic_r1, specialized_r1 = analysis.resolution.r1, fresh.resolution.r1
    if generic_r1 != specialized_r1:
        notes.append(
            f"SpecializationFailure: {generic_r1} generic gauge generators but {specialized_r1} "
            f"after specializing {dict(values)}"
        )
    for note in notes:
        logging.warning(note)
    return SpecializationReport(
        values=dict(values),
        generic_r1=generic_r1,
        specialized_r1=specialized_r1,
        substituted_generators_valid=substituted_valid,
        failure=bool(notes),
        notes=notes,
        resolution=fresh.resolution,
    )
