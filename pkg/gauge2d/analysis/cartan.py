# Copyright (c) 2023 Graphcore Ltd. All rights reserved.
"""
Field equations in Cartan normal form

    D phi^i = Z^i,    Dbar phi^J = Z^J

and the reduction of first order Pfaffian systems to that form.
"""
import logging
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import sympy

from ..algebra.jetfield import Coercible, FieldElem, JetCoord, JetKind, JetSpace, as_field_elem, dbar, dtime

__all__ = [
    "SystemValidationError",
    "DegenerateRank",
    "CartanSystem",
    "ValidationReport",
    "validate",
    "compatibility_failures",
    "PfaffianInput",
    "curvature",
    "KernelBasis",
    "kernel_basis",
    "parametric_factors",
    "pfaffian_to_cartan",
]

ORDER_BOUND_MARGIN = 3


class SystemValidationError(ValueError):
    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("Invalid Cartan system: " + "; ".join(self.violations))


class DegenerateRank(Exception):
    pass


class CartanSystem:
    """Right hand sides of the evolution equations and of the constraints.

    `evolution` has one entry per field in declared order, `constraints` one
    entry per constrained field. Derivatives of jets are cached; the system
    itself is never modified after construction.
    """

    def __init__(
        self,
        space: JetSpace,
        evolution: Sequence[Coercible],
        constraints: Sequence[Coercible] = (),
        order_bound: Optional[int] = None,
        genericity: Sequence[FieldElem] = (),
    ):
        self.space = space
        self.Z_evolution: Tuple[FieldElem, ...] = tuple(as_field_elem(z) for z in evolution)
        self.Z_constraint: Tuple[FieldElem, ...] = tuple(as_field_elem(z) for z in constraints)
        if len(self.Z_evolution) != space.n:
            raise ValueError(f"Expected {space.n} evolution equations, got {len(self.Z_evolution)}")
        if len(self.Z_constraint) != space.m:
            raise ValueError(f"Expected {space.m} constraint equations, got {len(self.Z_constraint)}")
        self.order_bound = self.max_order() + ORDER_BOUND_MARGIN if order_bound is None else order_bound
        self.genericity = tuple(genericity)
        self._dbar_cache: Dict[sympy.Symbol, FieldElem] = {}
        self._dtime_cache: Dict[sympy.Symbol, FieldElem] = {}

    @property
    def n(self) -> int:
        return self.space.n

    @property
    def m(self) -> int:
        return self.space.m

    @property
    def l(self) -> int:
        return self.space.l

    def equations(self) -> List[FieldElem]:
        return list(self.Z_evolution) + list(self.Z_constraint)

    def jets(self) -> List[JetCoord]:
        """Jets the right hand sides depend on, in canonical order."""
        coords = set()
        for z in self.equations():
            for symbol in z.symbols:
                coord = self.space.coord_of(symbol)
                if coord is not None:
                    coords.add(coord)
        return sorted(coords)

    def max_order(self) -> int:
        return max((max(coord.p, coord.q) for coord in self.jets()), default=0)

    def dbar_image(self, symbol: sympy.Symbol) -> FieldElem:
        image = self._dbar_cache.get(symbol)
        if image is None:
            image = self._dbar_of_symbol(symbol)
            self._dbar_cache[symbol] = image
        return image

    def _dbar_of_symbol(self, symbol: sympy.Symbol) -> FieldElem:
        coord = self.space.coord_of(symbol)
        if coord is None:
            if self.space.is_param(symbol):
                return FieldElem()
            raise ValueError(f"Unknown symbol {symbol} in {self.space}")
        if coord.kind == JetKind.PHI_J:
            return self.Z_constraint[coord.index]
        return self.space.jet(coord.prolong(dq=1))

    def dtime_image(self, symbol: sympy.Symbol) -> FieldElem:
        image = self._dtime_cache.get(symbol)
        if image is None:
            image = self._dtime_of_symbol(symbol)
            self._dtime_cache[symbol] = image
        return image

    def _dtime_of_symbol(self, symbol: sympy.Symbol) -> FieldElem:
        coord = self.space.coord_of(symbol)
        if coord is None:
            if self.space.is_param(symbol):
                return FieldElem()
            raise ValueError(f"Unknown symbol {symbol} in {self.space}")
        if coord.kind == JetKind.LAMBDA:
            return self.space.jet(coord.prolong(dp=1))
        if coord.q == 0:
            return self.Z_evolution[self.space.field_index(coord)]
        lower = self.space.symbol(coord._replace(q=coord.q - 1))
        return dbar(self.dtime_image(lower), self)

    def dbar(self, a: Coercible) -> FieldElem:
        return dbar(as_field_elem(a), self)

    def dtime(self, a: Coercible) -> FieldElem:
        return dtime(as_field_elem(a), self)

    def substitute(self, values: Mapping[str, Coercible]) -> "CartanSystem":
        """The same system with parameters specialized to constants."""
        symbols = {self.space.param(name): value for name, value in values.items()}
        return CartanSystem(
            self.space,
            [z.subs(symbols) for z in self.Z_evolution],
            [z.subs(symbols) for z in self.Z_constraint],
            order_bound=self.order_bound,
        )

    def __repr__(self) -> str:
        evolution = ", ".join(f"{name}: {z}" for name, z in zip(self.space.fields, self.Z_evolution))
        return f"CartanSystem({self.space}, evolution={{{evolution}}})"


class ValidationReport(NamedTuple):
    valid: bool
    violations: List[str]
    checked_jets: int


def compatibility_failures(sys: CartanSystem, order_bound: Optional[int] = None) -> List[Tuple[JetCoord, FieldElem]]:
    """Jets on which dtime and dbar do not commute, with the residual."""
    order_bound = sys.order_bound if order_bound is None else order_bound
    failures = []
    for coord in sys.space.jets_up_to(order_bound):
        v = sys.space.jet(coord)
        residual = dtime(dbar(v, sys), sys) - dbar(dtime(v, sys), sys)
        if not residual.is_zero:
            failures.append((coord, residual))
    return failures


def validate(sys: CartanSystem, order_bound: Optional[int] = None) -> ValidationReport:
    """Check the structural invariants of the system and the compatibility condition."""
    space = sys.space
    order_bound = sys.order_bound if order_bound is None else order_bound
    violations = []
    if not 0 <= sys.m <= sys.n:
        violations.append(f"Number of constrained fields {sys.m} exceeds number of fields {sys.n}")
    for name, z in zip(space.fields, sys.Z_evolution):
        for symbol in sorted(z.symbols, key=sympy.default_sort_key):
            coord = space.coord_of(symbol)
            if coord is None and not space.is_param(symbol):
                violations.append(f"Evolution of {name} uses unknown symbol {symbol}")
            elif coord is not None and coord.kind == JetKind.LAMBDA and coord.p > 0:
                violations.append(f"Evolution of {name} depends on the time derivative {symbol} of a multiplier")
    for name, z in zip(space.constrained, sys.Z_constraint):
        for symbol in sorted(z.symbols, key=sympy.default_sort_key):
            coord = space.coord_of(symbol)
            if coord is None and not space.is_param(symbol):
                violations.append(f"Constraint of {name} uses unknown symbol {symbol}")
            elif coord is not None and coord.kind == JetKind.LAMBDA:
                violations.append(f"Constraint of {name} depends on the multiplier jet {symbol}")
    checked = 0
    if not violations:
        checked = len(space.jets_up_to(order_bound))
        for coord, residual in compatibility_failures(sys, order_bound):
            violations.append(f"Compatibility fails on {space.name(coord)}: dtime(dbar) - dbar(dtime) = {residual}")
    for violation in violations:
        logging.info(violation)
    return ValidationReport(valid=not violations, violations=violations, checked_jets=checked)


class PfaffianInput(NamedTuple):
    """Forms theta^J = d phi^J - Z_a^J(phi) d phi^a.

    `theta[J][a]` is indexed by constrained and free fields in declared order.
    """

    space: JetSpace
    theta: Tuple[Tuple[FieldElem, ...], ...]

    def check(self):
        if len(self.theta) != self.space.m or any(len(row) != self.space.n - self.space.m for row in self.theta):
            raise ValueError(f"theta must be {self.space.m} x {self.space.n - self.space.m}")
        for row in self.theta:
            for entry in row:
                for symbol in entry.symbols:
                    coord = self.space.coord_of(symbol)
                    if coord is None and self.space.is_param(symbol):
                        continue
                    if coord is None or coord.kind == JetKind.LAMBDA or coord.q:
                        raise SystemValidationError([f"theta entry {entry} may only depend on the fields"])


def curvature(p: PfaffianInput) -> List[List[List[FieldElem]]]:
    """Omega[J][a][b] = d_a Z_b - d_b Z_a + Z_a^I d_I Z_b - Z_b^I d_I Z_a"""
    space = p.space
    free = range(space.n - space.m)
    phi_a = [space.symbol(JetCoord(JetKind.PHI_A, a)) for a in free]
    phi_J = [space.symbol(JetCoord(JetKind.PHI_J, j)) for j in range(space.m)]
    omega = []
    for J, row in enumerate(p.theta):
        block = []
        for a in free:
            entries = []
            for b in free:
                value = row[b].partial(phi_a[a]) - row[a].partial(phi_a[b])
                for I in range(space.m):
                    value = value + p.theta[I][a] * row[b].partial(phi_J[I]) - p.theta[I][b] * row[a].partial(phi_J[I])
                entries.append(value)
            block.append(entries)
        omega.append(block)
    return omega


class KernelBasis(NamedTuple):
    basis: List[List[FieldElem]]
    pivots: List[FieldElem]
    pivot_columns: List[int]


def kernel_basis(rows: Sequence[Sequence[FieldElem]], ncols: int) -> KernelBasis:
    """Right kernel by reduced row echelon form, free variables set to unit vectors."""
    A = [[as_field_elem(x) for x in row] for row in rows]
    pivots, pivot_columns = [], []
    r = 0
    for col in range(ncols):
        candidates = [i for i in range(r, len(A)) if not A[i][col].is_zero]
        if not candidates:
            continue
        i = min(candidates, key=lambda k: (A[k][col].term_count, k))
        A[r], A[i] = A[i], A[r]
        pivot = A[r][col]
        pivots.append(pivot)
        A[r] = [x / pivot for x in A[r]]
        for k in range(len(A)):
            if k != r and not A[k][col].is_zero:
                factor = A[k][col]
                A[k] = [x - factor * y for x, y in zip(A[k], A[r])]
        pivot_columns.append(col)
        r += 1
    basis = []
    for free in (c for c in range(ncols) if c not in pivot_columns):
        vector = [FieldElem() for _ in range(ncols)]
        vector[free] = FieldElem(1)
        for row, col in enumerate(pivot_columns):
            vector[col] = -A[row][free]
        basis.append(vector)
    return KernelBasis(basis, pivots, pivot_columns)


def parametric_factors(a: FieldElem, space: JetSpace) -> List[FieldElem]:
    """Nonconstant factors of the numerator that involve parameters only."""
    if a.is_zero:
        return []
    _, factors = sympy.factor_list(a.num)
    return [
        FieldElem(factor)
        for factor, _ in factors
        if factor.free_symbols and all(space.is_param(symbol) for symbol in factor.free_symbols)
    ]


def pfaffian_to_cartan(
    p: PfaffianInput,
    lambda_names: Optional[Sequence[str]] = None,
    allow_parametric_pivots: bool = False,
) -> CartanSystem:
    """Rigid Cartan form D phi^a = Z_alpha^a lambda^alpha of a Pfaffian system.

    Raises:
        DegenerateRank: if a pivot of the contracted curvature has a factor
            that depends on parameters only, so the rank drops on a
            parameter stratum.
    """
    p.check()
    space = p.space
    nfree = space.n - space.m
    omega = curvature(p)
    dbar_phi = [space.jet(JetCoord(JetKind.PHI_A, b, 0, 1)) for b in range(nfree)]
    W = []
    for J in range(space.m):
        row = []
        for a in range(nfree):
            value = FieldElem()
            for b in range(nfree):
                value = value + dbar_phi[b] * omega[J][b][a]
            row.append(value)
        W.append(row)
    kernel = kernel_basis(W, nfree)
    genericity = []
    for pivot in kernel.pivots:
        if pivot.is_constant:
            continue
        factors = parametric_factors(pivot, space)
        if factors and not allow_parametric_pivots:
            raise DegenerateRank(
                f"Pivot {pivot} has the parameter factor {factors[0]}; the rank drops where it vanishes"
            )
        logging.info(f"Reduction assumes the pivot {pivot} does not vanish")
        genericity.append(pivot)
    l = len(kernel.basis)
    if lambda_names is None:
        lambda_names = [f"lam{alpha + 1}" for alpha in range(l)]
    if len(lambda_names) != l:
        raise ValueError(f"Reduction produces {l} multipliers but {len(lambda_names)} names were given")
    target = space.with_lambdas(lambda_names)
    lambdas = [target.lam(alpha) for alpha in range(l)]
    evolution_free = []
    for a in range(nfree):
        value = FieldElem()
        for alpha, vector in enumerate(kernel.basis):
            value = value + vector[a] * lambdas[alpha]
        evolution_free.append(value)
    evolution = []
    for i in range(space.n):
        coord = target.field_coord(i)
        if coord.kind == JetKind.PHI_A:
            evolution.append(evolution_free[coord.index])
        else:
            value = FieldElem()
            for a in range(nfree):
                value = value + p.theta[coord.index][a] * evolution_free[a]
            evolution.append(value)
    constraints = []
    for J in range(space.m):
        value = FieldElem()
        for a in range(nfree):
            value = value + p.theta[J][a] * dbar_phi[a]
        constraints.append(value)
    sys = CartanSystem(target, evolution, constraints, genericity=genericity)
    report = validate(sys)
    if not report.valid:
        raise SystemValidationError(report.violations)
    if l == 1:
        logging.warning("Only one multiplier remains: the integral surface degenerates into a curve")
    return sys
