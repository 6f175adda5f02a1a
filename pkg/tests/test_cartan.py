# Copyright (c) 2023 Graphcore Ltd. All rights reserved.
import logging
from fractions import Fraction

import pytest

from gauge2d.algebra.jetfield import FieldElem, JetCoord, JetKind, JetSpace
from gauge2d.analysis.cartan import (
    CartanSystem,
    DegenerateRank,
    PfaffianInput,
    SystemValidationError,
    compatibility_failures,
    curvature,
    kernel_basis,
    parametric_factors,
    pfaffian_to_cartan,
    validate,
)


def chiral(g=None) -> CartanSystem:
    """D phi = g/2 phi^2 - g/2 lam^2 - dbar(lam), with g symbolic unless given."""
    params = ["g"] if g is None else []
    space = JetSpace(["phi"], lambdas=["lam"], params=params)
    coupling = FieldElem(space.param("g")) if g is None else FieldElem(g)
    phi, lam = space.field(0), space.lam(0)
    dbar_lam = space.jet(JetCoord(JetKind.LAMBDA, 0, 0, 1))
    return CartanSystem(space, [coupling / 2 * phi**2 - coupling / 2 * lam**2 - dbar_lam])


def integrable() -> CartanSystem:
    """D u = D x = lam1, Dbar u = dbar(x)"""
    space = JetSpace(["u", "x"], constrained=["u"], lambdas=["lam1"])
    lam = space.lam(0)
    return CartanSystem(space, [lam, lam], [space.jet(JetCoord(JetKind.PHI_A, 0, 0, 1))])


@pytest.fixture
def chiral_system():
    return chiral()


@pytest.fixture
def chiral_free_system():
    return chiral(0)


@pytest.fixture
def integrable_system():
    return integrable()


@pytest.fixture
def contact_form():
    """theta = dz - c * y dx, with c a parameter"""
    space = JetSpace(["z", "x", "y"], constrained=["z"], params=["c"])
    y = space.jet(JetCoord(JetKind.PHI_A, 1))
    c = FieldElem(space.param("c"))
    return PfaffianInput(space, ((c * y, FieldElem()),))


def test_system_shape(chiral_system, integrable_system):
    assert (chiral_system.n, chiral_system.m, chiral_system.l) == (1, 0, 1)
    assert (integrable_system.n, integrable_system.m, integrable_system.l) == (2, 1, 1)
    assert chiral_system.max_order() == 1
    assert chiral_system.order_bound == 4


def test_wrong_number_of_equations():
    space = JetSpace(["u", "x"], constrained=["u"])
    with pytest.raises(ValueError):
        CartanSystem(space, [space.field(1)])
    with pytest.raises(ValueError):
        CartanSystem(space, [space.field(1), space.field(1)], [])


@pytest.mark.parametrize("system", [chiral, lambda: chiral(0), lambda: chiral(Fraction(1, 3)), integrable])
def test_valid_systems(system):
    report = validate(system())
    assert report.valid, report.violations
    assert report.checked_jets > 0


def test_incompatible_constraint_rejected():
    space = JetSpace(["u", "x"], constrained=["u"])
    x = space.field(1)
    dbar_x = space.jet(JetCoord(JetKind.PHI_A, 0, 0, 1))
    sys = CartanSystem(space, [x, dbar_x], [x**2])
    failures = compatibility_failures(sys)
    assert failures
    coord, residual = failures[0]
    assert coord == JetCoord(JetKind.PHI_J, 0)
    assert residual == 2 * x * dbar_x - dbar_x
    report = validate(sys)
    assert not report.valid
    assert "Compatibility fails on u" in report.violations[0]


def test_constraint_with_multiplier_rejected():
    space = JetSpace(["u", "x"], constrained=["u"], lambdas=["lam"])
    lam = space.lam(0)
    dbar_x = space.jet(JetCoord(JetKind.PHI_A, 0, 0, 1))
    report = validate(CartanSystem(space, [lam, lam], [lam * dbar_x]))
    assert not report.valid
    assert report.violations == ["Constraint of u depends on the multiplier jet lam"]


def test_time_derivative_of_multiplier_rejected():
    space = JetSpace(["phi"], lambdas=["lam"])
    d_lam = space.jet(JetCoord(JetKind.LAMBDA, 0, 1, 0))
    report = validate(CartanSystem(space, [d_lam]))
    assert not report.valid
    assert "time derivative d(lam)" in report.violations[0]


def test_system_substitute(chiral_system):
    specialized = chiral_system.substitute({"g": 0})
    assert specialized.Z_evolution[0] == chiral(0).Z_evolution[0]
    assert validate(specialized).valid


def test_kernel_basis():
    rows = [[FieldElem(1), FieldElem(2), FieldElem(3)], [FieldElem(2), FieldElem(4), FieldElem(7)]]
    kernel = kernel_basis(rows, 3)
    assert kernel.pivot_columns == [0, 2]
    assert len(kernel.basis) == 1
    for vector in kernel.basis:
        for row in rows:
            assert sum((a * b for a, b in zip(row, vector)), FieldElem()).is_zero
    assert kernel_basis([], 2).basis == [[1, 0], [0, 1]]


def test_curvature_is_antisymmetric(contact_form):
    omega = curvature(contact_form)
    c = FieldElem(contact_form.space.param("c"))
    assert omega[0][0][0].is_zero
    assert omega[0][0][1] == -c
    assert omega[0][1][0] == c


def test_integrable_pfaffian_degenerates_to_a_curve(caplog):
    space = JetSpace(["u", "x"], constrained=["u"])
    with caplog.at_level(logging.WARNING):
        sys = pfaffian_to_cartan(PfaffianInput(space, ((FieldElem(1),),)))
    assert "degenerates into a curve" in caplog.text
    assert sys.space.lambdas == ("lam1",)
    assert sys.Z_evolution == integrable().Z_evolution
    assert sys.Z_constraint == integrable().Z_constraint


def test_parametric_pivot_rejected(contact_form):
    with pytest.raises(DegenerateRank):
        pfaffian_to_cartan(contact_form)


def test_parametric_pivot_allowed(contact_form, caplog):
    with caplog.at_level(logging.INFO):
        sys = pfaffian_to_cartan(contact_form, lambda_names=["mu"], allow_parametric_pivots=True)
    space = sys.space
    c = FieldElem(space.param("c"))
    dbar_x = space.jet(JetCoord(JetKind.PHI_A, 0, 0, 1))
    dbar_y = space.jet(JetCoord(JetKind.PHI_A, 1, 0, 1))
    mu, y = space.lam(0), space.field(2)
    assert sys.l == 1
    assert sys.genericity == (c * dbar_y,)
    assert "does not vanish" in caplog.text
    assert sys.Z_evolution == (c * y * dbar_x / dbar_y * mu, dbar_x / dbar_y * mu, mu)
    assert sys.Z_constraint == (c * y * dbar_x,)
    assert validate(sys).valid


def test_parametric_factors(contact_form):
    space = contact_form.space
    c = FieldElem(space.param("c"))
    dbar_y = space.jet(JetCoord(JetKind.PHI_A, 1, 0, 1))
    assert set(parametric_factors(c * (c - 1) * dbar_y, space)) == {c, c - 1}
    assert parametric_factors(dbar_y + c, space) == []


def test_wrong_number_of_multiplier_names():
    space = JetSpace(["u", "x"], constrained=["u"])
    with pytest.raises(ValueError):
        pfaffian_to_cartan(PfaffianInput(space, ((FieldElem(1),),)), lambda_names=["a", "b"])


def test_pfaffian_entries_only_depend_on_fields():
    space = JetSpace(["u", "x"], constrained=["u"])
    dbar_x = space.jet(JetCoord(JetKind.PHI_A, 0, 0, 1))
    with pytest.raises(SystemValidationError):
        pfaffian_to_cartan(PfaffianInput(space, ((dbar_x,),)))
