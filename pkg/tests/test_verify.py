# Copyright (c) 2023 Graphcore Ltd. All rights reserved.
import logging
import time

import pytest

from gauge2d.algebra.jetfield import FieldElem
from gauge2d.algebra.ore import OreOp
from gauge2d.algebra.orematrix import OreMatrix
from gauge2d.analysis.noether import Resolution, analyze
from gauge2d.analysis.verify import (
    check_gauge,
    check_rank_law,
    check_reducibility,
    compare_specialization,
    dof_count,
    linearize,
)

from . import test_cartan, test_noether

TIME_BUDGET = 60.0

ALL_SYSTEMS = [
    test_cartan.chiral,
    lambda: test_cartan.chiral(0),
    test_cartan.integrable,
    test_noether.free_lambda,
    test_noether.gaugeless,
]

chiral_system = test_cartan.chiral_system
chiral_free_system = test_cartan.chiral_free_system
integrable_system = test_cartan.integrable_system


def test_linearize_chiral(chiral_system):
    sys = chiral_system
    phi, lam = sys.space.field(0), sys.space.lam(0)
    g = FieldElem(sys.space.param("g"))
    E = linearize(sys).E
    assert E == OreMatrix([[OreOp.D(sys) - g * phi, OreOp.Dbar(sys) + g * lam]], sys)


def test_linearize_constraints(integrable_system):
    sys = integrable_system
    E = linearize(sys).E
    assert E.shape == (3, 3)
    assert E.row(2) == OreMatrix.row_vector([OreOp.Dbar(sys), -OreOp.Dbar(sys), 0], sys)


@pytest.mark.parametrize(
    "system",
    [test_cartan.chiral, lambda: test_cartan.chiral(0), test_cartan.integrable, test_noether.free_lambda],
)
def test_generators_are_gauge_symmetries(system):
    sys = system()
    res = analyze(sys).resolution
    report = check_gauge(linearize(sys), res)
    assert report.passed
    assert report.residuals == []
    reducibility = check_reducibility(res, sys)
    assert reducibility.passed
    assert reducibility.injective
    assert reducibility.rank_law


def test_perturbed_generator_fails(chiral_free_system, caplog):
    sys = chiral_free_system
    res = analyze(sys).resolution
    wrong = res._replace(R_gen=OreMatrix([[OreOp.Dbar(sys)], [OreOp.D(sys)]], sys))
    with caplog.at_level(logging.ERROR):
        report = check_gauge(linearize(sys), wrong)
    assert not report.passed
    assert [(r.row, r.column) for r in report.residuals] == [(0, 0)]
    assert "Gauge invariance fails" in caplog.text


def test_shape_mismatch_fails(chiral_system, integrable_system):
    res = analyze(integrable_system).resolution
    report = check_gauge(linearize(chiral_system), res)
    assert not report.passed
    assert "shape mismatch" in report.residuals[0].value


def corrupt(M: OreMatrix, i: int, j: int) -> OreMatrix:
    entries = [list(row) for row in M.entries]
    entries[i][j] = entries[i][j] + 1
    return OreMatrix(entries, M.sys, M.shape)


def test_corrupted_generator_coefficient_fails(chiral_system):
    sys = chiral_system
    res = analyze(sys).resolution
    report = check_gauge(linearize(sys), res._replace(R_gen=corrupt(res.R_gen, 0, 0)))
    assert not report.passed
    assert [(r.row, r.column) for r in report.residuals] == [(0, 0)]


def test_corrupted_reducibility_coefficient_fails(chiral_system):
    sys = chiral_system
    res = analyze(sys).resolution
    report = check_reducibility(res._replace(Z_gen=corrupt(res.Z_gen, 0, 0)), sys)
    assert not report.passed
    assert report.residuals
    assert not report.injective


def test_rank_law(chiral_system):
    res = analyze(chiral_system).resolution
    assert check_rank_law(res, chiral_system)
    assert not check_rank_law(res._replace(r1=3), chiral_system)
    assert not check_reducibility(res._replace(r2=2, Z_gen=res.Z_gen), chiral_system).rank_law


@pytest.mark.parametrize(
    "system, rank, dof",
    [
        (test_cartan.chiral, 1, 0),
        (lambda: test_cartan.chiral(0), 1, 0),
        (test_cartan.integrable, 1, 0),
        (test_noether.free_lambda, 1, 0),
        (test_noether.gaugeless, 0, 1),
    ],
)
def test_dof_count(system, rank, dof):
    sys = system()
    report = dof_count(analyze(sys).resolution, sys)
    assert report.rank_Rbar == rank
    assert report.dof == dof
    assert report.flag == "conjectural"
    assert report.consistent


def test_specialization_changes_the_gauge_algebra(chiral_system, caplog):
    analysis = analyze(chiral_system)
    with caplog.at_level(logging.WARNING):
        report = compare_specialization(analysis, {"g": 0})
    assert report.generic_r1 == 2
    assert report.specialized_r1 == 1
    assert report.failure
    assert report.resolution.R_gen == OreMatrix([[OreOp.Dbar(chiral_system)], [-OreOp.D(chiral_system)]], chiral_system)
    assert report.notes
    assert all(note.startswith("SpecializationFailure:") for note in report.notes)
    assert "SpecializationFailure" in caplog.text


def test_regular_specialization(chiral_system):
    report = compare_specialization(analyze(chiral_system), {"g": 2})
    assert report.generic_r1 == report.specialized_r1 == 2
    assert report.substituted_generators_valid
    assert not report.failure
    assert report.notes == []


@pytest.mark.parametrize("system", ALL_SYSTEMS)
def test_rank_law_and_injectivity(system):
    sys = system()
    res = analyze(sys).resolution
    assert check_rank_law(res, sys)
    report = check_reducibility(res, sys)
    assert report.injective
    assert report.rank_law


def test_missing_reducibility_relation_breaks_the_rank_law(chiral_system):
    sys = chiral_system
    res = analyze(sys).resolution
    dropped = Resolution(res.R_gen, OreMatrix.zeros(res.r1, 0, sys), res.r1, res.r2 - 1)
    assert not check_rank_law(dropped, sys)
    report = check_reducibility(dropped, sys)
    assert not report.rank_law
    assert not report.passed
    free = test_noether.free_lambda()
    res = analyze(free).resolution
    assert not check_rank_law(res._replace(r2=res.r2 + 1), free)


@pytest.mark.parametrize("system", [test_cartan.chiral, test_noether.chiral_pair, test_noether.nonlinear_chain])
def test_nonlinear_systems_verify_in_time(system):
    sys = system()
    start = time.perf_counter()
    analysis = analyze(sys)
    res = analysis.resolution
    assert check_gauge(linearize(sys), res).passed
    assert check_reducibility(res, sys).passed
    elapsed = time.perf_counter() - start
    assert analysis.K >= 1
    assert res.r1 - res.r2 == sys.l
    assert elapsed < TIME_BUDGET
