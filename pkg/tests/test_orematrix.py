# Copyright (c) 2023 Graphcore Ltd. All rights reserved.
import random

import pytest

from gauge2d.algebra import orematrix
from gauge2d.algebra.ore import OreOp
from gauge2d.algebra.orematrix import (
    DecompositionIncomplete,
    OreMatrix,
    free_basis,
    jacobson,
    left_nullspace,
    rank,
    solve_left,
)

from . import test_cartan

chiral_free_system = test_cartan.chiral_free_system

RANDOM_MATRICES = 120


def random_entry(rng: random.Random, sys, max_q: int = 2) -> OreOp:
    space = sys.space
    pool = [0, 0, 0, 1, -1, 2, space.field(0), space.lam(0)]
    terms = {(0, q): rng.choice(pool) for q in range(rng.randint(0, max_q) + 1)}
    return OreOp(terms, sys)


def random_matrix(rng: random.Random, sys) -> OreMatrix:
    nrows, ncols = rng.randint(1, 3), rng.randint(1, 3)
    return OreMatrix([[random_entry(rng, sys) for _ in range(ncols)] for _ in range(nrows)], sys)


def check_decomposition(M: OreMatrix):
    sys = M.sys
    d = jacobson(M, sys.order_bound)
    assert d.U @ M @ d.V == d.block_form(M.nrows, M.ncols)
    assert d.U @ d.Uinv == OreMatrix.identity(M.nrows, sys)
    assert d.V @ d.Vinv == OreMatrix.identity(M.ncols, sys)
    assert d.rank <= min(M.shape)
    if d.rank:
        assert not d.Delta.is_zero
        assert d.Delta.leading_coefficient.is_one
    return d


@pytest.mark.parametrize("seed", range(RANDOM_MATRICES))
def test_random_jacobson(chiral_free_system, seed):
    rng = random.Random(seed)
    M = random_matrix(rng, chiral_free_system)
    d = check_decomposition(M)
    nullspace = left_nullspace(M, d)
    assert nullspace.nrows == M.nrows - d.rank
    assert (nullspace @ M).is_zero


def test_diagonal_needs_mixing(chiral_free_system):
    sys = chiral_free_system
    Dbar = OreOp.Dbar(sys)
    M = OreMatrix([[Dbar, 0], [0, Dbar]], sys)
    d = check_decomposition(M)
    assert d.rank == 2
    assert d.Delta.order == 2


@pytest.mark.parametrize("seed", range(10))
def test_triangular_order_is_additive(chiral_free_system, seed):
    rng = random.Random(1000 + seed)
    sys = chiral_free_system
    a = random_entry(rng, sys, max_q=1) + OreOp.monomial(0, 2, sys)
    b = random_entry(rng, sys, max_q=0) + OreOp.monomial(0, 1, sys)
    M = OreMatrix([[a, random_entry(rng, sys)], [0, b]], sys)
    d = check_decomposition(M)
    assert d.rank == 2
    assert d.Delta.order == a.order + b.order


def test_rank_of_dependent_rows(chiral_free_system):
    sys = chiral_free_system
    phi = sys.space.field(0)
    Dbar = OreOp.Dbar(sys)
    row = [Dbar + phi, OreOp.monomial(0, 2, sys)]
    M = OreMatrix([row, [Dbar * entry for entry in row]], sys)
    assert rank(M) == 1
    nullspace = left_nullspace(M)
    assert nullspace.nrows == 1
    assert (nullspace @ M).is_zero


@pytest.mark.parametrize("seed", range(20))
def test_solve_left(chiral_free_system, seed):
    rng = random.Random(500 + seed)
    sys = chiral_free_system
    M = random_matrix(rng, sys)
    x = OreMatrix.row_vector([random_entry(rng, sys, max_q=1) for _ in range(M.nrows)], sys)
    v = x @ M
    y = solve_left(M, v)
    assert y is not None
    assert y @ M == v


def test_solve_left_outside_module(chiral_free_system):
    sys = chiral_free_system
    Dbar = OreOp.Dbar(sys)
    M = OreMatrix([[Dbar, 0]], sys)
    assert solve_left(M, OreMatrix.row_vector([0, 1], sys)) is None
    assert solve_left(M, OreMatrix.row_vector([1, 0], sys)) is None
    assert solve_left(M, OreMatrix.row_vector([Dbar * Dbar, 0], sys)) == OreMatrix.row_vector([Dbar], sys)
    with pytest.raises(ValueError):
        solve_left(M, OreMatrix.row_vector([1], sys))


@pytest.mark.parametrize("seed", range(10))
def test_free_basis_spans_the_row_module(chiral_free_system, seed):
    rng = random.Random(700 + seed)
    sys = chiral_free_system
    M = random_matrix(rng, sys)
    basis = free_basis(M)
    assert basis.nrows == rank(M)
    for row in M.rows():
        assert solve_left(basis, row) is not None
    for row in basis.rows():
        assert solve_left(M, row) is not None


def test_matrix_algebra(chiral_free_system):
    sys = chiral_free_system
    phi = sys.space.field(0)
    D, Dbar = OreOp.D(sys), OreOp.Dbar(sys)
    A = OreMatrix([[D, phi], [0, Dbar]], sys)
    assert A.adjoint() == OreMatrix([[-D, 0], [phi, -Dbar]], sys)
    assert A.adjoint().adjoint() == A
    assert A + (-A) == OreMatrix.zeros(2, 2, sys)
    assert OreMatrix.stack([A, A.row(0)], 2, sys).shape == (3, 2)
    assert OreMatrix.hstack([A, A], 2, sys).shape == (2, 4)
    assert A @ OreMatrix.identity(2, sys) == A
    with pytest.raises(ValueError):
        A @ OreMatrix.zeros(3, 1, sys)


def test_jacobson_needs_rbar(chiral_free_system):
    sys = chiral_free_system
    with pytest.raises(ValueError):
        jacobson(OreMatrix([[OreOp.D(sys)]], sys))


def test_mixing_budget(chiral_free_system, monkeypatch):
    sys = chiral_free_system
    Dbar = OreOp.Dbar(sys)
    monkeypatch.setattr(orematrix, "MAX_MIXING_ROUNDS", 0)
    with pytest.raises(DecompositionIncomplete):
        jacobson(OreMatrix([[Dbar, 0], [0, Dbar]], sys))
