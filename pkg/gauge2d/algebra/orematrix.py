# Copyright (c) 2023 Graphcore Ltd. All rights reserved.
"""
Matrices of operators and linear algebra over F[Dbar].

The workhorse is `jacobson`, which brings a matrix to diag(1, ..., 1, Delta)
with elementary row and column operations, keeping both unimodular factors
and their inverses. Rank, left nullspaces, solvability and free bases are
all read off one decomposition.
"""
import logging
from typing import Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

import sympy

from .jetfield import Coercible, FieldElem, as_field_elem
from .ore import OreOp, divide_left, divide_right, transpose

__all__ = [
    "DecompositionIncomplete",
    "OreMatrix",
    "JacobsonDecomposition",
    "jacobson",
    "rank",
    "left_nullspace",
    "solve_left",
    "free_basis",
]

MAX_MIXING_ROUNDS = 64


class DecompositionIncomplete(Exception):
    pass


def _as_op(entry: Union[OreOp, Coercible], sys) -> OreOp:
    if isinstance(entry, OreOp):
        return entry
    return OreOp.const(entry, sys)


class OreMatrix:
    """Immutable dense matrix of operators."""

    __slots__ = ("entries", "nrows", "ncols", "sys")

    def __init__(self, entries: Sequence[Sequence[Union[OreOp, Coercible]]], sys, shape: Optional[Tuple[int, int]] = None):
        self.sys = sys
        self.entries: Tuple[Tuple[OreOp, ...], ...] = tuple(tuple(_as_op(e, sys) for e in row) for row in entries)
        if shape is None:
            shape = (len(self.entries), len(self.entries[0]) if self.entries else 0)
        self.nrows, self.ncols = shape
        if len(self.entries) != self.nrows or any(len(row) != self.ncols for row in self.entries):
            raise ValueError(f"Matrix entries do not match the shape {shape}")

    @classmethod
    def zeros(cls, nrows: int, ncols: int, sys) -> "OreMatrix":
        zero = OreOp.zero(sys)
        return cls([[zero] * ncols for _ in range(nrows)], sys, (nrows, ncols))

    @classmethod
    def identity(cls, n: int, sys) -> "OreMatrix":
        one, zero = OreOp.one(sys), OreOp.zero(sys)
        return cls([[one if i == j else zero for j in range(n)] for i in range(n)], sys, (n, n))

    @classmethod
    def row_vector(cls, entries: Sequence[Union[OreOp, Coercible]], sys) -> "OreMatrix":
        return cls([list(entries)], sys, (1, len(entries)))

    @classmethod
    def stack(cls, matrices: Sequence["OreMatrix"], ncols: int, sys) -> "OreMatrix":
        """Stack matrices vertically."""
        rows = []
        for matrix in matrices:
            if matrix.ncols != ncols:
                raise ValueError(f"Cannot stack a matrix with {matrix.ncols} columns onto {ncols} columns")
            rows.extend(matrix.entries)
        return cls(rows, sys, (len(rows), ncols))

    @classmethod
    def hstack(cls, matrices: Sequence["OreMatrix"], nrows: int, sys) -> "OreMatrix":
        rows = [[] for _ in range(nrows)]
        for matrix in matrices:
            if matrix.nrows != nrows:
                raise ValueError(f"Cannot place a matrix with {matrix.nrows} rows next to {nrows} rows")
            for i, row in enumerate(matrix.entries):
                rows[i].extend(row)
        return cls(rows, sys, (nrows, sum(matrix.ncols for matrix in matrices)))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.nrows, self.ncols

    def __getitem__(self, index: Tuple[int, int]) -> OreOp:
        i, j = index
        return self.entries[i][j]

    def row(self, i: int) -> "OreMatrix":
        return OreMatrix([self.entries[i]], self.sys, (1, self.ncols))

    def rows(self) -> Iterator["OreMatrix"]:
        for i in range(self.nrows):
            yield self.row(i)

    def column(self, j: int) -> List[OreOp]:
        return [row[j] for row in self.entries]

    @property
    def is_zero(self) -> bool:
        return all(entry.is_zero for row in self.entries for entry in row)

    @property
    def is_rbar(self) -> bool:
        return all(entry.is_rbar for row in self.entries for entry in row)

    def map(self, fn) -> "OreMatrix":
        return OreMatrix([[fn(entry) for entry in row] for row in self.entries], self.sys, self.shape)

    def transposed(self) -> "OreMatrix":
        return OreMatrix(
            [[self.entries[i][j] for i in range(self.nrows)] for j in range(self.ncols)],
            self.sys,
            (self.ncols, self.nrows),
        )

    def adjoint(self) -> "OreMatrix":
        """Matrix transpose combined with the formal adjoint of each entry."""
        return self.transposed().map(transpose)

    def __matmul__(self, other: "OreMatrix") -> "OreMatrix":
        if self.ncols != other.nrows:
            raise ValueError(f"Cannot multiply shapes {self.shape} and {other.shape}")
        zero = OreOp.zero(self.sys)
        rows = []
        for i in range(self.nrows):
            row = []
            for j in range(other.ncols):
                total = zero
                for k in range(self.ncols):
                    left, right = self.entries[i][k], other.entries[k][j]
                    if left.is_zero or right.is_zero:
                        continue
                    total = total + left * right
                row.append(total)
            rows.append(row)
        return OreMatrix(rows, self.sys, (self.nrows, other.ncols))

    def __add__(self, other: "OreMatrix") -> "OreMatrix":
        if self.shape != other.shape:
            raise ValueError(f"Cannot add shapes {self.shape} and {other.shape}")
        return OreMatrix(
            [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(self.entries, other.entries)], self.sys, self.shape
        )

    def __neg__(self) -> "OreMatrix":
        return self.map(lambda entry: -entry)

    def __sub__(self, other: "OreMatrix") -> "OreMatrix":
        return self + (-other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, OreMatrix):
            return NotImplemented
        return self.shape == other.shape and all(
            a == b for ra, rb in zip(self.entries, other.entries) for a, b in zip(ra, rb)
        )

    def __hash__(self) -> int:
        return hash(self.entries)

    def render(self) -> List[List[str]]:
        return [[entry.render() for entry in row] for row in self.entries]

    def __repr__(self) -> str:
        return f"OreMatrix({self.render()!r})"


class JacobsonDecomposition(NamedTuple):
    """U * M * V = diag(1, ..., 1, Delta) padded with zeros."""

    U: OreMatrix
    V: OreMatrix
    Uinv: OreMatrix
    Vinv: OreMatrix
    rank: int
    Delta: OreOp

    def block_form(self, nrows: int, ncols: int) -> OreMatrix:
        sys = self.U.sys
        one, zero = OreOp.one(sys), OreOp.zero(sys)
        rows = [[zero] * ncols for _ in range(nrows)]
        for t in range(self.rank):
            rows[t][t] = self.Delta if t == self.rank - 1 else one
        return OreMatrix(rows, sys, (nrows, ncols))


def _identity_rows(n: int, sys) -> List[List[OreOp]]:
    return [list(row) for row in OreMatrix.identity(n, sys).entries]


class _Elimination:
    """Elementary operations on M with U, Uinv, V, Vinv kept in step.

    Invariants: A = U M V, U Uinv = 1 and V Vinv = 1.
    """

    def __init__(self, M: OreMatrix):
        if not M.is_rbar:
            raise ValueError("Jacobson decomposition is only defined over F[Dbar]")
        self.sys = M.sys
        self.r, self.c = M.shape
        self.A = [list(row) for row in M.entries]
        self.U = _identity_rows(self.r, self.sys)
        self.Uinv = _identity_rows(self.r, self.sys)
        self.V = _identity_rows(self.c, self.sys)
        self.Vinv = _identity_rows(self.c, self.sys)

    def add_row(self, i: int, j: int, coef: OreOp):
        """row_i += coef * row_j"""
        for k in range(self.c):
            if not self.A[j][k].is_zero:
                self.A[i][k] = self.A[i][k] + coef * self.A[j][k]
        for k in range(self.r):
            if not self.U[j][k].is_zero:
                self.U[i][k] = self.U[i][k] + coef * self.U[j][k]
            if not self.Uinv[k][i].is_zero:
                self.Uinv[k][j] = self.Uinv[k][j] - self.Uinv[k][i] * coef

    def scale_row(self, i: int, factor: FieldElem):
        scale, inverse = OreOp.const(factor, self.sys), OreOp.const(1 / factor, self.sys)
        self.A[i] = [scale * entry for entry in self.A[i]]
        self.U[i] = [scale * entry for entry in self.U[i]]
        for k in range(self.r):
            self.Uinv[k][i] = self.Uinv[k][i] * inverse

    def swap_rows(self, i: int, j: int):
        self.A[i], self.A[j] = self.A[j], self.A[i]
        self.U[i], self.U[j] = self.U[j], self.U[i]
        for row in self.Uinv:
            row[i], row[j] = row[j], row[i]

    def add_col(self, i: int, j: int, coef: OreOp):
        """col_i += col_j * coef"""
        for k in range(self.r):
            if not self.A[k][j].is_zero:
                self.A[k][i] = self.A[k][i] + self.A[k][j] * coef
        for k in range(self.c):
            if not self.V[k][j].is_zero:
                self.V[k][i] = self.V[k][i] + self.V[k][j] * coef
            if not self.Vinv[i][k].is_zero:
                self.Vinv[j][k] = self.Vinv[j][k] - coef * self.Vinv[i][k]

    def swap_cols(self, i: int, j: int):
        for row in self.A:
            row[i], row[j] = row[j], row[i]
        for row in self.V:
            row[i], row[j] = row[j], row[i]
        self.Vinv[i], self.Vinv[j] = self.Vinv[j], self.Vinv[i]

    def _pivot(self, t: int, stop_r: int, stop_c: int) -> Optional[Tuple[int, int, int, int]]:
        best = None
        for i in range(t, stop_r):
            for j in range(t, stop_c):
                entry = self.A[i][j]
                if entry.is_zero:
                    continue
                key = (entry.order, entry.term_count, i, j)
                if best is None or key < best:
                    best = key
        return best

    def staircase(self, start: int, stop_r: int, stop_c: int) -> int:
        """Diagonalize the window [start, stop), returning the end of the diagonal."""
        t = start
        while t < min(stop_r, stop_c):
            best = self._pivot(t, stop_r, stop_c)
            if best is None:
                break
            _, _, i, j = best
            if i != t:
                self.swap_rows(t, i)
            if j != t:
                self.swap_cols(t, j)
            while True:
                smallest = None
                for i in range(t + 1, stop_r):
                    if self.A[i][t].is_zero:
                        continue
                    quotient, remainder = divide_right(self.A[i][t], self.A[t][t])
                    if not quotient.is_zero:
                        self.add_row(i, t, -quotient)
                    if not remainder.is_zero:
                        key = (remainder.order, remainder.term_count, i)
                        smallest = key if smallest is None or key < smallest else smallest
                if smallest is not None:
                    logging.debug(f"Row remainder of order {smallest[0]} replaces pivot {t}")
                    self.swap_rows(t, smallest[2])
                    continue
                for j in range(t + 1, stop_c):
                    if self.A[t][j].is_zero:
                        continue
                    quotient, remainder = divide_left(self.A[t][j], self.A[t][t])
                    if not quotient.is_zero:
                        self.add_col(j, t, -quotient)
                    if not remainder.is_zero:
                        key = (remainder.order, remainder.term_count, j)
                        smallest = key if smallest is None or key < smallest else smallest
                if smallest is not None:
                    logging.debug(f"Column remainder of order {smallest[0]} replaces pivot {t}")
                    self.swap_cols(t, smallest[2])
                    continue
                break
            t += 1
        return t

    def normalize(self, t: int):
        lc = self.A[t][t].leading_coefficient
        if not lc.is_one:
            self.scale_row(t, 1 / lc)

    def _mixing_candidates(self, a: OreOp, b: OreOp, order_bound: int) -> Iterator[OreOp]:
        sys = self.sys
        for k in range(a.order + 1):
            yield OreOp.monomial(0, k, sys)
        symbols = set()
        for op in (a, b):
            for coef in op.terms.values():
                symbols |= coef.symbols
        space = sys.space
        jets = sorted(
            (s for s in symbols if space.coord_of(s) is not None),
            key=sympy.default_sort_key,
        )
        jets += [space.symbol(coord) for coord in space.jets_up_to(order_bound) if space.symbol(coord) not in symbols]
        for symbol in jets:
            v = as_field_elem(symbol)
            for power in (1, 2):
                for k in range(a.order + 1):
                    yield OreOp.monomial(0, k, sys, v**power)

    def mix(self, t: int, order_bound: int):
        """Make the diagonal entry t a unit by mixing it with entry t + 1."""
        for _ in range(MAX_MIXING_ROUNDS):
            a, b = self.A[t][t], self.A[t + 1][t + 1]
            if a.order == 0:
                return
            if b.order == 0:
                self.swap_rows(t, t + 1)
                self.swap_cols(t, t + 1)
                continue
            for coef in self._mixing_candidates(a, b, order_bound):
                _, remainder = divide_left(coef * b, a)
                if not remainder.is_zero:
                    break
            else:
                raise DecompositionIncomplete(
                    f"No mixing coefficient found for diagonal entries {a} and {b} up to jet order {order_bound}"
                )
            logging.debug(f"Mixing diagonal entries {t} and {t + 1} through {coef}")
            self.add_row(t, t + 1, coef)
            quotient, _ = divide_left(self.A[t][t + 1], a)
            self.add_col(t + 1, t, -quotient)
            self.staircase(t, t + 2, t + 2)
            self.normalize(t)
            self.normalize(t + 1)
        raise DecompositionIncomplete(f"Diagonal entry {t} did not become a unit in {MAX_MIXING_ROUNDS} rounds")


def jacobson(M: OreMatrix, order_bound: int = 2) -> JacobsonDecomposition:
    """Jacobson normal form with unimodular factors and their inverses.

    Args:
        M: matrix over F[Dbar]
        order_bound: jets up to this order are tried as mixing coefficients
            besides the jets already present in the diagonal

    Returns:
        JacobsonDecomposition with U M V = diag(1, ..., 1, Delta)
    """
    elimination = _Elimination(M)
    rank = elimination.staircase(0, elimination.r, elimination.c)
    for t in range(rank):
        elimination.normalize(t)
    for t in range(rank - 1):
        elimination.mix(t, order_bound)
    sys = M.sys
    delta = elimination.A[rank - 1][rank - 1] if rank else OreOp.zero(sys)
    r, c = elimination.r, elimination.c
    return JacobsonDecomposition(
        U=OreMatrix(elimination.U, sys, (r, r)),
        V=OreMatrix(elimination.V, sys, (c, c)),
        Uinv=OreMatrix(elimination.Uinv, sys, (r, r)),
        Vinv=OreMatrix(elimination.Vinv, sys, (c, c)),
        rank=rank,
        Delta=delta,
    )


def rank(M: OreMatrix) -> int:
    return jacobson(M).rank


def left_nullspace(M: OreMatrix, decomposition: Optional[JacobsonDecomposition] = None) -> OreMatrix:
    """Rows freely generating {x : x M = 0}."""
    decomposition = decomposition or jacobson(M)
    rows = decomposition.U.entries[decomposition.rank :]
    return OreMatrix(rows, M.sys, (M.nrows - decomposition.rank, M.nrows))


def solve_left(
    M: OreMatrix, v: OreMatrix, decomposition: Optional[JacobsonDecomposition] = None
) -> Optional[OreMatrix]:
    """A row x with x M = v, or None when v is not in the row module of M."""
    if v.shape != (1, M.ncols):
        raise ValueError(f"Right hand side of shape {v.shape} does not match {M.shape}")
    decomposition = decomposition or jacobson(M)
    r = decomposition.rank
    w = (v @ decomposition.V).entries[0]
    if any(not entry.is_zero for entry in w[r:]):
        return None
    y = [OreOp.zero(M.sys)] * M.nrows
    for j in range(r - 1):
        y[j] = w[j]
    if r:
        quotient, remainder = divide_right(w[r - 1], decomposition.Delta)
        if not remainder.is_zero:
            return None
        y[r - 1] = quotient
    return OreMatrix([y], M.sys, (1, M.nrows)) @ decomposition.U


def free_basis(generators: OreMatrix, decomposition: Optional[JacobsonDecomposition] = None) -> OreMatrix:
    """A free basis of the left module spanned by the rows of `generators`."""
    decomposition = decomposition or jacobson(generators)
    r = decomposition.rank
    rows = [list(row) for row in decomposition.Vinv.entries[: r - 1]] if r else []
    if r:
        rows.append([decomposition.Delta * entry for entry in decomposition.Vinv.entries[r - 1]])
    return OreMatrix(rows, generators.sys, (r, generators.ncols))
