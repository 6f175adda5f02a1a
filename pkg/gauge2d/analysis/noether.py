# Copyright (c) 2023 Graphcore Ltd. All rights reserved.
"""
Gauge generators from Noether identities of the Pontryagin action.

The multiplier constraints T_alpha are linear in the momenta, T = row * pi
with row in F[Dbar]^(1 x n). Differentiating in time on-shell gives new rows
and a certificate, the operator coefficient of the momentum equations
T_i = dS/dphi^i:

    D^k T_alpha = row^(k) * pi + cert^(k) * T_col

Once the rows stop producing new directions their syzygies are the Noether
identities, and dualizing them gives the gauge generators.
"""
import logging
from typing import List, NamedTuple, Optional, Sequence

from ..algebra.jetfield import FieldElem, JetKind
from ..algebra.ore import OreOp
from ..algebra.orematrix import OreMatrix, jacobson, left_nullspace, solve_left
from .cartan import CartanSystem

__all__ = [
    "BudgetExceeded",
    "ExpansionFailure",
    "ConstraintTrack",
    "SyzygyGenSet",
    "Resolution",
    "Analysis",
    "primary_constraints",
    "momentum_evolution",
    "d_step",
    "stabilize",
    "syzygy_generating_set",
    "second_syzygies",
    "dualize",
    "flatten_covector",
    "normalize_generators",
    "analyze",
]


class BudgetExceeded(Exception):
    pass


class ExpansionFailure(Exception):
    pass


class ConstraintTrack(NamedTuple):
    """Row and certificate of D^k T_alpha."""

    row: OreMatrix
    cert: OreMatrix
    k: int


class SyzygyGenSet(NamedTuple):
    """Generators of the syzygies of the stacked constraint rows.

    Covectors are 1 x l rows over F[D, Dbar]; the power of D selects the
    level of the history they act on.
    """

    M_alpha: OreMatrix
    M_A: OreMatrix
    K: int
    r1: int

    def generators(self) -> OreMatrix:
        l = self.M_alpha.ncols
        return OreMatrix.stack([self.M_alpha, self.M_A], l, self.M_alpha.sys)


class Resolution(NamedTuple):
    """Gauge generators R_gen ((n + l) x r1) and reducibility relations Z_gen (r1 x r2)."""

    R_gen: OreMatrix
    Z_gen: OreMatrix
    r1: int
    r2: int


class Analysis(NamedTuple):
    sys: CartanSystem
    history: List[List[ConstraintTrack]]
    K: int
    syzygies: SyzygyGenSet
    N: OreMatrix
    resolution: Resolution


def primary_constraints(sys: CartanSystem) -> List[ConstraintTrack]:
    """T_alpha = -sum_n (-Dbar)^n (dZ^i/d(Dbar^n lambda^alpha) pi_i)"""
    space = sys.space
    zero_cert = OreMatrix.zeros(1, sys.n, sys)
    tracks = []
    for alpha in range(sys.l):
        entries = []
        for z in sys.Z_evolution:
            entry = OreOp.zero(sys)
            for symbol in z.symbols:
                coord = space.coord_of(symbol)
                if coord is None or coord.kind != JetKind.LAMBDA or coord.index != alpha:
                    continue
                sign = 1 if coord.q % 2 else -1
                entry = entry + OreOp.monomial(0, coord.q, sys, sign) * OreOp.const(z.partial(symbol), sys)
            entries.append(entry)
        tracks.append(ConstraintTrack(OreMatrix.row_vector(entries, sys), zero_cert, 0))
    return tracks


def momentum_evolution(sys: CartanSystem) -> OreMatrix:
    """P with D pi_i = sum_j P_ij pi_j on-shell.

    P_ij = -sum_n (-Dbar)^n dZ^j/d(Dbar^n phi^i)
    """
    space = sys.space
    rows = [[OreOp.zero(sys) for _ in range(sys.n)] for _ in range(sys.n)]
    for j, z in enumerate(sys.Z_evolution):
        for symbol in z.symbols:
            coord = space.coord_of(symbol)
            if coord is None or coord.kind == JetKind.LAMBDA:
                continue
            i = space.field_index(coord)
            sign = 1 if coord.q % 2 else -1
            rows[i][j] = rows[i][j] + OreOp.monomial(0, coord.q, sys, sign) * OreOp.const(z.partial(symbol), sys)
    return OreMatrix(rows, sys, (sys.n, sys.n))


def d_step(t: ConstraintTrack, sys: CartanSystem, P: Optional[OreMatrix] = None) -> ConstraintTrack:
    """Time derivative of a constraint density, substituting the momentum equations."""
    P = momentum_evolution(sys) if P is None else P
    differentiated = t.row.map(lambda entry: entry.map_coefficients(sys.dtime))
    row = differentiated + t.row @ P
    D = OreOp.D(sys)
    cert = t.cert.map(lambda entry: D * entry) - t.row
    logging.debug(f"D-step {t.k} -> {t.k + 1}: {row.render()}")
    return ConstraintTrack(row, cert, t.k + 1)


def _stacked_rows(history: Sequence[Sequence[ConstraintTrack]], levels: int, sys: CartanSystem) -> OreMatrix:
    rows = [track.row for level in history[:levels] for track in level]
    return OreMatrix.stack(rows, sys.n, sys)


def stabilize(tracks: Sequence[ConstraintTrack], sys: CartanSystem, max_k: Optional[int] = None):
    """Iterate D-steps until the next level lies in the span of the history.

    Returns:
        (K, history) where history[k][alpha] is the track at level k for
        k = 0, ..., K + 1.
    """
    max_k = sys.n + sys.l + 2 if max_k is None else max_k
    if max_k < 0:
        raise ValueError(f"max_k must be non-negative, got {max_k}")
    history = [list(tracks)]
    if not tracks:
        return 0, history + [[]]
    P = momentum_evolution(sys)
    for K in range(max_k + 1):
        following = [d_step(track, sys, P) for track in history[K]]
        stacked = _stacked_rows(history, K + 1, sys)
        decomposition = jacobson(stacked, sys.order_bound)
        history.append(following)
        if all(solve_left(stacked, track.row, decomposition) is not None for track in following):
            logging.info(f"Constraint module stabilizes at K = {K} with rank {decomposition.rank}")
            return K, history
        logging.debug(f"Level {K + 1} adds new constraint directions")
    raise BudgetExceeded(f"No stabilization within {max_k} D-steps")


def _covector_from_levels(coefficients: Sequence[OreOp], levels: int, l: int, sys: CartanSystem) -> List[OreOp]:
    """sum_k c[k * l + beta] D^k for each beta."""
    covector = []
    for beta in range(l):
        entry = OreOp.zero(sys)
        for k in range(levels):
            entry = entry + coefficients[k * l + beta].shift_d(k)
        covector.append(entry)
    return covector


def flatten_covector(covector: Sequence[OreOp], levels: int, sys: CartanSystem) -> List[OreOp]:
    """Coefficients of D^k, k < levels, as one F[Dbar] row indexed k * len + beta."""
    width = len(covector)
    flat = [OreOp.zero(sys)] * (levels * width)
    for beta, entry in enumerate(covector):
        for k, part in entry.d_coefficients().items():
            if k >= levels:
                raise ExpansionFailure(f"Covector entry {entry} exceeds D-degree {levels - 1}")
            flat[k * width + beta] = part
    return flat


def syzygy_generating_set(history: Sequence[Sequence[ConstraintTrack]], K: int, sys: CartanSystem) -> SyzygyGenSet:
    l = len(history[0])
    if not l:
        empty = OreMatrix.zeros(0, 0, sys)
        return SyzygyGenSet(empty, empty, K, 0)
    stacked = _stacked_rows(history, K + 1, sys)
    decomposition = jacobson(stacked, sys.order_bound)
    M_alpha = []
    for alpha, track in enumerate(history[K + 1]):
        x = solve_left(stacked, track.row, decomposition)
        if x is None:
            raise ExpansionFailure(f"Level {K + 1} row of multiplier {alpha} is not in the stabilized module")
        lower = _covector_from_levels(x.entries[0], K + 1, l, sys)
        top = OreOp.monomial(K + 1, 0, sys)
        M_alpha.append([(top if beta == alpha else OreOp.zero(sys)) - lower[beta] for beta in range(l)])
    nullspace = left_nullspace(stacked, decomposition)
    M_A = [_covector_from_levels(row, K + 1, l, sys) for row in nullspace.entries]
    logging.info(f"{l} leading syzygies of degree {K + 1} and {len(M_A)} lower syzygies")
    return SyzygyGenSet(
        M_alpha=OreMatrix(M_alpha, sys, (l, l)),
        M_A=OreMatrix(M_A, sys, (len(M_A), l)),
        K=K,
        r1=l + len(M_A),
    )


def second_syzygies(s: SyzygyGenSet, sys: CartanSystem) -> OreMatrix:
    """Rows N_A = (-K_A^alpha, delta_A^B D - L_A^B) with N (M_alpha; M_A) = 0."""
    l, r2 = s.M_alpha.ncols, s.M_A.nrows
    if not r2:
        return OreMatrix.zeros(0, s.r1, sys)
    levels = s.K + 2
    basis = OreMatrix(
        [flatten_covector(row, levels, sys) for row in s.generators().entries], sys, (s.r1, levels * l)
    )
    decomposition = jacobson(basis, sys.order_bound)
    D = OreOp.D(sys)
    rows = []
    for A, covector in enumerate(s.M_A.entries):
        shifted = flatten_covector([D * entry for entry in covector], levels, sys)
        x = solve_left(basis, OreMatrix.row_vector(shifted, sys), decomposition)
        if x is None:
            raise ExpansionFailure(f"D * M_{A} does not expand over the syzygy generators")
        coefficients = x.entries[0]
        row = [-coefficients[I] for I in range(l)]
        row += [(D if B == A else OreOp.zero(sys)) - coefficients[l + B] for B in range(r2)]
        rows.append(row)
    return OreMatrix(rows, sys, (r2, s.r1))


def dualize(
    s: SyzygyGenSet, N: OreMatrix, history: Sequence[Sequence[ConstraintTrack]], sys: CartanSystem
) -> Resolution:
    """Gauge generators R^alpha_I = (M_I^alpha)*, R^i_I = -(sum M^alpha_Ik cert^(k)_alpha,i)*."""
    generators = s.generators()
    l = generators.ncols
    columns = []
    for covector in generators.entries:
        phi_part = [OreOp.zero(sys) for _ in range(sys.n)]
        for alpha, entry in enumerate(covector):
            for k, part in entry.d_coefficients().items():
                cert = history[k][alpha].cert
                for i in range(sys.n):
                    phi_part[i] = phi_part[i] + part * cert[0, i]
        column = [-entry.transpose() for entry in phi_part]
        column += [entry.transpose() for entry in covector]
        columns.append(column)
    R_gen = OreMatrix(
        [[columns[I][row] for I in range(len(columns))] for row in range(sys.n + l)],
        sys,
        (sys.n + l, len(columns)),
    )
    Z_gen = N.adjoint()
    return normalize_generators(Resolution(R_gen=R_gen, Z_gen=Z_gen, r1=s.r1, r2=N.nrows), sys)


def _leading_coefficient(entry: OreOp) -> FieldElem:
    """Coefficient of the highest power of D, then of Dbar."""
    return entry.terms[max(entry.terms)]


def normalize_generators(res: Resolution, sys: CartanSystem) -> Resolution:
    """Scale each generator so its first nonzero multiplier component has leading coefficient 1.

    Column I of R is multiplied on the right by 1/c_I and row I of Z on the
    left by c_I, which keeps E R = 0 and R Z = 0. Columns whose leading
    coefficient is already constant are left as they are.
    """
    R = [list(row) for row in res.R_gen.entries]
    Z = [list(row) for row in res.Z_gen.entries]
    for I in range(res.r1):
        column = res.R_gen.column(I)
        pivots = [entry for entry in column[sys.n:] if not entry.is_zero]
        pivots = pivots or [entry for entry in column if not entry.is_zero]
        if not pivots:
            continue
        c = _leading_coefficient(pivots[0])
        if c.is_constant:
            continue
        logging.debug(f"Scaling gauge generator {I} by 1/({c})")
        scale = OreOp.const(c.inverse(), sys)
        for row in R:
            row[I] = row[I] * scale
        for A in range(res.r2):
            Z[I][A] = c * Z[I][A]
    return res._replace(R_gen=OreMatrix(R, sys, res.R_gen.shape), Z_gen=OreMatrix(Z, sys, res.Z_gen.shape))


def analyze(sys: CartanSystem, max_k: Optional[int] = None) -> Analysis:
    """Constraints, stabilization, syzygies and their dual in one pass."""
    tracks = primary_constraints(sys)
    K, history = stabilize(tracks, sys, max_k)
    syzygies = syzygy_generating_set(history, K, sys)
    N = second_syzygies(syzygies, sys)
    resolution = dualize(syzygies, N, history, sys)
    logging.info(f"Gauge generators r1 = {resolution.r1}, reducibility relations r2 = {resolution.r2}")
    return Analysis(sys=sys, history=history, K=K, syzygies=syzygies, N=N, resolution=resolution)
