# Copyright (c) 2023 Graphcore Ltd. All rights reserved.
"""
Differential operators F[D, Dbar] over the on-shell field.

Operators are kept normal ordered, sum of c * D^p * Dbar^q with the
coefficients on the left. Operators with no D part form the Euclidean ring
F[Dbar], on which left and right division are provided.
"""
from math import comb
from typing import Dict, Iterator, List, Mapping, Tuple, Union

from .jetfield import Coercible, DivisionByZero, FieldElem, as_field_elem, dbar, dtime, sum_of_products

__all__ = ["OreOp", "divide_right", "divide_left", "transpose"]

Monomial = Tuple[int, int]


class OreOp:
    """A normal ordered operator sum c_pq D^p Dbar^q bound to a Cartan system."""

    __slots__ = ("terms", "sys")

    def __init__(self, terms: Mapping[Monomial, Coercible], sys):
        self.terms: Dict[Monomial, FieldElem] = {}
        for (p, q), coef in terms.items():
            if p < 0 or q < 0:
                raise ValueError(f"Negative derivative power in monomial {(p, q)}")
            coef = as_field_elem(coef)
            if not coef.is_zero:
                self.terms[(p, q)] = coef
        self.sys = sys

    @classmethod
    def zero(cls, sys) -> "OreOp":
        return cls({}, sys)

    @classmethod
    def one(cls, sys) -> "OreOp":
        return cls({(0, 0): FieldElem(1)}, sys)

    @classmethod
    def const(cls, coef: Coercible, sys) -> "OreOp":
        return cls({(0, 0): coef}, sys)

    @classmethod
    def monomial(cls, p: int, q: int, sys, coef: Coercible = 1) -> "OreOp":
        return cls({(p, q): coef}, sys)

    @classmethod
    def D(cls, sys) -> "OreOp":
        return cls.monomial(1, 0, sys)

    @classmethod
    def Dbar(cls, sys) -> "OreOp":
        return cls.monomial(0, 1, sys)

    @classmethod
    def from_d_coefficients(cls, parts: Mapping[int, "OreOp"], sys) -> "OreOp":
        """Assemble sum A_k D^k from operators A_k of F[Dbar]."""
        terms = {}
        for k, part in parts.items():
            for (p, q), coef in part.terms.items():
                if p:
                    raise ValueError("D-coefficients must not contain D")
                terms[(k, q)] = coef
        return cls(terms, sys)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_rbar(self) -> bool:
        """True for elements of F[Dbar]."""
        return all(p == 0 for p, _ in self.terms)

    @property
    def degree(self) -> int:
        """Highest power of D, -1 for the zero operator."""
        return max((p for p, _ in self.terms), default=-1)

    @property
    def order(self) -> int:
        """Highest power of Dbar, -1 for the zero operator."""
        return max((q for _, q in self.terms), default=-1)

    @property
    def leading_coefficient(self) -> FieldElem:
        """Coefficient of Dbar^order for an element of F[Dbar]."""
        if self.is_zero:
            return FieldElem()
        return self.terms[(0, self.order)]

    @property
    def is_unit(self) -> bool:
        return self.is_rbar and self.order == 0

    @property
    def term_count(self) -> int:
        return sum(coef.term_count for coef in self.terms.values())

    def coefficient(self, p: int, q: int) -> FieldElem:
        return self.terms.get((p, q), FieldElem())

    def d_coefficients(self) -> Dict[int, "OreOp"]:
        """Split into A_k of F[Dbar] with self = sum A_k D^k."""
        parts: Dict[int, Dict[Monomial, FieldElem]] = {}
        for (p, q), coef in self.terms.items():
            parts.setdefault(p, {})[(0, q)] = coef
        return {k: OreOp(parts[k], self.sys) for k in sorted(parts)}

    def shift_d(self, k: int) -> "OreOp":
        """Right multiplication by D^k."""
        return OreOp({(p + k, q): coef for (p, q), coef in self.terms.items()}, self.sys)

    def map_coefficients(self, fn) -> "OreOp":
        return OreOp({mono: fn(coef) for mono, coef in self.terms.items()}, self.sys)

    def _coerce(self, other: Union["OreOp", Coercible]) -> "OreOp":
        if isinstance(other, OreOp):
            return other
        return OreOp.const(other, self.sys)

    def __add__(self, other) -> "OreOp":
        other = self._coerce(other)
        terms = dict(self.terms)
        for mono, coef in other.terms.items():
            terms[mono] = terms[mono] + coef if mono in terms else coef
        return OreOp(terms, self.sys)

    __radd__ = __add__

    def __neg__(self) -> "OreOp":
        return OreOp({mono: -coef for mono, coef in self.terms.items()}, self.sys)

    def __sub__(self, other) -> "OreOp":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "OreOp":
        return self._coerce(other) - self

    def __mul__(self, other) -> "OreOp":
        return mul(self, self._coerce(other))

    def __rmul__(self, other) -> "OreOp":
        return mul(self._coerce(other), self)

    def __pow__(self, exponent: int) -> "OreOp":
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError(f"Operators only take non-negative integer powers, got {exponent!r}")
        result = OreOp.one(self.sys)
        for _ in range(exponent):
            result = result * self
        return result

    def __eq__(self, other) -> bool:
        if not isinstance(other, OreOp):
            try:
                other = OreOp.const(other, self.sys)
            except TypeError:
                return NotImplemented
        return self.terms.keys() == other.terms.keys() and all(
            self.terms[mono] == other.terms[mono] for mono in self.terms
        )

    def __hash__(self) -> int:
        return hash(frozenset(self.terms.items()))

    def __bool__(self) -> bool:
        return not self.is_zero

    def __iter__(self) -> Iterator[Tuple[Monomial, FieldElem]]:
        yield from sorted(self.terms.items(), key=lambda item: (-(item[0][0] + item[0][1]), -item[0][1]))

    def apply(self, a: Coercible) -> FieldElem:
        return apply(self, a)

    def transpose(self) -> "OreOp":
        return transpose(self)

    def render(self) -> str:
        if self.is_zero:
            return "0"
        pieces = []
        for (p, q), coef in self:
            factors = []
            if not coef.is_one or (p == 0 and q == 0):
                factors.append(f"({coef.render()})")
            if p:
                factors.append("D" if p == 1 else f"D^{p}")
            if q:
                factors.append("Dbar" if q == 1 else f"Dbar^{q}")
            pieces.append("*".join(factors))
        return " + ".join(pieces)

    def __repr__(self) -> str:
        return f"OreOp({self.render()!r})"

    def __str__(self) -> str:
        return self.render()


class _DerivativeTable:
    """Memoized dtime^j dbar^k of one coefficient."""

    def __init__(self, coef: FieldElem, sys):
        self.sys = sys
        self.table: Dict[Tuple[int, int], FieldElem] = {(0, 0): coef}

    def __call__(self, j: int, k: int) -> FieldElem:
        value = self.table.get((j, k))
        if value is None:
            if j > 0:
                value = dtime(self(j - 1, k), self.sys)
            else:
                value = dbar(self(0, k - 1), self.sys)
            self.table[(j, k)] = value
        return value


def mul(A: OreOp, B: OreOp) -> OreOp:
    """Normal ordered product, commuting D^p Dbar^q past each coefficient of B."""
    sys = A.sys if A.sys is not None else B.sys
    products: Dict[Monomial, List[Tuple[int, FieldElem, FieldElem]]] = {}
    for (r, s), b in B.terms.items():
        derivatives = _DerivativeTable(b, sys)
        for (p, q), a in A.terms.items():
            for j in range(p + 1):
                for k in range(q + 1):
                    db = derivatives(j, k)
                    if db.is_zero:
                        continue
                    mono = (p - j + r, q - k + s)
                    products.setdefault(mono, []).append((comb(p, j) * comb(q, k), a, db))
    return OreOp({mono: sum_of_products(terms) for mono, terms in products.items()}, sys)


def apply(A: OreOp, a: Coercible) -> FieldElem:
    """Act on a field element through the two derivations."""
    derivatives = _DerivativeTable(as_field_elem(a), A.sys)
    return sum_of_products((1, coef, derivatives(p, q)) for (p, q), coef in A.terms.items())


def _check_rbar(*ops: OreOp):
    for op in ops:
        if not op.is_rbar:
            raise ValueError(f"Euclidean division needs operators without D, got {op}")


def divide_right(A: OreOp, B: OreOp) -> Tuple[OreOp, OreOp]:
    """Return (Q, R) with A = Q*B + R and order(R) < order(B)."""
    _check_rbar(A, B)
    if B.is_zero:
        raise DivisionByZero(f"Division of {A} by the zero operator")
    sys = A.sys if A.sys is not None else B.sys
    Q, R = OreOp.zero(sys), A
    lc_b = B.leading_coefficient
    while not R.is_zero and R.order >= B.order:
        t = OreOp.monomial(0, R.order - B.order, sys, R.leading_coefficient / lc_b)
        Q = Q + t
        R = R - t * B
    return Q, R


def divide_left(A: OreOp, B: OreOp) -> Tuple[OreOp, OreOp]:
    """Return (Q, R) with A = B*Q + R and order(R) < order(B)."""
    _check_rbar(A, B)
    if B.is_zero:
        raise DivisionByZero(f"Division of {A} by the zero operator")
    sys = A.sys if A.sys is not None else B.sys
    Q, R = OreOp.zero(sys), A
    lc_b = B.leading_coefficient
    while not R.is_zero and R.order >= B.order:
        t = OreOp.monomial(0, R.order - B.order, sys, R.leading_coefficient / lc_b)
        Q = Q + t
        R = R - B * t
    return Q, R


def transpose(A: OreOp) -> OreOp:
    """Formal adjoint, (f D^n Dbar^m)* = (-1)^(n+m) D^n Dbar^m f."""
    result = OreOp.zero(A.sys)
    for (p, q), coef in A.terms.items():
        sign = -1 if (p + q) % 2 else 1
        result = result + OreOp.monomial(p, q, A.sys, sign) * OreOp.const(coef, A.sys)
    return result
