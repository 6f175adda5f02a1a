# Copyright (c) 2023 Graphcore Ltd. All rights reserved.
"""
Exact arithmetic in the on-shell differential field of a two dimensional
field theory.

Elements are rational functions in jet coordinates and symbolic parameters,
held as pairs of sparse sympy polynomials over QQ. Only reduced jets exist:
every derivative that the field equations determine is substituted as soon
as it is produced, so the equations themselves never have to be stored as
an ideal.

The two total derivatives `dbar` and `dtime` need the right hand sides of
the equations; they take any object exposing `dbar_image(symbol)` and
`dtime_image(symbol)` (see `gauge2d.analysis.cartan.CartanSystem`).
"""
from enum import IntEnum
from fractions import Fraction
from functools import lru_cache
from itertools import chain
from typing import Any, Callable, Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Set, Tuple, Union

import sympy
from sympy import QQ
from sympy.polys.orderings import lex
from sympy.polys.rings import PolyElement, PolyRing

__all__ = [
    "DivisionByZero",
    "JetKind",
    "JetCoord",
    "JetSpace",
    "FieldElem",
    "arith",
    "sum_of_products",
    "partial",
    "substitute",
    "derive",
    "dbar",
    "dtime",
    "as_field_elem",
]


class DivisionByZero(ZeroDivisionError):
    pass


class JetKind(IntEnum):
    PHI_J = 0
    PHI_A = 1
    LAMBDA = 2


class JetCoord(NamedTuple):
    """One reduced jet coordinate.

    `index` counts within the kind: constrained fields, free fields and
    multipliers are numbered separately. The tuple order is the canonical
    ordering of jets.
    """

    kind: JetKind
    index: int
    p: int = 0
    q: int = 0

    def prolong(self, dp: int = 0, dq: int = 0) -> "JetCoord":
        return self._replace(p=self.p + dp, q=self.q + dq)


def _sort_key(symbol: sympy.Symbol):
    return sympy.default_sort_key(symbol)


# Above this many terms in numerator and denominator together, common factors
# are only removed when the denominator divides the numerator exactly.
GCD_TERM_LIMIT = 40

_HASH_MODULUS = 2**61 - 1


@lru_cache(maxsize=None)
def _ring(symbols: Tuple[sympy.Symbol, ...]) -> PolyRing:
    return PolyRing(symbols, QQ, lex)


_GROUND = _ring(())


def _common_ring(rings: Sequence[PolyRing]) -> PolyRing:
    first = rings[0]
    if all(ring is first for ring in rings):
        return first
    symbols = set()
    for ring in rings:
        symbols.update(ring.symbols)
    return _ring(tuple(sorted(symbols, key=_sort_key)))


def _unify(*polys: PolyElement) -> Tuple[PolyElement, ...]:
    ring = _common_ring([poly.ring for poly in polys])
    return tuple(poly.set_ring(ring) for poly in polys)


def _rational(value) -> Any:
    if isinstance(value, Fraction):
        return QQ(value.numerator, value.denominator)
    if isinstance(value, int):
        return QQ(value)
    return QQ.from_sympy(sympy.sympify(value))


def _poly(value) -> PolyElement:
    if isinstance(value, PolyElement):
        return value
    if isinstance(value, (int, Fraction)):
        return _GROUND.ground_new(_rational(value))
    if isinstance(value, sympy.Symbol):
        return _ring((value,)).gens[0]
    expr = sympy.expand(sympy.sympify(value))
    ring = _ring(tuple(sorted(expr.free_symbols, key=_sort_key)))
    try:
        return ring.from_expr(expr)
    except ValueError:
        raise TypeError(f"{value} is not a polynomial with rational coefficients")


def _compact(numer: PolyElement, denom: PolyElement) -> Tuple[PolyElement, PolyElement]:
    """Drop generators that neither polynomial uses."""
    ring = numer.ring
    if not ring.ngens:
        return numer, denom
    used = [False] * ring.ngens
    for monom in chain(numer.itermonoms(), denom.itermonoms()):
        for i, exponent in enumerate(monom):
            if exponent:
                used[i] = True
    if all(used):
        return numer, denom
    smaller = _ring(tuple(symbol for symbol, keep in zip(ring.symbols, used) if keep))
    return numer.set_ring(smaller), denom.set_ring(smaller)


def _normalize(numer: PolyElement, denom: PolyElement) -> Tuple[PolyElement, PolyElement]:
    if not denom:
        raise DivisionByZero("Denominator of a field element is zero")
    if not numer:
        return _GROUND.zero, _GROUND.one
    if denom.is_ground:
        return _compact(numer.quo_ground(denom.LC), denom.ring.one)
    if denom.ring.monomial_div(numer.LM, denom.LM) is not None:
        quotient, remainder = numer.div(denom)
        if not remainder:
            return _compact(quotient, denom.ring.one)
    if len(numer) + len(denom) <= GCD_TERM_LIMIT:
        numer, denom = numer.cancel(denom)
    lc = denom.LC
    return _compact(numer.quo_ground(lc), denom.quo_ground(lc))


def _residue(poly: PolyElement) -> int:
    """Value of `poly` modulo a prime at a point fixed per symbol name."""
    point = [hash(symbol.name) % _HASH_MODULUS for symbol in poly.ring.symbols]
    total = 0
    for monom, coef in poly.iterterms():
        value = int(coef.numerator) * pow(int(coef.denominator), _HASH_MODULUS - 2, _HASH_MODULUS)
        for base, exponent in zip(point, monom):
            if exponent:
                value = value * pow(base, exponent, _HASH_MODULUS) % _HASH_MODULUS
        total = (total + value) % _HASH_MODULUS
    return total


Coercible = Union["FieldElem", int, Fraction, sympy.Expr]


class FieldElem:
    """A fraction numer/denom of sparse polynomials over QQ.

    The denominator is monic under the lexicographic order of the sorted
    symbol names and the polynomial ring holds exactly the symbols in use.
    Common factors are cancelled when the denominator divides the numerator
    or the pair is small enough for a gcd, so two equal elements may still
    differ in representation; equality cross-multiplies and the hash is
    computed from a modular evaluation.
    """

    __slots__ = ("numer", "denom")

    def __init__(self, num: Union[int, Fraction, sympy.Expr] = 0, den: Union[int, Fraction, sympy.Expr] = 1):
        self.numer, self.denom = _normalize(*_unify(_poly(num), _poly(den)))

    @classmethod
    def _make(cls, numer: PolyElement, denom: Optional[PolyElement] = None) -> "FieldElem":
        obj = cls.__new__(cls)
        obj.numer = numer
        obj.denom = numer.ring.one if denom is None else denom
        return obj

    @classmethod
    def from_polys(cls, numer: PolyElement, denom: PolyElement) -> "FieldElem":
        return cls._make(*_normalize(*_unify(numer, denom)))

    @classmethod
    def from_expr(cls, expr: sympy.Expr) -> "FieldElem":
        num, den = sympy.fraction(sympy.together(sympy.sympify(expr)))
        return cls(num, den)

    @property
    def num(self) -> sympy.Expr:
        return self.numer.as_expr()

    @property
    def den(self) -> sympy.Expr:
        return self.denom.as_expr()

    @property
    def is_zero(self) -> bool:
        return not self.numer

    @property
    def is_one(self) -> bool:
        return self.denom.is_one and self.numer.is_one

    @property
    def is_polynomial(self) -> bool:
        return self.denom.is_one

    @property
    def symbols(self) -> Set[sympy.Symbol]:
        return set(self.numer.ring.symbols)

    @property
    def is_constant(self) -> bool:
        return not self.numer.ring.ngens

    @property
    def term_count(self) -> int:
        return len(self.numer) + len(self.denom)

    def as_expr(self) -> sympy.Expr:
        return self.num / self.den

    def inverse(self) -> "FieldElem":
        if self.is_zero:
            raise DivisionByZero("Cannot invert zero")
        lc = self.numer.LC
        return FieldElem._make(self.denom.quo_ground(lc), self.numer.quo_ground(lc))

    def partial(self, symbol: sympy.Symbol) -> "FieldElem":
        return partial(self, symbol)

    def subs(self, values: Mapping[sympy.Symbol, Coercible]) -> "FieldElem":
        return substitute(self, values)

    def render(self) -> str:
        if self.denom.is_one:
            return _render_poly(self.num)
        return f"({_render_poly(self.num)})/({_render_poly(self.den)})"

    def __add__(self, other: Coercible) -> "FieldElem":
        if not _coercible(other):
            return NotImplemented
        return arith(self, other, "+")

    def __radd__(self, other: Coercible) -> "FieldElem":
        if not _coercible(other):
            return NotImplemented
        return arith(other, self, "+")

    def __sub__(self, other: Coercible) -> "FieldElem":
        if not _coercible(other):
            return NotImplemented
        return arith(self, other, "-")

    def __rsub__(self, other: Coercible) -> "FieldElem":
        if not _coercible(other):
            return NotImplemented
        return arith(other, self, "-")

    def __mul__(self, other: Coercible) -> "FieldElem":
        if not _coercible(other):
            return NotImplemented
        return arith(self, other, "*")

    def __rmul__(self, other: Coercible) -> "FieldElem":
        if not _coercible(other):
            return NotImplemented
        return arith(other, self, "*")

    def __truediv__(self, other: Coercible) -> "FieldElem":
        if not _coercible(other):
            return NotImplemented
        return arith(self, other, "/")

    def __rtruediv__(self, other: Coercible) -> "FieldElem":
        if not _coercible(other):
            return NotImplemented
        return arith(other, self, "/")

    def __neg__(self) -> "FieldElem":
        return FieldElem._make(-self.numer, self.denom)

    def __pow__(self, exponent: int) -> "FieldElem":
        if not isinstance(exponent, int):
            raise TypeError(f"Field elements only take integer powers, got {exponent!r}")
        if exponent < 0:
            return self.inverse() ** (-exponent)
        if exponent == 0:
            return FieldElem(1)
        return FieldElem._make(self.numer**exponent, self.denom**exponent)

    def __eq__(self, other) -> bool:
        try:
            other = as_field_elem(other)
        except TypeError:
            return NotImplemented
        an, ad, bn, bd = _unify(self.numer, self.denom, other.numer, other.denom)
        if ad == bd:
            return an == bn
        return an * bd == bn * ad

    def __hash__(self) -> int:
        den = _residue(self.denom)
        if not den:
            return 0
        return hash(_residue(self.numer) * pow(den, _HASH_MODULUS - 2, _HASH_MODULUS) % _HASH_MODULUS)

    def __bool__(self) -> bool:
        return not self.is_zero

    def __repr__(self) -> str:
        return f"FieldElem({self.render()!r})"

    def __str__(self) -> str:
        return self.render()


def _render_poly(expr: sympy.Expr) -> str:
    # Jet symbols are named in the expression grammar so only powers differ
    return str(expr).replace("**", "^")


def _coercible(value) -> bool:
    return isinstance(value, (FieldElem, int, Fraction, sympy.Expr)) and not isinstance(value, bool)


def as_field_elem(value: Coercible) -> FieldElem:
    if isinstance(value, FieldElem):
        return value
    if isinstance(value, (int, Fraction)) and not isinstance(value, bool):
        return FieldElem(value)
    if isinstance(value, sympy.Expr):
        return FieldElem.from_expr(value)
    raise TypeError(f"Cannot interpret {value!r} as a field element")


def arith(a: Coercible, b: Coercible, op: str) -> FieldElem:
    """Exact field arithmetic, `op` is one of `+ - * /`."""
    a = as_field_elem(a)
    b = as_field_elem(b)
    if op == "/" and b.is_zero:
        raise DivisionByZero(f"Division of {a} by zero")
    an, ad, bn, bd = _unify(a.numer, a.denom, b.numer, b.denom)
    if op == "+":
        if ad == bd:
            return FieldElem.from_polys(an + bn, ad)
        return FieldElem.from_polys(an * bd + bn * ad, ad * bd)
    if op == "-":
        if ad == bd:
            return FieldElem.from_polys(an - bn, ad)
        return FieldElem.from_polys(an * bd - bn * ad, ad * bd)
    if op == "*":
        return FieldElem.from_polys(an * bn, ad * bd)
    if op == "/":
        return FieldElem.from_polys(an * bd, ad * bn)
    raise ValueError(f"Unknown field operation {op!r}")


def sum_of_products(terms: Iterable[Tuple[int, FieldElem, FieldElem]]) -> FieldElem:
    """Sum of n * a * b over the given triples, reduced once at the end."""
    terms = list(terms)
    if not terms:
        return FieldElem()
    ring = _common_ring([poly.ring for _, a, b in terms for poly in (a.numer, a.denom, b.numer, b.denom)])
    by_denominator: Dict[PolyElement, PolyElement] = {}
    for n, a, b in terms:
        an, ad, bn, bd = (poly.set_ring(ring) for poly in (a.numer, a.denom, b.numer, b.denom))
        den = ad * bd
        num = (an * bn).mul_ground(QQ(n))
        by_denominator[den] = by_denominator[den] + num if den in by_denominator else num
    numer, denom = ring.zero, ring.one
    for den, num in by_denominator.items():
        if den == denom:
            numer = numer + num
        else:
            numer, denom = numer * den + num * denom, denom * den
    return FieldElem.from_polys(numer, denom)


def partial(a: FieldElem, symbol: sympy.Symbol) -> FieldElem:
    """Partial derivative by one jet coordinate or parameter."""
    ring = a.numer.ring
    if symbol not in ring.symbols:
        return FieldElem()
    i = ring.symbols.index(symbol)
    dn = a.numer.diff(i)
    if a.denom.is_one:
        return FieldElem.from_polys(dn, a.denom)
    dd = a.denom.diff(i)
    return FieldElem.from_polys(dn * a.denom - a.numer * dd, a.denom**2)


def substitute(a: FieldElem, values: Mapping[sympy.Symbol, Coercible]) -> FieldElem:
    """Specialize parameters to rational values."""
    numer, denom = a.numer, a.denom
    symbols = numer.ring.symbols
    for symbol, value in values.items():
        if isinstance(value, FieldElem):
            if not value.is_constant:
                raise ValueError(f"Only constant specializations are supported, got {symbol} = {value}")
            value = value.as_expr()
        value = _rational(value)
        if symbol in symbols:
            i = symbols.index(symbol)
            numer, denom = numer.subs(i, value), denom.subs(i, value)
    if not denom:
        raise DivisionByZero(f"Denominator {a.den} vanishes at {values}")
    return FieldElem.from_polys(numer, denom)


def derive(a: FieldElem, image: Callable[[sympy.Symbol], FieldElem]) -> FieldElem:
    """Apply the derivation that sends each symbol `s` to `image(s)`."""
    if a.is_constant:
        return FieldElem()
    ring = a.numer.ring
    images = [(i, image(symbol)) for i, symbol in enumerate(ring.symbols)]
    images = [(i, target) for i, target in images if not target.is_zero]

    def derive_poly(poly: PolyElement) -> FieldElem:
        return sum_of_products((1, FieldElem._make(poly.diff(i), ring.one), target) for i, target in images)

    dnum = derive_poly(a.numer)
    if a.denom.is_one:
        return dnum
    dden = derive_poly(a.denom)
    numer = sum_of_products([(1, dnum, FieldElem._make(a.denom)), (-1, FieldElem._make(a.numer), dden)])
    return numer / FieldElem._make(a.denom**2)


def dbar(a: FieldElem, sys) -> FieldElem:
    """Total spatial derivative with the constraint equations substituted."""
    return derive(a, sys.dbar_image)


def dtime(a: FieldElem, sys) -> FieldElem:
    """Total time derivative with the evolution equations substituted."""
    return derive(a, sys.dtime_image)


class JetSpace:
    """Names and symbols of a field theory's reduced jet coordinates.

    Fields keep their declared order, which is the order of the momenta and
    of the evolution equations. Jet symbols are named in the syntax of the
    expression grammar, e.g. `dbar(dbar(phi))` or `d(dbar(lam))`.
    """

    def __init__(
        self,
        fields: Sequence[str],
        constrained: Iterable[str] = (),
        lambdas: Sequence[str] = (),
        params: Sequence[str] = (),
    ):
        self.fields = tuple(fields)
        constrained = set(constrained)
        unknown = constrained - set(self.fields)
        if unknown:
            raise ValueError(f"Constrained fields {sorted(unknown)} are not declared fields")
        self.constrained = tuple(f for f in self.fields if f in constrained)
        self.free = tuple(f for f in self.fields if f not in constrained)
        self.lambdas = tuple(lambdas)
        self.params = tuple(params)
        names = self.fields + self.lambdas + self.params
        duplicates = sorted({name for name in names if names.count(name) > 1})
        if duplicates:
            raise ValueError(f"Names must be unique, repeated: {duplicates}")
        self._symbols: Dict[JetCoord, sympy.Symbol] = {}
        self._coords: Dict[sympy.Symbol, JetCoord] = {}
        self._param_symbols = {name: sympy.Symbol(name) for name in self.params}

    @property
    def n(self) -> int:
        return len(self.fields)

    @property
    def m(self) -> int:
        return len(self.constrained)

    @property
    def l(self) -> int:
        return len(self.lambdas)

    def with_lambdas(self, lambdas: Sequence[str]) -> "JetSpace":
        return JetSpace(self.fields, self.constrained, lambdas, self.params)

    def base_name(self, coord: JetCoord) -> str:
        names = {JetKind.PHI_J: self.constrained, JetKind.PHI_A: self.free, JetKind.LAMBDA: self.lambdas}
        return names[coord.kind][coord.index]

    def check(self, coord: JetCoord):
        limits = {JetKind.PHI_J: self.m, JetKind.PHI_A: self.n - self.m, JetKind.LAMBDA: self.l}
        if not 0 <= coord.index < limits[coord.kind]:
            raise ValueError(f"Jet index out of range: {coord}")
        if coord.p < 0 or coord.q < 0:
            raise ValueError(f"Negative derivative order: {coord}")
        if coord.kind == JetKind.PHI_J and (coord.p or coord.q):
            raise ValueError(f"Derivatives of constrained fields are reducible: {coord}")
        if coord.kind == JetKind.PHI_A and coord.p:
            raise ValueError(f"Time derivatives of fields are reducible: {coord}")

    def name(self, coord: JetCoord) -> str:
        text = self.base_name(coord)
        for _ in range(coord.q):
            text = f"dbar({text})"
        for _ in range(coord.p):
            text = f"d({text})"
        return text

    def symbol(self, coord: JetCoord) -> sympy.Symbol:
        symbol = self._symbols.get(coord)
        if symbol is None:
            self.check(coord)
            symbol = sympy.Symbol(self.name(coord))
            self._symbols[coord] = symbol
            self._coords[symbol] = coord
        return symbol

    def jet(self, coord: JetCoord) -> FieldElem:
        return FieldElem._make(_poly(self.symbol(coord)))

    def coord_of(self, symbol: sympy.Symbol) -> Optional[JetCoord]:
        """The jet a symbol stands for, or None for parameters and unknown names."""
        coord = self._coords.get(symbol)
        if coord is not None:
            return coord
        text, p, q = symbol.name, 0, 0
        while text.endswith(")"):
            if text.startswith("d("):
                if q:
                    return None
                p, text = p + 1, text[2:-1]
            elif text.startswith("dbar("):
                q, text = q + 1, text[5:-1]
            else:
                return None
        coord = self.base_coord(text)
        if coord is None:
            return None
        coord = coord._replace(p=p, q=q)
        try:
            self.check(coord)
        except ValueError:
            return None
        return coord if self.symbol(coord) == symbol else None

    def base_coord(self, name: str) -> Optional[JetCoord]:
        if name in self.constrained:
            return JetCoord(JetKind.PHI_J, self.constrained.index(name))
        if name in self.free:
            return JetCoord(JetKind.PHI_A, self.free.index(name))
        if name in self.lambdas:
            return JetCoord(JetKind.LAMBDA, self.lambdas.index(name))
        return None

    def param(self, name: str) -> sympy.Symbol:
        return self._param_symbols[name]

    @property
    def param_symbols(self) -> List[sympy.Symbol]:
        return [self._param_symbols[name] for name in self.params]

    def is_param(self, symbol: sympy.Symbol) -> bool:
        return symbol.name in self._param_symbols

    def field_coord(self, i: int) -> JetCoord:
        coord = self.base_coord(self.fields[i])
        return coord

    def field_index(self, coord: JetCoord) -> int:
        return self.fields.index(self.base_name(coord))

    def field(self, i: int) -> FieldElem:
        return self.jet(self.field_coord(i))

    def lam(self, alpha: int) -> FieldElem:
        return self.jet(JetCoord(JetKind.LAMBDA, alpha))

    def jets_up_to(self, order: int) -> List[JetCoord]:
        """All reduced jets with derivative orders bounded by `order`, in canonical order."""
        coords = [JetCoord(JetKind.PHI_J, j) for j in range(self.m)]
        coords += [JetCoord(JetKind.PHI_A, a, 0, q) for a in range(self.n - self.m) for q in range(order + 1)]
        coords += [
            JetCoord(JetKind.LAMBDA, alpha, p, q)
            for alpha in range(self.l)
            for p in range(order + 1)
            for q in range(order + 1 - p)
        ]
        return coords

    def __repr__(self) -> str:
        return (
            f"JetSpace(fields={list(self.fields)}, constrained={list(self.constrained)}, "
            f"lambdas={list(self.lambdas)}, params={list(self.params)})"
        )
