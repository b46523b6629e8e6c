"""Milnor K_2 symbols on the rational function field Q(t).

Symbols are formal sums of tuples of rational functions with exact
rational coefficients. The module rewrites them to a Steinberg normal
form, evaluates tame symbols at places of Q(t), checks Weil reciprocity
exactly, pairs the logarithmic regulator current of a pair (f, g) with a
loop in the plane, and realizes constant symbols as box cycles on powers
of the multiplicative group.

Branch convention, fixed once for the whole module: every logarithm is
the principal branch, with cut along the negative real axis. The
regulator pairing therefore carries a correction term supported on the
loop's crossings of f^{-1}((-inf, 0)); its sign is calibrated so that a
positively oriented small circle about a simple zero x0 of f evaluates
to -2*pi*i*log g(x0), shrinking onto the residue as the radius drops.
"""

from __future__ import annotations

import dataclasses
from fractions import Fraction
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import sympy
from mpmath import mp

from .cycles import CurveRef, PointSymbol, ZeroCycle, box_cycle, zero_cycle
from .invariants import CutGrazing
from .numkernel import (
    NegativeRealAxis,
    NumKernelError,
    ParamPath,
    PrecisionCtx,
    TangencySuspected,
    complex_to_json,
    detect_crossings,
    integrate_path,
)
from .relations import LatticeMembership, lattice_membership

__all__ = [
    "DegreeTooHigh",
    "MilnorSymbolSum",
    "Place",
    "RationalFunc",
    "ReciprocityReport",
    "RegulatorValue",
    "ZeroEntry",
    "indeterminacy_defect",
    "regulator_eval",
    "steinberg_normalize",
    "symbol_to_box",
    "tame_symbol",
    "weil_reciprocity_check",
]


class MilnorError(NumKernelError):
    """Base class for symbol-level failures."""


class ZeroEntry(MilnorError):
    """An operation met a symbol entry that is identically zero."""


class DegreeTooHigh(MilnorError):
    """A place of degree above the workable bound appeared."""


# ---------------------------------------------------------------------------
# Exact rational functions of one variable
# ---------------------------------------------------------------------------

_T = sympy.Symbol("t")


def _poly(coeffs: Sequence[Fraction]) -> sympy.Poly:
    return sympy.Poly(
        [sympy.Rational(c.numerator, c.denominator) for c in reversed(tuple(coeffs))]
        or [0],
        _T,
        domain="QQ",
    )


def _coeffs(poly: sympy.Poly) -> Tuple[Fraction, ...]:
    return tuple(Fraction(int(c.p), int(c.q)) for c in reversed(poly.all_coeffs()))


def _as_fraction(value) -> Fraction:
    if isinstance(value, float):
        raise TypeError("coefficients must be exact rationals, not floats")
    return Fraction(value)


def _deg(coeffs: Tuple[Fraction, ...]) -> int:
    for k in range(len(coeffs) - 1, -1, -1):
        if coeffs[k] != 0:
            return k
    return 0


def _derivative(coeffs: Tuple[Fraction, ...]) -> Tuple[Fraction, ...]:
    if len(coeffs) <= 1:
        return (Fraction(0),)
    return tuple(k * coeffs[k] for k in range(1, len(coeffs)))


def _horner(coeffs: Tuple[Fraction, ...], z):
    acc = mp.mpc(0)
    for c in reversed(coeffs):
        acc = acc * z + mp.mpq(c.numerator, c.denominator)
    return acc


def _horner_exact(coeffs: Tuple[Fraction, ...], x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


@dataclasses.dataclass(frozen=True)
class RationalFunc:
    """A rational function of t with exact rational coefficients.

    Stored in lowest terms with a monic denominator; coefficient tuples
    run from the constant term upward, so they double as the
    serialization format. The zero function is numerator (0,).
    """

    numerator: Tuple[Fraction, ...]
    denominator: Tuple[Fraction, ...] = (Fraction(1),)

    def __post_init__(self) -> None:
        num = tuple(_as_fraction(c) for c in self.numerator) or (Fraction(0),)
        den = tuple(_as_fraction(c) for c in self.denominator) or (Fraction(1),)
        if all(c == 0 for c in den):
            raise ValueError("denominator is identically zero")
        p, q = _poly(num), _poly(den)
        if p.is_zero:
            num, den = (Fraction(0),), (Fraction(1),)
        else:
            g = p.gcd(q)
            p, q = p.exquo(g), q.exquo(g)
            lead = q.LC()
            p, q = p.quo_ground(lead), q.quo_ground(lead)
            num, den = _coeffs(p), _coeffs(q)
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "denominator", den)

    # -- constructors

    @staticmethod
    def const(value) -> "RationalFunc":
        return RationalFunc((_as_fraction(value),))

    @staticmethod
    def variable() -> "RationalFunc":
        return RationalFunc((Fraction(0), Fraction(1)))

    @staticmethod
    def parse(text: str) -> "RationalFunc":
        """Parse a rational expression in t, e.g. ``"(t^2 - 2)/4"``."""
        expr = sympy.sympify(text.replace("^", "**"), rational=True)
        extra = expr.free_symbols - {_T}
        if extra:
            raise ValueError(f"unknown symbols {sorted(map(str, extra))} in {text!r}")
        num, den = sympy.together(expr).as_numer_denom()
        return RationalFunc(
            _coeffs(sympy.Poly(num, _T, domain="QQ")),
            _coeffs(sympy.Poly(den, _T, domain="QQ")),
        )

    @staticmethod
    def from_json(doc: Mapping) -> "RationalFunc":
        return RationalFunc(
            tuple(Fraction(c) for c in doc["num"]),
            tuple(Fraction(c) for c in doc.get("den", ["1"])),
        )

    # -- structure

    @property
    def is_zero(self) -> bool:
        return self.numerator == (Fraction(0),)

    @property
    def is_constant(self) -> bool:
        return _deg(self.numerator) == 0 and self.denominator == (Fraction(1),)

    def constant_value(self) -> Fraction:
        if not self.is_constant:
            raise ValueError(f"{self} is not constant")
        return self.numerator[0]

    @property
    def ord_infinity(self) -> int:
        """Vanishing order at t = infinity (negative for a pole)."""
        if self.is_zero:
            raise ZeroEntry("the zero function has no order at infinity")
        return _deg(self.denominator) - _deg(self.numerator)

    def leading_unit(self) -> Fraction:
        """The value of t^{ord_infinity} * self at infinity."""
        return (
            self.numerator[_deg(self.numerator)]
            / self.denominator[_deg(self.denominator)]
        )

    def _sort_key(self) -> tuple:
        return (
            max(_deg(self.numerator), _deg(self.denominator)),
            tuple((c.numerator, c.denominator) for c in self.numerator),
            tuple((c.numerator, c.denominator) for c in self.denominator),
        )

    # -- arithmetic (always re-canonicalized by the constructor)

    def _pair(self) -> Tuple[sympy.Poly, sympy.Poly]:
        return _poly(self.numerator), _poly(self.denominator)

    def __mul__(self, other: "RationalFunc") -> "RationalFunc":
        a, b = self._pair()
        c, d = other._pair()
        return RationalFunc(_coeffs(a * c), _coeffs(b * d))

    def __truediv__(self, other: "RationalFunc") -> "RationalFunc":
        if other.is_zero:
            raise ZeroDivisionError("division by the zero function")
        a, b = self._pair()
        c, d = other._pair()
        return RationalFunc(_coeffs(a * d), _coeffs(b * c))

    def __add__(self, other: "RationalFunc") -> "RationalFunc":
        a, b = self._pair()
        c, d = other._pair()
        return RationalFunc(_coeffs(a * d + c * b), _coeffs(b * d))

    def __sub__(self, other: "RationalFunc") -> "RationalFunc":
        return self + (-other)

    def __neg__(self) -> "RationalFunc":
        return RationalFunc(tuple(-c for c in self.numerator), self.denominator)

    def __pow__(self, exponent: int) -> "RationalFunc":
        if exponent == 0:
            return RationalFunc.const(1)
        base = self if exponent > 0 else RationalFunc(self.denominator, self.numerator)
        out = base
        for _ in range(abs(exponent) - 1):
            out = out * base
        return out

    def one_minus(self) -> "RationalFunc":
        return RationalFunc.const(1) - self

    def derivative(self) -> "RationalFunc":
        p, q = self._pair()
        return RationalFunc(
            _coeffs(p.diff() * q - p * q.diff()), _coeffs(q * q)
        )

    # -- evaluation

    def eval_exact(self, x) -> Fraction:
        x = _as_fraction(x)
        den = _horner_exact(self.denominator, x)
        if den == 0:
            raise ZeroDivisionError(f"pole at t = {x}")
        return _horner_exact(self.numerator, x) / den

    def eval_mpc(self, z):
        return _horner(self.numerator, z) / _horner(self.denominator, z)

    def dlog_mpc(self, z):
        """(f'/f)(z) without forming the derivative quotient."""
        out = _horner(_derivative(self.numerator), z) / _horner(self.numerator, z)
        if self.denominator != (Fraction(1),):
            out -= _horner(_derivative(self.denominator), z) / _horner(
                self.denominator, z
            )
        return out

    def __str__(self) -> str:
        num = sympy.sstr(_poly(self.numerator).as_expr())
        if self.denominator == (Fraction(1),):
            return num
        return f"({num})/({sympy.sstr(_poly(self.denominator).as_expr())})"

    def to_json(self) -> dict:
        doc = {"num": [str(c) for c in self.numerator]}
        if self.denominator != (Fraction(1),):
            doc["den"] = [str(c) for c in self.denominator]
        return doc


# ---------------------------------------------------------------------------
# Symbol sums
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class MilnorSymbolSum:
    """A rational linear combination of n-tuples {f_1, ..., f_n}.

    Terms are kept sorted with merged coefficients; tuples containing the
    constant 1 are dropped at construction (such symbols vanish), as are
    zero coefficients. Entries equal to the zero function are tolerated
    here and rejected by the evaluators that cannot handle them.
    """

    n: int
    terms: Tuple[Tuple[Tuple[RationalFunc, ...], Fraction], ...]

    @staticmethod
    def from_terms(n: int, mapping: Mapping) -> "MilnorSymbolSum":
        if n < 1:
            raise ValueError("symbol length must be at least 1")
        one = RationalFunc.const(1)
        acc: Dict[Tuple[RationalFunc, ...], Fraction] = {}
        for tup, coeff in mapping.items():
            tup = tuple(tup)
            if len(tup) != n:
                raise ValueError(f"term {tup} has length {len(tup)}, expected {n}")
            for entry in tup:
                if not isinstance(entry, RationalFunc):
                    raise TypeError(f"entry {entry!r} is not a RationalFunc")
            coeff = _as_fraction(coeff)
            if coeff == 0 or any(entry == one for entry in tup):
                continue
            acc[tup] = acc.get(tup, Fraction(0)) + coeff
        terms = tuple(
            sorted(
                ((tup, c) for tup, c in acc.items() if c != 0),
                key=lambda item: tuple(e._sort_key() for e in item[0]),
            )
        )
        return MilnorSymbolSum(n, terms)

    @staticmethod
    def symbol(*entries, coeff=1) -> "MilnorSymbolSum":
        return MilnorSymbolSum.from_terms(len(entries), {tuple(entries): coeff})

    def as_dict(self) -> Dict[Tuple[RationalFunc, ...], Fraction]:
        return dict(self.terms)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "MilnorSymbolSum") -> "MilnorSymbolSum":
        if other.n != self.n:
            raise ValueError("cannot add symbols of different length")
        acc = self.as_dict()
        for tup, coeff in other.terms:
            acc[tup] = acc.get(tup, Fraction(0)) + coeff
        return MilnorSymbolSum.from_terms(self.n, acc)

    def scale(self, factor) -> "MilnorSymbolSum":
        factor = _as_fraction(factor)
        return MilnorSymbolSum.from_terms(
            self.n, {tup: factor * c for tup, c in self.terms}
        )

    def __neg__(self) -> "MilnorSymbolSum":
        return self.scale(-1)

    def __sub__(self, other: "MilnorSymbolSum") -> "MilnorSymbolSum":
        return self + (-other)

    def to_json(self) -> dict:
        return {
            "kind": "milnor-symbol-sum",
            "n": self.n,
            "terms": [
                {"entries": [e.to_json() for e in tup], "coeff": str(c)}
                for tup, c in self.terms
            ],
        }


# ---------------------------------------------------------------------------
# Steinberg normal form
# ---------------------------------------------------------------------------

_ATOM_CACHE: Dict[RationalFunc, Tuple[Tuple[RationalFunc, int], ...]] = {}


def _monic_factors(coeffs: Tuple[Fraction, ...]) -> Tuple[Fraction, list]:
    """Factor a polynomial over Q into a unit and monic irreducibles.

    sympy's factor lists keep primitive integer factors (2t - 5 comes
    back with content 1/2), so the leading coefficients are folded into
    the unit here.
    """
    content, factors = _poly(coeffs).factor_list()
    unit = Fraction(int(content.p), int(content.q))
    out = []
    for poly, exp in factors:
        lead = poly.LC()
        if lead != 1:
            unit *= Fraction(int(lead.p), int(lead.q)) ** int(exp)
            poly = poly.monic()
        out.append((poly, int(exp)))
    return unit, out


def _entry_atoms(f: RationalFunc) -> Tuple[Tuple[RationalFunc, int], ...]:
    """Multiplicative atoms of f: a unit constant and monic irreducibles.

    Constants stay atomic (no integer factorization); the unit constant
    of the whole function splits off as one atom. f = 1 yields no atoms.
    """
    cached = _ATOM_CACHE.get(f)
    if cached is not None:
        return cached
    if f.is_zero:
        raise ZeroEntry("cannot factor the zero function")
    atoms: list = []
    unit = Fraction(1)
    for coeffs, sign in ((f.numerator, 1), (f.denominator, -1)):
        part_unit, factors = _monic_factors(coeffs)
        unit *= part_unit ** sign
        for poly, exp in factors:
            atoms.append((RationalFunc(_coeffs(poly)), sign * exp))
    if unit != 1:
        atoms.insert(0, (RationalFunc.const(unit), 1))
    result = tuple(atoms)
    _ATOM_CACHE[f] = result
    return result


def _expand_tuple(tup: Tuple[RationalFunc, ...]):
    """Multilinear expansion of one term into atomic tuples.

    Yields (atomic_tuple, multiplicity, changed). A tuple with an entry
    equal to 1 (empty atom list) yields nothing.
    """
    per_entry = [_entry_atoms(f) for f in tup]
    if any(len(atoms) == 0 for atoms in per_entry):
        yield from ()
        return
    changed = any(
        len(atoms) != 1 or atoms[0] != (tup[j], 1)
        for j, atoms in enumerate(per_entry)
    )
    idx = [0] * len(tup)
    while True:
        mult = 1
        entries = []
        for j, atoms in enumerate(per_entry):
            atom, exp = atoms[idx[j]]
            entries.append(atom)
            mult *= exp
        yield tuple(entries), Fraction(mult), changed
        j = len(tup) - 1
        while j >= 0:
            idx[j] += 1
            if idx[j] < len(per_entry[j]):
                break
            idx[j] = 0
            j -= 1
        if j < 0:
            return


def _sort_with_parity(entries: list) -> Tuple[tuple, int]:
    keys = [e._sort_key() for e in entries]
    inversions = sum(
        1
        for i in range(len(keys))
        for j in range(i + 1, len(keys))
        if keys[i] > keys[j]
    )
    order = sorted(range(len(keys)), key=lambda i: keys[i])
    sign = -1 if inversions % 2 else 1
    return tuple(entries[i] for i in order), sign


def _steinberg_kill(entries: Sequence[RationalFunc]) -> bool:
    """True when a pair of slots matches {f, 1-f} or {f, -f}."""
    for i in range(len(entries)):
        for j in range(len(entries)):
            if i == j:
                continue
            if entries[j] == entries[i].one_minus() or entries[j] == -entries[i]:
                return True
    return False


def _reduce_tuple(entries: list) -> Tuple[Optional[tuple], int, bool]:
    """Apply the local rewriting rules to one atomic tuple.

    Returns (sorted_tuple_or_None, sign, changed); None means the term
    vanished through a Steinberg relation.
    """
    minus_one = RationalFunc.const(-1)
    changed = False
    if _steinberg_kill(entries):
        return None, 1, True
    # {.., f, .., f, ..} = {.., f, .., -1, ..}; -1 itself is a fixpoint
    while True:
        for i in range(len(entries)):
            for j in range(i + 1, len(entries)):
                if entries[i] == entries[j] and entries[i] != minus_one:
                    entries = list(entries)
                    entries[j] = minus_one
                    changed = True
                    break
            else:
                continue
            break
        else:
            break
    tup, sign = _sort_with_parity(list(entries))
    if sign != 1 or tuple(entries) != tup:
        changed = True
    return tup, sign, changed


def steinberg_normalize(s: MilnorSymbolSum, max_passes: int = 64) -> MilnorSymbolSum:
    """Rewrite a symbol sum to its Steinberg normal form.

    The rules, applied to a fixpoint: multilinear expansion over monic
    irreducible factors with constants kept atomic, deletion of entries
    equal to 1, vanishing of terms containing {f, 1-f} or {f, -f} in two
    slots, the duplicate rule {f, f} -> {f, -1}, and an antisymmetry sort
    of each tuple with its sign. This is a normal form for the rewriting
    system, not a decision procedure for triviality in the Milnor group.
    """
    terms: Dict[Tuple[RationalFunc, ...], Fraction] = dict(s.terms)
    for _ in range(max_passes):
        out: Dict[Tuple[RationalFunc, ...], Fraction] = {}
        any_change = False
        for tup, coeff in terms.items():
            # the kill patterns must be seen before expansion scatters
            # them over atoms: 1 - t factors as (-1)(t - 1)
            if _steinberg_kill(tup):
                any_change = True
                continue
            for atomic, mult, expanded in _expand_tuple(tup):
                reduced, sign, changed = _reduce_tuple(list(atomic))
                any_change = any_change or expanded or changed
                if reduced is None:
                    continue
                out[reduced] = out.get(reduced, Fraction(0)) + coeff * mult * sign
        terms = {tup: c for tup, c in out.items() if c != 0}
        if not any_change:
            break
    return MilnorSymbolSum.from_terms(s.n, terms)


# ---------------------------------------------------------------------------
# Places and tame symbols
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class Place:
    """A closed point of the projective line over Q.

    ``minpoly`` holds the monic irreducible minimal polynomial of a
    finite place (coefficients from the constant term up); the empty
    tuple marks the place at infinity. ``approx`` is an optional complex
    locator for documentation and never enters exact arithmetic.
    """

    minpoly: Tuple[Fraction, ...] = ()
    approx: Optional[complex] = None

    def __post_init__(self) -> None:
        coeffs = tuple(_as_fraction(c) for c in self.minpoly)
        object.__setattr__(self, "minpoly", coeffs)
        if not coeffs:
            return
        if _deg(coeffs) < 1 or coeffs[_deg(coeffs)] != 1:
            raise ValueError("finite places need a monic minimal polynomial")
        if not _poly(coeffs).is_irreducible:
            raise ValueError("minimal polynomial must be irreducible over Q")

    @staticmethod
    def rational(x) -> "Place":
        x = _as_fraction(x)
        return Place((-x, Fraction(1)), approx=complex(x))

    @staticmethod
    def algebraic(coeffs: Sequence, approx: Optional[complex] = None) -> "Place":
        return Place(tuple(_as_fraction(c) for c in coeffs), approx=approx)

    @staticmethod
    def infinity() -> "Place":
        return Place(())

    @property
    def is_infinite(self) -> bool:
        return not self.minpoly

    @property
    def degree(self) -> int:
        return 0 if self.is_infinite else _deg(self.minpoly)

    def describe(self) -> Union[str, list]:
        return "infinity" if self.is_infinite else [str(c) for c in self.minpoly]


def _strip_place(f: RationalFunc, p: sympy.Poly) -> Tuple[int, sympy.Poly, sympy.Poly]:
    """Order of f at the place of p plus the p-free numerator/denominator."""
    order = 0
    parts = []
    for coeffs, sign in ((f.numerator, 1), (f.denominator, -1)):
        poly, mult = _poly(coeffs), 0
        while not poly.is_zero:
            quo, rem = poly.div(p)
            if not rem.is_zero:
                break
            poly, mult = quo, mult + 1
        order += sign * mult
        parts.append(poly)
    return order, parts[0], parts[1]


def tame_symbol(pair: Sequence[RationalFunc], place: Place):
    """The tame symbol of {f, g} at a place of Q(t), exactly.

    Returns a Fraction at rational places and at infinity. At a place of
    degree d > 1 it returns the residue representative as a coefficient
    tuple of length d (constant term first) in the generator of the
    residue field.
    """
    f, g = pair
    if f.is_zero or g.is_zero:
        raise ZeroEntry("tame symbol needs nonzero entries")
    if place.is_infinite:
        a, b = f.ord_infinity, g.ord_infinity
        sign = -1 if (a * b) % 2 else 1
        return sign * g.leading_unit() ** a / f.leading_unit() ** b
    p = _poly(place.minpoly)
    a, fn, fd = _strip_place(f, p)
    b, gn, gd = _strip_place(g, p)
    sign = -1 if (a * b) % 2 else 1
    f1 = RationalFunc(_coeffs(fn), _coeffs(fd))
    g1 = RationalFunc(_coeffs(gn), _coeffs(gd))
    h = (g1 ** a) / (f1 ** b)
    if place.degree == 1:
        root = -place.minpoly[0]
        return sign * h.eval_exact(root)
    hn, hd = _poly(h.numerator), _poly(h.denominator)
    residue = (hn * hd.invert(p)).rem(p)
    return tuple(c * sign for c in _coeffs(residue.mul_ground(1)))


# ---------------------------------------------------------------------------
# Weil reciprocity
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class PlaceNorm:
    """One closed place's multiplicative contribution to reciprocity."""

    place: Place
    order_f: int
    order_g: int
    value: Fraction

    def to_json(self) -> dict:
        return {
            "place": self.place.describe(),
            "orders": [self.order_f, self.order_g],
            "value": str(self.value),
        }


@dataclasses.dataclass(frozen=True)
class ReciprocityReport:
    outcome: str  # "Holds" | "Violated"
    product: Fraction
    contributions: Tuple[PlaceNorm, ...]
    notes: Tuple[str, ...] = ()

    @property
    def holds(self) -> bool:
        return self.outcome == "Holds"

    def to_json(self) -> dict:
        return {
            "check": "weil-reciprocity",
            "outcome": self.outcome,
            "product": str(self.product),
            "places": [c.to_json() for c in self.contributions],
            "notes": list(self.notes),
        }


def _norm_mod(p: sympy.Poly, h: sympy.Poly) -> Fraction:
    """Residue-field norm of h mod p: det of multiplication by h on Q[t]/(p).

    The determinant definition avoids any resultant sign convention; h
    must be coprime to p.
    """
    d = p.degree()
    cur = h.rem(p)
    if cur.is_zero:
        raise ValueError("norm of zero residue class")
    shift = sympy.Poly([1, 0], _T, domain="QQ")
    columns = []
    for _ in range(d):
        coeffs = list(reversed(cur.all_coeffs()))
        coeffs += [sympy.Integer(0)] * (d - len(coeffs))
        columns.append(coeffs)
        cur = (cur * shift).rem(p)
    det = sympy.Matrix(d, d, lambda i, j: columns[j][i]).det()
    det = sympy.Rational(det)
    return Fraction(int(det.p), int(det.q))


def weil_reciprocity_check(
    pair: Sequence[RationalFunc], degree_cap: int = 6
) -> ReciprocityReport:
    """Check that the tame-symbol norms of {f, g} multiply to 1.

    The contribution of a closed place p of degree d, with f = p^a f1 and
    g = p^b g1, is the exact rational (-1)^{abd} N(g1)^a / N(f1)^b where
    N is the residue-field norm of Q[t]/(p) over Q. The place at
    infinity contributes through leading-coefficient units.
    Raises DegreeTooHigh when an irreducible factor of degree above
    ``degree_cap`` turns up.
    """
    f, g = pair
    if f.is_zero or g.is_zero:
        raise ZeroEntry("reciprocity needs nonzero entries")
    places: Dict[Tuple[Fraction, ...], sympy.Poly] = {}
    for h in (f, g):
        for coeffs in (h.numerator, h.denominator):
            for poly, _ in _monic_factors(coeffs)[1]:
                d = poly.degree()
                if d > degree_cap:
                    raise DegreeTooHigh(
                        f"irreducible factor of degree {d} exceeds the bound {degree_cap}"
                    )
                places[_coeffs(poly)] = poly
    contributions = []
    product = Fraction(1)
    for key in sorted(places, key=lambda c: (_deg(c), tuple(c))):
        p = places[key]
        a, fn, fd = _strip_place(f, p)
        b, gn, gd = _strip_place(g, p)
        if a == 0 and b == 0:
            continue
        norm_f1 = _norm_mod(p, fn) / _norm_mod(p, fd)
        norm_g1 = _norm_mod(p, gn) / _norm_mod(p, gd)
        sign = -1 if (a * b * p.degree()) % 2 else 1
        value = sign * norm_g1 ** a / norm_f1 ** b
        contributions.append(
            PlaceNorm(Place.algebraic(key), a, b, value)
        )
        product *= value
    a, b = f.ord_infinity, g.ord_infinity
    if a != 0 or b != 0:
        sign = -1 if (a * b) % 2 else 1
        value = sign * g.leading_unit() ** a / f.leading_unit() ** b
        contributions.append(PlaceNorm(Place.infinity(), a, b, value))
        product *= value
    outcome = "Holds" if product == 1 else "Violated"
    return ReciprocityReport(outcome, product, tuple(contributions))


# ---------------------------------------------------------------------------
# Regulator pairing with a loop
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class RegulatorValue:
    """The regulator current of pairs {f, g} paired with one loop.

    ``value`` = ``integral`` + ``delta``, where the integral carries
    principal log f against dlog g along the loop and delta corrects each
    branch jump with -2*pi*i times log g at the crossing. The value is
    well defined modulo (2*pi*i)^2 Q; ``indeterminacy`` records the
    lattice-membership evidence for the reduction against that line.
    """

    value: mp.mpc
    integral: mp.mpc
    delta: mp.mpc
    crossings: Tuple[dict, ...]
    indeterminacy: LatticeMembership
    digits: int
    notes: Tuple[str, ...] = ()

    def to_json(self) -> dict:
        ctx = PrecisionCtx(self.digits)
        return {
            "invariant": "regulator2",
            "digits": self.digits,
            "value": complex_to_json(self.value, ctx),
            "terms": {
                "integral": complex_to_json(self.integral, ctx),
                "delta": complex_to_json(self.delta, ctx),
            },
            "crossings": list(self.crossings),
            "indeterminacy": self.indeterminacy.to_json(),
            "notes": list(self.notes),
        }


def _divisor_clearance(polys, loop: ParamPath, ctx: PrecisionCtx, samples: int = 257):
    """Raise CutGrazing when the loop passes too close to a zero of any poly.

    Closeness is judged relative to the poly's own scale along the loop,
    so a deliberately small loop near (but not through) a divisor stays
    admissible while an actual hit is flagged at working precision.
    """
    floor = mp.sqrt(ctx.tol)
    for coeffs in polys:
        if _deg(coeffs) == 0:
            continue
        lo, hi = mp.inf, mp.mpf(0)
        for k in range(samples):
            v = abs(_horner(coeffs, loop.point(mp.mpf(k) / (samples - 1))))
            lo, hi = min(lo, v), max(hi, v)
        if lo < floor * (1 + hi):
            raise CutGrazing(
                "loop passes within working tolerance of a zero or pole; "
                "move the loop or drop its radius more carefully"
            )


def _pair_regulator(f: RationalFunc, g: RationalFunc, loop: ParamPath, ctx: PrecisionCtx):
    if f.is_zero or g.is_zero:
        raise ZeroEntry("regulator needs nonzero entries")
    num_f, den_f = f.numerator, f.denominator
    num_g, den_g = g.numerator, g.denominator
    dnum_g, dden_g = _derivative(num_g), _derivative(den_g)
    _divisor_clearance((num_f, den_f, num_g, den_g), loop, ctx)

    def trace(t):
        return _horner(num_f, loop.point(t)) / _horner(den_f, loop.point(t))

    try:
        crossings = detect_crossings(trace, NegativeRealAxis(), ctx)
    except TangencySuspected as exc:
        raise CutGrazing(
            f"loop grazes the branch cut of log f: {exc}"
        ) from exc

    def dlog_g(z):
        out = _horner(dnum_g, z) / _horner(num_g, z)
        if den_g != (Fraction(1),):
            out -= _horner(dden_g, z) / _horner(den_g, z)
        return out

    def integrand(t):
        z = loop.point(t)
        return mp.log(trace(t)) * dlog_g(z) * loop.tangent(t)

    integral = integrate_path(
        integrand, loop, ctx, splits=[c.param for c in crossings]
    )
    two_pi_i = 2j * mp.pi
    delta = mp.mpc(0)
    for c in crossings:
        z = loop.point(c.param)
        gval = _horner(num_g, z) / _horner(den_g, z)
        delta += -two_pi_i * c.orientation * mp.log(gval)
    delta *= loop.orientation
    return integral, delta, crossings


def regulator_eval(
    pairs: Union[Sequence[RationalFunc], MilnorSymbolSum],
    loop: ParamPath,
    ctx: PrecisionCtx = PrecisionCtx(),
    max_den: int = 10**3,
    max_height: int = 10**4,
) -> RegulatorValue:
    """Pair the regulator current of {f, g} terms with a loop in C.

    Accepts a single (f, g) pair or a length-2 MilnorSymbolSum, whose
    terms contribute linearly with their rational coefficients. The loop
    must keep clear of all zeros and poles involved; grazing either a
    divisor or the branch cut raises CutGrazing. The reported value is
    canonical modulo (2*pi*i)^2 Q and carries membership evidence for
    that reduction.
    """
    if isinstance(pairs, MilnorSymbolSum):
        if pairs.n != 2:
            raise ValueError("regulator pairing needs symbols of length 2")
        term_list = list(pairs.terms)
    else:
        f, g = pairs
        term_list = [((f, g), Fraction(1))]
    with ctx.work():
        integral = mp.mpc(0)
        delta = mp.mpc(0)
        crossing_docs: list = []
        for index, ((f, g), coeff) in enumerate(term_list):
            part_int, part_delta, crossings = _pair_regulator(f, g, loop, ctx)
            weight = mp.mpf(coeff.numerator) / coeff.denominator
            integral += weight * part_int
            delta += weight * part_delta
            for c in crossings:
                crossing_docs.append(
                    {
                        "term": index,
                        "param": mp.nstr(c.param, 17),
                        "point": complex_to_json(c.point, ctx),
                        "orientation": c.orientation,
                    }
                )
        value = integral + delta
        evidence = lattice_membership(
            [value],
            [[(2j * mp.pi) ** 2]],
            max_den=max_den,
            max_height=max_height,
            ctx=ctx,
        )
    return RegulatorValue(
        value=value,
        integral=integral,
        delta=delta,
        crossings=tuple(crossing_docs),
        indeterminacy=evidence,
        digits=ctx.digits,
        notes=(
            "principal-branch logs with cut on the negative real axis",
            "delta = -2*pi*i * sum(orientation * log g(crossing))",
        ),
    )


def indeterminacy_defect(
    value, ctx: PrecisionCtx, max_den: int = 16
) -> Tuple[mp.mpf, Fraction]:
    """Distance from value to the nearest q*(2*pi*i)^2 with den(q) <= max_den.

    The candidate q comes from a double-precision snap of the real ratio;
    with a small denominator bound the snap gap (about 1/(2*max_den^2))
    sits far above double rounding, so q is exact whenever a true small
    rational multiple exists and the defect itself is then measured at
    full working precision.
    """
    with ctx.work():
        base = (2j * mp.pi) ** 2
        ratio = mp.re(mp.mpc(value) / base)
        q = Fraction(float(ratio)).limit_denominator(max_den)
        defect = abs(mp.mpc(value) - mp.mpf(q.numerator) / q.denominator * base)
        return defect, q


# ---------------------------------------------------------------------------
# Constant symbols as box cycles
# ---------------------------------------------------------------------------


def symbol_to_box(s: MilnorSymbolSum) -> ZeroCycle:
    """Realize a constant symbol sum as a box cycle on (P^1 - {0, inf})^n.

    Each factor is a multiplicative-group line with base point 1; a term
    {a_1, ..., a_n} maps to the product of (a_j) - (1) expanded with
    signs. Non-constant entries are rejected, and a zero entry raises
    ZeroEntry since 0 is excluded from the marked line.
    """
    refs = tuple(CurveRef(f"L{j + 1}") for j in range(s.n))
    bases = tuple(PointSymbol.base(ref) for ref in refs)
    acc = zero_cycle(s.n)
    for tup, coeff in s.terms:
        points = []
        for j, entry in enumerate(tup):
            if entry.is_zero:
                raise ZeroEntry("0 does not lie on the marked multiplicative line")
            if not entry.is_constant:
                raise ValueError(
                    f"box realization needs constant entries, got {entry}"
                )
            points.append(PointSymbol.named(refs[j], str(entry.constant_value())))
        acc = acc + coeff * box_cycle(points, bases)
    return acc
