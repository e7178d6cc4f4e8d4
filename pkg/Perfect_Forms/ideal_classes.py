import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import gcd, lcm
from typing import Iterable, List, Optional, Sequence, Tuple

from sympy import divisors
from sympy.core.intfunc import igcdex

from invariants import InvariantViolation, check
from quadratic_field import KElem, QuadField
from short_vectors import short_vectors

logger = logging.getLogger('IdealClasses')


class IdealError(ValueError):
    """Zero ideal or generators not spanning a rank-2 module"""


def _hnf_rows(rows: Iterable[Tuple[int, int]]) -> Tuple[int, int, int]:
    """
    Hermite normal form of the Z-span of integer rows (x, y): basis
    (a, 0), (b, c) with a > 0, c > 0, 0 <= b < a.
    """
    a, b, c = 0, 0, 0
    for x, y in rows:
        if y == 0:
            a = gcd(a, x)
        elif c == 0:
            b, c = (x, y) if y > 0 else (-x, -y)
        else:
            u, v, g = (int(value) for value in igcdex(c, y))
            kernel = (y // g) * b - (c // g) * x
            b, c = u * b + v * x, g
            a = gcd(a, kernel)
    if a == 0 or c == 0:
        raise IdealError("generators do not span a rank-2 Z-module")
    return a, b % a, c


@dataclass(frozen=True)
class FracIdeal:
    """Fractional ideal with Z-basis {a, b + c*omega} in Hermite normal form"""
    field: QuadField
    a: Fraction
    b: Fraction
    c: Fraction

    @classmethod
    def from_z_generators(cls, field: QuadField, elems: Sequence[KElem]) -> 'FracIdeal':
        nonzero = [e for e in elems if e]
        if not nonzero:
            raise IdealError("the zero ideal is not a fractional ideal")
        den = 1
        for e in nonzero:
            den = lcm(den, e.a.denominator, e.b.denominator)
        a, b, c = _hnf_rows((int(e.a * den), int(e.b * den)) for e in nonzero)
        return cls(field, Fraction(a, den), Fraction(b, den), Fraction(c, den))

    @classmethod
    def unit(cls, field: QuadField) -> 'FracIdeal':
        """O_K itself"""
        return cls(field, Fraction(1), Fraction(0), Fraction(1))

    @property
    def basis(self) -> Tuple[KElem, KElem]:
        return self.field.elem(self.a, 0), self.field.elem(self.b, self.c)

    @property
    def norm(self) -> Fraction:
        """Absolute norm, the index of the Z-basis in Z + Z*omega"""
        return self.a * self.c

    @property
    def hnf(self) -> Tuple[Fraction, Fraction, Fraction]:
        """(a, b, c) with 0 <= b < a"""
        return self.a, self.b, self.c

    def sort_key(self):
        return (self.norm, self.a, self.b, self.c)

    def is_integral(self) -> bool:
        return all(value.denominator == 1 for value in self.hnf)

    def contains(self, x: KElem) -> bool:
        """Membership by solving against the triangular basis"""
        q = x.b / self.c
        if q.denominator != 1:
            return False
        return ((x.a - q * self.b) / self.a).denominator == 1

    def is_ok_module(self) -> bool:
        """Closed under multiplication by omega"""
        omega = self.field.omega
        return all(self.contains(omega * g) for g in self.basis)

    def __mul__(self, other):
        if isinstance(other, FracIdeal):
            return FracIdeal.from_z_generators(
                self.field, [g * h for g in self.basis for h in other.basis])
        if isinstance(other, (KElem, int, Fraction)):
            return self.scale(other)
        return NotImplemented

    __rmul__ = __mul__

    def __add__(self, other: 'FracIdeal') -> 'FracIdeal':
        return FracIdeal.from_z_generators(self.field, list(self.basis) + list(other.basis))

    def scale(self, alpha) -> 'FracIdeal':
        if not alpha:
            raise IdealError("scaling by zero")
        return FracIdeal.from_z_generators(self.field, [alpha * g for g in self.basis])

    def conjugate(self) -> 'FracIdeal':
        return FracIdeal.from_z_generators(self.field, [g.conj() for g in self.basis])

    def inverse(self) -> 'FracIdeal':
        """a^-1 = conj(a) / N(a)"""
        return self.conjugate().scale(1 / self.norm)

    def power(self, k: int) -> 'FracIdeal':
        """a^k, negative k allowed"""
        result = FracIdeal.unit(self.field)
        base = self if k >= 0 else self.inverse()
        for _ in range(abs(k)):
            result = result * base
        return result

    def __str__(self):
        g1, g2 = self.basis
        return f"<{g1}, {g2}>"


def ideal_from_generators(field: QuadField, gens: Sequence[KElem]) -> FracIdeal:
    """HNF of the O_K-module generated by gens"""
    if not any(gens):
        raise IdealError("all generators are zero")
    omega = field.omega
    elems = []
    for g in gens:
        elems.extend([g, g * omega])
    return FracIdeal.from_z_generators(field, elems)


def principal_generator(ideal: FracIdeal) -> Optional[KElem]:
    """gamma with ideal = gamma*O_K, or None when the ideal is not principal"""
    den = lcm(ideal.a.denominator, ideal.b.denominator, ideal.c.denominator)
    integral = ideal.scale(den)
    target = integral.norm
    u, v = integral.basis
    cross = (u * v.conj()).trace() / 2
    gram = [[u.norm(), cross], [cross, v.norm()]]
    for value, (x, y) in short_vectors(gram, target):
        if value == target:
            return (u * x + v * y) / den
    return None


def reduced_forms(discriminant: int) -> List[Tuple[int, int, int]]:
    """Reduced primitive positive definite binary quadratic forms of the discriminant"""
    if discriminant >= 0 or discriminant % 4 not in (0, 1):
        raise IdealError(f"{discriminant} is not a negative discriminant")
    forms = []
    a = 1
    while 3 * a * a <= -discriminant:
        for b in range(-a + 1, a + 1):
            numerator = b * b - discriminant
            if numerator % (4 * a):
                continue
            c = numerator // (4 * a)
            if c < a or (c == a and b < 0):
                continue
            if gcd(gcd(a, b), c) != 1:
                continue
            forms.append((a, b, c))
        a += 1
    return forms


def form_ideal(field: QuadField, form: Tuple[int, int, int]) -> FracIdeal:
    """The ideal Z*a + Z*(-b + sqrt(D))/2 attached to a form (a, b, c)"""
    a, b, _ = form
    half_root = Fraction(1, 2) if field.omega_kind == 'half' else Fraction(1)
    ideal = FracIdeal.from_z_generators(field, [field.elem(a), field.from_sqrt(Fraction(-b, 2), half_root)])
    check(ideal.is_ok_module() and ideal.norm == a, f"form {form} does not give an ideal of norm {a}")
    return ideal


def integral_ideals_of_norm(field: QuadField, norm: int) -> List[FracIdeal]:
    ideals = []
    for c in divisors(norm):
        a = norm // c
        for b in range(a):
            candidate = FracIdeal(field, Fraction(a), Fraction(b), Fraction(c))
            if candidate.is_ok_module():
                ideals.append(candidate)
    return ideals


def are_equivalent(first: FracIdeal, second: FracIdeal) -> bool:
    return principal_generator(first * second.conjugate()) is not None


@dataclass(frozen=True)
class IdealClass:
    """Ideal class with its fixed integral representative"""
    index: int
    representative: FracIdeal

    def __str__(self):
        return f"[{self.index}] {self.representative}"


@dataclass(frozen=True)
class ClassGroup:
    """Class group with minimal-norm representatives and multiplication table"""
    field: QuadField
    representatives: Tuple[FracIdeal, ...]
    table: Tuple[Tuple[int, ...], ...]

    @property
    def order(self) -> int:
        return len(self.representatives)

    @property
    def max_norm(self) -> Fraction:
        return max(rep.norm for rep in self.representatives)

    def ideal_class(self, index: int) -> IdealClass:
        if not 1 <= index <= self.order:
            raise IdealError(f"class index {index} outside 1..{self.order}")
        return IdealClass(index, self.representatives[index - 1])

    def multiply(self, i: int, j: int) -> int:
        """Index of the product class"""
        return self.table[i - 1][j - 1]

    def power(self, i: int, k: int) -> int:
        """Index of the k-th power of class i, k >= 0"""
        result = 1
        for _ in range(k):
            result = self.multiply(result, i)
        return result

    def inverse(self, i: int) -> int:
        """Index of the inverse class"""
        return next(j for j in range(1, self.order + 1) if self.multiply(i, j) == 1)

    def element_order(self, i: int) -> int:
        """Order of class i in the group"""
        k, current = 1, i
        while current != 1:
            current = self.multiply(current, i)
            k += 1
        return k

    def is_cyclic(self) -> bool:
        return any(self.element_order(i) == self.order for i in range(1, self.order + 1))

    def class_index(self, ideal: FracIdeal) -> int:
        """Index j of the class containing the ideal"""
        return class_of(ideal, self)[0].index


def class_of(ideal: FracIdeal, group: 'ClassGroup' = None) -> Tuple[IdealClass, KElem]:
    """Class index j and alpha in K* with alpha * ideal = a_j"""
    group = group or class_group(ideal.field)
    for position, rep in enumerate(group.representatives):
        gamma = principal_generator(ideal * rep.conjugate())
        if gamma is None:
            continue
        alpha = rep.norm / gamma
        check(ideal.scale(alpha) == rep, f"scaling {ideal} by {alpha} does not reach {rep}")
        return IdealClass(position + 1, rep), alpha
    raise InvariantViolation(f"{ideal} is equivalent to no class representative")


@lru_cache(maxsize=None)
def class_group(field: QuadField) -> ClassGroup:
    forms = reduced_forms(field.discriminant)
    representatives = []
    for form in forms:
        seed = form_ideal(field, form)
        same_class = [ideal for ideal in integral_ideals_of_norm(field, form[0])
                      if are_equivalent(ideal, seed)]
        # ties between conjugate minimal ideals go to the greatest HNF
        representatives.append(max(same_class, key=lambda ideal: ideal.hnf))
    representatives.sort(key=FracIdeal.sort_key)
    check(representatives[0] == FracIdeal.unit(field), "first representative must be O_K")
    check(len(set(representatives)) == len(representatives), "duplicate class representatives")

    partial = ClassGroup(field, tuple(representatives), ())
    table = []
    for first in representatives:
        row = []
        for second in representatives:
            row.append(class_of(first * second, partial)[0].index)
        table.append(tuple(row))
    group = ClassGroup(field, tuple(representatives), tuple(table))
    logger.info(f"Class group of {field}: h = {group.order}, representatives "
                f"{', '.join(str(rep) for rep in representatives)}")
    return group


def lattice_class_reps(field: QuadField, n: int) -> List[IdealClass]:
    """
    Representatives of Gal(K/Q) \\ Cl_K / Cl_K^n: c ~ c*p^n and c ~ conj(c)*p^n.
    conj(c) is the inverse class.
    """
    if n < 2:
        raise IdealError("dimension must be at least 2")
    group = class_group(field)
    powers = {group.power(p, n) for p in range(1, group.order + 1)}
    seen = set()
    reps = []
    for c in range(1, group.order + 1):
        if c in seen:
            continue
        orbit = {group.multiply(c, p) for p in powers}
        orbit |= {group.multiply(group.inverse(c), p) for p in powers}
        seen |= orbit
        reps.append(group.ideal_class(c))
    logger.debug(f"Lattice classes for {field}, n = {n}: {[rep.index for rep in reps]}")
    return reps
