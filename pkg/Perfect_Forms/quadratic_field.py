import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import List, Sequence, Tuple, Union

from sympy import factorint

logger = logging.getLogger('QuadraticField')

Rational = Union[int, Fraction]


class FieldError(ValueError):
    """Invalid field parameter or mixed-field arithmetic"""


@dataclass(frozen=True)
class QuadField:
    """Imaginary quadratic field Q(sqrt(-d)) with integral basis {1, omega}"""
    d: int

    def __post_init__(self):
        if not isinstance(self.d, int) or isinstance(self.d, bool) or self.d <= 0:
            raise FieldError(f"d must be a positive integer, got {self.d!r}")
        if any(exponent > 1 for exponent in factorint(self.d).values()):
            raise FieldError(f"d = {self.d} is not squarefree")

    @property
    def omega_kind(self) -> str:
        """'half' when omega = (1+sqrt(-d))/2, 'root' when omega = sqrt(-d)"""
        return 'half' if self.d % 4 == 3 else 'root'

    @property
    def trace_omega(self) -> int:
        return 1 if self.omega_kind == 'half' else 0

    @property
    def norm_omega(self) -> int:
        return (1 + self.d) // 4 if self.omega_kind == 'half' else self.d

    @property
    def discriminant(self) -> int:
        return -self.d if self.omega_kind == 'half' else -4 * self.d

    def elem(self, a: Rational = 0, b: Rational = 0) -> 'KElem':
        return KElem(self, Fraction(a), Fraction(b))

    @property
    def zero(self) -> 'KElem':
        return self.elem(0, 0)

    @property
    def one(self) -> 'KElem':
        return self.elem(1, 0)

    @property
    def omega(self) -> 'KElem':
        return self.elem(0, 1)

    @property
    def sqrt_minus_d(self) -> 'KElem':
        """The purely imaginary element sqrt(-d)"""
        return self.from_sqrt(0, 1)

    def from_sqrt(self, x: Rational, y: Rational) -> 'KElem':
        """Element x + y*sqrt(-d) converted to the {1, omega} basis"""
        x, y = Fraction(x), Fraction(y)
        if self.omega_kind == 'half':
            b = 2 * y
            return KElem(self, x - b / 2, b)
        return KElem(self, x, y)

    @cached_property
    def units(self) -> List['KElem']:
        """The finite unit group of O_K"""
        found = []
        for a in range(-2, 3):
            for b in range(-2, 3):
                candidate = self.elem(a, b)
                if candidate.norm() == 1:
                    found.append(candidate)
        return sorted(found, key=lambda u: (u.a, u.b))

    def __str__(self):
        return f"Q(sqrt(-{self.d}))"


@dataclass(frozen=True)
class KElem:
    """Element a + b*omega of K"""
    field: QuadField
    a: Fraction
    b: Fraction

    def _coerce(self, other) -> 'KElem':
        if isinstance(other, KElem):
            if other.field != self.field:
                raise FieldError(f"Cannot combine elements of {self.field} and {other.field}")
            return other
        if isinstance(other, (int, Fraction)):
            return KElem(self.field, Fraction(other), Fraction(0))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return KElem(self.field, self.a + other.a, self.b + other.b)

    __radd__ = __add__

    def __neg__(self):
        return KElem(self.field, -self.a, -self.b)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return KElem(self.field, self.a - other.a, self.b - other.b)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        t, s = self.field.trace_omega, self.field.norm_omega
        # omega^2 = t*omega - s
        be = self.b * other.b
        return KElem(self.field,
                     self.a * other.a - be * s,
                     self.a * other.b + self.b * other.a + be * t)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __bool__(self):
        return bool(self.a) or bool(self.b)

    def conj(self) -> 'KElem':
        return KElem(self.field, self.a + self.b * self.field.trace_omega, -self.b)

    def norm(self) -> Fraction:
        t, s = self.field.trace_omega, self.field.norm_omega
        return self.a * self.a + t * self.a * self.b + s * self.b * self.b

    def trace(self) -> Fraction:
        return 2 * self.a + self.b * self.field.trace_omega

    def inverse(self) -> 'KElem':
        n = self.norm()
        if n == 0:
            raise ZeroDivisionError("inverse of zero element")
        c = self.conj()
        return KElem(self.field, c.a / n, c.b / n)

    def is_integral(self) -> bool:
        return self.a.denominator == 1 and self.b.denominator == 1

    def sqrt_parts(self) -> Tuple[Fraction, Fraction]:
        """(x, y) with self = x + y*sqrt(-d)"""
        if self.field.omega_kind == 'half':
            return self.a + self.b / 2, self.b / 2
        return self.a, self.b

    def __str__(self):
        x, y = self.sqrt_parts()
        root = f"sqrt(-{self.field.d})"
        if y == 0:
            return str(x)
        imag = root if y == 1 else f"-{root}" if y == -1 else f"{y}*{root}"
        if x == 0:
            return imag
        return f"{x}+{imag}" if not imag.startswith('-') else f"{x}{imag}"


KMatrix = Sequence[Sequence[KElem]]


def identity_matrix(field: QuadField, n: int) -> Tuple[Tuple[KElem, ...], ...]:
    return tuple(tuple(field.one if i == j else field.zero for j in range(n)) for i in range(n))


def mat_mul(x: KMatrix, y: KMatrix) -> Tuple[Tuple[KElem, ...], ...]:
    rows, inner, cols = len(x), len(y), len(y[0])
    result = []
    for i in range(rows):
        row = []
        for j in range(cols):
            total = x[i][0] * y[0][j]
            for k in range(1, inner):
                total = total + x[i][k] * y[k][j]
            row.append(total)
        result.append(tuple(row))
    return tuple(result)


def vec_mat(v: Sequence[KElem], m: KMatrix) -> Tuple[KElem, ...]:
    """Row vector times matrix"""
    return mat_mul((tuple(v),), m)[0]


def conj_transpose(x: KMatrix) -> Tuple[Tuple[KElem, ...], ...]:
    return tuple(tuple(x[j][i].conj() for j in range(len(x))) for i in range(len(x[0])))


def _row_reduce(m: KMatrix, augment: KMatrix = None):
    """Gauss-Jordan elimination; returns (determinant, reduced augment or None)"""
    n = len(m)
    field = m[0][0].field
    work = [list(row) + (list(augment[i]) if augment is not None else []) for i, row in enumerate(m)]
    det = field.one
    for col in range(n):
        pivot = next((r for r in range(col, n) if work[r][col]), None)
        if pivot is None:
            return field.zero, None
        if pivot != col:
            work[col], work[pivot] = work[pivot], work[col]
            det = -det
        p = work[col][col]
        det = det * p
        inv = p.inverse()
        work[col] = [entry * inv for entry in work[col]]
        for r in range(n):
            if r != col and work[r][col]:
                factor = work[r][col]
                work[r] = [entry - factor * pivot_entry for entry, pivot_entry in zip(work[r], work[col])]
    if augment is None:
        return det, None
    return det, tuple(tuple(row[n:]) for row in work)


def mat_det(m: KMatrix) -> KElem:
    return _row_reduce(m)[0]


def mat_inv(m: KMatrix) -> Tuple[Tuple[KElem, ...], ...]:
    field = m[0][0].field
    det, inverse = _row_reduce(m, identity_matrix(field, len(m)))
    if inverse is None:
        raise ZeroDivisionError("matrix over K is singular")
    return inverse


def field_new(d: int) -> QuadField:
    field = QuadField(d)
    logger.debug(f"Constructed {field}: omega kind {field.omega_kind}, discriminant {field.discriminant}")
    return field
