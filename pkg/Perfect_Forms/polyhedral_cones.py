"""
Exact polyhedral geometry in the n^2-dimensional real vector space of
Hermitian n x n matrices over K.

Coordinates use the basis {E_ii} + {E_ij + E_ji} + {delta (E_ij - E_ji)},
i < j, with delta = sqrt(-d). In these coordinates Trace(AB) is the
diagonal form trace_gram = diag(1, ..., 2, ..., 2d, ...).
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from math import gcd, isqrt, lcm
from typing import FrozenSet, List, Sequence, Tuple

from sympy import Matrix

from quadratic_field import KElem, QuadField

logger = logging.getLogger('PolyhedralCones')

HermCoords = Tuple[Fraction, ...]


class DegenerateConeError(ValueError):
    """Rays do not span a full-dimensional cone"""


def coordinate_labels(n: int) -> List[Tuple]:
    labels = [('diag', i, i) for i in range(n)]
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    labels += [('re', i, j) for i, j in pairs]
    labels += [('im', i, j) for i, j in pairs]
    return labels


def coords(form) -> HermCoords:
    """Coordinates of a Hermitian matrix (HermForm or entry rows)"""
    entries = getattr(form, 'entries', form)
    n = len(entries)
    values = []
    for kind, i, j in coordinate_labels(n):
        if kind == 'diag':
            values.append(entries[i][i].a)
        else:
            real, imag = entries[i][j].sqrt_parts()
            values.append(real if kind == 're' else imag)
    return tuple(values)


def uncoords(field: QuadField, n: int, values: Sequence[Fraction]) -> Tuple[Tuple[KElem, ...], ...]:
    if len(values) != n * n:
        raise ValueError(f"expected {n * n} coordinates, got {len(values)}")
    rows = [[field.zero] * n for _ in range(n)]
    parts = {}
    for (kind, i, j), value in zip(coordinate_labels(n), values):
        if kind == 'diag':
            rows[i][i] = field.elem(value)
        else:
            parts.setdefault((i, j), [Fraction(0), Fraction(0)])[0 if kind == 're' else 1] = Fraction(value)
    for (i, j), (real, imag) in parts.items():
        rows[i][j] = field.from_sqrt(real, imag)
        rows[j][i] = field.from_sqrt(real, -imag)
    return tuple(tuple(row) for row in rows)


def trace_gram(field: QuadField, n: int) -> Tuple[int, ...]:
    """Diagonal Gram matrix G with Trace(AB) = <coords A, G coords B>"""
    weights = {'diag': 1, 're': 2, 'im': 2 * field.d}
    return tuple(weights[kind] for kind, _, _ in coordinate_labels(n))


def trace_pairing(field: QuadField, u: Sequence[Fraction], v: Sequence[Fraction]) -> Fraction:
    n = isqrt(len(u))
    return sum((g * x * y for g, x, y in zip(trace_gram(field, n), u, v)), Fraction(0))


def outer(x: Sequence[KElem]) -> Tuple[Tuple[KElem, ...], ...]:
    """The rank-one Hermitian matrix x*x with entries conj(x_i) x_j"""
    return tuple(tuple(xi.conj() * xj for xj in x) for xi in x)


def pairing_row(x: Sequence[KElem]) -> Tuple[Fraction, ...]:
    """Row phi_x with phi_x . coords(R) = R[x]"""
    field = x[0].field
    gram = trace_gram(field, len(x))
    return tuple(g * c for g, c in zip(gram, coords(outer(x))))


@dataclass(frozen=True)
class Facet:
    """Facet of a polyhedral cone: content-1 integral normal and incident ray indices"""
    normal: Tuple[int, ...]
    incident: FrozenSet[int]


@dataclass(frozen=True)
class PolyCone:
    """Cone generated by rank-one Hermitian matrices, with its facets"""
    field: QuadField
    rays: Tuple[HermCoords, ...]
    facets: Tuple[Facet, ...]

    @property
    def dimension(self) -> int:
        return len(self.rays[0])

    def value(self, facet: Facet, ray_index: int) -> Fraction:
        return trace_pairing(self.field, facet.normal, self.rays[ray_index])


def _primitive(values: Sequence[Fraction]) -> Tuple[int, ...]:
    den = 1
    for v in values:
        den = lcm(den, Fraction(v).denominator)
    ints = [int(Fraction(v) * den) for v in values]
    content = 0
    for v in ints:
        content = gcd(content, v)
    return tuple(v // content for v in ints) if content else tuple(ints)


def _dot(u: Sequence[int], v: Sequence[int]) -> int:
    return sum(a * b for a, b in zip(u, v))


def _double_description(constraints: List[Tuple[int, ...]], dimension: int) -> List[Tuple[Tuple[int, ...], int]]:
    """
    Extreme rays of {r : c . r >= 0 for all constraints c}; returns
    (ray, bitmask of tight constraints) pairs. The constraint rows must
    have full rank.
    """
    matrix = Matrix(constraints)
    _, pivots = matrix.T.rref()
    start = list(pivots)[:dimension]
    inverse = Matrix([constraints[i] for i in start]).inv()
    full = 0
    for i in start:
        full |= 1 << i
    rays = []
    for k in range(dimension):
        column = [Fraction(int(inverse[i, k].p), int(inverse[i, k].q)) for i in range(dimension)]
        rays.append((_primitive(column), full & ~(1 << start[k])))

    for index, constraint in enumerate(constraints):
        if (full >> index) & 1:
            continue
        values = [_dot(constraint, ray) for ray, _ in rays]
        positive = [i for i, v in enumerate(values) if v > 0]
        negative = [i for i, v in enumerate(values) if v < 0]
        bit = 1 << index
        created = []
        for p in positive:
            ray_p, zeros_p = rays[p]
            for q in negative:
                ray_q, zeros_q = rays[q]
                common = zeros_p & zeros_q
                if common.bit_count() < dimension - 2:
                    continue
                # adjacent iff no third ray is tight on all of common
                if any(r != p and r != q and (zeros_r & common) == common
                       for r, (_, zeros_r) in enumerate(rays)):
                    continue
                combined = [values[p] * b - values[q] * a for a, b in zip(ray_p, ray_q)]
                created.append((_primitive(combined), common | bit))
        kept = [(ray, zeros | bit if values[i] == 0 else zeros)
                for i, (ray, zeros) in enumerate(rays) if values[i] >= 0]
        rays = kept + created
        full |= bit
    return rays


def facet_enumeration(field: QuadField, rays: Sequence[HermCoords]) -> PolyCone:
    """All facets of cone(rays) by exact double description"""
    rays = tuple(tuple(Fraction(v) for v in ray) for ray in rays)
    if not rays:
        raise DegenerateConeError("no rays")
    dimension = len(rays[0])
    n = isqrt(dimension)
    gram = trace_gram(field, n)
    constraints = []
    for ray in rays:
        # positive rescaling leaves the cone unchanged
        constraints.append(_primitive([g * v for g, v in zip(gram, ray)]))
    if Matrix(constraints).rank() != dimension:
        raise DegenerateConeError(f"{len(rays)} rays do not span dimension {dimension}")

    extreme = _double_description(constraints, dimension)
    facets = []
    for normal, zeros in extreme:
        incident = frozenset(i for i in range(len(rays)) if (zeros >> i) & 1)
        if len(incident) < dimension - 1:
            raise DegenerateConeError(f"facet {normal} has only {len(incident)} incident rays")
        facets.append(Facet(normal, incident))
    facets.sort(key=lambda facet: facet.normal)
    logger.debug(f"Cone with {len(rays)} rays in dimension {dimension}: {len(facets)} facets")
    return PolyCone(field, rays, tuple(facets))
