import logging
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

from sympy import Matrix, Rational
from sympy.solvers.simplex import InfeasibleLPError, linprog

from ideal_classes import class_group
from invariants import check
from ok_lattice import KVector, OKLattice, to_fraction
from polyhedral_cones import (DegenerateConeError, coords, facet_enumeration, outer, pairing_row,
                              trace_pairing, uncoords)
from quadratic_field import (KElem, QuadField, conj_transpose, identity_matrix, mat_det, mat_inv,
                             mat_mul)
from short_vectors import NotPositiveDefiniteError

logger = logging.getLogger('HermitianForms')


class NotHermitianError(ValueError):
    """Matrix is not equal to its conjugate transpose"""


class NotPerfectError(ValueError):
    """Minimal vectors do not span the space of Hermitian matrices"""


class ReconstructionError(ValueError):
    """Linear system for a form with prescribed minimal vectors is inconsistent"""


def _rational(value: Fraction) -> Rational:
    return Rational(value.numerator, value.denominator)


@dataclass(frozen=True)
class HermForm:
    """Hermitian n x n matrix over K"""
    entries: Tuple[Tuple[KElem, ...], ...]

    def __post_init__(self):
        n = len(self.entries)
        if n == 0 or any(len(row) != n for row in self.entries):
            raise NotHermitianError("form must be a non-empty square matrix")
        if any(self.entries[i][j] != self.entries[j][i].conj() for i in range(n) for j in range(i, n)):
            raise NotHermitianError("matrix is not Hermitian")

    @classmethod
    def identity(cls, field: QuadField, n: int) -> 'HermForm':
        return cls(identity_matrix(field, n))

    @classmethod
    def from_coords(cls, field: QuadField, n: int, values: Sequence[Fraction]) -> 'HermForm':
        return cls(uncoords(field, n, values))

    @classmethod
    def from_sqrt_rows(cls, field: QuadField, rows) -> 'HermForm':
        """Rows of (x, y) pairs meaning x + y*sqrt(-d); plain rationals allowed"""
        def convert(entry):
            if isinstance(entry, KElem):
                return entry
            if isinstance(entry, (tuple, list)):
                return field.from_sqrt(Fraction(entry[0]), Fraction(entry[1]))
            return field.elem(Fraction(entry))
        return cls(tuple(tuple(convert(entry) for entry in row) for row in rows))

    @property
    def field(self) -> QuadField:
        return self.entries[0][0].field

    @property
    def n(self) -> int:
        return len(self.entries)

    def evaluate(self, x: Sequence[KElem]) -> Fraction:
        """A[x] = x A x*"""
        if len(x) != self.n:
            raise ValueError(f"vector of length {len(x)} for a {self.n} x {self.n} form")
        total = self.field.zero
        for i, xi in enumerate(x):
            if not xi:
                continue
            for j, xj in enumerate(x):
                if xj:
                    total = total + xi * self.entries[i][j] * xj.conj()
        return total.a

    def __add__(self, other: 'HermForm') -> 'HermForm':
        return HermForm(tuple(tuple(a + b for a, b in zip(r, s)) for r, s in zip(self.entries, other.entries)))

    def __sub__(self, other: 'HermForm') -> 'HermForm':
        return self + other.scale(-1)

    def scale(self, factor) -> 'HermForm':
        factor = Fraction(factor)
        return HermForm(tuple(tuple(entry * factor for entry in row) for row in self.entries))

    def transform(self, u) -> 'HermForm':
        """A[U] = U A U*"""
        return HermForm(mat_mul(mat_mul(u, self.entries), conj_transpose(u)))

    def conjugate(self) -> 'HermForm':
        return HermForm(tuple(tuple(entry.conj() for entry in row) for row in self.entries))

    def determinant(self) -> Fraction:
        return mat_det(self.entries).a

    def inverse(self) -> 'HermForm':
        return HermForm(mat_inv(self.entries))

    def principal_minors(self, leading_only: bool = False) -> List[Fraction]:
        n = self.n
        if leading_only:
            index_sets = [tuple(range(k)) for k in range(1, n + 1)]
        else:
            index_sets = [s for k in range(1, n + 1) for s in combinations(range(n), k)]
        return [mat_det(tuple(tuple(self.entries[i][j] for j in s) for i in s)).a for s in index_sets]

    def is_positive_definite(self) -> bool:
        return all(minor > 0 for minor in self.principal_minors(leading_only=True))

    def is_positive_semidefinite(self) -> bool:
        return all(minor >= 0 for minor in self.principal_minors())

    def is_indefinite(self) -> bool:
        return not self.is_positive_semidefinite() and not self.scale(-1).is_positive_semidefinite()

    def to_dict(self) -> Dict:
        return {
            'd': self.field.d,
            'n': self.n,
            'entries': [[[str(part) for part in entry.sqrt_parts()] for entry in row] for row in self.entries],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'HermForm':
        field = QuadField(int(data['d']))
        return cls.from_sqrt_rows(field, [[(Fraction(x), Fraction(y)) for x, y in row] for row in data['entries']])

    def __str__(self):
        return "[" + "; ".join(", ".join(str(entry) for entry in row) for row in self.entries) + "]"


@dataclass(frozen=True)
class MinimalVector:
    """Canonical representative of a projective class of minimal vectors"""
    vector: KVector
    z_coords: Tuple[int, ...]
    class_index: int
    ideal_norm: Fraction


@dataclass(frozen=True)
class MinVecSet:
    """Minimum of a form with its complete list of projective minimal vectors"""
    minimum: Fraction
    vectors: Tuple[MinimalVector, ...]

    def __len__(self):
        return len(self.vectors)

    def keys(self) -> frozenset:
        return frozenset(v.z_coords for v in self.vectors)

    def rays(self) -> List[Tuple[Fraction, ...]]:
        return [coords(outer(v.vector)) for v in self.vectors]


@dataclass(frozen=True)
class EutaxyCertificate:
    """Positive coefficients with A^-1 = sum lambda_x x*x, or a separating facet vector"""
    eutactic: bool
    coefficients: Optional[Tuple[Fraction, ...]] = None
    witness: Optional[HermForm] = None


def evaluate(form: HermForm, x: Sequence[KElem]) -> Fraction:
    return form.evaluate(x)


def det_rel(form: HermForm, lattice: OKLattice) -> Fraction:
    """det_L(A) = N(c_1 ... c_n) N(det E) det A"""
    ideal_norm = Fraction(1)
    for ideal in lattice.coeff_ideals:
        ideal_norm *= ideal.norm
    direction = Fraction(1) if lattice.is_standard else mat_det(lattice.direction_basis).norm()
    return ideal_norm * direction * form.determinant()


def _canonical_key(lattice: OKLattice, x: KVector, z: Tuple[int, ...]) -> Tuple[Tuple[int, ...], KVector]:
    units = lattice.field.units
    if len(units) == 2:
        negated = tuple(-c for c in z)
        return (z, x) if z <= negated else (negated, tuple(-e for e in x))
    options = []
    for unit in units:
        scaled = tuple(unit * e for e in x)
        options.append((tuple(int(c) for c in lattice.z_coords(scaled)), scaled))
    return min(options, key=lambda option: option[0])


def minimum_and_minvecs(form: HermForm, lattice: OKLattice) -> MinVecSet:
    """
    Exact min_L(A) = min A[x]/N(a_x) with the projective minimal vectors,
    each scaled so that a_x is its class representative.
    """
    if not form.is_positive_definite():
        raise NotPositiveDefiniteError("minimum of a form that is not positive definite")
    group = class_group(lattice.field)
    representative_index = {rep: i + 1 for i, rep in enumerate(group.representatives)}
    gram = lattice.trace_form(form)

    smallest = gram.reduced_diagonal()[0]
    candidate = None
    for norm, v in gram.short_vectors(smallest):
        ratio = norm / lattice.coeff_ideal(lattice.vector_from_z(v)).norm
        candidate = ratio if candidate is None else min(candidate, ratio)

    best = None
    hits = {}
    for norm, v in gram.short_vectors(candidate * group.max_norm):
        x = lattice.vector_from_z(v)
        ideal = lattice.coeff_ideal(x)
        index = representative_index.get(ideal)
        if index is None:
            continue
        ratio = norm / ideal.norm
        if best is not None and ratio > best:
            continue
        if best is None or ratio < best:
            best, hits = ratio, {}
        key, representative = _canonical_key(lattice, x, v)
        hits[key] = MinimalVector(representative, key, index, ideal.norm)
    check(best is not None, "no minimal vector found below the candidate bound")
    vectors = tuple(hits[key] for key in sorted(hits))
    return MinVecSet(best, vectors)


def hermite_invariant(form: HermForm, lattice: OKLattice, minvecs: MinVecSet = None) -> Fraction:
    """gamma^n = min^n / det_L"""
    minimum = (minvecs or minimum_and_minvecs(form, lattice)).minimum
    return minimum ** form.n / det_rel(form, lattice)


def perfection_rank(minvecs: MinVecSet) -> int:
    rows = [[_rational(value) for value in pairing_row(v.vector)] for v in minvecs.vectors]
    return Matrix(rows).rank() if rows else 0


def is_perfect(form: HermForm, lattice: OKLattice, minvecs: MinVecSet = None) -> Tuple[bool, int]:
    minvecs = minvecs or minimum_and_minvecs(form, lattice)
    rank = perfection_rank(minvecs)
    return rank == form.n ** 2, rank


def eutaxy_certificate(form: HermForm, lattice: OKLattice, minvecs: MinVecSet = None) -> EutaxyCertificate:
    """
    Decide whether A^-1 lies in the open cone spanned by the x*x, x in S(A).
    Solved as the exact linear program sum (1 + mu_x) x*x = s A^-1 with
    mu, s >= 0; then lambda_x = (1 + mu_x)/s.
    """
    minvecs = minvecs or minimum_and_minvecs(form, lattice)
    n = form.n
    columns = minvecs.rays()
    target = coords(form.inverse())
    size = n * n
    k = len(columns)
    a_eq = [[_rational(columns[x][r]) for x in range(k)] + [-_rational(target[r])] for r in range(size)]
    b_eq = [-sum((_rational(columns[x][r]) for x in range(k)), Rational(0)) for r in range(size)]
    objective = [1] * k + [0]
    try:
        _, values = linprog(objective, A=[[0] * (k + 1)], b=[1], A_eq=a_eq, b_eq=b_eq)
    except InfeasibleLPError:
        witness = _separating_witness(form, minvecs, target)
        logger.debug(f"Form {form} is not eutactic")
        return EutaxyCertificate(False, None, witness)

    values = [to_fraction(value) for value in values]
    scale = values[-1]
    check(scale > 0, "eutaxy scale must be positive")
    coefficients = tuple((1 + mu) / scale for mu in values[:-1])
    for r in range(size):
        total = sum((coefficients[x] * columns[x][r] for x in range(k)), Fraction(0))
        check(total == target[r], "eutaxy certificate does not reproduce A^-1")
    return EutaxyCertificate(True, coefficients, None)


def _separating_witness(form: HermForm, minvecs: MinVecSet, target) -> Optional[HermForm]:
    field, n = form.field, form.n
    rays = minvecs.rays()
    try:
        cone = facet_enumeration(field, rays)
    except DegenerateConeError:
        rows = Matrix([[_rational(v) for v in pairing_row(m.vector)] for m in minvecs.vectors])
        for basis in rows.nullspace():
            normal = [to_fraction(value) for value in basis]
            pairing = trace_pairing(field, normal, target)
            if pairing != 0:
                sign = -1 if pairing > 0 else 1
                return HermForm.from_coords(field, n, [sign * value for value in normal])
        return None
    for facet in cone.facets:
        if trace_pairing(field, facet.normal, target) <= 0:
            return HermForm.from_coords(field, n, facet.normal)
    return None


def is_extreme(form: HermForm, lattice: OKLattice, minvecs: MinVecSet = None) -> bool:
    minvecs = minvecs or minimum_and_minvecs(form, lattice)
    return is_perfect(form, lattice, minvecs)[0] and eutaxy_certificate(form, lattice, minvecs).eutactic


def reconstruct_from_minvecs(minimum: Fraction, minvecs: MinVecSet) -> HermForm:
    """The unique Hermitian A with A[x] = m N(a_x) on the minimal vectors"""
    if not minvecs.vectors:
        raise NotPerfectError("no minimal vectors given")
    first = minvecs.vectors[0].vector
    field, n = first[0].field, len(first)
    rows = Matrix([[_rational(v) for v in pairing_row(m.vector)] for m in minvecs.vectors])
    if rows.rank() < n * n:
        raise NotPerfectError(f"minimal vectors span rank {rows.rank()} < {n * n}")
    rhs = Matrix([_rational(Fraction(minimum) * m.ideal_norm) for m in minvecs.vectors])
    try:
        solution, parameters = rows.gauss_jordan_solve(rhs)
    except ValueError as e:
        raise ReconstructionError(f"inconsistent system: {e}") from e
    check(parameters.shape[0] == 0, "reconstruction left free parameters")
    return HermForm.from_coords(field, n, [to_fraction(value) for value in solution])
