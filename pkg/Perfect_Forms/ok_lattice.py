import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import lcm
from typing import List, Optional, Sequence, Tuple

from sympy import Matrix, Rational

from ideal_classes import ClassGroup, FracIdeal, IdealClass, IdealError, class_group, class_of
from quadratic_field import KElem, QuadField, identity_matrix, mat_det, mat_inv, mat_mul, vec_mat
from short_vectors import lll_reduce, quadratic_decomposition, short_vectors, evaluate as gram_evaluate, \
    NotPositiveDefiniteError

logger = logging.getLogger('OKLattice')

KVector = Tuple[KElem, ...]


class LatticeError(ValueError):
    """Invalid lattice data or vector outside the lattice"""


def to_fraction(value) -> Fraction:
    """sympy Rational -> Fraction"""
    value = Rational(value)
    return Fraction(int(value.p), int(value.q))


def rational_inverse(rows: Sequence[Sequence[Fraction]]) -> List[List[Fraction]]:
    inverse = Matrix([[Rational(x.numerator, x.denominator) for x in row] for row in rows]).inv()
    return [[to_fraction(inverse[i, j]) for j in range(inverse.cols)] for i in range(inverse.rows)]


@dataclass(frozen=True)
class IntGram:
    """Symmetric rational Gram matrix of a Z-lattice; scale clears its denominators"""
    matrix: Tuple[Tuple[Fraction, ...], ...]
    scale: int

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Fraction]]) -> 'IntGram':
        scale = 1
        for row in rows:
            for entry in row:
                scale = lcm(scale, Fraction(entry).denominator)
        return cls(tuple(tuple(Fraction(entry) for entry in row) for row in rows), scale)

    @property
    def dimension(self) -> int:
        return len(self.matrix)

    def is_symmetric(self) -> bool:
        k = self.dimension
        return all(self.matrix[i][j] == self.matrix[j][i] for i in range(k) for j in range(k))

    def is_positive_definite(self) -> bool:
        try:
            quadratic_decomposition(self.matrix)
        except NotPositiveDefiniteError:
            return False
        return True

    def evaluate(self, v: Sequence[int]) -> Fraction:
        return gram_evaluate(self.matrix, v)

    def short_vectors(self, bound: Fraction, halve: bool = True):
        return short_vectors(self.matrix, bound, halve)

    def reduced_diagonal(self) -> List[Fraction]:
        """Norms of an LLL-reduced basis, smallest first"""
        reduced, _ = lll_reduce(self.matrix)
        return sorted(reduced[i][i] for i in range(self.dimension))


@dataclass(frozen=True)
class OKLattice:
    """O_K-lattice c_1 e_1 + ... + c_n e_n in K^n"""
    field: QuadField
    coeff_ideals: Tuple[FracIdeal, ...]
    direction_basis: Tuple[Tuple[KElem, ...], ...]

    def __post_init__(self):
        n = len(self.coeff_ideals)
        if n < 1 or len(self.direction_basis) != n or any(len(row) != n for row in self.direction_basis):
            raise LatticeError("need n coefficient ideals and an n x n direction basis")
        if any(ideal.field != self.field for ideal in self.coeff_ideals):
            raise LatticeError("coefficient ideals live in a different field")
        if not mat_det(self.direction_basis):
            raise LatticeError("direction basis is singular")

    @property
    def n(self) -> int:
        return len(self.coeff_ideals)

    @cached_property
    def is_standard(self) -> bool:
        return self.direction_basis == identity_matrix(self.field, self.n)

    @cached_property
    def z_basis(self) -> Tuple[KVector, ...]:
        basis = []
        for ideal, direction in zip(self.coeff_ideals, self.direction_basis):
            for g in ideal.basis:
                basis.append(tuple(g * entry for entry in direction))
        return tuple(basis)

    @cached_property
    def _rational_basis(self) -> List[List[Fraction]]:
        return [self.flatten(b) for b in self.z_basis]

    @cached_property
    def _inverse_basis(self) -> List[List[Fraction]]:
        return rational_inverse(self._rational_basis)

    @cached_property
    def _inverse_directions(self):
        return mat_inv(self.direction_basis)

    @cached_property
    def _inverse_ideals(self) -> Tuple[FracIdeal, ...]:
        return tuple(ideal.inverse() for ideal in self.coeff_ideals)

    def flatten(self, x: Sequence[KElem]) -> List[Fraction]:
        """Rational coordinates (a_1, b_1, ..., a_n, b_n) of x over the basis 1, omega"""
        if len(x) != self.n:
            raise LatticeError(f"vector of length {len(x)} in a rank-{self.n} lattice")
        flat = []
        for entry in x:
            flat.extend([entry.a, entry.b])
        return flat

    def z_coords(self, x: Sequence[KElem]) -> Tuple[Fraction, ...]:
        """Coordinates of x on the Z-basis; all integral iff x lies in L"""
        flat = self.flatten(x)
        inverse = self._inverse_basis
        size = len(flat)
        return tuple(sum((flat[i] * inverse[i][j] for i in range(size) if flat[i]), Fraction(0))
                     for j in range(size))

    def contains(self, x: Sequence[KElem]) -> bool:
        return all(c.denominator == 1 for c in self.z_coords(x))

    def vector_from_z(self, v: Sequence[int]) -> KVector:
        """Inverse of z_coords: the vector sum v_i b_i"""
        size = 2 * self.n
        flat = [Fraction(0)] * size
        for coefficient, row in zip(v, self._rational_basis):
            if coefficient:
                for j in range(size):
                    flat[j] += coefficient * row[j]
        return tuple(self.field.elem(flat[2 * i], flat[2 * i + 1]) for i in range(self.n))

    def coeff_ideal(self, x: Sequence[KElem]) -> FracIdeal:
        """a_x = x_1 c_1^-1 + ... + x_n c_n^-1 in pseudo-basis coordinates"""
        if len(x) != self.n:
            raise LatticeError(f"vector of length {len(x)} in a rank-{self.n} lattice")
        y = tuple(x) if self.is_standard else vec_mat(x, self._inverse_directions)
        gens = []
        for coefficient, inverse in zip(y, self._inverse_ideals):
            if coefficient:
                gens.extend(coefficient * g for g in inverse.basis)
        if not gens:
            raise LatticeError("coefficient ideal of the zero vector")
        return FracIdeal.from_z_generators(self.field, gens)

    def steinitz_class(self, group: ClassGroup = None) -> IdealClass:
        """Class of c_1 c_2 ... c_n"""
        product = self.coeff_ideals[0]
        for ideal in self.coeff_ideals[1:]:
            product = product * ideal
        return class_of(product, group or class_group(self.field))[0]

    def scaled(self, ideal: FracIdeal) -> 'OKLattice':
        """The lattice p*L"""
        return OKLattice(self.field, tuple(ideal * c for c in self.coeff_ideals), self.direction_basis)

    def conjugate(self) -> 'OKLattice':
        """Complex conjugate lattice over conj(c_i) and conj(e_i)"""
        return OKLattice(self.field, tuple(c.conjugate() for c in self.coeff_ideals),
                         tuple(tuple(e.conj() for e in row) for row in self.direction_basis))

    def _pairing(self, entries, twist: KElem = None) -> List[List[Fraction]]:
        products = [vec_mat(b, entries) for b in self.z_basis]
        rows = []
        for bA in products:
            row = []
            for b in self.z_basis:
                total = self.field.zero
                for left, right in zip(bA, b):
                    total = total + left * right.conj()
                if twist is not None:
                    total = twist * total
                row.append(total.trace() / 2)
            rows.append(row)
        return rows

    def trace_form(self, form) -> IntGram:
        """1/2 Tr(b_i A b_j*) over the Z-basis"""
        entries = getattr(form, 'entries', form)
        n = self.n
        if any(entries[i][j] != entries[j][i].conj() for i in range(n) for j in range(n)):
            raise LatticeError("trace form of a non-Hermitian matrix")
        return IntGram.from_rows(self._pairing(entries))

    def omega_trace_form(self, form) -> List[List[Fraction]]:
        """1/2 Tr(b_i (omega A) b_j*); not symmetric"""
        return self._pairing(getattr(form, 'entries', form), self.field.omega)

    @cached_property
    def omega_matrix(self) -> Tuple[Tuple[int, ...], ...]:
        """Integer matrix of multiplication by omega on the Z-basis"""
        matrix = self.transformation_matrix(
            tuple(tuple(self.field.omega if i == j else self.field.zero for j in range(self.n))
                  for i in range(self.n)))
        if matrix is None:
            raise LatticeError("lattice is not closed under omega")
        return matrix

    def transformation_matrix(self, g) -> Optional[Tuple[Tuple[int, ...], ...]]:
        """Integer T with b_i g = sum_k T_ik b_k, or None if L g is not inside L"""
        rows = []
        for b in self.z_basis:
            coords = self.z_coords(vec_mat(b, g))
            if any(c.denominator != 1 for c in coords):
                return None
            rows.append(tuple(int(c) for c in coords))
        return tuple(rows)

    def is_automorphism(self, g) -> bool:
        """g in GL(L), i.e. L g = L"""
        matrix = self.transformation_matrix(g)
        if matrix is None:
            return False
        return abs(Matrix(matrix).det()) == 1

    def from_transformation(self, matrix: Sequence[Sequence[int]]) -> Tuple[Tuple[KElem, ...], ...]:
        """The K-linear g with B g = T B, read off a K-basis among the Z-basis rows"""
        rows = [tuple(self.vector_from_z(row)) for row in matrix]
        # z-basis rows 0, 2, 4, ... are K-multiples of e_1, ..., e_n
        chosen = [2 * i for i in range(self.n)]
        source = tuple(self.z_basis[i] for i in chosen)
        target = tuple(rows[i] for i in chosen)
        return mat_mul(mat_inv(source), target)

    def describe(self) -> str:
        return " + ".join(f"{ideal} e_{i + 1}" for i, ideal in enumerate(self.coeff_ideals))


def standard_lattice(field: QuadField, class_index: int, n: int) -> OKLattice:
    """L_j = O_K^(n-1) + a_j"""
    if n < 1:
        raise LatticeError("dimension must be positive")
    group = class_group(field)
    try:
        ideal = group.ideal_class(class_index).representative
    except IdealError as e:
        raise LatticeError(str(e)) from e
    ideals = (FracIdeal.unit(field),) * (n - 1) + (ideal,)
    lattice = OKLattice(field, ideals, identity_matrix(field, n))
    logger.debug(f"Standard lattice L_{class_index} over {field}: {lattice.describe()}")
    return lattice
