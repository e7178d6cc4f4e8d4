"""
GL(L)-equivalence of Hermitian forms and their automorphism groups.

A K-linear U with B = A[U] and L U = L is the same thing as an integral
unimodular T on the Z-basis of L that carries the trace form of B to that
of A, does the same for the trace form of omega*B, and commutes with the
matrix of multiplication by omega. The search picks a Q-basis of short
vectors of B and backtracks over images of equal length in A, pruning
with both trace forms.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from sympy import Matrix

from hermitian_forms import HermForm, det_rel, minimum_and_minvecs
from invariants import check
from ok_lattice import IntGram, OKLattice
from quadratic_field import KElem, identity_matrix, mat_mul

logger = logging.getLogger('LatticeIsometry')

KMatrix = Tuple[Tuple[KElem, ...], ...]

# element order statistics -> isomorphism type, for the small groups that occur
GROUP_LABELS = {
    (1, ((1, 1),)): 'C1',
    (2, ((1, 1), (2, 1))): 'C2',
    (4, ((1, 1), (2, 1), (4, 2))): 'C4',
    (4, ((1, 1), (2, 3))): 'C2xC2',
    (6, ((1, 1), (2, 1), (3, 2), (6, 2))): 'C6',
    (6, ((1, 1), (2, 3), (3, 2))): 'S3',
    (8, ((1, 1), (2, 1), (4, 6))): 'Q8',
    (8, ((1, 1), (2, 1), (4, 2), (8, 4))): 'C8',
    (8, ((1, 1), (2, 5), (4, 2))): 'D4',
    (8, ((1, 1), (2, 3), (4, 4))): 'C4xC2',
    (12, ((1, 1), (2, 1), (3, 2), (4, 6), (6, 2))): 'C3:C4',
    (12, ((1, 1), (2, 1), (3, 2), (4, 2), (6, 2), (12, 4))): 'C12',
    (12, ((1, 1), (2, 3), (3, 2), (6, 6))): 'C6xC2',
    (12, ((1, 1), (2, 7), (3, 2), (6, 2))): 'D6',
    (12, ((1, 1), (2, 3), (3, 8))): 'A4',
    (24, ((1, 1), (2, 1), (3, 8), (4, 6), (6, 8))): 'SL(2,3)',
}


class ScaleMismatchError(ValueError):
    """Forms with different minima cannot be compared for equivalence"""


@dataclass(frozen=True)
class FormPairGram:
    """Trace forms of A and of omega*A on the Z-basis of L, plus the omega action"""
    f1: IntGram
    f2: Tuple[Tuple[Fraction, ...], ...]
    momega: Tuple[Tuple[int, ...], ...]

    @classmethod
    def build(cls, form: HermForm, lattice: OKLattice) -> 'FormPairGram':
        f2 = tuple(tuple(row) for row in lattice.omega_trace_form(form))
        return cls(lattice.trace_form(form), f2, lattice.omega_matrix)

    @property
    def denominators(self) -> int:
        scale = self.f1.scale
        for row in self.f2:
            for entry in row:
                scale = lcm(scale, entry.denominator)
        return scale


@dataclass(frozen=True)
class AutGroup:
    """Aut(L, A) with its elements, a small generating set and its type"""
    elements: Tuple[KMatrix, ...]
    generators: Tuple[KMatrix, ...]
    element_orders: Dict[int, int] = field(compare=False)

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def label(self) -> str:
        key = (self.order, tuple(sorted(self.element_orders.items())))
        return GROUP_LABELS.get(key, f"order-{self.order}")


def _scaled_arrays(matrices: Sequence[Sequence[Sequence[Fraction]]], scale: int) -> List[np.ndarray]:
    """Integer arrays scale * M, int64 unless some entry is too large"""
    values = [[[int(entry * scale) for entry in row] for row in rows] for rows in matrices]
    largest = max(abs(x) for rows in values for row in rows for x in row)
    dtype = np.int64 if largest < 2 ** 31 else object
    return [np.array(rows, dtype=dtype) for rows in values]


def _spanning_vectors(gram: IntGram) -> List[Tuple[Fraction, Tuple[int, ...]]]:
    """A Q-basis of short vectors, chosen greedily by norm"""
    dimension = gram.dimension
    # the reduced basis spans, so its longest vector caps the search
    diagonal = gram.reduced_diagonal()
    bound, cap = diagonal[0], diagonal[-1]
    while True:
        chosen: List[Tuple[Fraction, Tuple[int, ...]]] = []
        for norm, v in gram.short_vectors(bound):
            if Matrix([list(c) for _, c in chosen] + [list(v)]).rank() > len(chosen):
                chosen.append((norm, v))
                if len(chosen) == dimension:
                    return chosen
        check(bound < cap, "short vectors up to the largest basis norm do not span")
        bound = min(2 * bound, cap)


class _Search:
    """Backtracking over images of a short Q-basis of B among vectors of A"""

    def __init__(self, pair_a: FormPairGram, pair_b: FormPairGram):
        scale = lcm(pair_a.denominators, pair_b.denominators)
        self.a1, self.a2, b1, b2 = _scaled_arrays(
            [pair_a.f1.matrix, pair_a.f2, pair_b.f1.matrix, pair_b.f2], scale)
        self.momega = Matrix(pair_a.momega)

        self.basis = _spanning_vectors(pair_b.f1)
        c = np.array([v for _, v in self.basis], dtype=self.a1.dtype)
        self.c_inverse = Matrix(c.tolist()).inv()
        # target inner products among the chosen B vectors
        self.t1 = c.dot(b1).dot(c.T)
        self.t2 = c.dot(b2).dot(c.T)

        shells: Dict[Fraction, List[Tuple[int, ...]]] = {}
        wanted = {norm for norm, _ in self.basis}
        for norm, v in pair_a.f1.short_vectors(max(wanted)):
            if norm in wanted:
                shells.setdefault(norm, []).extend([v, tuple(-x for x in v)])
        self.candidates = []
        for k, (norm, _) in enumerate(self.basis):
            vectors = np.array(shells.get(norm, []), dtype=self.a1.dtype).reshape(-1, len(c))
            if len(vectors):
                diagonal = np.einsum('ij,ij->i', vectors.dot(self.a2), vectors)
                vectors = vectors[diagonal == self.t2[k, k]]
            self.candidates.append(vectors)
        self.products = [(v.dot(self.a1), v.dot(self.a2), v.dot(self.a2.T)) for v in self.candidates]

    def solutions(self) -> Iterator[Matrix]:
        dimension = len(self.basis)
        images: List[np.ndarray] = []

        def extend(k: int):
            if k == dimension:
                transform = self.c_inverse * Matrix(np.array(images).tolist())
                if any(not entry.is_integer for entry in transform):
                    return
                if abs(transform.det()) != 1:
                    return
                if transform * self.momega != self.momega * transform:
                    return
                yield transform
                return
            vectors = self.candidates[k]
            if not len(vectors):
                return
            mask = np.ones(len(vectors), dtype=bool)
            p1, p2, p2t = self.products[k]
            for j, w in enumerate(images):
                mask &= p1.dot(w) == self.t1[k, j]
                mask &= p2.dot(w) == self.t2[k, j]
                mask &= p2t.dot(w) == self.t2[j, k]
            for index in np.flatnonzero(mask):
                images.append(vectors[index])
                yield from extend(k + 1)
                images.pop()

        yield from extend(0)


def _lift(lattice: OKLattice, transform: Matrix) -> KMatrix:
    rows = tuple(tuple(int(transform[i, j]) for j in range(transform.cols)) for i in range(transform.rows))
    u = lattice.from_transformation(rows)
    check(lattice.transformation_matrix(u) == rows, "lifted map does not reproduce the Z-transformation")
    return u


def isometries(form_a: HermForm, form_b: HermForm, lattice: OKLattice) -> Iterator[KMatrix]:
    """Every U in GL(L) with B = A[U]"""
    pair_a, pair_b = FormPairGram.build(form_a, lattice), FormPairGram.build(form_b, lattice)
    for transform in _Search(pair_a, pair_b).solutions():
        u = _lift(lattice, transform)
        check(form_a.transform(u) == form_b, "isometry of trace forms does not lift to B = A[U]")
        yield u


def is_equivalent(form_a: HermForm, form_b: HermForm, lattice: OKLattice,
                  check_scale: bool = True) -> Optional[KMatrix]:
    """U in GL(L) with B = A[U], or None when the forms are inequivalent"""
    if check_scale:
        first = minimum_and_minvecs(form_a, lattice).minimum
        second = minimum_and_minvecs(form_b, lattice).minimum
        if first != second:
            raise ScaleMismatchError(f"minima differ: {first} != {second}")
    if det_rel(form_a, lattice) != det_rel(form_b, lattice):
        return None
    u = next(isometries(form_a, form_b, lattice), None)
    logger.debug(f"Equivalence test: {'equivalent' if u is not None else 'not equivalent'}")
    return u


def element_order(g: KMatrix) -> int:
    identity = identity_matrix(g[0][0].field, len(g))
    k, power = 1, g
    while power != identity:
        power = mat_mul(power, g)
        k += 1
    return k


def _closure(generators: Sequence[KMatrix]) -> set:
    identity = identity_matrix(generators[0][0][0].field, len(generators[0]))
    group = {identity}
    frontier = [identity]
    while frontier:
        current = frontier.pop()
        for g in generators:
            product = mat_mul(current, g)
            if product not in group:
                group.add(product)
                frontier.append(product)
    return group


def generating_set(elements: Sequence[KMatrix]) -> Tuple[KMatrix, ...]:
    """Greedy generators, elements of highest order first"""
    orders = {g: element_order(g) for g in elements}
    ranked = sorted(range(len(elements)), key=lambda i: (-orders[elements[i]], i))
    generators: List[KMatrix] = []
    span = {identity_matrix(elements[0][0][0].field, len(elements[0]))}
    for i in ranked:
        if len(span) == len(elements):
            break
        g = elements[i]
        if g not in span:
            generators.append(g)
            span = _closure(generators)
    return tuple(generators)


def aut_group(form: HermForm, lattice: OKLattice) -> AutGroup:
    elements = tuple(isometries(form, form, lattice))
    check(len(elements) >= 2, "Aut(L, A) must contain the unit scalars")
    orders = Counter(element_order(g) for g in elements)
    group = AutGroup(elements, generating_set(elements), dict(orders))
    check(len(_closure(group.generators)) == group.order, "generators do not span the automorphism group")
    logger.debug(f"Aut(L, A) of order {group.order}, type {group.label}")
    return group
