import json
import os
from fractions import Fraction

import pytest

from hermitian_forms import HermForm
from ideal_classes import class_group
from ok_lattice import standard_lattice
from quadratic_field import QuadField, identity_matrix, mat_mul
from voronoi_algorithm import enumerate_perfect

SERVICE_DIR = os.path.dirname(os.path.abspath(__file__))

_ENUMERATIONS = {}

# largest entry norm of the random GL(L) elements drawn in tests
MAX_ENTRY_NORM = 400


def load_reference_tables():
    with open(os.path.join(SERVICE_DIR, 'reference_tables.json'), 'r') as f:
        return json.load(f)


def published_form(qfield, entry):
    """Form [[d1, z], [conj z, d2]] from a reference table entry"""
    x, y = (Fraction(v) for v in entry['off_diagonal'])
    d1, d2 = (Fraction(v) for v in entry['diagonal'])
    return HermForm.from_sqrt_rows(qfield, [[d1, (x, y)], [(x, -y), d2]])


def class_index_of_norm(qfield, norm):
    group = class_group(qfield)
    return next(i + 1 for i, rep in enumerate(group.representatives) if rep.norm == Fraction(norm))


def published_cases(slow=(10, 21)):
    """pytest params (d, ideal norm, form entry) for every published binary form"""
    cases = []
    for table in load_reference_tables()['dimension_2']:
        marks = [pytest.mark.slow] if table['d'] in slow else []
        for lattice in table['lattices']:
            for position, entry in enumerate(lattice['forms']):
                cases.append(pytest.param(table['d'], lattice['ideal_norm'], entry, marks=marks,
                                          id=f"d{table['d']}-N{lattice['ideal_norm']}-{position + 1}"))
    return cases


def published_lattice(d, ideal_norm):
    qfield = QuadField(d)
    return standard_lattice(qfield, class_index_of_norm(qfield, ideal_norm), 2)


def random_positive_form(qfield, rng):
    halves = [Fraction(k, 2) for k in range(-2, 3)]
    while True:
        x, y = rng.choice(halves), rng.choice(halves) / 2
        candidate = HermForm.from_sqrt_rows(qfield, [
            [Fraction(rng.randint(1, 4)), (x, y)],
            [(x, -y), Fraction(rng.randint(1, 4), rng.randint(1, 2))],
        ])
        if candidate.is_positive_definite():
            return candidate


def random_automorphism(lattice, rng, steps=3):
    """Product of elementary matrices and unit scalings preserving c_1 e_1 + c_2 e_2"""
    qfield = lattice.field
    first, second = lattice.coeff_ideals
    upper = (second * first.inverse()).basis
    lower = (first * second.inverse()).basis
    while True:
        u = identity_matrix(qfield, 2)
        for _ in range(rng.randint(1, steps)):
            alpha = rng.choice([-1, 1]) * rng.choice(upper)
            beta = rng.choice([-1, 1]) * rng.choice(lower)
            unit = rng.choice(qfield.units)
            step = mat_mul(((qfield.one, alpha), (qfield.zero, qfield.one)),
                           ((qfield.one, qfield.zero), (beta, unit)))
            u = mat_mul(u, step)
        if max(entry.norm() for row in u for entry in row) <= MAX_ENTRY_NORM:
            assert lattice.is_automorphism(u)
            return u


def enumeration(d, class_index, n=2):
    """Cached enumerate_perfect result for the lattice O_K^(n-1) + a_j"""
    key = (d, class_index, n)
    if key not in _ENUMERATIONS:
        lattice = standard_lattice(QuadField(d), class_index, n)
        _ENUMERATIONS[key] = (lattice,) + tuple(enumerate_perfect(lattice))
    return _ENUMERATIONS[key]


@pytest.fixture(scope='session')
def reference_tables():
    return load_reference_tables()


@pytest.fixture(scope='session')
def k15():
    return QuadField(15)


@pytest.fixture(scope='session')
def k5():
    return QuadField(5)


@pytest.fixture(scope='session')
def free15(k15):
    return standard_lattice(k15, 1, 2)


@pytest.fixture(scope='session')
def nonfree15(k15):
    return standard_lattice(k15, 2, 2)


@pytest.fixture(scope='session')
def p1_free15(k15):
    """The perfect form with six minimal vectors over O_K^2, d = 15"""
    return HermForm.from_sqrt_rows(k15, [[1, ('1/2', '1/6')], [('1/2', '-1/6'), 1]])


@pytest.fixture(scope='session')
def p_nonfree15(k15):
    """The unique perfect form over O_K + <2, omega - 1>, d = 15"""
    return HermForm.from_sqrt_rows(k15, [[1, ('1/2', '1/10')], [('1/2', '-1/10'), '1/2']])
