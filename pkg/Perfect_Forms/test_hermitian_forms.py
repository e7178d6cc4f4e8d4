import random
from fractions import Fraction
from itertools import product
from math import isqrt

import pytest
from sympy import Matrix, Rational

from conftest import published_cases, published_form, published_lattice, random_automorphism, random_positive_form
from hermitian_forms import (HermForm, NotHermitianError, NotPerfectError, NotPositiveDefiniteError, det_rel,
                             eutaxy_certificate, hermite_invariant, is_extreme, is_perfect, minimum_and_minvecs,
                             perfection_rank, reconstruct_from_minvecs)
from ideal_classes import class_group
from ok_lattice import standard_lattice
from polyhedral_cones import coords, outer, trace_pairing
from quadratic_field import QuadField, identity_matrix


def brute_force_minimum(form, lattice):
    """(minimum, number of projective minimal vectors) by scanning a box of Z-coordinates"""
    group = class_group(lattice.field)
    representatives = set(group.representatives)
    gram = lattice.trace_form(form).matrix
    bound = min(gram[i][i] for i in range(len(gram))) * group.max_norm
    inverse = Matrix([[Rational(v.numerator, v.denominator) for v in row] for row in gram]).inv()
    radius = [isqrt(int(bound * inverse[i, i])) + 1 for i in range(len(gram))]
    best, count = None, 0
    for v in product(*(range(-r, r + 1) for r in radius)):
        if not any(v):
            continue
        x = lattice.vector_from_z(v)
        ideal = lattice.coeff_ideal(x)
        ratio = form.evaluate(x) / ideal.norm
        if best is None or ratio < best:
            best, count = ratio, 0
        if ratio == best and ideal in representatives:
            count += 1
    return best, count // len(lattice.field.units)


# ---------------------------------------------------------
# Basic matrix operations
# ---------------------------------------------------------
def test_rejects_non_hermitian(k15):
    with pytest.raises(NotHermitianError):
        HermForm(((k15.one, k15.omega), (k15.omega, k15.one)))
    with pytest.raises(NotHermitianError):
        HermForm(((k15.omega,),))


def test_definiteness(k5):
    assert HermForm.identity(k5, 2).is_positive_definite()
    semidefinite = HermForm.from_sqrt_rows(k5, [[1, 0], [0, 0]])
    assert semidefinite.is_positive_semidefinite() and not semidefinite.is_positive_definite()
    indefinite = HermForm.from_sqrt_rows(k5, [[1, 0], [0, -1]])
    assert indefinite.is_indefinite()
    assert not HermForm.identity(k5, 2).is_indefinite()


def test_transform_matches_row_action(k15, p_nonfree15):
    u = ((k15.one, k15.elem(1, 1)), (k15.zero, -k15.one))
    moved = p_nonfree15.transform(u)
    rng = random.Random(1)
    for _ in range(10):
        x = tuple(k15.elem(rng.randint(-3, 3), rng.randint(-3, 3)) for _ in range(2))
        xu = (x[0] * u[0][0] + x[1] * u[1][0], x[0] * u[0][1] + x[1] * u[1][1])
        assert moved.evaluate(x) == p_nonfree15.evaluate(xu)
    assert p_nonfree15.transform(identity_matrix(k15, 2)) == p_nonfree15


def test_evaluate_scales_by_the_norm(k15, p1_free15):
    x = (k15.elem(2, -1), k15.omega)
    alpha = k15.elem(1, 1)
    assert p1_free15.evaluate(tuple(alpha * e for e in x)) == alpha.norm() * p1_free15.evaluate(x)


def test_inverse_and_determinant(p_nonfree15):
    assert p_nonfree15.determinant() == Fraction(1, 10)
    assert p_nonfree15.inverse().determinant() == 10


def test_dict_round_trip(p_nonfree15):
    data = p_nonfree15.to_dict()
    assert data['entries'][0][1] == ['1/2', '1/10']
    assert HermForm.from_dict(data) == p_nonfree15


# ---------------------------------------------------------
# Minimum and minimal vectors
# ---------------------------------------------------------
def test_identity_over_the_free_lattice(k5):
    lattice = standard_lattice(k5, 1, 2)
    identity = HermForm.identity(k5, 2)
    minvecs = minimum_and_minvecs(identity, lattice)
    assert minvecs.minimum == 1
    assert len(minvecs) == 2
    assert perfection_rank(minvecs) == 2
    assert is_perfect(identity, lattice, minvecs) == (False, 2)


def test_identity_over_the_non_free_lattice(k5):
    lattice = standard_lattice(k5, 2, 2)
    minvecs = minimum_and_minvecs(HermForm.identity(k5, 2), lattice)
    assert minvecs.minimum == 1
    assert (-1, 0, 0, 0) in minvecs.keys()


def test_minimal_vectors_carry_representative_ideals(nonfree15, p_nonfree15):
    minvecs = minimum_and_minvecs(p_nonfree15, nonfree15)
    representatives = class_group(nonfree15.field).representatives
    for v in minvecs.vectors:
        assert nonfree15.coeff_ideal(v.vector) == representatives[v.class_index - 1]
        assert p_nonfree15.evaluate(v.vector) == minvecs.minimum * v.ideal_norm


def test_not_positive_definite(k5):
    with pytest.raises(NotPositiveDefiniteError):
        minimum_and_minvecs(HermForm.from_sqrt_rows(k5, [[1, 0], [0, -1]]), standard_lattice(k5, 1, 2))


def test_minimum_scales_with_the_lattice(k5):
    lattice = standard_lattice(k5, 1, 2)
    p = class_group(k5).representatives[1]
    identity = HermForm.identity(k5, 2)
    assert minimum_and_minvecs(identity, lattice.scaled(p)).minimum == p.norm * 1


@pytest.mark.parametrize('d', [15, 21])
def test_scaled_lattice_invariants(d):
    qfield = QuadField(d)
    group = class_group(qfield)
    ideals = list(group.representatives) + [rep.conjugate() for rep in group.representatives[1:]]
    rng = random.Random(d)
    for class_index in range(1, group.order + 1):
        lattice = standard_lattice(qfield, class_index, 2)
        steinitz = lattice.steinitz_class(group).index
        forms = [random_positive_form(qfield, rng) for _ in range(2)]
        minima = [minimum_and_minvecs(form, lattice).minimum for form in forms]
        for p in ideals:
            scaled = lattice.scaled(p)
            p_class = group.class_index(p)
            assert scaled.steinitz_class(group).index == group.multiply(group.power(p_class, 2), steinitz)
            for form, minimum in zip(forms, minima):
                assert det_rel(form, scaled) == p.norm ** 2 * det_rel(form, lattice)
                assert minimum_and_minvecs(form, scaled).minimum == p.norm * minimum


def test_invariants_under_gl_substitution():
    lattices = [standard_lattice(QuadField(d), j, 2) for d, j in [(15, 1), (15, 2), (5, 1), (5, 2)]]
    rng = random.Random(100)
    for _ in range(100):
        lattice = rng.choice(lattices)
        form = random_positive_form(lattice.field, rng)
        moved = form.transform(random_automorphism(lattice, rng))
        before, after = minimum_and_minvecs(form, lattice), minimum_and_minvecs(moved, lattice)
        assert after.minimum == before.minimum
        assert len(after) == len(before)
        assert det_rel(moved, lattice) == det_rel(form, lattice)
        assert hermite_invariant(moved, lattice, after) == hermite_invariant(form, lattice, before)


@pytest.mark.parametrize('d, class_index', [(5, 2), (15, 1), (15, 2), (6, 2)])
def test_minimum_matches_brute_force(d, class_index):
    qfield = QuadField(d)
    lattice = standard_lattice(qfield, class_index, 2)
    rng = random.Random(d * 10 + class_index)
    for _ in range(3):
        form = random_positive_form(qfield, rng)
        minvecs = minimum_and_minvecs(form, lattice)
        assert (minvecs.minimum, len(minvecs)) == brute_force_minimum(form, lattice)


@pytest.mark.slow
def test_minimum_matches_brute_force_many_forms():
    rng = random.Random(99)
    for _ in range(100):
        qfield = QuadField(rng.choice([5, 6, 10, 15, 21]))
        lattice = standard_lattice(qfield, rng.randint(1, class_group(qfield).order), 2)
        form = random_positive_form(qfield, rng)
        minvecs = minimum_and_minvecs(form, lattice)
        assert (minvecs.minimum, len(minvecs)) == brute_force_minimum(form, lattice)


# ---------------------------------------------------------
# Published perfect forms
# ---------------------------------------------------------
@pytest.mark.parametrize('d, ideal_norm, entry', published_cases())
def test_published_forms(d, ideal_norm, entry):
    lattice = published_lattice(d, ideal_norm)
    form = published_form(lattice.field, entry)
    det, size = Fraction(entry['invariants'][0]), entry['invariants'][1]
    minvecs = minimum_and_minvecs(form, lattice)
    assert minvecs.minimum == 1
    assert len(minvecs) == size
    assert det_rel(form, lattice) == det
    assert is_perfect(form, lattice, minvecs) == (True, 4)
    assert hermite_invariant(form, lattice, minvecs) == 1 / det
    assert reconstruct_from_minvecs(1, minvecs) == form


def test_hermite_invariant(free15, nonfree15, p1_free15, p_nonfree15):
    assert hermite_invariant(p1_free15, free15) == 3
    assert hermite_invariant(p_nonfree15, nonfree15) == 5
    assert hermite_invariant(p_nonfree15.scale(7), nonfree15) == 5
    assert hermite_invariant(p_nonfree15.conjugate(), nonfree15.conjugate()) == 5


def test_reconstruction_needs_a_perfect_form(k5):
    lattice = standard_lattice(k5, 1, 2)
    minvecs = minimum_and_minvecs(HermForm.identity(k5, 2), lattice)
    with pytest.raises(NotPerfectError):
        reconstruct_from_minvecs(1, minvecs)


# ---------------------------------------------------------
# Eutaxy
# ---------------------------------------------------------
def test_global_maximum_is_eutactic(nonfree15, p_nonfree15):
    minvecs = minimum_and_minvecs(p_nonfree15, nonfree15)
    certificate = eutaxy_certificate(p_nonfree15, nonfree15, minvecs)
    assert certificate.eutactic
    assert len(certificate.coefficients) == len(minvecs)
    assert all(c > 0 for c in certificate.coefficients)
    rays = minvecs.rays()
    total = [sum((c * ray[r] for c, ray in zip(certificate.coefficients, rays)), Fraction(0)) for r in range(4)]
    assert tuple(total) == coords(p_nonfree15.inverse())
    assert is_extreme(p_nonfree15, nonfree15, minvecs)


def test_non_eutactic_form_has_a_witness(k5):
    lattice = standard_lattice(k5, 1, 2)
    form = HermForm.from_sqrt_rows(k5, [[1, 0], [0, 2]])
    certificate = eutaxy_certificate(form, lattice)
    assert not certificate.eutactic
    witness = certificate.witness
    assert witness is not None
    assert witness.evaluate((k5.one, k5.zero)) == 0
    assert trace_pairing(k5, coords(witness), coords(form.inverse())) < 0
    assert not is_extreme(form, lattice)


def test_rank_one_forms_evaluate_like_outer_products(k15):
    x = (k15.one, k15.elem(1, -1))
    rank_one = HermForm(outer(x))
    y = (k15.elem(2), k15.omega)
    inner = x[0].conj() * y[0] + x[1].conj() * y[1]
    assert rank_one.evaluate(y) == inner.norm()
