from fractions import Fraction

import pytest

from conftest import enumeration
from gl_generators import gl_generators, products_preserve_lattice
from quadratic_field import QuadField, identity_matrix, mat_inv


@pytest.fixture(scope='module')
def non_free_generators():
    lattice, records, graph = enumeration(15, 2)
    return lattice, records, gl_generators(lattice, records, graph)


def test_stabilizer_and_edge_generators(non_free_generators):
    _, _, gens = non_free_generators
    assert [len(g) for g in gens.stabilizer_gens.values()] == [2]
    assert len(gens.edge_gens) == 8
    assert len(gens) == 10
    assert sorted(edge.facet_id for edge in gens.edge_gens) == list(range(8))


def test_generators_lie_in_gl(non_free_generators):
    lattice, records, gens = non_free_generators
    representative = records[0].form
    for g in gens.matrices():
        assert lattice.is_automorphism(g)
        assert lattice.is_automorphism(mat_inv(g))
    for g in gens.stabilizer_gens[1]:
        assert representative.transform(g) == representative
    for edge in gens.edge_gens:
        assert representative.transform(edge.matrix) != representative


def test_products_of_generators_preserve_the_lattice(non_free_generators):
    lattice, _, gens = non_free_generators
    assert products_preserve_lattice(lattice, gens.matrices(), length=2)


def test_tagged_generators(non_free_generators):
    _, _, gens = non_free_generators
    tagged = gens.tagged()
    assert [t['kind'] for t in tagged] == ['stabilizer'] * 2 + ['edge'] * 8
    assert all(t['facet_id'] is None for t in tagged if t['kind'] == 'stabilizer')
    assert all(t['target_class'] == 1 for t in tagged if t['kind'] == 'edge')


def test_published_edge_matrices_preserve_the_lattice():
    lattice, _, _ = enumeration(15, 2)
    k15 = QuadField(15)

    def s(x, y):
        return k15.from_sqrt(Fraction(x), Fraction(y))

    published = [
        ((s(-4, -1), s(0, 2)), (s(-4, 0), s(4, 1))),
        ((s(4, 1), s('-1/2', '-3/2')), (s(3, 0), s('-5/2', '-1/2'))),
        ((s('7/2', '-1/2'), s('-15/2', '-1/2')), (s('1/2', '-1/2'), s('-7/2', '1/2'))),
        ((s(1, 0), s('-3/2', '-1/2')), (s(0, 0), s(-1, 0))),
        ((s(2, -1), s('-5/2', '1/2')), (s('-3/4', '-3/4'), s('-1/2', '1/2'))),
        ((s('-3/2', '1/2'), s('5/2', '-1/2')), (s('-1/2', '1/2'), s('3/2', '-1/2'))),
        ((s(1, 0), s('-7/2', '-1/2')), (s(0, 0), s(-1, 0))),
        ((s(1, 0), s(-2, 0)), (s(0, 0), s(-1, 0))),
    ]
    assert products_preserve_lattice(lattice, published, length=1)
    assert not lattice.is_automorphism(((k15.one, k15.omega), (k15.zero, k15.one)))
    assert lattice.is_automorphism(identity_matrix(k15, 2))


@pytest.mark.slow
def test_free_lattice_generators_d5():
    lattice, records, graph = enumeration(5, 1)
    gens = gl_generators(lattice, records, graph)
    assert len(gens.stabilizer_gens) == len(records)
    assert products_preserve_lattice(lattice, gens.matrices(), length=2)
