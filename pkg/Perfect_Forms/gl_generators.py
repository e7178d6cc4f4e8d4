import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from invariants import check
from lattice_isometry import KMatrix
from ok_lattice import OKLattice
from quadratic_field import mat_inv, mat_mul
from voronoi_algorithm import PerfectFormRecord, VoronoiGraph

logger = logging.getLogger('GLGenerators')


@dataclass(frozen=True)
class EdgeGenerator:
    """U with A = P[U] for a contiguous form A that is not itself a representative"""
    matrix: KMatrix
    source_class: int
    facet_id: int
    target_class: int


@dataclass(frozen=True)
class GLGenSet:
    """Generators of GL(L): stabilizers of the representatives plus one U per facet"""
    stabilizer_gens: Dict[int, Tuple[KMatrix, ...]]
    edge_gens: Tuple[EdgeGenerator, ...]

    def matrices(self) -> List[KMatrix]:
        gens = [g for class_id in sorted(self.stabilizer_gens) for g in self.stabilizer_gens[class_id]]
        return gens + [edge.matrix for edge in self.edge_gens]

    def __len__(self):
        return len(self.matrices())

    def tagged(self) -> List[Dict]:
        entries = []
        for class_id in sorted(self.stabilizer_gens):
            for g in self.stabilizer_gens[class_id]:
                entries.append({'kind': 'stabilizer', 'class_id': class_id, 'facet_id': None, 'matrix': g})
        for edge in self.edge_gens:
            entries.append({'kind': 'edge', 'class_id': edge.source_class, 'facet_id': edge.facet_id,
                            'target_class': edge.target_class, 'matrix': edge.matrix})
        return entries


def gl_generators(lattice: OKLattice, records: Sequence[PerfectFormRecord], graph: VoronoiGraph) -> GLGenSet:
    """Generators of GL(L) from a completed enumeration"""
    representatives = {record.class_id: record.form for record in records}
    stabilizers = {}
    for record in records:
        check(record.aut is not None, f"class {record.class_id} carries no automorphism group")
        stabilizers[record.class_id] = record.aut.generators

    edges = []
    for source, target, data in sorted(graph.graph.edges(data=True), key=lambda e: (e[0], e[2]['facet'])):
        neighbor, u = data['neighbor'], data['transform']
        representative = representatives[target]
        if neighbor == representative:
            continue
        check(neighbor == representative.transform(u), "edge transformation does not map P to the neighbor")
        check(neighbor.transform(mat_inv(u)) == representative, "pulled-back neighbor is not the representative")
        edges.append(EdgeGenerator(u, source, data['facet'], target))

    gens = GLGenSet(stabilizers, tuple(edges))
    for g in gens.matrices():
        check(lattice.is_automorphism(g), "generator does not preserve the lattice")
    logger.info(f"GL(L) over {lattice.describe()}: {sum(len(s) for s in stabilizers.values())} stabilizer "
                f"and {len(edges)} edge generators")
    return gens


def products_preserve_lattice(lattice: OKLattice, gens: Sequence[KMatrix], length: int = 3) -> bool:
    """Every product of at most `length` generators lies in GL(L)"""
    words = list(gens)
    current = list(words)
    for _ in range(length - 1):
        current = [mat_mul(w, g) for w in current for g in gens]
        words.extend(current)
    return all(lattice.is_automorphism(w) for w in words)
