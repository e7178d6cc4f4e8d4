import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from math import isqrt
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import joblib
import networkx as nx
from sympy import Matrix, Rational

from hermitian_forms import (HermForm, MinimalVector, MinVecSet, det_rel, eutaxy_certificate,
                             hermite_invariant, is_perfect, minimum_and_minvecs, reconstruct_from_minvecs)
from ideal_classes import lattice_class_reps
from invariants import check
from lattice_isometry import AutGroup, KMatrix, aut_group, is_equivalent
from ok_lattice import KVector, OKLattice, standard_lattice, to_fraction
from polyhedral_cones import Facet, PolyCone, facet_enumeration, pairing_row
from quadratic_field import QuadField, identity_matrix

logger = logging.getLogger('VoronoiAlgorithm')

MAX_DOUBLINGS = 200


class InvalidFacetVectorError(ValueError):
    """Direction is negative on some minimal vector of the form"""


class EnumerationBudgetExceeded(RuntimeError):
    """Time budget reached; the enumeration state has been checkpointed"""


@dataclass(frozen=True)
class ContiguityResult:
    """The contiguous form A + rho*R across one facet of V(A)"""
    rho: Fraction
    neighbor: HermForm
    shared_facet: int
    new_vectors: Tuple[MinimalVector, ...]
    minvecs: MinVecSet = field(compare=False, repr=False)


@dataclass(frozen=True)
class PerfectFormRecord:
    """Standardized record of one class of perfect forms, scaled to minimum 1"""
    class_id: int
    form: HermForm
    minvecs: MinVecSet
    det_rel: Fraction
    facet_count: int
    aut_order: int
    aut_label: str
    hermite: Fraction
    eutactic: bool
    cone: Optional[PolyCone] = field(default=None, compare=False, repr=False)
    aut: Optional[AutGroup] = field(default=None, compare=False, repr=False)

    @property
    def extreme(self) -> bool:
        return self.eutactic

    def invariants(self) -> Tuple:
        return self.det_rel, len(self.minvecs), self.facet_count, self.aut_order

    def fingerprint(self) -> Tuple:
        return self.invariants() + (tuple(sorted(v.ideal_norm for v in self.minvecs.vectors)),)

    def to_dict(self) -> Dict:
        return {
            'class_id': self.class_id,
            'form': self.form.to_dict(),
            'minimum': str(self.minvecs.minimum),
            'minimal_vectors': [
                {
                    'vector': [[str(part) for part in entry.sqrt_parts()] for entry in v.vector],
                    'z_coords': list(v.z_coords),
                    'class_index': v.class_index,
                    'ideal_norm': str(v.ideal_norm),
                }
                for v in self.minvecs.vectors
            ],
            'det_rel': str(self.det_rel),
            'min_vectors': len(self.minvecs),
            'facets': self.facet_count,
            'aut_order': self.aut_order,
            'aut_type': self.aut_label,
            'hermite_invariant': str(self.hermite),
            'eutactic': self.eutactic,
            'extreme': self.extreme,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'PerfectFormRecord':
        form = HermForm.from_dict(data['form'])
        qfield = form.field
        vectors = tuple(
            MinimalVector(
                tuple(qfield.from_sqrt(Fraction(x), Fraction(y)) for x, y in v['vector']),
                tuple(int(c) for c in v['z_coords']),
                int(v['class_index']),
                Fraction(v['ideal_norm']),
            )
            for v in data['minimal_vectors']
        )
        return cls(
            class_id=int(data['class_id']),
            form=form,
            minvecs=MinVecSet(Fraction(data['minimum']), vectors),
            det_rel=Fraction(data['det_rel']),
            facet_count=int(data['facets']),
            aut_order=int(data['aut_order']),
            aut_label=data['aut_type'],
            hermite=Fraction(data['hermite_invariant']),
            eutactic=bool(data['eutactic']),
        )


@dataclass
class VoronoiGraph:
    """
    Directed multigraph on perfect-form classes: one edge per facet, from the
    class owning the facet to the class of the contiguous form. Edge data:
    facet index, the contiguous form itself and U with neighbor = P[U] for
    the target representative P.
    """
    graph: nx.MultiDiGraph
    maximizers: Tuple[int, ...]

    @property
    def marked(self) -> int:
        return self.maximizers[0]

    @property
    def vertices(self) -> List[int]:
        return sorted(self.graph.nodes)

    def weights(self) -> Dict[Tuple[int, int], int]:
        counts: Dict[Tuple[int, int], int] = {}
        for source, target in self.graph.edges():
            counts[(source, target)] = counts.get((source, target), 0) + 1
        return counts

    def out_weights(self, vertex: int) -> Dict[int, int]:
        return {target: w for (source, target), w in self.weights().items() if source == vertex}

    def weighted_digraph(self) -> nx.DiGraph:
        simple = nx.DiGraph()
        simple.add_nodes_from(self.graph.nodes(data=True))
        for (source, target), w in self.weights().items():
            simple.add_edge(source, target, weight=w)
        return simple

    def is_connected(self) -> bool:
        return nx.is_weakly_connected(self.graph)

    def to_dot(self, name: str = 'voronoi') -> str:
        lines = [f'digraph "{name}" {{']
        for vertex in self.vertices:
            data = self.graph.nodes[vertex]
            label = f"P{vertex}\\n{data['label']}" if data.get('label') else f"P{vertex}"
            border = ', peripheries=2' if vertex in self.maximizers else ''
            lines.append(f'  {vertex} [label="{label}"{border}];')
        for (source, target), w in sorted(self.weights().items()):
            lines.append(f'  {source} -> {target} [label="{w}", weight={w}];')
        lines.append('}')
        return "\n".join(lines) + "\n"


def facet_vector(cone: PolyCone, facet: Union[int, Facet]) -> HermForm:
    """R with R[x] = 0 on the facet and R[x] > 0 on the other minimal vectors"""
    facet = cone.facets[facet] if isinstance(facet, int) else facet
    n = isqrt(len(facet.normal))
    direction = HermForm.from_coords(cone.field, n, [Fraction(v) for v in facet.normal])
    check(direction.is_indefinite(), f"facet vector {facet.normal} is not indefinite")
    return direction


def negative_witness(direction: HermForm, form: HermForm, lattice: OKLattice) -> KVector:
    """A lattice vector x with R[x] < 0, searched along growing ellipsoids of A"""
    gram = lattice.trace_form(form)
    bound = gram.reduced_diagonal()[0]
    for _ in range(MAX_DOUBLINGS):
        for _, v in gram.short_vectors(bound):
            x = lattice.vector_from_z(v)
            if direction.evaluate(x) < 0:
                return x
        bound *= 2
    check(False, "no lattice vector with R[x] < 0 found")


def _first_crossing(form: HermForm, direction: HermForm, lattice: OKLattice,
                    minimum: Fraction) -> Tuple[Fraction, HermForm, MinVecSet]:
    """
    Smallest rho > 0 at which A + rho*R acquires new minimal vectors while
    keeping the minimum m. The minimum of A + tR stays m on [0, rho].
    """
    lower, upper, infeasible = Fraction(0), Fraction(1), None
    for _ in range(MAX_DOUBLINGS):
        trial = form + direction.scale(upper)
        if not trial.is_positive_definite():
            infeasible = upper
            upper = (lower + upper) / 2
            continue
        found = minimum_and_minvecs(trial, lattice)
        if found.minimum < minimum:
            break
        check(found.minimum == minimum, "minimum increased along a facet direction")
        lower = upper
        upper = 2 * upper if infeasible is None else (upper + infeasible) / 2
    else:
        check(False, "no finite crossing along the direction")

    while True:
        roots = []
        for mv in found.vectors:
            slope = direction.evaluate(mv.vector)
            check(slope < 0, "vector below the minimum with non-negative R[x]")
            roots.append((minimum * mv.ideal_norm - form.evaluate(mv.vector)) / slope)
        upper = min(roots)
        check(upper > 0, "crossing parameter must be positive")
        trial = form + direction.scale(upper)
        found = minimum_and_minvecs(trial, lattice)
        if found.minimum == minimum:
            return upper, trial, found
        check(found.minimum < minimum, "minimum overshoot while shrinking the crossing")


def contiguous(form: HermForm, direction: HermForm, lattice: OKLattice,
               minvecs: MinVecSet = None, facet: Facet = None, facet_index: int = -1) -> ContiguityResult:
    """The perfect form A_rho = A + rho*R sharing the facet of R with A"""
    minvecs = minvecs or minimum_and_minvecs(form, lattice)
    values = [direction.evaluate(v.vector) for v in minvecs.vectors]
    if any(value < 0 for value in values):
        raise InvalidFacetVectorError("direction is negative on a minimal vector")
    if all(value == 0 for value in values):
        raise InvalidFacetVectorError("direction vanishes on every minimal vector")

    rho, neighbor, found = _first_crossing(form, direction, lattice, minvecs.minimum)
    check(is_perfect(neighbor, lattice, found)[0], "contiguous form is not perfect")

    old_keys = minvecs.keys()
    shared = frozenset(v.z_coords for v, value in zip(minvecs.vectors, values) if value == 0)
    if facet is not None:
        check(shared == frozenset(minvecs.vectors[i].z_coords for i in facet.incident),
              "facet vector does not vanish exactly on the facet")
    check(old_keys & found.keys() == shared, "contiguous forms share more than the facet")
    new_vectors = tuple(v for v in found.vectors if v.z_coords not in old_keys)
    logger.debug(f"Facet {facet_index}: rho = {rho}, {len(new_vectors)} new minimal vectors")
    return ContiguityResult(rho, neighbor, facet_index, new_vectors, found)


def first_perfect_path(lattice: OKLattice, start: HermForm = None) -> List[HermForm]:
    """Forms visited from the start form (identity by default) to a perfect one"""
    form = start or HermForm.identity(lattice.field, lattice.n)
    n2 = lattice.n ** 2
    path = [form]
    found = minimum_and_minvecs(form, lattice)
    perfect, rank = is_perfect(form, lattice, found)
    while not perfect:
        check(len(path) <= n2, f"first perfect form not reached in {n2} steps")
        rows = Matrix([[Rational(v.numerator, v.denominator) for v in pairing_row(m.vector)]
                       for m in found.vectors])
        kernel = rows.nullspace()
        direction = HermForm.from_coords(lattice.field, lattice.n, [to_fraction(v) for v in kernel[0]])
        # along a semidefinite direction the minimum never drops
        if direction.is_positive_semidefinite():
            direction = direction.scale(-1)
        _, form, found = _first_crossing(form, direction, lattice, found.minimum)
        perfect, new_rank = is_perfect(form, lattice, found)
        check(new_rank > rank, "Voronoi span did not grow")
        rank = new_rank
        path.append(form)
        logger.debug(f"First perfect form search: step {len(path) - 1}, rank {rank} of {n2}")
    return path


def first_perfect(lattice: OKLattice, start: HermForm = None) -> HermForm:
    return first_perfect_path(lattice, start)[-1]


@dataclass
class _ClassEntry:
    form: HermForm
    minvecs: MinVecSet
    cone: PolyCone
    aut: AutGroup
    det: Fraction
    explored: bool = False

    @property
    def match_key(self) -> Tuple:
        return self.det, len(self.minvecs), tuple(sorted(v.ideal_norm for v in self.minvecs.vectors))


class VoronoiEnumeration:
    """Breadth-first enumeration of perfect forms over one lattice up to GL(L)"""

    def __init__(self, lattice: OKLattice, workers: int = 1, checkpoint_path: str = None,
                 checkpoint_every: int = 10, time_budget: float = None,
                 on_progress: Callable[[str, int], None] = None):
        self.lattice = lattice
        self.workers = max(1, workers)
        self.checkpoint_path = checkpoint_path
        self.checkpoint_every = max(1, checkpoint_every)
        self.time_budget = time_budget
        self.on_progress = on_progress or (lambda event, amount: None)
        self.entries: List[_ClassEntry] = []
        # (source, facet index, target, contiguous form, U with form = P_target[U])
        self.edges: List[Tuple[int, int, int, HermForm, KMatrix]] = []

    def _checkpoint_state(self) -> Dict:
        return {
            'd': self.lattice.field.d,
            'n': self.lattice.n,
            'lattice': self.lattice.describe(),
            'entries': self.entries,
            'edges': self.edges,
        }

    def save_checkpoint(self):
        if not self.checkpoint_path:
            return
        try:
            os.makedirs(os.path.dirname(self.checkpoint_path) or '.', exist_ok=True)
            joblib.dump(self._checkpoint_state(), self.checkpoint_path)
            self.on_progress('checkpoints_written', 1)
            logger.info(f"Checkpoint with {len(self.entries)} classes written to {self.checkpoint_path}")
        except OSError as e:
            logger.warning(f"Could not write checkpoint {self.checkpoint_path}: {e}")

    def load_checkpoint(self) -> bool:
        if not self.checkpoint_path or not os.path.exists(self.checkpoint_path):
            return False
        try:
            state = joblib.load(self.checkpoint_path)
        except Exception as e:
            logger.warning(f"Could not load checkpoint {self.checkpoint_path}: {e}")
            return False
        if state.get('lattice') != self.lattice.describe() or state.get('d') != self.lattice.field.d:
            logger.warning(f"Checkpoint {self.checkpoint_path} belongs to another lattice, ignoring it")
            return False
        self.entries = state['entries']
        self.edges = state['edges']
        logger.info(f"Resumed from checkpoint with {len(self.entries)} classes")
        return True

    def _register(self, form: HermForm, minvecs: MinVecSet) -> _ClassEntry:
        cone = facet_enumeration(self.lattice.field, minvecs.rays())
        entry = _ClassEntry(form, minvecs, cone, aut_group(form, self.lattice), det_rel(form, self.lattice))
        self.entries.append(entry)
        self.on_progress('classes_found', 1)
        logger.info(f"New perfect form class {len(self.entries)}: det_L = {entry.det}, |S| = {len(minvecs)}, "
                    f"{len(cone.facets)} facets, |Aut| = {entry.aut.order}")
        return entry

    def _classify(self, form: HermForm, minvecs: MinVecSet) -> Tuple[int, KMatrix, bool]:
        """Index of the class of form with U such that form = P[U]; registers new classes"""
        key = (det_rel(form, self.lattice), len(minvecs), tuple(sorted(v.ideal_norm for v in minvecs.vectors)))
        for index, entry in enumerate(self.entries):
            if entry.match_key != key:
                continue
            self.on_progress('isometry_tests', 1)
            u = is_equivalent(entry.form, form, self.lattice, check_scale=False)
            if u is not None:
                return index, u, False
        self._register(form, minvecs)
        return len(self.entries) - 1, identity_matrix(self.lattice.field, self.lattice.n), True

    def _explore(self, entry: _ClassEntry) -> List[ContiguityResult]:
        results = []
        for index, facet in enumerate(entry.cone.facets):
            direction = facet_vector(entry.cone, facet)
            results.append(contiguous(entry.form, direction, self.lattice, entry.minvecs, facet, index))
        return results

    def _budget_exceeded(self, started: float) -> bool:
        return self.time_budget is not None and time.monotonic() - started > self.time_budget

    def run(self, resume: bool = True) -> Tuple[List[PerfectFormRecord], VoronoiGraph]:
        started = time.monotonic()
        lattice = self.lattice
        logger.info(f"Enumerating perfect forms over {lattice.describe()} in {lattice.field}, n = {lattice.n}")
        if not (resume and self.load_checkpoint()):
            start = first_perfect(lattice)
            found = minimum_and_minvecs(start, lattice)
            start = start.scale(1 / found.minimum)
            self._register(start, minimum_and_minvecs(start, lattice))

        since_checkpoint = 0
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            while True:
                frontier = [i for i, entry in enumerate(self.entries) if not entry.explored]
                if not frontier:
                    break
                explored = pool.map(self._explore, [self.entries[i] for i in frontier])
                for source, results in zip(frontier, explored):
                    for result in results:
                        self.on_progress('contiguities', 1)
                        check(result.minvecs.minimum == 1, "contiguity changed the minimum")
                        before = len(self.entries)
                        target, u, _ = self._classify(result.neighbor, result.minvecs)
                        since_checkpoint += len(self.entries) - before
                        self.edges.append((source, result.shared_facet, target, result.neighbor, u))
                    self.entries[source].explored = True
                    if since_checkpoint >= self.checkpoint_every:
                        self.save_checkpoint()
                        since_checkpoint = 0
                    if self._budget_exceeded(started):
                        self.save_checkpoint()
                        raise EnumerationBudgetExceeded(
                            f"time budget of {self.time_budget}s reached with {len(self.entries)} classes")
        self.save_checkpoint()

        records, graph = self._finish()
        logger.info(f"Finished: {len(records)} classes of perfect forms over {lattice.describe()}")
        return records, graph

    def _finish(self) -> Tuple[List[PerfectFormRecord], VoronoiGraph]:
        lattice = self.lattice
        unsorted = []
        for index, entry in enumerate(self.entries):
            record = PerfectFormRecord(
                class_id=index,
                form=entry.form,
                minvecs=entry.minvecs,
                det_rel=entry.det,
                facet_count=len(entry.cone.facets),
                aut_order=entry.aut.order,
                aut_label=entry.aut.label,
                hermite=hermite_invariant(entry.form, lattice, entry.minvecs),
                eutactic=eutaxy_certificate(entry.form, lattice, entry.minvecs).eutactic,
                cone=entry.cone,
                aut=entry.aut,
            )
            unsorted.append(record)
        # fingerprint first, discovery order breaks ties
        order = sorted(range(len(unsorted)), key=lambda i: (unsorted[i].fingerprint(), i))
        renumber = {old: new + 1 for new, old in enumerate(order)}
        records = [replace(unsorted[old], class_id=renumber[old]) for old in order]

        graph = nx.MultiDiGraph()
        for record in records:
            graph.add_node(record.class_id, label=f"{record.det_rel}", facets=record.facet_count)
        for source, facet_index, target, neighbor, u in self.edges:
            graph.add_edge(renumber[source], renumber[target], key=facet_index,
                           facet=facet_index, neighbor=neighbor, transform=u)
        best = max(record.hermite for record in records)
        voronoi = VoronoiGraph(graph, tuple(r.class_id for r in records if r.hermite == best))
        _check_enumeration(records, voronoi)
        return records, voronoi


def _check_enumeration(records: Sequence[PerfectFormRecord], voronoi: VoronoiGraph):
    for record in records:
        check(record.form.is_positive_definite(), f"class {record.class_id} is not positive definite")
        check(record.minvecs.minimum == 1, f"class {record.class_id} is not scaled to minimum 1")
        check(reconstruct_from_minvecs(1, record.minvecs) == record.form,
              f"class {record.class_id} is not determined by its minimal vectors")
        out_degree = voronoi.graph.out_degree(record.class_id)
        check(out_degree == record.facet_count,
              f"class {record.class_id}: {out_degree} edges for {record.facet_count} facets")
    check(voronoi.is_connected(), "Voronoi graph is not connected")
    weights = voronoi.weights()
    for source, target in weights:
        check((target, source) in weights, f"edge {source} -> {target} has no reverse edge")


def enumerate_perfect(lattice: OKLattice, workers: int = 1, **options) -> Tuple[List[PerfectFormRecord], VoronoiGraph]:
    """All classes of perfect forms over L with the Voronoi graph"""
    if lattice.n not in (2, 3):
        raise ValueError(f"enumeration is supported for n in (2, 3), got {lattice.n}")
    return VoronoiEnumeration(lattice, workers, **options).run()


@dataclass(frozen=True)
class HermiteConstant:
    """gamma_{n,K}^n with the maximizing (lattice class, form class) pairs"""
    qfield: QuadField
    n: int
    value: Fraction
    maximizers: Tuple[Tuple[int, int], ...]
    per_lattice: Dict[int, Tuple[List[PerfectFormRecord], VoronoiGraph]] = field(compare=False, repr=False)


def hermite_constant(qfield: QuadField, n: int, workers: int = 1,
                     enumerate_lattice: Callable[[OKLattice], Tuple] = None) -> HermiteConstant:
    """Maximum of gamma^n over all perfect forms over all lattice types"""
    enumerate_lattice = enumerate_lattice or (lambda lattice: enumerate_perfect(lattice, workers))
    per_lattice = {}
    for ideal_class in lattice_class_reps(qfield, n):
        lattice = standard_lattice(qfield, ideal_class.index, n)
        per_lattice[ideal_class.index] = enumerate_lattice(lattice)
    value = max(r.hermite for records, _ in per_lattice.values() for r in records)
    maximizers = tuple((index, r.class_id) for index, (records, _) in sorted(per_lattice.items())
                       for r in records if r.hermite == value)
    logger.info(f"Hermite constant of {qfield}, n = {n}: gamma^{n} = {value}, maximizers {maximizers}")
    return HermiteConstant(qfield, n, value, maximizers, per_lattice)
