import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd

from gl_generators import gl_generators
from ideal_classes import IdealError, class_group, lattice_class_reps
from invariants import InvariantViolation
from ok_lattice import LatticeError, OKLattice, standard_lattice
from quadratic_field import FieldError, QuadField
from voronoi_algorithm import (EnumerationBudgetExceeded, PerfectFormRecord, VoronoiEnumeration, VoronoiGraph,
                               hermite_constant)

SCHEMA_VERSION = 1
COMMANDS = ('classgroup', 'perfect', 'hermite-constant', 'graph', 'glgen')
FORMATS = ('json', 'table', 'dot')
SERVICE_DIR = os.path.dirname(os.path.abspath(__file__))

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVARIANT = 2


class UsageError(ValueError):
    """Invalid run configuration"""


def _matrix_to_json(matrix) -> List[List[List[str]]]:
    return [[[str(part) for part in entry.sqrt_parts()] for entry in row] for row in matrix]


@dataclass
class RunConfig:
    """Validated parameters of one service run"""
    command: str
    d: int
    n: int = 2
    classes: Any = 'all'
    output_format: str = 'json'
    workers: int = 1
    time_budget: Optional[float] = None
    output: Optional[str] = None
    check: bool = False
    checkpoint: bool = False
    max_dimension: int = 3
    qfield: QuadField = field(init=False, repr=False)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command}")
        try:
            self.qfield = QuadField(self.d)
        except FieldError as e:
            raise UsageError(str(e)) from e
        if self.command != 'classgroup' and not 2 <= self.n <= min(3, self.max_dimension):
            raise UsageError(f"n must be 2 or 3, got {self.n}")
        if self.output_format not in FORMATS:
            raise UsageError(f"unknown format {self.output_format}")
        if self.output_format == 'dot' and self.command != 'graph':
            raise UsageError("dot output is only available for the graph command")
        if self.classes != 'all':
            order = class_group(self.qfield).order
            self.classes = [int(c) for c in self.classes]
            bad = [c for c in self.classes if not 1 <= c <= order]
            if bad:
                raise UsageError(f"class indices {bad} outside 1..{order}")
        if self.command in ('graph', 'glgen') and (self.classes == 'all' or len(self.classes) != 1):
            raise UsageError(f"{self.command} needs exactly one --class")

    def class_indices(self) -> List[int]:
        if self.classes == 'all':
            return [c.index for c in lattice_class_reps(self.qfield, self.n)]
        return list(self.classes)


class PerfectFormsService:
    """
    Runs the Voronoi algorithm for Hermitian forms over imaginary quadratic
    fields and renders the results as JSON, tables or DOT graphs
    """

    def __init__(self, config_file=os.path.join(SERVICE_DIR, 'perfect_forms_config.json')):
        """Initialize the service"""
        self.logger = logging.getLogger('PerfectFormsService')
        self.config = self.load_config(config_file)

        # Setup logging
        logging.basicConfig(
            level=getattr(logging, str(self.config['logging']['level']).upper(), logging.INFO),
            format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        )

        # Statistics
        self.stats = {
            'lattices_processed': 0,
            'classes_found': 0,
            'contiguities': 0,
            'isometry_tests': 0,
            'checkpoints_written': 0,
            'reference_mismatches': 0
        }

    def load_config(self, config_file):
        """Load configuration from JSON file"""
        default_config = {
            'logging': {'level': 'INFO'},
            'enumeration': {
                'workers': 1,
                'checkpoint_every': 25,
                'time_budget_seconds': None,
                'max_dimension': 3
            },
            'output': {'directory': 'output', 'format': 'json'},
            'checkpoint': {
                'directory': 'checkpoints',
                'env_var': 'PERFECT_FORMS_CHECKPOINT_DIR'
            },
            'reference_tables': 'reference_tables.json'
        }

        if os.path.exists(config_file):
            try:
                with open(config_file, 'r') as f:
                    user_config = json.load(f)
                    default_config.update(user_config)
            except Exception as e:
                self.logger.warning(f"Could not load config file {config_file}: {e}")

        return default_config

    def _resolve(self, path: str) -> str:
        return path if os.path.isabs(path) else os.path.join(SERVICE_DIR, path)

    def checkpoint_directory(self) -> str:
        settings = self.config['checkpoint']
        return os.environ.get(settings.get('env_var', 'PERFECT_FORMS_CHECKPOINT_DIR')) or settings['directory']

    def _progress(self, event: str, amount: int):
        self.stats[event] = self.stats.get(event, 0) + amount

    def enumerate_lattice(self, lattice: OKLattice, run: RunConfig,
                          class_index: int) -> Tuple[List[PerfectFormRecord], VoronoiGraph]:
        checkpoint_path = None
        if run.checkpoint:
            checkpoint_path = os.path.join(self.checkpoint_directory(),
                                           f"perfect_d{run.d}_n{run.n}_class{class_index}.joblib")
        enumeration = VoronoiEnumeration(
            lattice,
            workers=run.workers,
            checkpoint_path=checkpoint_path,
            checkpoint_every=self.config['enumeration'].get('checkpoint_every', 25),
            time_budget=run.time_budget,
            on_progress=self._progress,
        )
        records, graph = enumeration.run()
        self.stats['lattices_processed'] += 1
        return records, graph

    def classgroup(self, run: RunConfig) -> Dict:
        group = class_group(run.qfield)
        return {
            'schema': SCHEMA_VERSION,
            'command': 'classgroup',
            'd': run.d,
            'discriminant': run.qfield.discriminant,
            'class_number': group.order,
            'cyclic': group.is_cyclic(),
            'representatives': [str(rep) for rep in group.representatives],
            'multiplication_table': [list(row) for row in group.table],
            'lattice_classes': {str(n): [c.index for c in lattice_class_reps(run.qfield, n)] for n in (2, 3)},
        }

    def perfect(self, run: RunConfig) -> Dict:
        lattices = []
        for index in run.class_indices():
            lattice = standard_lattice(run.qfield, index, run.n)
            records, graph = self.enumerate_lattice(lattice, run, index)
            lattices.append(self._lattice_payload(lattice, index, records, graph))
        return {'schema': SCHEMA_VERSION, 'command': 'perfect', 'd': run.d, 'n': run.n, 'lattices': lattices}

    def _lattice_payload(self, lattice: OKLattice, index: int, records: List[PerfectFormRecord],
                         graph: VoronoiGraph) -> Dict:
        return {
            'class_index': index,
            'ideal': str(lattice.coeff_ideals[-1]),
            'ideal_norm': str(lattice.coeff_ideals[-1].norm),
            'records': [record.to_dict() for record in records],
            'graph': {
                'edges': [{'from': s, 'to': t, 'weight': w} for (s, t), w in sorted(graph.weights().items())],
                'marked': graph.marked,
                'maximizers': list(graph.maximizers),
            },
        }

    def hermite_constant(self, run: RunConfig) -> Dict:
        result = hermite_constant(
            run.qfield, run.n,
            enumerate_lattice=lambda lattice: self.enumerate_lattice(
                lattice, run, class_group(run.qfield).class_index(lattice.coeff_ideals[-1])))
        lattices = []
        for index, (records, graph) in sorted(result.per_lattice.items()):
            lattices.append(self._lattice_payload(standard_lattice(run.qfield, index, run.n), index, records, graph))
        return {
            'schema': SCHEMA_VERSION,
            'command': 'hermite-constant',
            'd': run.d,
            'n': run.n,
            'gamma_power': str(result.value),
            'maximizers': [{'lattice_class': j, 'class_id': k} for j, k in result.maximizers],
            'lattices': lattices,
        }

    def graph(self, run: RunConfig) -> Tuple[Dict, VoronoiGraph]:
        index = run.classes[0]
        lattice = standard_lattice(run.qfield, index, run.n)
        records, graph = self.enumerate_lattice(lattice, run, index)
        payload = {'schema': SCHEMA_VERSION, 'command': 'graph', 'd': run.d, 'n': run.n,
                   'lattices': [self._lattice_payload(lattice, index, records, graph)]}
        return payload, graph

    def glgen(self, run: RunConfig) -> Dict:
        index = run.classes[0]
        lattice = standard_lattice(run.qfield, index, run.n)
        records, graph = self.enumerate_lattice(lattice, run, index)
        gens = gl_generators(lattice, records, graph)
        generators = []
        for entry in gens.tagged():
            entry = dict(entry)
            entry['matrix'] = _matrix_to_json(entry['matrix'])
            generators.append(entry)
        return {'schema': SCHEMA_VERSION, 'command': 'glgen', 'd': run.d, 'n': run.n, 'class_index': index,
                'ideal': str(lattice.coeff_ideals[-1]), 'generators': generators}

    def render_table(self, payload: Dict) -> str:
        """Human-readable table with the published column names"""
        if payload['command'] == 'classgroup':
            table = pd.DataFrame(payload['multiplication_table'],
                                 index=payload['representatives'], columns=payload['representatives'])
            return f"Class group of Q(sqrt(-{payload['d']})), h = {payload['class_number']}\n{table.to_string()}\n"
        if payload['command'] == 'glgen':
            rows = [{'kind': g['kind'], 'class_id': g['class_id'], 'facet_id': g['facet_id'],
                     'matrix': json.dumps(g['matrix'])} for g in payload['generators']]
            return pd.DataFrame(rows).to_string(index=False) + "\n"
        rows = []
        for lattice in payload['lattices']:
            for record in lattice['records']:
                rows.append({
                    'a': lattice['ideal'],
                    'P': record['class_id'],
                    'det_L(P)': record['det_rel'],
                    '|S_L(P)|': record['min_vectors'],
                    'facets': record['facets'],
                    'Aut(L,P)': record['aut_type'],
                    f"gamma^{payload['n']}": record['hermite_invariant'],
                    'extreme': record['extreme'],
                })
        text = pd.DataFrame(rows).to_string(index=False) + "\n"
        if payload['command'] == 'hermite-constant':
            text += f"gamma_{payload['n']}^{payload['n']} = {payload['gamma_power']}\n"
        return text

    def load_reference(self) -> Dict:
        with open(self._resolve(self.config['reference_tables']), 'r') as f:
            return json.load(f)

    def check_against_reference(self, payload: Dict) -> List[str]:
        """Mismatches between computed invariants and the bundled published tables"""
        reference = self.load_reference()
        problems = []
        if payload['n'] == 2:
            entry = next((e for e in reference['dimension_2'] if e['d'] == payload['d']), None)
            if entry is None:
                self.logger.warning(f"No reference data for d = {payload['d']}, n = 2")
                return problems
            expected_by_norm = {str(lat['ideal_norm']): lat for lat in entry['lattices']}
            for lattice in payload['lattices']:
                expected = expected_by_norm.get(lattice['ideal_norm'])
                if expected is None:
                    continue
                computed = sorted((Fraction(r['det_rel']), r['min_vectors'], r['facets'], r['aut_order'])
                                  for r in lattice['records'])
                published = sorted((Fraction(f['invariants'][0]), *f['invariants'][1:4]) for f in expected['forms'])
                if computed != published:
                    problems.append(f"lattice {lattice['ideal']}: computed {computed}, published {published}")
            if 'gamma_power' in payload and Fraction(payload['gamma_power']) != Fraction(entry['hermite_constant']):
                problems.append(f"gamma^2 = {payload['gamma_power']}, published {entry['hermite_constant']}")
        else:
            entry = next((e for e in reference['dimension_3'] if e['d'] == payload['d']), None)
            if entry is None:
                self.logger.warning(f"No reference data for d = {payload['d']}, n = 3")
                return problems
            free = next((lat for lat in payload['lattices'] if lat['class_index'] == 1), None)
            if free is not None and len(free['records']) != entry['classes']:
                problems.append(f"{len(free['records'])} classes, published {entry['classes']}")
            if 'gamma_power' in payload and Fraction(payload['gamma_power']) != Fraction(entry['hermite_constant']):
                problems.append(f"gamma^3 = {payload['gamma_power']}, published {entry['hermite_constant']}")
        self.stats['reference_mismatches'] += len(problems)
        return problems

    def execute(self, run: RunConfig) -> str:
        """Compute the artifact of one command in the requested format"""
        graph = None
        if run.command == 'classgroup':
            payload = self.classgroup(run)
        elif run.command == 'perfect':
            payload = self.perfect(run)
        elif run.command == 'hermite-constant':
            payload = self.hermite_constant(run)
        elif run.command == 'graph':
            payload, graph = self.graph(run)
        else:
            payload = self.glgen(run)

        if run.check and run.command in ('perfect', 'hermite-constant'):
            problems = self.check_against_reference(payload)
            for problem in problems:
                self.logger.error(f"Reference mismatch: {problem}")
            if problems:
                raise InvariantViolation(f"{len(problems)} mismatches against the published tables")

        if run.output_format == 'dot':
            return graph.to_dot(f"d{run.d}_n{run.n}_class{run.classes[0]}")
        if run.output_format == 'table':
            return self.render_table(payload)
        return json.dumps(payload, indent=2) + "\n"

    def run(self, run: RunConfig) -> int:
        """Run one command and write its artifact; returns the exit status"""
        try:
            text = self.execute(run)
        except InvariantViolation as e:
            self.logger.error(f"Internal invariant violation: {e}")
            return EXIT_INVARIANT
        except EnumerationBudgetExceeded as e:
            self.logger.error(f"Run stopped: {e}")
            return EXIT_USAGE
        except (UsageError, FieldError, IdealError, LatticeError) as e:
            self.logger.error(f"Invalid configuration: {e}")
            return EXIT_USAGE
        finally:
            self.log_statistics()

        if run.output:
            os.makedirs(os.path.dirname(os.path.abspath(run.output)), exist_ok=True)
            with open(run.output, 'w') as f:
                f.write(text)
            self.logger.info(f"Wrote {run.command} output to {run.output}")
        else:
            sys.stdout.write(text)
        return EXIT_OK

    def log_statistics(self):
        self.logger.info("=== ENUMERATION STATISTICS ===")
        for key, value in self.stats.items():
            self.logger.info(f"{key}: {value}")


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(description='Perfect Hermitian forms over imaginary quadratic fields')
    parser.add_argument('--config', default=os.path.join(SERVICE_DIR, 'perfect_forms_config.json'),
                        help='Configuration file path')
    commands = parser.add_subparsers(dest='command', required=True, parser_class=_ArgumentParser)
    for name in COMMANDS:
        sub = commands.add_parser(name)
        sub.add_argument('--d', type=int, required=True, help='Squarefree d > 0 of K = Q(sqrt(-d))')
        sub.add_argument('--format', dest='output_format', choices=FORMATS, help='Output format')
        sub.add_argument('--output', help='Write the artifact to this file instead of stdout')
        if name == 'classgroup':
            continue
        sub.add_argument('--n', type=int, default=2, help='Dimension (2 or 3)')
        sub.add_argument('--workers', type=int, help='Threads for the enumeration frontier')
        sub.add_argument('--time-budget', type=float, help='Stop after this many seconds (checkpointed)')
        sub.add_argument('--checkpoint', action='store_true', help='Checkpoint and resume the enumeration')
        if name in ('perfect', 'hermite-constant'):
            sub.add_argument('--check', action='store_true', help='Compare against the published tables')
        if name != 'hermite-constant':
            sub.add_argument('--class', dest='classes', default='all' if name == 'perfect' else None,
                             help="Ideal class index of the lattice O_K^(n-1) + a_j, or 'all'")
    return parser


def main(argv: List[str] = None) -> int:
    args = build_parser().parse_args(argv)
    service = PerfectFormsService(args.config)
    enumeration = service.config['enumeration']
    classes = getattr(args, 'classes', 'all')
    budget = getattr(args, 'time_budget', None)
    if classes is None:
        print(f"Error: {args.command} needs --class")
        return EXIT_USAGE
    try:
        run = RunConfig(
            command=args.command,
            d=args.d,
            n=getattr(args, 'n', 2),
            classes=classes if classes == 'all' else classes.split(','),
            output_format=args.output_format or service.config['output'].get('format', 'json'),
            workers=getattr(args, 'workers', None) or enumeration.get('workers', 1),
            time_budget=enumeration.get('time_budget_seconds') if budget is None else budget,
            output=args.output,
            check=getattr(args, 'check', False),
            checkpoint=getattr(args, 'checkpoint', False),
            max_dimension=enumeration.get('max_dimension', 3),
        )
    except (UsageError, ValueError) as e:
        print(f"Error: {e}")
        return EXIT_USAGE
    return service.run(run)


if __name__ == "__main__":
    sys.exit(main())
