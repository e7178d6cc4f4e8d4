import json
import os

import pytest

from perfect_forms_service import (EXIT_INVARIANT, EXIT_OK, EXIT_USAGE, PerfectFormsService, RunConfig, UsageError,
                                   main)


@pytest.fixture
def service(tmp_path):
    config = {
        'logging': {'level': 'WARNING'},
        'enumeration': {'workers': 1, 'checkpoint_every': 1, 'time_budget_seconds': None, 'max_dimension': 3},
        'checkpoint': {'directory': str(tmp_path / 'checkpoints'), 'env_var': 'PERFECT_FORMS_TEST_CHECKPOINTS'},
    }
    path = tmp_path / 'config.json'
    path.write_text(json.dumps(config))
    return PerfectFormsService(str(path))


# ---------------------------------------------------------
# Configuration
# ---------------------------------------------------------
def test_config_merges_with_defaults(service):
    assert service.config['reference_tables'] == 'reference_tables.json'
    assert service.config['enumeration']['checkpoint_every'] == 1


def test_missing_config_uses_defaults(tmp_path):
    service = PerfectFormsService(str(tmp_path / 'absent.json'))
    assert service.config['output']['format'] == 'json'


def test_checkpoint_directory_from_environment(service, tmp_path, monkeypatch):
    assert service.checkpoint_directory() == str(tmp_path / 'checkpoints')
    monkeypatch.setenv('PERFECT_FORMS_TEST_CHECKPOINTS', str(tmp_path / 'elsewhere'))
    assert service.checkpoint_directory() == str(tmp_path / 'elsewhere')


@pytest.mark.parametrize('kwargs', [
    {'command': 'perfect', 'd': 4},
    {'command': 'perfect', 'd': 15, 'n': 4},
    {'command': 'perfect', 'd': 15, 'classes': ['3']},
    {'command': 'perfect', 'd': 15, 'output_format': 'dot'},
    {'command': 'graph', 'd': 15},
    {'command': 'glgen', 'd': 15, 'classes': ['1', '2']},
    {'command': 'solve', 'd': 15},
])
def test_invalid_run_configs(kwargs):
    with pytest.raises(UsageError):
        RunConfig(**kwargs)


def test_class_indices():
    assert RunConfig(command='perfect', d=15).class_indices() == [1, 2]
    assert RunConfig(command='perfect', d=15, n=3).class_indices() == [1]
    assert RunConfig(command='perfect', d=15, classes=['2']).class_indices() == [2]


# ---------------------------------------------------------
# Commands
# ---------------------------------------------------------
def test_classgroup(service):
    payload = json.loads(service.execute(RunConfig(command='classgroup', d=21)))
    assert payload['class_number'] == 4
    assert payload['cyclic'] is False
    assert payload['lattice_classes'] == {'2': [1, 2, 3, 4], '3': [1]}
    assert payload['multiplication_table'][1] == [2, 1, 4, 3]


def test_perfect_non_free_d15(service):
    payload = json.loads(service.execute(RunConfig(command='perfect', d=15, classes=['2'])))
    assert payload['schema'] == 1
    (lattice,) = payload['lattices']
    assert lattice['ideal_norm'] == '2'
    (record,) = lattice['records']
    assert record['det_rel'] == '1/5'
    assert record['min_vectors'] == 12
    assert record['facets'] == 8
    assert record['aut_type'] == 'C3:C4'
    assert record['hermite_invariant'] == '5'
    assert lattice['graph']['edges'] == [{'from': 1, 'to': 1, 'weight': 8}]
    assert service.stats['lattices_processed'] == 1
    assert service.stats['contiguities'] == 8


def test_hermite_constant_table(service):
    text = service.execute(RunConfig(command='hermite-constant', d=15, output_format='table'))
    assert 'det_L(P)' in text
    assert text.rstrip().endswith('gamma_2^2 = 5')


def test_graph_dot(service):
    text = service.execute(RunConfig(command='graph', d=15, classes=['1'], output_format='dot'))
    assert text.startswith('digraph "d15_n2_class1" {')
    assert 'peripheries=2' in text


def test_glgen(service):
    payload = json.loads(service.execute(RunConfig(command='glgen', d=15, classes=['2'])))
    assert len(payload['generators']) == 10
    assert {g['kind'] for g in payload['generators']} == {'stabilizer', 'edge'}
    table = service.render_table(payload)
    assert 'stabilizer' in table and 'edge' in table


def test_check_against_reference(service):
    payload = json.loads(service.execute(RunConfig(command='hermite-constant', d=15, check=True)))
    assert payload['gamma_power'] == '5'
    assert service.check_against_reference(payload) == []


def test_reference_mismatch_exits_with_invariant_status(service, monkeypatch):
    tables = service.load_reference()
    tables['dimension_2'][0]['hermite_constant'] = '6'
    monkeypatch.setattr(service, 'load_reference', lambda: tables)
    status = service.run(RunConfig(command='hermite-constant', d=15, check=True))
    assert status == EXIT_INVARIANT
    assert service.stats['reference_mismatches'] == 1


def test_budget_exceeded_is_checkpointed(service, tmp_path):
    run = RunConfig(command='perfect', d=15, classes=['1'], time_budget=0, checkpoint=True)
    assert service.run(run) == EXIT_USAGE
    assert os.path.exists(os.path.join(service.checkpoint_directory(), 'perfect_d15_n2_class1.joblib'))
    resumed = RunConfig(command='perfect', d=15, classes=['1'], checkpoint=True, output=str(tmp_path / 'out.json'))
    assert service.run(resumed) == EXIT_OK
    payload = json.loads((tmp_path / 'out.json').read_text())
    assert [r['det_rel'] for r in payload['lattices'][0]['records']] == ['1/3', '2/5']


# ---------------------------------------------------------
# Command line
# ---------------------------------------------------------
def test_main_classgroup(capsys):
    assert main(['classgroup', '--d', '15']) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload['class_number'] == 2
    assert payload['discriminant'] == -15


def test_main_writes_output_file(tmp_path):
    target = tmp_path / 'nested' / 'perfect.json'
    assert main(['perfect', '--d', '15', '--class', '2', '--check', '--output', str(target)]) == EXIT_OK
    payload = json.loads(target.read_text())
    assert payload['lattices'][0]['records'][0]['aut_order'] == 12


@pytest.mark.parametrize('argv', [
    ['perfect', '--d', '4'],
    ['perfect', '--d', '15', '--n', '5'],
    ['graph', '--d', '15'],
    ['perfect', '--d', '15', '--class', 'x'],
])
def test_main_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


def test_main_rejects_unknown_arguments():
    with pytest.raises(SystemExit) as excinfo:
        main(['perfect', '--d', '15', '--bogus'])
    assert excinfo.value.code == EXIT_USAGE
