#!/usr/bin/env python3
"""
Tests for run configurations, scenario assembly, parameter studies and the
command line subcommands, using tiny configurations in a temporary directory.

Run with pytest from the project root, or directly:
    python src/test_cli.py
"""

import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src.cli import main as cli_main
from src.errors import ConfigError
from src.material_data import load
from src.run_config import load_run_config, parse_run_config, validate_run_config
from src.scenario import build_reference, build_scenario, build_structure, default_strain_range
from src.study import _cells, fit_loglog, run_study, summarize_runs

GEOMETRY = Path(__file__).resolve().parent.parent / 'scenarios' / 'geometry'


def gauss_config(**changes) -> dict:
    data = {
        'name': 'tiny-gauss',
        'seed': 5,
        'geometry': str(GEOMETRY / 'three_bar.json'),
        'materials': [{'id': 'default', 'modulus': 1e4, 'data': 'data/default.csv',
                       'generator': {'type': 'sliding_gaussian', 's': 5e-4, 'size': 300}}],
        'annealing': {'population': 60, 'trials': 3, 'quenches': 4},
        'qoi': {'type': 'displacement', 'node': 'c', 'direction': [0.0, 1.0]},
        'oracle': {'type': 'gaussian', 's': 5e-4, 'likelihood_weights': 'unit'},
        'output': {'directory': 'out', 'bins': 10},
        'study': {'parameter': 'population', 'values': [30, 60], 'repeats': 2},
    }
    data.update(changes)
    return data


def weibull_config(**changes) -> dict:
    data = {
        'name': 'tiny-weibull',
        'seed': 6,
        'geometry': str(GEOMETRY / 'three_bar_driven.json'),
        'materials': [{'id': 'brittle', 'modulus': 1e4,
                       'generator': {'type': 'weibull_bimodal', 'sigma0': 140.0, 'p': 4.0, 'noise': 1e-4,
                                     'size': 300, 'strain_range': [-0.015, 0.045]}}],
        'annealing': {'population': 60, 'trials': 3, 'quenches': 3},
        'qoi': {'type': 'reaction', 'node': 'c'},
        'oracle': {'type': 'weibull', 'sigma0': 140.0, 'p': 4.0},
        'output': {'directory': 'out'},
    }
    data.update(changes)
    return data


def write_config(tmp_path: Path, data: dict, name: str = 'tiny.json') -> str:
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


class TestRunConfig:

    @pytest.mark.parametrize("preset", ['three-bar-gauss', 'three-bar-weibull', 'space-frame'])
    def test_presets_load(self, preset):
        cfg = load_run_config(preset)
        assert cfg.name == preset
        assert cfg.geometry.exists()

    def test_relative_paths_and_defaults(self, tmp_path):
        cfg = load_run_config(write_config(tmp_path, gauss_config(name=None)))
        assert cfg.name == 'tiny'
        assert cfg.materials[0].data == tmp_path / 'data' / 'default.csv'
        assert cfg.output.directory == tmp_path / 'out'
        assert cfg.annealing.init == 'projection' and cfg.annealing.n_checks is None

    def test_unknown_key(self, tmp_path):
        data = gauss_config()
        data['annealing']['temperature'] = 1.0
        with pytest.raises(ConfigError):
            load_run_config(write_config(tmp_path, data))

    def test_missing_section(self, tmp_path):
        data = gauss_config()
        del data['qoi']
        with pytest.raises(ConfigError):
            load_run_config(write_config(tmp_path, data))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / 'broken.json'
        path.write_text('{"name": ')
        with pytest.raises(ConfigError):
            load_run_config(str(path))

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            load_run_config('no-such-scenario')

    def test_validation_collects_every_problem(self, tmp_path):
        data = gauss_config()
        data['annealing'].update({'population': 0, 'init': 'random'})
        data['qoi']['type'] = 'curvature'
        errors = validate_run_config(parse_run_config(data, tmp_path / 'tiny.json'))
        assert len(errors) >= 3


class TestScenario:

    def test_generate_then_load_matches_regeneration(self, tmp_path):
        path = write_config(tmp_path, gauss_config())
        assert cli_main(['generate', '--config', path]) == 0
        cfg = load_run_config(path)
        stored = build_scenario(cfg, 5)
        fresh = build_scenario(cfg, 5, regenerate=True)
        np.testing.assert_allclose(stored.materials['default'].dataset.points,
                                   fresh.materials['default'].dataset.points, rtol=1e-15)
        assert stored.materials['default'].beta == pytest.approx(fresh.materials['default'].beta, rel=1e-12)

    def test_default_strain_range(self, tmp_path):
        cfg = load_run_config(write_config(tmp_path, gauss_config()))
        structure = build_structure(cfg)
        lo, hi = default_strain_range(structure.E, structure.metric, np.arange(3))
        # largest elastic strain is the middle bar's |u_y|
        largest = 100.0 / (1e4 * (1.0 + 1.0 / np.sqrt(2.0)))
        assert hi == pytest.approx(3.0 * largest, rel=1e-10) and lo == -hi

    def test_weibull_reference_modes(self, tmp_path):
        cfg = load_run_config(write_config(tmp_path, weibull_config()))
        reference = build_reference(cfg, build_structure(cfg))
        assert reference.kind == 'weibull'
        assert len(reference.modes) == 4
        assert sum(mass for _, mass in reference.modes) == pytest.approx(1.0)


class TestStudy:

    def test_loglog_fit_recovers_power_law(self):
        x = np.array([1e3, 1e4, 1e5])
        fit = fit_loglog(x, 2.0 * x ** -0.5)
        assert fit['slope'] == pytest.approx(-0.5) and fit['rate'] == pytest.approx(0.5)
        assert fit_loglog(np.array([1.0]), np.array([1.0])) is None

    def test_summary_per_cell(self):
        runs = pd.DataFrame({'value': [1, 1, 2, 2], 'trials': [5] * 4, 'repeat': [0, 1, 0, 1],
                             'ks': [0.1, 0.3, 0.2, 0.2], 'mean': [1.0, 3.0, 2.0, 2.0],
                             'std': [0.5, 0.5, 0.1, 0.3], 'runtime': [1.0] * 4, 'eval_seconds': [0.5] * 4})
        summary = summarize_runs(runs)
        assert list(summary['value']) == [1, 2]
        np.testing.assert_allclose(summary['ks_mean'], [0.2, 0.2])
        np.testing.assert_allclose(summary['ks_maxdev'], [0.1, 0.0])
        np.testing.assert_allclose(summary['qoi_std_maxdev'], [0.0, 0.1])

    def test_quench_cells_cross_trials(self, tmp_path):
        data = gauss_config(study={'parameter': 'quenches', 'values': [2, 4], 'trials': [1, 3]})
        cells = _cells(load_run_config(write_config(tmp_path, data)))
        assert [(c['value'], c['trials']) for c in cells] == [(2, 1), (2, 3), (4, 1), (4, 3)]

    def test_unlimited_checks_cell(self, tmp_path):
        data = gauss_config(study={'parameter': 'n_checks', 'values': [2, None]})
        cells = _cells(load_run_config(write_config(tmp_path, data)))
        assert cells[1]['value'] == np.inf and cells[1]['overrides'] == {'n_checks': None}

    def test_tol_cells(self, tmp_path):
        data = gauss_config(study={'parameter': 'tol', 'values': [1e-8, 1e-16, 1e-32]})
        cells = _cells(load_run_config(write_config(tmp_path, data)))
        assert [c['overrides'] for c in cells] == [{'tol': 1e-8}, {'tol': 1e-16}, {'tol': 1e-32}]

    def test_tol_values_are_validated(self, tmp_path):
        data = gauss_config(study={'parameter': 'tol', 'values': [1e-8, 2.0]})
        errors = validate_run_config(parse_run_config(data, tmp_path / 'tiny.json'))
        assert any('tol' in e for e in errors)

    def test_use_tree_study(self, tmp_path):
        data = gauss_config(study={'parameter': 'use_tree', 'values': [True, False], 'repeats': 1})
        report = run_study(load_run_config(write_config(tmp_path, data)), seed=5)
        assert list(report.runs['value']) == [True, False]
        assert (report.runs['eval_seconds'] > 0).all()
        assert report.runs['ks'].between(0.0, 1.0).all()
        with pytest.raises(ConfigError):
            load_run_config(write_config(tmp_path, gauss_config(
                study={'parameter': 'use_tree', 'values': [1, 0]}), name='bad.json'))

    def test_population_study(self, tmp_path):
        cfg = load_run_config(write_config(tmp_path, gauss_config()))
        report = run_study(cfg, seed=5)
        assert len(report.runs) == 4
        assert list(report.summary['value']) == [30, 60]
        assert report.runs['ks'].between(0.0, 1.0).all()
        # repeats share their seed across cells
        assert list(report.runs['seed'][:2]) == list(report.runs['seed'][2:])


class TestCommands:

    def test_run_writes_outputs(self, tmp_path):
        path = write_config(tmp_path, gauss_config())
        assert cli_main(['run', '--config', path]) == 0
        out = tmp_path / 'out'
        samples = pd.read_csv(out / 'samples.csv')
        assert len(samples) > 0
        histogram = pd.read_csv(out / 'histogram.csv')
        assert histogram['frequency'].sum() == pytest.approx(1.0)
        log = pd.read_csv(out / 'quench_log.csv')
        assert list(log['quench']) == [1, 2, 3, 4]
        summary = json.loads((out / 'summary.json').read_text())
        assert summary['seed'] == 5 and summary['n'] == len(samples)
        assert 0.0 <= summary['ks'] <= 1.0
        assert summary['oracle']['kind'] == 'gaussian'

    def test_threads_do_not_change_samples(self, tmp_path):
        data = gauss_config(annealing={'population': 300, 'trials': 2, 'quenches': 2})
        path = write_config(tmp_path, data)
        assert cli_main(['run', '--config', path, '--threads', '1', '--out', str(tmp_path / 'one')]) == 0
        assert cli_main(['run', '--config', path, '--threads', '2', '--out', str(tmp_path / 'two')]) == 0
        assert (tmp_path / 'one' / 'samples.csv').read_text() == (tmp_path / 'two' / 'samples.csv').read_text()

    def test_seed_override(self, tmp_path):
        path = write_config(tmp_path, gauss_config())
        assert cli_main(['run', '--config', path, '--seed', '9', '--out', str(tmp_path / 'nine')]) == 0
        assert json.loads((tmp_path / 'nine' / 'summary.json').read_text())['seed'] == 9

    def test_weibull_run_reports_cluster_masses(self, tmp_path):
        path = write_config(tmp_path, weibull_config())
        assert cli_main(['run', '--config', path]) == 0
        summary = json.loads((tmp_path / 'out' / 'summary.json').read_text())
        assert len(summary['cluster_masses']) == 4
        assert sum(summary['cluster_masses']) == pytest.approx(1.0)

    def test_gaussian_oracle_files(self, tmp_path):
        path = write_config(tmp_path, gauss_config())
        assert cli_main(['oracle', '--config', path]) == 0
        cdf = pd.read_csv(tmp_path / 'out' / 'oracle_cdf.csv')
        assert np.all(np.diff(cdf['cdf']) >= 0)
        oracle = json.loads((tmp_path / 'out' / 'oracle.json').read_text())
        assert oracle['mean'] == pytest.approx(-100.0 / (1e4 * (1.0 + 1.0 / np.sqrt(2.0))), rel=1e-8)

    def test_weibull_oracle_files(self, tmp_path):
        path = write_config(tmp_path, weibull_config())
        assert cli_main(['oracle', '--config', path]) == 0
        mixture = pd.read_csv(tmp_path / 'out' / 'oracle_mixture.csv')
        assert len(mixture) == 4
        assert mixture['weight'].sum() == pytest.approx(1.0)

    def test_generate_writes_beta_header(self, tmp_path, capsys):
        path = write_config(tmp_path, gauss_config())
        assert cli_main(['generate', '--config', path, '--size', '50']) == 0
        dataset = load(tmp_path / 'data' / 'default.csv')
        assert dataset.size == 50 and dataset.beta > 0
        assert 'default: M=50' in capsys.readouterr().out

    def test_ks_against_file_and_oracle(self, tmp_path, capsys):
        path = write_config(tmp_path, gauss_config())
        assert cli_main(['run', '--config', path]) == 0
        samples = str(tmp_path / 'out' / 'samples.csv')
        capsys.readouterr()
        assert cli_main(['ks', samples, '--reference', samples]) == 0
        assert float(capsys.readouterr().out.strip()) == 0.0
        assert cli_main(['ks', samples, '--config', path]) == 0
        summary = json.loads((tmp_path / 'out' / 'summary.json').read_text())
        assert float(capsys.readouterr().out.strip()) == pytest.approx(summary['ks'])

    def test_study_writes_report(self, tmp_path):
        path = write_config(tmp_path, gauss_config())
        assert cli_main(['study', '--config', path, '--repeats', '1']) == 0
        runs = pd.read_csv(tmp_path / 'out' / 'study_runs.csv')
        assert len(runs) == 2
        report = json.loads((tmp_path / 'out' / 'study.json').read_text())
        assert report['parameter'] == 'population'


class TestExitCodes:

    def test_empty_data_set_is_an_error(self, tmp_path):
        data = gauss_config()
        data['materials'][0]['generator']['size'] = 0
        assert cli_main(['run', '--config', write_config(tmp_path, data)]) == 1

    def test_generate_zero_points(self, tmp_path):
        assert cli_main(['generate', '--config', write_config(tmp_path, gauss_config()), '--size', '0']) == 1

    def test_unknown_config_key(self, tmp_path):
        data = gauss_config(colour='blue')
        assert cli_main(['run', '--config', write_config(tmp_path, data)]) == 1

    def test_missing_config(self):
        assert cli_main(['run']) == 1
        assert cli_main(['run', '--config', 'no-such-scenario']) == 1

    def test_bad_thread_count(self, tmp_path):
        assert cli_main(['run', '--config', write_config(tmp_path, gauss_config()), '--threads', '0']) == 1

    def test_missing_sample_file(self, tmp_path):
        assert cli_main(['ks', str(tmp_path / 'missing.csv'), '--reference', str(tmp_path / 'other.csv')]) == 1

    def test_oracle_without_section(self, tmp_path):
        data = gauss_config()
        del data['oracle']
        assert cli_main(['oracle', '--config', write_config(tmp_path, data)]) == 1


def main():
    """Run this module's tests."""
    return pytest.main([__file__, '-v'])


if __name__ == "__main__":
    main()
