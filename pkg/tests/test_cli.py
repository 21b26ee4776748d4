import csv
import io
import json
import math

import pytest


def run(cli_runner, cli, *args):
    return cli_runner.invoke(cli, list(args))


def csv_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestAnalyze:
    def test_brier(self, cli_runner, cli):
        result = run(cli_runner, cli, 'analyze', '--loss', 'brier')
        assert result.exit_code == 0, result.stderr
        doc = json.loads(result.stdout)
        assert doc['command'] == 'analyze'
        report = doc['result']
        assert report['properness']['proper']
        assert report['fairness']['fair']
        assert report['mixability']['eta_star'] == pytest.approx(1.0, abs=1e-6)
        assert report['slides_freely_at_eta_star']['slides_freely']
        assert doc['config']['defaults']['env'] == 'testing'

    def test_spherical_text(self, cli_runner, cli):
        result = run(cli_runner, cli, 'analyze', '--loss', 'spherical', '--format', 'text')
        assert result.exit_code == 0, result.stderr
        assert 'fundamental ✗' in result.stdout
        assert 'eta* = 1.41421' in result.stdout

    def test_three_outcomes(self, cli_runner, cli):
        result = run(cli_runner, cli, 'analyze', '--loss', 'log', '--n', '3')
        assert result.exit_code == 0, result.stderr
        report = json.loads(result.stdout)['result']
        assert report['mixability']['eta_star'] == pytest.approx(1.0, abs=1e-9)
        assert report['fundamentality'] is None

    def test_improper_spec(self, cli_runner, cli, spec_file):
        path = spec_file({'name': 'swapped_log', 'kind': 'dsl', 'n': 2, 'exprs': ['-ln(1-t1)', '-ln(t1)']})
        result = run(cli_runner, cli, 'analyze', '--spec', path)
        assert result.exit_code == 2
        payload = json.loads(result.stderr.strip().splitlines()[-1])
        assert payload['error'] == 'NotProper'
        assert payload['details']['witness'] is not None

    def test_csv_flattens_the_report(self, cli_runner, cli):
        result = run(cli_runner, cli, 'analyze', '--loss', 'log', '--format', 'csv')
        rows = {row['key']: row['value'] for row in csv_rows(result.stdout)}
        assert float(rows['mixability.eta_star']) == pytest.approx(1.0)


class TestProfile:
    def test_log_curvature(self, cli_runner, cli):
        result = run(cli_runner, cli, 'profile', '--loss', 'log', '--quantity', 'curvature')
        assert result.exit_code == 0, result.stderr
        rows = csv_rows(result.stdout)
        middle = [row for row in rows if abs(float(row['t']) - 0.5) < 1e-9]
        assert len(middle) == 1
        assert float(middle[0]['value']) == pytest.approx(1 / math.sqrt(2), abs=1e-12)

    def test_brier_weight(self, cli_runner, cli):
        result = run(cli_runner, cli, 'profile', '--loss', 'brier', '--quantity', 'weight')
        values = [float(row['value']) for row in csv_rows(result.stdout)]
        assert values == pytest.approx([4.0] * len(values))

    def test_brier_pencil(self, cli_runner, cli):
        result = run(cli_runner, cli, 'profile', '--loss', 'brier', '--quantity', 'pencil_min_eig',
                     '--format', 'json')
        assert json.loads(result.stdout)['result']['min'] == pytest.approx(1.0, abs=1e-6)

    def test_multi_header(self, cli_runner, cli):
        result = run(cli_runner, cli, 'profile', '--loss', 'log', '--n', '3', '--quantity', 'bayes_risk')
        assert result.stdout.splitlines()[0] == 's1,s2,value'

    def test_binary_quantity_on_three_outcomes(self, cli_runner, cli):
        result = run(cli_runner, cli, 'profile', '--loss', 'log', '--n', '3', '--quantity', 'curvature')
        assert result.exit_code == 64

    def test_unknown_quantity(self, cli_runner, cli):
        result = run(cli_runner, cli, 'profile', '--loss', 'log', '--quantity', 'torsion')
        assert result.exit_code == 64


class TestVerify:
    def test_brier(self, cli_runner, cli):
        result = run(cli_runner, cli, 'verify', '--loss', 'brier')
        assert result.exit_code == 0, result.stdout
        doc = json.loads(result.stdout)['result']
        assert doc['passed']
        names = [check['name'] for check in doc['checks']]
        assert 'equivalence_ladder' in names and 'canonical_link_weight' in names

    def test_log_at_eta(self, cli_runner, cli):
        result = run(cli_runner, cli, 'verify', '--loss', 'log', '--eta', '1.0')
        assert result.exit_code == 0, result.stdout
        names = [check['name'] for check in json.loads(result.stdout)['result']['checks']]
        assert 'exp_projection_at_eta' in names

    def test_three_outcomes(self, cli_runner, cli):
        result = run(cli_runner, cli, 'verify', '--loss', 'spherical', '--n', '3')
        assert result.exit_code == 0, result.stdout
        names = [check['name'] for check in json.loads(result.stdout)['result']['checks']]
        assert 'sff_routes' in names

    @staticmethod
    def _check(result, name):
        checks = json.loads(result.stdout)['result']['checks']
        return next(check for check in checks if check['name'] == name)

    def test_log_three_outcomes_at_eta_one(self, cli_runner, cli):
        result = run(cli_runner, cli, 'verify', '--loss', 'log', '--n', '3', '--eta', '1.0')
        assert self._check(result, 'exp_projection_at_eta')['passed'], result.stdout

    def test_exp_projection_uses_log_regardless_of_base(self, cli_runner, cli):
        result = run(cli_runner, cli, 'verify', '--loss', 'brier', '--base', 'spherical', '--eta', '0.5')
        check = self._check(result, 'exp_projection_at_eta')
        assert check['passed'], result.stdout
        assert check['delta'] == pytest.approx(-0.5, abs=1e-5)

    def test_linear_spec(self, cli_runner, cli, spec_file):
        path = spec_file({'name': 'linear', 'kind': 'dsl', 'exprs': ['t1', '1-t1']})
        assert run(cli_runner, cli, 'verify', '--spec', path).exit_code == 2


class TestOtherCommands:
    def test_canonical_link(self, cli_runner, cli):
        result = run(cli_runner, cli, 'canonical-link', '--loss', 'log', '--format', 'csv')
        assert result.exit_code == 0, result.stderr
        rows = csv_rows(result.stdout)
        assert list(rows[0]) == ['t', 'value']
        middle = [row for row in rows if abs(float(row['t']) - 0.5) < 1e-9]
        assert float(middle[0]['value']) == pytest.approx(0.0, abs=1e-12)

    def test_decompose(self, cli_runner, cli):
        result = run(cli_runner, cli, 'decompose', '--loss', 'spherical')
        assert result.exit_code == 0, result.stderr
        report = json.loads(result.stdout)['result']['decomposition']
        assert report['eta_star'] == pytest.approx(math.sqrt(2), abs=1e-4)
        assert report['nonnegative'] and not report['degenerate']

    def test_slide_check(self, cli_runner, cli):
        result = run(cli_runner, cli, 'slide-check', '--loss', 'brier', '--eta', '1.1')
        assert result.exit_code == 0, result.stderr
        report = json.loads(result.stdout)['result']
        assert not report['verdict']['slides_freely']
        assert report['residual'] is None

    def test_slide_check_reports_residual(self, cli_runner, cli):
        result = run(cli_runner, cli, 'slide-check', '--loss', 'spherical', '--eta', '1.0')
        report = json.loads(result.stdout)['result']
        assert report['verdict']['slides_freely']
        assert report['residual']['homogeneity'] <= 1e-12

    def test_slide_check_needs_eta(self, cli_runner, cli):
        assert run(cli_runner, cli, 'slide-check', '--loss', 'brier').exit_code == 64


class TestUsage:
    @pytest.mark.parametrize("args", [
        ['analyze', '--loss', 'brier', '--grid', '5'],
        ['analyze', '--loss', 'brier', '--spec', 'x.json'],
        ['analyze'],
        ['analyze', '--loss', 'hinge'],
        ['analyze', '--loss', 'brier', '--margin', '0.5'],
        ['analyze', '--loss', 'brier', '--bogus'],
        ['analyze', '--loss', 'brier', '--eta', '-1'],
    ])
    def test_usage_errors(self, cli_runner, cli, args):
        assert run(cli_runner, cli, *args).exit_code == 64

    def test_unreadable_spec(self, cli_runner, cli, tmp_path):
        result = run(cli_runner, cli, 'analyze', '--spec', str(tmp_path / 'missing.json'))
        assert result.exit_code == 64
        assert json.loads(result.stderr.strip().splitlines()[-1])['error'] == 'BadConfig'

    def test_parse_error_position(self, cli_runner, cli, spec_file):
        path = spec_file({'name': 'broken', 'kind': 'dsl', 'n': 3,
                          'exprs': ['-ln(t1)', 'ln(t2', '-ln(1-t1-t2)']})
        result = run(cli_runner, cli, 'analyze', '--spec', path)
        assert result.exit_code == 64
        payload = json.loads(result.stderr.strip().splitlines()[-1])
        assert payload['error'] == 'ParseError'
        assert payload['details']['position'] == 6

    def test_version(self, cli_runner, cli):
        result = run(cli_runner, cli, '--version')
        assert result.exit_code == 0
        assert '0.1.0' in result.stdout


class TestOutput:
    def test_out_writes_file_and_sidecar(self, cli_runner, cli, tmp_path):
        out = tmp_path / 'weight.csv'
        result = run(cli_runner, cli, 'profile', '--loss', 'brier', '--quantity', 'weight', '--out', str(out))
        assert result.exit_code == 0, result.stderr
        assert result.stdout == ''
        assert out.read_text().startswith('t,value\n')
        meta = json.loads((tmp_path / 'weight.csv.meta.json').read_text())
        assert meta['command'] == 'profile'

    def test_repeated_runs_are_identical(self, cli_runner, cli):
        args = ['analyze', '--loss', 'spherical']
        assert run(cli_runner, cli, *args).stdout == run(cli_runner, cli, *args).stdout

    def test_seed_changes_only_sampled_checks(self, cli_runner, cli):
        first = json.loads(run(cli_runner, cli, 'analyze', '--loss', 'brier', '--seed', '1').stdout)
        second = json.loads(run(cli_runner, cli, 'analyze', '--loss', 'brier', '--seed', '2').stdout)
        assert first['result'] == second['result']
        assert first['config']['defaults']['seed'] == 1
