import sys
import argparse
import json
import pandas as pd
import pytest

from ecaqos.cli import main, parse_counts, run_replications, sweep
from ecaqos.Scenario import parse_scenario

SCENARIO = '''
n = 2
protocol = eca
duration = 0.05
replications = 2
seed = 11
acs = VO, BE
'''


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / 'tiny.ini'
    path.write_text(SCENARIO)
    return path


##########################################################################################
class TestParseCounts:

    def test_ranges(self):
        assert parse_counts('2:10:4') == [2, 6, 10]
        assert parse_counts('1:3') == [1, 2, 3]
        assert parse_counts('5,10, 20') == [5, 10, 20]
        assert parse_counts('7') == [7]

    def test_bad(self):
        for text in ('a:b', '0:3', '1:2:3:4', '3:1', '1:5:0', ''):
            with pytest.raises(argparse.ArgumentTypeError):
                parse_counts(text)


class TestReplications:

    def test_in_order(self):
        s = parse_scenario(SCENARIO)
        results = run_replications(s)
        assert [r.replication for r in results] == [0, 1]

    def test_sweep(self):
        s = parse_scenario(SCENARIO)
        points = sweep(s, [1, 3])
        assert [p.n for p in points] == [1, 3]
        assert points[0].fingerprint != points[1].fingerprint
        assert s.n_stations == 2


class TestMain:

    def test_run(self, scenario_file, tmp_path):
        out = tmp_path / 'run.csv'
        assert main(['run', str(scenario_file), '--output', str(out)]) == 0
        df = pd.read_csv(out)
        assert set(df['label']) == {'tiny'} and set(df['n']) == {2}
        assert set(df['replications']) == {2} and set(df['seed']) == {11}

    def test_overrides(self, scenario_file, tmp_path):
        out = tmp_path / 'run.json'
        assert main(['run', str(scenario_file), '--seed', '5', '--replications', '1',
                     '--duration', '0.02', '--format', 'json', '--output', str(out)]) == 0
        records = json.loads(out.read_text())
        assert {r['seed'] for r in records} == {5}
        assert {r['replications'] for r in records} == {1}

    def test_sweep(self, scenario_file, tmp_path):
        out = tmp_path / 'sweep.csv'
        assert main(['sweep', str(scenario_file), '--n', '1,3', '--output', str(out)]) == 0
        assert sorted(set(pd.read_csv(out)['n'])) == [1, 3]

    def test_compare(self, scenario_file, tmp_path):
        other = tmp_path / 'tiny_edca.ini'
        other.write_text(SCENARIO.replace('protocol = eca', 'protocol = edca'))
        out = tmp_path / 'compare.csv'
        assert main(['compare', str(scenario_file), str(other), '--replications', '1',
                     '--output', str(out)]) == 0
        df = pd.read_csv(out)
        assert set(df['label']) == {'tiny', 'tiny_edca'}
        assert df['fingerprint'].nunique() == 2

    def test_stdout(self, scenario_file, capsys):
        assert main(['run', str(scenario_file), '--replications', '1']) == 0
        assert capsys.readouterr().out.startswith('fingerprint,seed,label,n,replications')

    def test_errors(self, tmp_path, capsys):
        assert main(['run', str(tmp_path / 'missing.ini')]) == 2
        bad = tmp_path / 'bad.ini'
        bad.write_text('n = 2\np_e = 2\n')
        assert main(['run', str(bad)]) == 2
        assert 'line 2' in capsys.readouterr().err
        with pytest.raises(SystemExit):
            main(['sweep', str(bad)])


if __name__ == "__main__":
    sys.exit(pytest.main(["-qq"], plugins=None))
