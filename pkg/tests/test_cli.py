# Copyright (C) 2024 The pyMorse Authors
#
# This program is free software; you can redistribute it and/or
# modify it under the terms of the GNU General Public License,
# version 2, as published by the Free Software Foundation.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program; if not, write to the Free Software
# Foundation, Inc., 51 Franklin Street, Fifth Floor, Boston,
# MA  02110-1301, USA.
#
################################################################
import json

import pytest

from pyMorse.cli import main, parse_point, parse_until
from pyMorse import ConfigError, LocalPoint
from pyMorse.examples import chain3

MODEL = chain3()


@pytest.fixture
def glued(tmp_path):
    path = tmp_path / 'glued.json'
    code = main(['glue', 'chain3', '--from', 'max', '--to', 'min', '--seq', 's', '--taus', '0.1',
                 '--factors', '0.25,0;0,0.25', '--out', str(path)])
    assert code == 0
    return path


class TestParsing():

    def test_chart_point(self):
        point = parse_point(MODEL, 's:0.1,0.2')
        assert isinstance(point, LocalPoint)
        assert point.q.id == 's'

    def test_bad_point(self):
        with pytest.raises(ConfigError):
            parse_point(MODEL, 'nonsense')

    def test_until(self):
        assert parse_until(MODEL, 'level:0.5') == ('level', 0.5)
        assert parse_until(MODEL, 'entry:s')[1].id == 's'
        with pytest.raises(ConfigError):
            parse_until(MODEL, 'forever')


class TestCommands():

    def test_show(self, capsys):
        assert main(['show', 'chain3']) == 0
        assert 'max' in capsys.readouterr().out

    def test_critseqs(self, capsys):
        assert main(['critseqs', 'chain3', '--from', 'max', '--to', 'min']) == 0
        out = capsys.readouterr().out
        assert '(max | s | min)' in out
        assert '(max | min)' in out

    def test_flow(self, capsys):
        assert main(['flow', 'chain3', '--start', 's:0.1,0.05', '--until', 'time:1', '-n', '4']) == 0
        assert capsys.readouterr().out.startswith('time,')

    def test_glue_writes_model(self, glued):
        state = json.loads(glued.read_text())
        assert state['model'] == 'chain3'
        assert 'trajectory' in state

    def test_distance_to_self(self, glued, capsys):
        assert main(['distance', 'chain3', str(glued), str(glued)]) == 0
        assert float(capsys.readouterr().out.strip()) == 0.0

    def test_export_plot(self, glued, tmp_path):
        out = tmp_path / 'plot.csv'
        assert main(['export-plot', str(glued), '--out', str(out)]) == 0
        assert out.read_text().startswith('piece,time,value,region')


class TestExitCodes():

    def test_unknown_model(self):
        assert main(['show', 'no_such_model']) == 2

    def test_bad_point(self):
        assert main(['flow', 'chain3', '--start', 'nonsense']) == 2

    def test_wrong_factor_count(self):
        assert main(['glue', 'chain3', '--from', 'max', '--to', 'min', '--seq', 's', '--taus', '0.1',
                     '--factors', '0.25,0']) == 2
