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
import os
import pytest

from pyMorse import load
from pyMorse.flow import find_infinite_trajectories
from pyMorse.global_charts import breaking_number, enumerate_critseqs

from .exceptions import DatasetCaseNotFound


critseq_cases_path = './tests/dataset/critseqs/'
space_cases_path = './tests/dataset/trajectory_spaces/'

critseq_folders = [critseq_cases_path + p for p in os.listdir(critseq_cases_path)]
space_folders = [space_cases_path + p for p in os.listdir(space_cases_path)]


def get_case_data(folder: str) -> dict:
    try:
        with open(os.path.join(folder, 'case.json')) as json_file:
            return json.load(json_file)
    except FileNotFoundError:
        raise DatasetCaseNotFound(folder)


class TestCritSeqCases():

    @pytest.mark.parametrize("folder", critseq_folders)
    def test_sequences(self, folder):
        data = get_case_data(folder)
        case = data['input']
        model = load(case['model'])
        seqs = enumerate_critseqs(model, case['from'], case['to'])

        values = data['values']
        assert sorted(str(s) for s in seqs) == values['sequences']
        assert breaking_number(model, case['from'], case['to']) == values['breaking_number']


class TestTrajectorySpaceCases():

    @pytest.mark.parametrize("folder", space_folders)
    def test_counts(self, folder):
        data = get_case_data(folder)
        case = data['input']
        model = load(case['model'])
        found = find_infinite_trajectories(model, case['source'], case['target'])

        values = data['values']
        assert found.dimension == values['dimension']
        if 'count' in values:
            assert len(found) == values['count']
