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

import numpy as np
import pytest

from pyMorse import AtlasSchemaError, load
from pyMorse.examples import BUILTIN, chain3, from_dict


ATLAS = {
    'name': 'pair',
    'dimension': 1,
    'critical_points': [{'id': 'top', 'index': 1, 'value': 1.0}, {'id': 'bottom', 'index': 0, 'value': -1.0}],
    'connecting_maps': [{'source': 'top', 'target': 'bottom', 'params': {'scale': 1.0}}],
    'declared': [{'source': 'top', 'target': 'bottom', 'count': 2}],
}


class TestBuiltin():

    @pytest.mark.parametrize("name", sorted(BUILTIN))
    def test_load(self, name):
        model = load(name)
        assert model.name == name
        values = [p.value for p in model.critical_points]
        assert values == sorted(values, reverse=True)

    def test_torus(self):
        model = load('torus_Yr')
        assert model.mode == 'numeric'
        assert sorted(p.index for p in model.critical_points) == [0, 1, 1, 2]

    @pytest.mark.parametrize("n", [1, 2, 4])
    def test_sphere(self, n):
        model = load(f'sphere_height_{n}')
        assert model.dimension == n
        assert [p.index for p in model.critical_points] == [n, 0]

    @pytest.mark.parametrize("name", ['sphere_height_x', 'sphere_height_0', 'no_such_model'])
    def test_bad_names(self, name):
        with pytest.raises(AtlasSchemaError):
            load(name)


class TestAtlasFiles():

    def test_dict(self):
        model = load(ATLAS)
        assert model.name == 'pair'
        assert model.declared == {('top', 'bottom'): 2}
        assert model.mode == 'synthetic'

    def test_file(self, tmp_path):
        path = tmp_path / 'pair.json'
        path.write_text(json.dumps(ATLAS))
        assert load(str(path)).point('top').index == 1

    def test_invalid_json(self, tmp_path):
        path = tmp_path / 'broken.json'
        path.write_text('{"dimension": ')
        with pytest.raises(AtlasSchemaError):
            load(str(path))

    def test_state_reloads(self):
        model = from_dict(chain3().__getstate__())
        assert [p.id for p in model.critical_points] == ['max', 's', 'min']
        np.testing.assert_allclose(model.transfers[1].matrix, np.diag([1.0, 2.0]))

    @pytest.mark.parametrize("patch", [
        {'dimension': None},
        {'critical_points': [{'id': 'a', 'index': 1, 'value': 0.0}, {'id': 'a', 'index': 0, 'value': -1.0}]},
        {'connecting_maps': [{'source': 'top', 'target': 'nowhere', 'params': {'scale': 1.0}}]},
        {'connecting_maps': [{'source': 'top', 'target': 'bottom', 'kind': 'spline', 'params': {}}]},
        {'connecting_maps': [{'source': 'top', 'target': 'bottom', 'params': {}}]},
        {'ambient': {'type': 'klein', 'f': 'cos(theta)'}},
    ])
    def test_schema_errors(self, patch):
        state = dict(ATLAS)
        state.update(patch)
        if state['dimension'] is None:
            del state['dimension']
        with pytest.raises(AtlasSchemaError):
            from_dict(state)

    def test_not_an_object(self):
        with pytest.raises(AtlasSchemaError):
            from_dict([1, 2, 3])
