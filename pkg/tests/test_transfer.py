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
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from pyMorse import AtlasSchemaError, NotInDomainError
from pyMorse.examples import chain3, torus_Yr
from pyMorse.transfer import LinearTransfer
from pyMorse.transfer.linear import exit_point, transit_time

MODEL = chain3()
MAX, S, MIN = (MODEL.point(i) for i in ('max', 's', 'min'))
D = S.delta


class TestLinearTransfer():

    def test_entry_on_saddle(self):
        cmap = MODEL.transfers[0]
        z = D * np.array([math.cos(0.1), math.sin(0.1)])
        w, time = cmap(z)
        assert_allclose(w, [D, 2.0 * D * math.sin(0.2)])
        assert time == 2.0

    def test_entry_on_minimum(self):
        w, _ = MODEL.transfers[1](S.join(None, [D]))
        assert_allclose(w, [0.0, D])

    def test_leaves_chart(self):
        cmap = MODEL.transfers[0]
        z = D * np.array([1.0, 1.0]) / math.sqrt(2.0)
        assert not cmap.contains(z)
        with pytest.raises(NotInDomainError):
            cmap.apply(z)

    def test_short_time(self):
        with pytest.raises(AtlasSchemaError):
            LinearTransfer(MAX, S, np.eye(2), time=1.0)

    def test_shape(self):
        with pytest.raises(AtlasSchemaError):
            LinearTransfer(MAX, S, np.eye(3))

    def test_params(self):
        cmap = LinearTransfer.from_params(S, MIN, {'diag': [1.0, 2.0], 'time': 3.0})
        assert_allclose(cmap.matrix, np.diag([1.0, 2.0]))
        assert cmap.time == 3.0
        with pytest.raises(AtlasSchemaError):
            LinearTransfer.from_params(S, MIN, {})

    def test_margin(self):
        near_axis = D * np.array([math.cos(1.4), math.sin(1.4)])
        assert LinearTransfer(MAX, S, 2.0 * np.eye(2)).contains(near_axis)
        cmap = LinearTransfer.from_params(MAX, S, {'scale': 2.0, 'margin': D})
        assert not cmap.contains(near_axis)
        assert cmap.contains(D * np.array([math.cos(0.1), math.sin(0.1)]))
        assert cmap.__getstate__()['params']['margin'] == D

    def test_negative_margin(self):
        with pytest.raises(AtlasSchemaError):
            LinearTransfer(MAX, S, np.eye(2), margin=-1.0)


class TestChartPassage():

    def test_exit_point(self):
        assert_allclose(exit_point(S, [D, 0.5 * D]), [0.5 * D, D])
        assert transit_time(S, [D, 0.5 * D]) == pytest.approx(math.log(2.0))

    def test_stable_entry(self):
        assert transit_time(S, [D, 0.0]) == math.inf
        with pytest.raises(NotInDomainError):
            exit_point(S, [D, 0.0])


class TestShooting():

    @pytest.mark.parametrize("z,target", [([0.2, 0.0], 'sa'), ([0.0, 0.2], 'sb')])
    def test_axis_flow_lines(self, z, target):
        model = torus_Yr()
        result = model.first_hit(model.point('max'), np.array(z))
        assert result.target.id == target
        assert_allclose(result.w, [-0.2, 0.0], atol=1e-6)
        assert result.time > 0.0
