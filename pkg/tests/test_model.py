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

from pyMorse import AtlasSchemaError, DomainError
from pyMorse.examples import chain3, chain4
from pyMorse.model import (CriticalPoint, EuclideanChart, MorseModel, NeighborhoodFamily, local_flow, membership,
                           neighborhood_sample, normal_form_value)
from pyMorse.transfer import LinearTransfer


def make_point(id='p', index=1, value=0.0, delta=1.0, n=2):
    return CriticalPoint(id, index, value, delta, EuclideanChart(n - index, index))


class TestCriticalPoint():

    def test_split_join(self):
        p = make_point(index=1, n=3)
        x, y = p.split([1.0, 2.0, 3.0])
        assert_allclose(x, [1.0, 2.0])
        assert_allclose(y, [3.0])
        assert_allclose(p.join(None, [5.0]), [0.0, 0.0, 5.0])

    def test_index_must_match_chart(self):
        with pytest.raises(AtlasSchemaError):
            CriticalPoint('p', 2, 0.0, 1.0, EuclideanChart(2, 1))

    def test_delta_positive(self):
        with pytest.raises(AtlasSchemaError):
            make_point(delta=0.0)

    def test_extremes(self):
        assert make_point(index=0).is_minimum
        assert make_point(index=2).is_maximum
        assert not make_point(index=1).is_maximum


class TestNormalForm():

    def test_value_at_origin(self):
        assert normal_form_value(make_point(value=3.0), [0.0], [0.0]) == 3.0

    def test_stable_only(self):
        p = make_point(index=0, value=0.0)
        assert normal_form_value(p, [1.0, 0.0], []) == pytest.approx(0.5)

    def test_mixed(self):
        p = make_point(index=1, value=1.0)
        assert normal_form_value(p, [0.6], [0.8]) == pytest.approx(0.86)

    def test_outside_chart(self):
        with pytest.raises(DomainError):
            normal_form_value(make_point(delta=0.25), [0.6], [0.0])

    def test_local_flow(self):
        x, y = local_flow(math.log(2.0), [1.0, 2.0], [3.0])
        assert_allclose(x, [0.5, 1.0])
        assert_allclose(y, [6.0])

    def test_flow_decreases_value(self):
        p = make_point(index=1, value=0.0)
        x, y = np.array([0.3]), np.array([0.2])
        f0 = normal_form_value(p, x, y)
        x1, y1 = local_flow(0.1, x, y)
        assert normal_form_value(p, x1, y1) < f0


class TestMembership():

    def test_regions(self):
        p = make_point(delta=1.0)
        assert membership(p, [0.5], [0.5], 'U')
        assert not membership(p, [1.5], [0.1], 'U')
        assert membership(p, [1.5], [0.1], 'tilde_U')
        assert not membership(p, [1.5], [0.9], 'tilde_U')
        assert membership(p, [1.0], [0.5], 'tilde_S_plus')
        assert membership(p, [1.0], [0.0], 'S_plus')
        assert not membership(p, [1.0], [0.5], 'S_plus')
        assert membership(p, [0.3], [1.0], 'tilde_S_minus')

    def test_monotone_in_t(self):
        p = make_point(delta=1.0)
        assert membership(p, [0.5], [0.5], 'tilde_U_t', t=0.5)
        assert not membership(p, [0.5], [0.5], 'tilde_U_t', t=0.2)

    def test_bad_t(self):
        with pytest.raises(DomainError):
            membership(make_point(), [0.1], [0.1], 'U_t', t=1.5)

    def test_unknown_region(self):
        with pytest.raises(DomainError):
            membership(make_point(), [0.1], [0.1], 'nowhere')

    @pytest.mark.parametrize("t", [1.0, 0.5, 0.1])
    def test_boundary_sample(self, t):
        p = make_point(delta=0.25)
        family = NeighborhoodFamily(p, t)
        for v in neighborhood_sample(p, t, 50, np.random.default_rng(1)):
            assert not family.contains(v * 1.001)
            assert family.contains(v * 0.999)


class TestMorseModel():

    def test_sorted_by_value(self):
        model = chain4()
        assert [p.id for p in model.critical_points] == ['max', 's1', 's2', 'min']

    def test_map_must_decrease(self):
        low, high = make_point('a', 0, 0.0), make_point('b', 2, 1.0)
        with pytest.raises(AtlasSchemaError):
            MorseModel('bad', 2, [low, high], [LinearTransfer(low, high, np.eye(2))])

    def test_unknown_point(self):
        with pytest.raises(DomainError):
            chain3().point('nope')

    def test_first_hit_prefers_higher_target(self):
        model = chain3()
        top = model.point('max')
        d = top.delta
        result = model.first_hit(top, [d, 0.01 * d])
        assert result.target.id == 's'
        result = model.first_hit(top, [d / math.sqrt(2.0), d / math.sqrt(2.0)])
        assert result.target.id == 'min'

    def test_state(self):
        state = chain3().__getstate__()
        assert state['dimension'] == 2
        assert [cp['id'] for cp in state['critical_points']] == ['max', 's', 'min']
        assert len(state['connecting_maps']) == 3
