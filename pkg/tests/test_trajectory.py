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

from pyMorse import EndpointMismatch, EndsOnSliceError, GeneralizedTrajectory, NotInDomainError
from pyMorse.examples import chain3
from pyMorse.flow import unstable_trajectory
from pyMorse.local_charts import broken_pair, local_trajectory
from pyMorse.trajectory import (ChartRegion, ChartSegment, ev_level, hausdorff, metric, renormalized_length,
                                restricted_membership, transit_time_in)

MODEL = chain3()
MAX, S, MIN = (MODEL.point(i) for i in ('max', 's', 'min'))
D = S.delta


class TestChartSegment():

    def test_ends(self):
        seg = ChartSegment(MODEL, S, [0.2], [0.1], 0.5)
        assert_allclose(seg.start.v, [0.2, 0.05])
        assert_allclose(seg.end.v, [0.1, 0.1])
        assert seg.duration == pytest.approx(math.log(2.0))

    def test_level(self):
        seg = ChartSegment(MODEL, S, [0.2], [0.1], 0.5)
        c = 0.5 * (seg.f_start + seg.f_end)
        point = seg.at_level(c)
        x, y = S.split(point.v)
        assert S.value + 0.5 * x[0] ** 2 - 0.5 * y[0] ** 2 == pytest.approx(c, abs=1e-12)

    def test_tail_and_head(self):
        assert ChartSegment(MODEL, S, [0.2], None, 0.0).end is S
        assert ChartSegment(MODEL, S, None, [0.2], 0.0).start is S


class TestGeneralizedTrajectory():

    def test_broken_pair(self):
        gamma = broken_pair(MODEL, S, [0.1], [0.1])
        assert gamma.k == 1
        assert [p.id for p in gamma.breaking_points] == ['s']
        assert gamma.finite_length is None
        assert renormalized_length(gamma) == 1.0

    def test_renormalized_length(self):
        gamma = local_trajectory(MODEL, S, math.exp(-3.0), [D], [D])
        assert renormalized_length(gamma) == pytest.approx(0.75)

    def test_mismatch(self):
        upper = unstable_trajectory(MODEL, MAX, [D, 0.0])
        with pytest.raises(EndpointMismatch):
            GeneralizedTrajectory.concatenate([upper, upper])

    def test_state(self):
        gamma = unstable_trajectory(MODEL, MAX, D * np.array([0.6, 0.8]))
        again = GeneralizedTrajectory.from_state(MODEL, gamma.__getstate__())
        assert again.__getstate__() == gamma.__getstate__()
        assert metric(gamma, again) == 0.0


class TestEvaluation():

    def test_level(self):
        gamma = unstable_trajectory(MODEL, MAX, D * np.array([0.6, 0.8]))
        point = ev_level(gamma, ('level', -1.99))
        assert point.q.id == 'min'
        assert MODEL.value(point) == pytest.approx(-1.99, abs=1e-9)

    def test_level_out_of_range(self):
        gamma = local_trajectory(MODEL, S, 0.5, [0.1], [0.1])
        with pytest.raises(NotInDomainError):
            ev_level(gamma, ('level', 1.0))

    def test_ends_on_sphere(self):
        gamma = local_trajectory(MODEL, S, 0.5, [D], [0.1])
        with pytest.raises(EndsOnSliceError):
            ev_level(gamma, ('entry', S))
        assert_allclose(ev_level(gamma, ('entry', S), allow_ends=True).v, [D, 0.05])

    def test_transit_time(self):
        gamma = local_trajectory(MODEL, S, 0.01, [2.0 * D], [1.5 * D])
        assert transit_time_in(gamma, S) == pytest.approx(-math.log(0.01) - math.log(2.0) - math.log(1.5))


class TestMetric():

    def test_hausdorff(self):
        a = np.array([[0.0, 0.0], [1.0, 0.0]])
        b = np.array([[0.0, 0.5]])
        assert hausdorff(a, b) == pytest.approx(math.sqrt(1.25))

    def test_symmetric(self):
        a = local_trajectory(MODEL, S, 0.5, [0.1], [0.1])
        b = local_trajectory(MODEL, S, 0.25, [0.2], [0.1])
        assert metric(a, b) == pytest.approx(metric(b, a))
        assert metric(a, a) == 0.0

    def test_length_term(self):
        a = local_trajectory(MODEL, S, 0.5, [0.1], [0.1])
        b = broken_pair(MODEL, S, [0.1], [0.1])
        assert metric(a, b) >= 1.0 - renormalized_length(a)


class TestMembership():

    def test_region(self):
        gamma = local_trajectory(MODEL, S, 0.5, [0.1], [0.1])
        assert restricted_membership(gamma, [ChartRegion(S, 'tilde_U')])
        assert not restricted_membership(gamma, [ChartRegion(MIN, 'tilde_U')])
