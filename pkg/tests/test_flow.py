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
import io
import math
import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose

from pyMorse import DomainError, LocalPoint, NotInDomainError, UndetectedConnectionWarning
from pyMorse.examples import chain3, chain4, sphere_height
from pyMorse.flow import (ConnectingMap, connecting_map, find_infinite_trajectories, follow, integrate,
                          stable_residual, trajectory_from, unstable_trajectory)

MODEL = chain3()
D = MODEL.point('s').delta
CHAIN4 = chain4()


class TestFollow():

    def test_stable_manifold_of_saddle(self):
        segments, limit = follow(MODEL, LocalPoint(MODEL.point('s'), [0.1, 0.0]))
        assert limit.id == 's'
        assert segments[-1].kind == 'tail'

    def test_exit_point_into_saddle(self):
        _, limit = follow(MODEL, LocalPoint(MODEL.point('max'), [D, 0.0]))
        assert limit.id == 's'

    def test_exit_point_past_saddle(self):
        m = D * np.array([math.cos(0.3), math.sin(0.3)])
        _, limit = follow(MODEL, LocalPoint(MODEL.point('max'), m))
        assert limit.id == 'min'

    def test_diagonal_goes_straight_down(self):
        m = D * np.array([1.0, 1.0]) / math.sqrt(2.0)
        segments, limit = follow(MODEL, LocalPoint(MODEL.point('max'), m))
        assert limit.id == 'min'
        assert segments[-1].q.id == 'min'

    def test_rounding_noise_on_stable_sphere(self):
        _, limit = follow(MODEL, LocalPoint(MODEL.point('max'), [-D, 3.06e-17]))
        assert limit.id == 's'


class TestIntegrate():

    def test_monotone(self):
        sample = integrate(MODEL, LocalPoint(MODEL.point('max'), [0.2, 0.1]), n=16)
        assert sample.converged_to.id == 'min'
        assert sample.is_monotone()
        assert sample.times == sorted(sample.times)

    def test_stops_at_level(self):
        sample = integrate(MODEL, LocalPoint(MODEL.point('max'), [0.2, 0.1]), ('level', 0.5), n=16)
        assert sample.values[-1] == pytest.approx(0.5, abs=1e-6)
        assert sample.converged_to is None

    def test_level_above_start(self):
        with pytest.raises(NotInDomainError):
            integrate(MODEL, LocalPoint(MODEL.point('s'), [0.1, 0.1]), ('level', 5.0))

    def test_unknown_event(self):
        with pytest.raises(DomainError):
            integrate(MODEL, MODEL.point('max'), ('sunrise', None))

    def test_csv(self):
        sample = integrate(MODEL, LocalPoint(MODEL.point('s'), [0.1, 0.05]), ('time', 1.0), n=8)
        buf = io.StringIO()
        sample.write_csv(buf)
        rows = buf.getvalue().splitlines()
        assert rows[0].startswith('time,')
        assert len(rows) == len(sample) + 1


class TestConnectingMap():

    def test_linear_entry(self):
        w, time = connecting_map(MODEL, 'max', 's', [D, 0.0])
        assert_allclose(w, [D, 0.0])
        assert time == pytest.approx(2.0)

    def test_downhill_only(self):
        with pytest.raises(DomainError):
            ConnectingMap(MODEL, 'min', 'max')

    def test_residual_vanishes_on_connections(self):
        cmap = ConnectingMap(MODEL, 'max', 's')
        assert_allclose(stable_residual(cmap, [-D, 0.0]), [0.0], atol=1e-14)
        assert not cmap.contains(D * np.array([1.0, 1.0]) / math.sqrt(2.0))


class TestInfiniteTrajectories():

    @pytest.mark.parametrize("pair", [('max', 's'), ('s', 'min')])
    def test_isolated_counts(self, pair):
        found = find_infinite_trajectories(MODEL, *pair)
        assert found.dimension == 0
        assert len(found) == 2

    def test_max_to_saddle_points(self):
        found = find_infinite_trajectories(MODEL, 'max', 's')
        firsts = sorted(float(m[0]) for m in found.points)
        assert_allclose(firsts, [-D, D], atol=1e-8)

    def test_family(self):
        found = find_infinite_trajectories(MODEL, 'max', 'min')
        assert found.dimension == 1
        assert found.positive_dimensional

    def test_upward_is_empty(self):
        found = find_infinite_trajectories(MODEL, 'min', 'max')
        assert found.is_empty()
        assert found.describe() == 'empty'

    def test_circle(self):
        found = find_infinite_trajectories(sphere_height(1), 'max', 'min')
        assert len(found) == 2

    def test_every_saddle_connection_converges(self):
        found = find_infinite_trajectories(MODEL, 'max', 's')
        limits = [unstable_trajectory(MODEL, MODEL.point('max'), m).end_plus.id for m in found.points]
        assert limits == ['s', 's']

    def test_count_mismatch_warns(self):
        model = chain3()
        model.declared[('max', 's')] = 3
        with pytest.warns(UndetectedConnectionWarning, match='declared 3, found 2'):
            find_infinite_trajectories(model, 'max', 's')


class TestChain4Connections():

    @pytest.mark.parametrize("pair", [('max', 's1'), ('s1', 's2'), ('s2', 'min')])
    def test_declared_counts(self, pair):
        with warnings.catch_warnings():
            warnings.simplefilter('error', UndetectedConnectionWarning)
            found = find_infinite_trajectories(CHAIN4, *pair)
        assert found.dimension == 0
        assert len(found) == 2

    def test_max_to_s1_poles(self):
        found = find_infinite_trajectories(CHAIN4, 'max', 's1')
        firsts = sorted(float(m[0]) for m in found.points)
        assert_allclose(firsts, [-D, D], atol=1e-8)

    def test_margin_keeps_equator_out_of_s1(self):
        cmap = ConnectingMap(CHAIN4, 'max', 's1')
        assert cmap.contains([0.6 * D, 0.8 * D, 0.0])
        assert not cmap.contains([0.4 * D, math.sqrt(0.84) * D, 0.0])

    def test_max_to_s2_half_circles(self):
        found = find_infinite_trajectories(CHAIN4, 'max', 's2')
        assert found.dimension == 1
        assert len(found.arcs) == 2
        assert len(found.ends) == 4
        for arc in found.arcs:
            assert_allclose(arc[:, 2], 0.0, atol=1e-8)
        for end in found.ends:
            assert abs(end[0]) == pytest.approx(D, abs=1e-5)


class TestTrajectories():

    def test_unstable_trajectory(self):
        gamma = unstable_trajectory(MODEL, MODEL.point('max'), [D, 0.0])
        assert gamma.end_minus.id == 'max'
        assert gamma.end_plus.id == 's'
        assert gamma.finite_length is None

    def test_half_infinite(self):
        gamma = trajectory_from(MODEL, LocalPoint(MODEL.point('s'), [0.1, 0.1]))
        assert gamma.end_plus.id == 'min'
