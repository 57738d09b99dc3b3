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
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from pyMorse import BlowupPointError, NotInDomainError
from pyMorse.examples import chain3, chain4
from pyMorse.local_charts import (broken_pair, chart_both_inside, chart_both_inside_inverse, chart_from_inside,
                                  chart_from_inside_inverse, chart_through, chart_through_inverse,
                                  chart_to_inside, extended_eval, flow_time_to, local_trajectory, restriction,
                                  scaling_identity, transition_time)
from pyMorse.trajectory import image_distance, sampling_bound, transit_time_in

MODEL = chain4()
S1 = MODEL.point('s1')
D = S1.delta

unit = st.floats(min_value=-1.0, max_value=1.0)


def ball_point(components, radius):
    v = np.asarray(components, dtype=float)
    n = np.linalg.norm(v)
    if n > 1.0:
        v = v / n
    return radius * v


def sphere_point(components, radius):
    v = np.asarray(components, dtype=float)
    if np.linalg.norm(v) < 1e-3:
        v = np.ones_like(v)
    return radius * v / np.linalg.norm(v)


class TestBothInside():

    @settings(max_examples=60, deadline=None)
    @given(st.floats(min_value=1e-4, max_value=1.0), st.lists(unit, min_size=1, max_size=1),
           st.lists(unit, min_size=2, max_size=2))
    def test_roundtrip(self, tau, xs, ys):
        x, y = ball_point(xs, 0.9 * D), ball_point(ys, 0.9 * D)
        point = chart_both_inside(local_trajectory(MODEL, S1, tau, x, y), S1)
        assert point.tau == pytest.approx(tau, abs=1e-12)
        assert_allclose(point.x, x, atol=1e-12)
        assert_allclose(point.y, y, atol=1e-12)

    def test_broken_pair(self):
        x, y = np.array([0.1]), np.array([0.05, -0.1])
        point = chart_both_inside(broken_pair(MODEL, S1, x, y), S1)
        assert point.tau == 0.0
        assert_allclose(point.x, x)
        assert_allclose(point.y, y)

    def test_zero_length(self):
        x, y = np.array([0.1]), np.array([0.05, 0.0])
        gamma = local_trajectory(MODEL, S1, 1.0, x, y)
        assert gamma.finite_length == 0.0
        assert chart_both_inside(gamma, S1).tau == 1.0

    def test_inverse(self):
        point = chart_both_inside(local_trajectory(MODEL, S1, 0.3, [0.1], [0.0, 0.2]), S1)
        gamma = chart_both_inside_inverse(MODEL, point)
        assert gamma.finite_length == pytest.approx(-math.log(0.3))

    def test_outside(self):
        with pytest.raises(NotInDomainError):
            chart_both_inside(local_trajectory(MODEL, S1, 0.5, [3.0 * D], [0.0, 0.1]), S1)


class TestThrough():

    @pytest.mark.parametrize("T", [0.1, math.log(4.0), 3.0, 12.0])
    def test_tau_is_exp_minus_transit(self, T):
        x, y = np.array([D]), np.array([0.0, -D])
        gamma = local_trajectory(MODEL, S1, math.exp(-T), x, y)
        point = chart_through(gamma, S1)
        assert point.tau == pytest.approx(math.exp(-T), rel=1e-12)
        assert transit_time_in(gamma, S1) == pytest.approx(T, rel=1e-10)

    def test_broken(self):
        gamma = broken_pair(MODEL, S1, [D], [D, 0.0])
        assert transition_time(gamma, S1) == 0.0
        assert restriction(gamma, 'rest1', S1).tau == 0.0

    def test_inverse_requires_spheres(self):
        point = chart_through(local_trajectory(MODEL, S1, 0.5, [D], [0.0, D]), S1)
        point.x = 0.5 * point.x
        with pytest.raises(NotInDomainError):
            chart_through_inverse(MODEL, point)


class TestExtendedEvaluation():

    def test_on_exit_set(self):
        gamma = local_trajectory(MODEL, S1, 1.0, [0.1], [0.0, D])
        assert_allclose(extended_eval(gamma, S1, '-'), [0.1, 0.0, D])

    def test_half_way(self):
        gamma = local_trajectory(MODEL, S1, 1.0, [0.1], [0.0, D / 2])
        assert_allclose(extended_eval(gamma, S1, '-'), [0.05, 0.0, D])

    def test_blowup_point(self):
        gamma = broken_pair(MODEL, S1, [0.1], [0.0, D])
        with pytest.raises(BlowupPointError):
            extended_eval(gamma, S1, '-')


class TestBlowupCharts():

    def test_from_inside_roundtrip(self):
        x, y = np.array([0.5 * D]), np.array([0.0, D])
        gamma = chart_from_inside_inverse(MODEL, chart_from_inside(local_trajectory(MODEL, S1, 0.4, x, y), S1))
        assert chart_from_inside(gamma, S1).tau == pytest.approx(0.4)

    def test_past_exit_set(self):
        """A start beyond the exit set has parameter e^0.4 in [1, 2)."""
        y = np.array([0.0, D * math.exp(0.4)])
        gamma = local_trajectory(MODEL, S1, 1.0, [0.1 * D], y)
        point = chart_from_inside(gamma, S1)
        assert point.tau == pytest.approx(math.exp(0.4))
        assert_allclose(point.y, [0.0, D])

    def test_constraint(self):
        gamma = local_trajectory(MODEL, S1, 1.0, [1.2 * D], [0.0, 0.8 * D])
        assert chart_from_inside(gamma, S1).tau == pytest.approx(0.8)
        with pytest.raises(NotInDomainError):
            chart_from_inside(gamma, S1, t=0.5)

    def test_to_inside(self):
        gamma = local_trajectory(MODEL, S1, 0.25, [D], [0.0, 0.5 * D])
        point = chart_to_inside(gamma, S1)
        assert point.tau == pytest.approx(0.25)
        assert_allclose(point.x, [D])

    def test_flow_times(self):
        gamma = local_trajectory(MODEL, S1, 0.5, [2.0 * D * 0.9], [0.0, D])
        assert flow_time_to(gamma, S1, '-') == pytest.approx(-math.log(1.8))


class TestTransitionRelations():

    def test_minus_and_plus(self):
        x, y = np.array([1.5 * D]), np.array([D, 0.0])
        gamma = local_trajectory(MODEL, S1, 0.2, x, y)
        assert transition_time(gamma, S1, 'minus') == pytest.approx(0.2)
        assert transition_time(gamma, S1, 'plus') == pytest.approx(0.3)

    def test_tilde_and_minus(self):
        x, y = np.array([0.3 * D]), np.array([0.0, 0.6 * D])
        gamma = local_trajectory(MODEL, S1, 0.7, x, y)
        tilde = transition_time(gamma, S1, 'tilde')
        minus = transition_time(gamma, S1, 'minus')
        assert tilde * 0.6 * D == pytest.approx(D * minus, rel=1e-12)


class TestBrokenStratumBound():

    @settings(max_examples=30, deadline=None)
    @given(st.floats(min_value=0.0, max_value=0.3), st.floats(min_value=-0.05, max_value=0.05),
           st.floats(min_value=-0.05, max_value=0.05))
    def test_hausdorff_bound(self, tau, dx, dy):
        model = chain3()
        s = model.point('s')
        d = s.delta
        x, y = np.array([0.5 * d]), np.array([0.5 * d])
        x2, y2 = x + dx * d, y + dy * d
        glued, broken = local_trajectory(model, s, tau, x2, y2), broken_pair(model, s, x, y)
        bound = abs(dx * d) + abs(dy * d) + 4.0 * d * math.sqrt(tau)
        slack = sampling_bound(glued, 256) + sampling_bound(broken, 256)
        assert image_distance(glued, broken, 256) <= bound + slack


class TestScaling():

    def test_scaling_identity(self):
        x, y, s = scaling_identity(0.5, 0.1, [1.0], [2.0])
        assert_allclose(x, [0.4])
        assert s == pytest.approx(math.log(2.5))
        assert_allclose(math.exp(-s) * np.array([1.0]), x)
