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

from pyMorse import CONFIG, DomainError, GeneralizedTrajectory, NotInDomainError
from pyMorse.examples import chain3, chain4
from pyMorse.flow import unstable_trajectory
from pyMorse.global_charts import (ChartPoint, ChartRegistry, CritSeq, FreeEnd, breaking_number, build_all,
                                   critseq_from_state, end_condition_transition, enumerate_critseqs, ev_and_tau,
                                   forget_map, global_chart, global_chart_inverse, iota, t_bisection,
                                   transversality_angle)
from pyMorse.local_charts import local_trajectory

MODEL = chain3()
MAX, S, MIN = (MODEL.point(i) for i in ('max', 's', 'min'))
D = S.delta


def broken_at_saddle():
    upper = unstable_trajectory(MODEL, MAX, [D, 0.0])
    lower = unstable_trajectory(MODEL, S, S.join(None, [D]))
    return GeneralizedTrajectory.concatenate([upper, lower])


def exit_at(angle):
    return D * np.array([math.cos(angle), math.sin(angle)])


class TestCritSeq():

    def test_str(self):
        assert str(CritSeq([S], 'near', MIN)) == '(~U | s | min)'
        assert str(CritSeq([S], 'outside', 'outside')) == '(X-U | s | X-U)'

    def test_values_decrease(self):
        with pytest.raises(DomainError):
            CritSeq([MIN], MAX, S)

    def test_empty_with_free_end(self):
        with pytest.raises(DomainError):
            CritSeq([], 'near', MIN)

    def test_contains(self):
        big = CritSeq([S], MAX, MIN)
        assert big.contains(CritSeq([], MAX, MIN))
        assert not CritSeq([], MAX, MIN).contains(big)

    def test_factor_kinds(self):
        assert CritSeq([], MAX, MIN).factor_kinds() == ['identity']
        assert CritSeq([S], 'outside', 'near').factor_kinds() == ['minus_outside', 'plus_near']
        assert CritSeq([S], 'near', 'near').is_special

    def test_state(self):
        seq = CritSeq([S], 'near', MIN)
        assert critseq_from_state(MODEL, seq.__getstate__()) == seq


class TestEnumeration():

    def test_chain3(self):
        seqs = enumerate_critseqs(MODEL, 'max', 'min')
        assert sorted(s.k for s in seqs) == [0, 1]

    def test_chain4(self):
        model = chain4()
        seqs = enumerate_critseqs(model, 'max', 'min')
        assert sorted(s.k for s in seqs) == [0, 1, 1, 2]
        assert breaking_number(model, 'max', 'min') == 2

    def test_free_start(self):
        seqs = enumerate_critseqs(MODEL, 'X', 'min')
        labels = sorted(str(s) for s in seqs)
        assert labels == ['(X-U | s | min)', '(~U | max | min)', '(~U | max | s | min)', '(~U | s | min)']

    def test_no_upward_sequences(self):
        assert enumerate_critseqs(MODEL, 'min', 'max') == []


class TestIota():

    def test_near_start(self):
        seq = CritSeq([S], 'near', MIN)
        out = iota(seq, [0.5], [[0.1]], [[D]])
        assert [label for label, _, _ in out] == ['start', 'exit']
        assert_allclose(out[0][2], [0.1, 0.5 * D])
        assert_allclose(out[1][2], [0.05, D])

    def test_bound(self):
        with pytest.raises(NotInDomainError):
            iota(CritSeq([S], 'near', MIN), [0.9], [[1.5 * D]], [[D]])

    def test_outside_needs_time(self):
        with pytest.raises(NotInDomainError):
            iota(CritSeq([S], 'outside', MIN), [0.5], [[D]], [[D]])


class TestSpecialChart():

    def test_roundtrip(self):
        seq = CritSeq([S], 'near', 'near')
        gamma = local_trajectory(MODEL, S, 0.3, [0.1], [-0.15])
        point = global_chart(gamma, seq, t=1.0)
        assert point.taus == pytest.approx((0.3,))
        again = global_chart(global_chart_inverse(MODEL, point), seq, t=1.0)
        assert again.distance(point) < 1e-12

    def test_bound(self):
        gamma = local_trajectory(MODEL, S, 0.9, [1.4 * D], [1.0 * D])
        with pytest.raises(NotInDomainError):
            global_chart(gamma, CritSeq([S], 'near', 'near'), t=0.5)


class TestBrokenChart():

    def test_zero_tau(self):
        seq = CritSeq([S], MAX, MIN)
        point = global_chart(broken_at_saddle(), seq)
        assert point.taus == (0.0,)
        assert_allclose(point.strata[0], [D, 0.0], atol=1e-6)

    def test_forget(self):
        seq = CritSeq([S], MAX, MIN)
        ev = ev_and_tau(broken_at_saddle(), seq, 1.0)
        coarse = forget_map(ev, CritSeq([], MAX, MIN))
        assert coarse.taus == ()
        assert coarse.factors[0].source.id == 'max'
        assert coarse.factors[0].target.id == 'min'
        assert_allclose(coarse.factors[0].left, [D, 0.0])

    def test_forget_requires_insertion(self):
        ev = ev_and_tau(broken_at_saddle(), CritSeq([S], MAX, MIN), 1.0)
        with pytest.raises(DomainError):
            forget_map(ev, CritSeq([MAX], 'near', MIN))

    def test_inverse_is_broken(self):
        seq = CritSeq([S], MAX, MIN)
        gamma = global_chart_inverse(MODEL, global_chart(broken_at_saddle(), seq))
        assert [p.id for p in gamma.breaking_points] == ['s']


class TestEndConditionTransition():

    def near_point(self, r):
        seq = CritSeq([S], 'near', MIN)
        return ChartPoint(seq, 1.0, [0.5], [FreeEnd('minus_near', [r]), np.array([0.0, D])])

    def test_rescales(self):
        moved = end_condition_transition(self.near_point(1.5 * D))
        assert moved.seq.start_kind == 'outside'
        assert moved.taus[0] == pytest.approx(0.75)
        assert_allclose(moved.strata[0].vector, [D])
        assert moved.strata[0].time == pytest.approx(-math.log(1.5))

    def test_inside_closure(self):
        with pytest.raises(NotInDomainError):
            end_condition_transition(self.near_point(0.5 * D))

    def test_wrong_side(self):
        with pytest.raises(DomainError):
            end_condition_transition(self.near_point(1.5 * D), side='+')


class TestTubularProjection():

    def test_isolated_pair(self):
        proj = ChartRegistry(MODEL).projection(MAX, S)
        assert proj.mode == 'b0_nearest_point'
        z = exit_at(0.01)
        assert_allclose(proj(z, proj.cmap(z)[0]), [D, 0.0], atol=1e-12)

    @pytest.mark.parametrize("angle", [0.005, 0.04, 0.088, 0.3])
    def test_fixes_the_family(self, angle):
        proj = ChartRegistry(MODEL).projection(MAX, MIN)
        assert proj.mode == 'blended_extension'
        assert proj.breaking == 1
        z = exit_at(angle)
        assert_allclose(proj(z, proj.cmap(z)[0]), z, atol=1e-6)

    def test_pi_hat_reads_the_transition_time(self):
        proj = ChartRegistry(MODEL).projection(MAX, MIN)
        z = exit_at(0.04)
        m, tau = proj.pi_hat(z, proj.cmap(z)[0])
        assert tau == pytest.approx(2.0 * math.sin(0.08), rel=1e-9)
        assert_allclose(m, z, atol=1e-6)

    def test_pi_hat_away_from_the_saddle(self):
        proj = ChartRegistry(MODEL).projection(MAX, MIN)
        z = exit_at(0.3)
        assert proj.pi_hat(z, proj.cmap(z)[0]) is None

    def test_iterated_mode(self):
        proj = ChartRegistry(MODEL, CONFIG.copy(projection_blend=False)).projection(MAX, MIN)
        assert proj.mode == 'iterated_pi_hat'
        z = exit_at(0.088)
        w = proj.cmap(z)[0]
        m_hat, _ = proj.pi_hat(z, w)
        assert_allclose(proj(z, w), m_hat)

    def test_nearest_point(self):
        proj = ChartRegistry(MODEL).projection(MAX, MIN)
        z = exit_at(0.3)
        assert_allclose(proj.nearest_point(z), z, atol=1e-8)

    def test_submersion(self):
        proj = ChartRegistry(MODEL).projection(MAX, MIN)
        values = proj.check_submersion([exit_at(0.3), exit_at(0.04)])
        assert len(values) == 2
        assert min(values) > 0.5

    def test_build_all_orders_by_breaking_number(self):
        projections = build_all(ChartRegistry(MODEL))
        assert [p.pair for p in projections] == [('max', 's'), ('s', 'min'), ('max', 'min')]
        assert [p.breaking for p in projections] == [0, 0, 1]

    def test_single_rung_ladder(self):
        registry = ChartRegistry(MODEL, CONFIG.copy(t_ladder=[0.5]))
        assert registry.t_level(0) == registry.t_level(3) == 0.5


class TestTransversality():

    def test_saddle_of_chain3(self):
        angle = transversality_angle(MODEL, CritSeq([S], MAX, MIN), [[D, 0.0], [0.0, D]])
        assert angle == pytest.approx(math.acos(1.0 / math.sqrt(17.0)), rel=1e-4)

    def test_needs_critical_ends(self):
        with pytest.raises(DomainError):
            transversality_angle(MODEL, CritSeq([S], 'near', MIN), [[0.0, D]])

    def test_t_bisection(self):
        assert t_bisection(MODEL, CritSeq([S], MAX, MIN), CONFIG.copy(newton_starts=2), samples=2) == 0.5

    def test_t_bisection_needs_critical_ends(self):
        with pytest.raises(DomainError):
            t_bisection(MODEL, CritSeq([S], 'near', MIN))
