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

import pytest
from numpy.testing import assert_allclose

from pyMorse import DomainError, EndpointMismatch, GeneralizedTrajectory, NotInDomainError
from pyMorse.examples import chain3, chain4
from pyMorse.flow import unstable_trajectory
from pyMorse.global_charts import CritSeq, FreeEnd, global_chart
from pyMorse.gluing import (GluingInput, breaking_convergence, check_associativity, exit_point, glue,
                            glue_finite_end)
from pyMorse.local_charts import local_coords
from pyMorse.trajectory import metric, transit_time_in

MODEL = chain3()
MAX, S, MIN = (MODEL.point(i) for i in ('max', 's', 'min'))
D = S.delta
UPPER = unstable_trajectory(MODEL, MAX, [D, 0.0])
LOWER = unstable_trajectory(MODEL, S, [0.0, D])
SEQ = CritSeq([S], MAX, MIN)


class TestGluingInput():

    def test_counts(self):
        with pytest.raises(DomainError):
            GluingInput([UPPER], [0.1])

    def test_endpoints(self):
        with pytest.raises(EndpointMismatch):
            GluingInput([LOWER, UPPER], [0.1])

    def test_negative(self):
        with pytest.raises(NotInDomainError):
            GluingInput([UPPER, LOWER], [-0.1])

    def test_alternating(self):
        data = GluingInput.from_alternating([UPPER, 0.2, LOWER])
        assert data.taus == (0.2,)
        assert data.seq == SEQ

    def test_exit_point(self):
        assert_allclose(exit_point(UPPER), [D, 0.0])


class TestGlue():

    def test_empty_sequence(self):
        assert glue(CritSeq([], MAX, S), GluingInput([UPPER], [])) is UPPER

    def test_zero_is_concatenation(self):
        glued = glue(SEQ, GluingInput([UPPER, LOWER], [0.0]))
        assert [p.id for p in glued.breaking_points] == ['s']
        assert glued.pieces[0] is UPPER.pieces[0]

    def test_transit_time(self):
        glued = glue(SEQ, GluingInput([UPPER, LOWER], [0.05]))
        assert glued.k == 0
        assert transit_time_in(glued, S) == pytest.approx(-math.log(0.05), rel=1e-6)
        assert global_chart(glued, SEQ).taus[0] == pytest.approx(0.05, rel=1e-6)

    def test_wrong_sequence(self):
        with pytest.raises(EndpointMismatch):
            glue(CritSeq([], MAX, MIN), GluingInput([UPPER, LOWER], [0.1]))

    def test_tau_range(self):
        with pytest.raises(NotInDomainError):
            glue(SEQ, GluingInput([UPPER, LOWER], [5.0]))


class TestFiniteEnd():

    def test_near_start(self):
        seq = CritSeq([S], 'near', MIN)
        gamma = glue_finite_end(MODEL, seq, [0.5], [FreeEnd('minus_near', [0.1]), LOWER])
        assert gamma.end_plus.id == 'min'
        assert_allclose(local_coords(S, gamma.end_minus), [0.1, 0.5 * D], atol=1e-6)

    def test_parameter_range(self):
        with pytest.raises(NotInDomainError):
            glue_finite_end(MODEL, CritSeq([S], 'near', MIN), [2.5], [FreeEnd('minus_near', [0.1]), LOWER])

    def test_needs_free_end_data(self):
        with pytest.raises(DomainError):
            glue_finite_end(MODEL, CritSeq([S], 'near', MIN), [0.5], [LOWER, LOWER])

    def test_critical_ends(self):
        with pytest.raises(DomainError):
            glue_finite_end(MODEL, SEQ, [0.5], [UPPER, LOWER])


class TestHarnesses():

    def test_associativity_with_empty_outer(self):
        report = check_associativity(MODEL, CritSeq([], MAX, MIN), SEQ, samples=2)
        assert report.passed
        assert report.max_residual == 0.0

    def test_associativity_zero_inner(self):
        report = check_associativity(MODEL, CritSeq([], MAX, MIN), SEQ, samples=2, zero_inner=True)
        assert report.passed

    def test_associativity_inside_a_longer_sequence(self):
        model = chain4()
        top, s1, s2, bottom = (model.point(i) for i in ('max', 's1', 's2', 'min'))
        report = check_associativity(model, CritSeq([s1], top, bottom), CritSeq([s1, s2], top, bottom), samples=2)
        assert report.failures == []
        assert len(report.residuals) == 2
        assert report.max_residual < 1e-5

    def test_refinement_required(self):
        with pytest.raises(DomainError):
            check_associativity(MODEL, SEQ, CritSeq([], MAX, MIN), samples=1)

    def test_convergence(self):
        fit = breaking_convergence(MODEL, SEQ, [UPPER, LOWER], js=range(3, 9))
        assert fit.distances[-1] < fit.distances[0]
        assert fit.alpha > 0.3
        assert metric(glue(SEQ, GluingInput([UPPER, LOWER], [0.0])), GeneralizedTrajectory.concatenate([UPPER, LOWER])) == 0.0
