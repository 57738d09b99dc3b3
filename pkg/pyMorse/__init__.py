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
"""
pyMorse computes with the compactified spaces of gradient flow trajectories
of Euclidean Morse-Smale models: models whose function and metric are
exactly quadratic and Euclidean in a chart around every critical point.

Inside a chart the negative gradient flow is known in closed form, so local
trajectory spaces, transition times and their charts are exact. Between
charts the flow is a connecting map from the exit sphere of one critical
point to the entry sphere of the next: declared linear maps for synthetic
atlases, shooting through an interpolated ambient field for the torus model.
On top of these, pyMorse builds tubular projections onto the spaces of
unbroken trajectories, global charts around broken trajectories, and the
associative gluing maps that invert them.

Usage
-----
Load a model and look at its critical points and trajectory spaces:

    #!bash
    >>> from pyMorse import load
    >>> model = load('chain3')
    >>> model
    <MorseModel 'chain3' dim 2, 3 critical points, synthetic>
    >>> print(model)
    ID         INDEX       VALUE     DELTA
    max            2           2      0.25
    s              1           0      0.25
    min            0          -2      0.25

Enumerate the critical point sequences a trajectory from the maximum to the
minimum can break along, and glue two broken pieces with transition time
0.05 at the saddle:

    #!bash
    >>> from pyMorse import enumerate_critseqs, registry_for, unstable_trajectory, GluingInput, glue
    >>> sorted(str(s) for s in enumerate_critseqs(model, "max", "min"))
    ['(max | min)', '(max | s | min)']
    >>> seq = [s for s in enumerate_critseqs(model, "max", "min") if s.k == 1][0]
    >>> registry = registry_for(model)
    >>> factors = [unstable_trajectory(model, a, registry.trajectories(a, b).representatives[0])
    ...            for a, b in zip(seq.chain, seq.chain[1:])]
    >>> gamma = glue(seq, GluingInput(factors, [0.05]))
    >>> gamma.k
    0

The global chart recovers the transition time and the pieces:

    #!bash
    >>> from pyMorse import global_chart
    >>> global_chart(gamma, seq).taus
    (0.05,)

Every numeric tolerance lives in a `Config`; the module-level `CONFIG` is the
default argument of every operation:

    #!bash
    >>> from pyMorse import Config
    >>> cfg = Config(samples=1024)
    >>> cfg['t_ladder']
    [0.5, 0.25, 0.125, 0.0625]

The `pymorse` command wraps the same operations (`pymorse verify chain3`
runs the acceptance suites). Synthetic atlases describe charts and connecting
maps only; they need not come from a closed manifold.
"""
# autopep8: off
from . import utils
utils.configure_trace_logging()
from .exceptions import (MorseError, ConfigError, AtlasSchemaError, DomainError, NotInDomainError,
                         EndsOnSliceError, BlowupPointError, UnresolvedLimitError, FlowTimeoutError,
                         UndetectedConnectionWarning, ProjectionFailure, SubmersionViolation,
                         ChartInversionFailure, EndpointMismatch)
from .utils import CONFIG, Config
from .model import CriticalPoint, EuclideanChart, MorseModel, LocalPoint, BoxPoint, AmbientPoint
from .trajectory import GeneralizedTrajectory, FlowLine, metric
from .flow import integrate, find_infinite_trajectories, unstable_trajectory, ConnectingMap
from .global_charts import (CritSeq, enumerate_critseqs, registry_for, global_chart, global_chart_inverse,
                            end_condition_transition)
from .gluing import GluingInput, glue, glue_finite_end, check_associativity, breaking_convergence
from .examples import load
from .verify import verify
# autopep8: on


__version__ = '0.1.0'
__all__ = [
    'utils', 'MorseError', 'ConfigError', 'AtlasSchemaError', 'DomainError', 'NotInDomainError',
    'EndsOnSliceError', 'BlowupPointError', 'UnresolvedLimitError', 'FlowTimeoutError',
    'UndetectedConnectionWarning', 'ProjectionFailure', 'SubmersionViolation', 'ChartInversionFailure',
    'EndpointMismatch', 'CONFIG', 'Config', 'CriticalPoint', 'EuclideanChart', 'MorseModel', 'LocalPoint',
    'BoxPoint', 'AmbientPoint', 'GeneralizedTrajectory', 'FlowLine', 'metric', 'integrate',
    'find_infinite_trajectories', 'unstable_trajectory', 'ConnectingMap', 'CritSeq', 'enumerate_critseqs',
    'registry_for', 'global_chart', 'global_chart_inverse', 'end_condition_transition', 'GluingInput', 'glue',
    'glue_finite_end', 'check_associativity', 'breaking_convergence', 'load', 'verify'
]
