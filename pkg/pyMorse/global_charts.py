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
This module contains the global charts of compactified trajectory spaces.

A chart is indexed by a critical point sequence `CritSeq`: end conditions for
both ends (a critical point, X minus the closure of U(q), or Ũ(q)) and the
intermediate critical points q_1, ..., q_k. A trajectory in the domain V_t of
the sequence is sent to its transition times at the q_i and to one unbroken
trajectory per factor, obtained by evaluating the trajectory on the entry and
exit sets and projecting the evaluations with the tubular projections of the
connecting graphs. Unbroken trajectories are represented by their exit point
on the unstable sphere of their source; free ends by their end data.

The inverse of a chart solves for the unique chain of entry and exit points
with the prescribed transition times whose factors project onto the prescribed
trajectories, and assembles the trajectory from the flow between them.
"""

import itertools
import logging
import math
import weakref
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import subspace_angles
from scipy.optimize import least_squares

from .exceptions import (ChartInversionFailure, DomainError, MorseError, NotInDomainError, ProjectionFailure,
                         SubmersionViolation)
from .flow import ConnectingMap, TrajectorySet, _jacobian, _transfer_from, find_infinite_trajectories, follow, truncate
from .local_charts import (GraphPoint, local_coords, local_trajectory, transition_time, flow_time_to,
                           chart_both_inside)
from .model import CriticalPoint, LocalPoint, MorseModel, membership
from .trajectory import (ChartSegment, FlowLine, GeneralizedTrajectory, TransferSegment, distance_to_critical,
                         ev_level)
from .transfer import exit_point
from .utils import CONFIG, Config, cutoff, norm, sphere_chart, tangent_basis, to_sphere

logger = logging.getLogger('pyMorse')

END_KINDS = ('critical', 'outside', 'near')


class CritSeq(object):
    """
    A critical point sequence q_1 > ... > q_k with end conditions. `start` and
    `end` are either a `CriticalPoint` or one of 'outside' (X minus the closure
    of U(q_1), resp. U(q_k)) and 'near' (Ũ(q_1), resp. Ũ(q_k)).
    """

    def __init__(self, points: Sequence[CriticalPoint], start: Union[CriticalPoint, str],
                 end: Union[CriticalPoint, str]):
        self.points: Tuple[CriticalPoint, ...] = tuple(points)
        """**(tuple of CriticalPoint):** The intermediate critical points q_1, ..., q_k."""
        self.start = start
        """End condition at the start: a `CriticalPoint`, 'outside' or 'near'."""
        self.end = end
        """End condition at the end: a `CriticalPoint`, 'outside' or 'near'."""
        for label in (self.start_kind, self.end_kind):
            if label not in END_KINDS:
                raise DomainError(f'Unknown end condition {label!r}')
        if not self.points and (self.start_kind != 'critical' or self.end_kind != 'critical'):
            if self.start_kind == 'near' or self.end_kind == 'near' or \
                    self.start_kind == 'outside' or self.end_kind == 'outside':
                raise DomainError('Free end conditions refer to q_1 or q_k; the sequence is empty')
        values = [p.value for p in self.chain]
        if any(a <= b for a, b in zip(values, values[1:])):
            raise DomainError(f'Critical values along {self} are not strictly decreasing')

    @property
    def k(self) -> int:
        return len(self.points)

    @property
    def start_kind(self) -> str:
        return 'critical' if isinstance(self.start, CriticalPoint) else self.start

    @property
    def end_kind(self) -> str:
        return 'critical' if isinstance(self.end, CriticalPoint) else self.end

    @property
    def chain(self) -> List[CriticalPoint]:
        """Critical points in order, including critical ends."""
        out = [self.start] if self.start_kind == 'critical' else []
        out += list(self.points)
        if self.end_kind == 'critical':
            out.append(self.end)
        return out

    def factor_kinds(self) -> List[str]:
        if self.k == 0:
            return ['identity']
        kinds = ['connecting' if self.start_kind == 'critical' else f'minus_{self.start_kind}']
        kinds += ['connecting'] * (self.k - 1)
        kinds.append('connecting' if self.end_kind == 'critical' else f'plus_{self.end_kind}')
        return kinds

    def factor_pairs(self) -> List[Tuple[Optional[CriticalPoint], Optional[CriticalPoint]]]:
        left = [self.start if self.start_kind == 'critical' else None] + list(self.points)
        right = list(self.points) + [self.end if self.end_kind == 'critical' else None]
        return list(zip(left, right))

    @property
    def is_special(self) -> bool:
        """The sequence (Ũ(q), q, Ũ(q))."""
        return self.k == 1 and self.start_kind == 'near' and self.end_kind == 'near'

    def contains(self, other: 'CritSeq') -> bool:
        """True if `self` is obtained from `other` by inserting critical points."""
        if self._label(self.start) != self._label(other.start) or self._label(self.end) != self._label(other.end):
            return False
        ids = [p.id for p in self.points]
        pos = 0
        for p in other.points:
            try:
                pos = ids.index(p.id, pos) + 1
            except ValueError:
                return False
        return True

    @staticmethod
    def _label(end) -> str:
        return end.id if isinstance(end, CriticalPoint) else end

    def key(self) -> Tuple:
        return (self._label(self.start), tuple(p.id for p in self.points), self._label(self.end))

    def __eq__(self, other):
        return isinstance(other, CritSeq) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return "<CritSeq %s>" % (self,)

    def __str__(self):
        def label(end):
            return {'outside': 'X-U', 'near': '~U'}.get(end, getattr(end, 'id', end))
        return '(' + ' | '.join([label(self.start)] + [p.id for p in self.points] + [label(self.end)]) + ')'

    def __getstate__(self):
        return {
            'start': self._label(self.start),
            'points': [p.id for p in self.points],
            'end': self._label(self.end),
        }


def critseq_from_state(model: MorseModel, state: Dict) -> CritSeq:
    def end(label):
        return label if label in ('outside', 'near') else model.point(label)
    return CritSeq([model.point(i) for i in state['points']], end(state['start']), end(state['end']))


class ChartRegistry(object):
    """
    Per-model cache of trajectory spaces, connecting maps and tubular
    projections. Projections are built lazily in order of increasing breaking
    number; once built they are not modified.
    """

    def __init__(self, model: MorseModel, cfg: Config = CONFIG):
        self.model: MorseModel = model
        self.cfg: Config = cfg
        self._sets: Dict[Tuple[str, str], TrajectorySet] = {}
        self._maps: Dict[Tuple[str, str], ConnectingMap] = {}
        self._projections: Dict[Tuple[str, str], 'TubularProjection'] = {}

    def trajectories(self, a: CriticalPoint, b: CriticalPoint) -> TrajectorySet:
        key = (a.id, b.id)
        if key not in self._sets:
            self._sets[key] = find_infinite_trajectories(self.model, a, b, self.cfg)
        return self._sets[key]

    def connected(self, a: CriticalPoint, b: CriticalPoint) -> bool:
        if a.value <= b.value or a.index <= b.index:
            return False
        return not self.trajectories(a, b).is_empty()

    def cmap(self, a: CriticalPoint, b: CriticalPoint) -> ConnectingMap:
        key = (a.id, b.id)
        if key not in self._maps:
            self._maps[key] = ConnectingMap(self.model, a, b, self.cfg)
        return self._maps[key]

    def t_level(self, b: int) -> float:
        ladder = list(self.cfg['t_ladder'])
        return float(ladder[min(max(b, 0), len(ladder) - 1)])

    def projection(self, a: CriticalPoint, b: CriticalPoint) -> 'TubularProjection':
        key = (a.id, b.id)
        if key not in self._projections:
            self._projections[key] = build_tubular(self, a, b)
        return self._projections[key]

    def built(self) -> List[Tuple[str, str]]:
        return list(self._projections)

    def __repr__(self):
        return "<ChartRegistry %s, %s projections>" % (self.model.name, len(self._projections))


_REGISTRIES: 'weakref.WeakKeyDictionary[MorseModel, Dict[int, ChartRegistry]]' = weakref.WeakKeyDictionary()


def registry_for(model: MorseModel, cfg: Config = CONFIG) -> ChartRegistry:
    """The shared registry of a model for one configuration object."""
    per_model = _REGISTRIES.setdefault(model, {})
    if id(cfg) not in per_model:
        per_model[id(cfg)] = ChartRegistry(model, cfg)
    return per_model[id(cfg)]


def _resolve_end(model: MorseModel, end) -> Union[CriticalPoint, str]:
    if isinstance(end, str) and end.upper() == 'X':
        return 'X'
    return model.point(end)


def enumerate_critseqs(model: MorseModel, start, end, cfg: Config = CONFIG,
                       registry: Optional[ChartRegistry] = None) -> List[CritSeq]:
    """All critical point sequences between two ends.

    Args:
        model (MorseModel): The model.
        start, end: Critical points (or ids), or 'X' for a free end.
        cfg (Config, optional): Used to detect trajectory spaces. Defaults to `CONFIG`.
        registry (ChartRegistry, optional): Cache to use. Defaults to the model's shared one.

    Returns:
        list of CritSeq: Sequences with nonempty consecutive trajectory spaces, each with
        every admissible choice of free end conditions, ordered by length.
    """
    registry = registry or registry_for(model, cfg)
    start, end = _resolve_end(model, start), _resolve_end(model, end)
    hi = math.inf if start == 'X' else start.value
    lo = -math.inf if end == 'X' else end.value
    inner = [q for q in model.critical_points if lo < q.value < hi]
    out: List[CritSeq] = []
    for k in range(len(inner) + 1):
        for points in itertools.combinations(inner, k):
            chain = ([start] if start != 'X' else []) + list(points) + ([end] if end != 'X' else [])
            if any(not registry.connected(a, b) for a, b in zip(chain, chain[1:])):
                continue
            if not points:
                if start != 'X' and end != 'X':
                    out.append(CritSeq((), start, end))
                continue
            starts = [start] if start != 'X' else \
                [c for c in ('outside', 'near') if not (c == 'outside' and points[0].is_maximum)]
            ends = [end] if end != 'X' else \
                [c for c in ('outside', 'near') if not (c == 'outside' and points[-1].is_minimum)]
            out.extend(CritSeq(points, s, e) for s in starts for e in ends)
    logger.debug(f"Critseq({getattr(start, 'id', start)}, {getattr(end, 'id', end)}): {len(out)} sequences")
    return out


def breaking_number(model: MorseModel, start, end, cfg: Config = CONFIG,
                    registry: Optional[ChartRegistry] = None) -> int:
    """Largest number of intermediate critical points over the sequences between two ends."""
    seqs = enumerate_critseqs(model, start, end, cfg, registry)
    return max((s.k for s in seqs), default=0)


def _meets_tilde_U_t(gamma: GeneralizedTrajectory, q: CriticalPoint, t: float) -> bool:
    if any(p.id == q.id for p in gamma.breaking_points):
        return True
    bound = (1.0 + t) * q.delta
    for seg in gamma.chart_segments(q):
        if seg.kind != 'through':
            return True
        a, b = norm(seg.x), norm(seg.y)
        if seg.tau * a * b >= t * q.delta ** 2:
            continue
        lo = math.log(a / bound) if a > 0.0 else -math.inf
        hi = seg.duration + (math.log(bound / b) if b > 0.0 else math.inf)
        if lo < hi and lo < seg.duration and hi > 0.0:
            return True
    return False


def _inside_closure(q: CriticalPoint, point) -> bool:
    """Whether a point object lies in the closure of U(q)."""
    if isinstance(point, CriticalPoint):
        return point.id == q.id
    try:
        v = local_coords(q, point)
    except DomainError:
        return False
    x, y = q.split(v)
    return norm(x) <= q.delta and norm(y) <= q.delta


def _end_condition_holds(gamma: GeneralizedTrajectory, seq: CritSeq, side: str, cfg: Config) -> bool:
    kind = seq.start_kind if side == '-' else seq.end_kind
    end_point = gamma.end_minus if side == '-' else gamma.end_plus
    if kind == 'critical':
        target = seq.start if side == '-' else seq.end
        return isinstance(end_point, CriticalPoint) and end_point.id == target.id
    if isinstance(end_point, CriticalPoint):
        return False
    q = seq.points[0] if side == '-' else seq.points[-1]
    if kind == 'outside':
        return not _inside_closure(q, end_point)
    try:
        x, y = q.split(local_coords(q, end_point))
    except DomainError:
        return False
    return membership(q, x, y, 'tilde_U', 1.0, cfg, gamma.model.mode)


def in_V_t(gamma: GeneralizedTrajectory, seq: CritSeq, t: float, cfg: Config = CONFIG) -> bool:
    """Membership of a trajectory in the chart domain V_t of a sequence.

    The end conditions must hold, the image must meet Ũ_t(q_i) for every
    listed q_i, and it must keep away from every other critical point.
    """
    if not (_end_condition_holds(gamma, seq, '-', cfg) and _end_condition_holds(gamma, seq, '+', cfg)):
        return False
    listed = {p.id for p in seq.points}
    if any(p.id not in listed for p in gamma.breaking_points):
        return False
    if not all(_meets_tilde_U_t(gamma, q, t) for q in seq.points):
        return False
    ends = {p.id for p in seq.chain}
    for q in gamma.model.critical_points:
        if q.id in ends:
            continue
        if distance_to_critical(gamma, q) <= cfg['avoid_radius'] * q.delta:
            return False
    return True


class Evaluation(object):
    """Transition times and per-factor graph points of a trajectory for one sequence."""

    def __init__(self, seq: CritSeq, taus: Sequence[float], factors: Sequence[GraphPoint]):
        self.seq: CritSeq = seq
        self.taus: Tuple[float, ...] = tuple(float(t) for t in taus)
        """**(tuple of float):** Transition time at each q_i; 0 exactly where the trajectory breaks."""
        self.factors: List[GraphPoint] = list(factors)
        """**(list of GraphPoint):** One evaluation per factor of the sequence."""

    def residual(self, other: 'Evaluation') -> float:
        """Largest componentwise difference to another evaluation of the same sequence."""
        if self.seq != other.seq:
            raise DomainError(f'Evaluations of {self.seq} and {other.seq} are not comparable')
        diffs = [abs(a - b) for a, b in zip(self.taus, other.taus)]
        for f, g in zip(self.factors, other.factors):
            for a, b in ((f.left, g.left), (f.right, g.right)):
                if isinstance(a, np.ndarray) and isinstance(b, np.ndarray):
                    diffs.append(float(np.max(np.abs(a - b))) if a.size else 0.0)
            if f.time is not None and g.time is not None:
                diffs.append(abs(f.time - g.time))
        return max(diffs, default=0.0)

    def __repr__(self):
        return "<Evaluation %s taus=%r>" % (self.seq, list(self.taus))

    def __getstate__(self):
        return {
            'critseq': self.seq.__getstate__(),
            'tau': list(self.taus),
            'factors': [f.__getstate__() for f in self.factors],
        }


def _sphere_eval(gamma: GeneralizedTrajectory, kind: str, q: CriticalPoint, cfg: Config) -> np.ndarray:
    return local_coords(q, ev_level(gamma, (kind, q), cfg, allow_ends=True))


def _tau_kind(seq: CritSeq, i: int) -> str:
    if seq.is_special:
        return 'tilde'
    if i == 0 and seq.start_kind == 'near':
        return 'minus'
    if i == seq.k - 1 and seq.end_kind == 'near':
        return 'plus'
    return 'through'


def ev_and_tau(gamma: GeneralizedTrajectory, seq: CritSeq, t: float, cfg: Config = CONFIG) -> Evaluation:
    """Transition times and evaluations of a trajectory in V_t of `seq`.

    Args:
        gamma (GeneralizedTrajectory): A trajectory in V_t(seq).
        seq (CritSeq): The sequence.
        t (float): Neighbourhood parameter.
        cfg (Config, optional): Tolerances. Defaults to `CONFIG`.

    Returns:
        Evaluation: τ = 0 at exactly the breaking points, graph points of every factor.
    """
    if not in_V_t(gamma, seq, t, cfg):
        raise NotInDomainError(f'Trajectory is not in V_{t}{seq}', repr(gamma))
    taus = [transition_time(gamma, q, _tau_kind(seq, i), cfg) for i, q in enumerate(seq.points)]
    if seq.start_kind == 'near' and not seq.is_special:
        x, _ = seq.points[0].split(local_coords(seq.points[0], gamma.end_minus))
        if taus[0] * norm(x) >= t * seq.points[0].delta:
            raise NotInDomainError(f'E|ev-| = {taus[0] * norm(x):.6g} violates the bound tΔ at {seq.points[0].id}')
    if seq.end_kind == 'near' and not seq.is_special:
        _, y = seq.points[-1].split(local_coords(seq.points[-1], gamma.end_plus))
        if taus[-1] * norm(y) >= t * seq.points[-1].delta:
            raise NotInDomainError(f'E|ev+| = {taus[-1] * norm(y):.6g} violates the bound tΔ at {seq.points[-1].id}')
    factors: List[GraphPoint] = []
    for kind, (a, b) in zip(seq.factor_kinds(), seq.factor_pairs()):
        if kind == 'connecting' or (kind == 'identity' and seq.start_kind == 'critical'):
            factors.append(GraphPoint('connecting', a, b, _sphere_eval(gamma, 'exit', a, cfg),
                                      _sphere_eval(gamma, 'entry', b, cfg)))
        elif kind == 'identity':
            factors.append(GraphPoint('identity', None, None, gamma.end_minus, gamma.end_plus, gamma.finite_length))
        elif kind == 'minus_outside':
            factors.append(GraphPoint('minus_free', None, b, gamma.end_minus, _sphere_eval(gamma, 'entry', b, cfg),
                                      flow_time_to(gamma, b, '-')))
        elif kind == 'minus_near':
            factors.append(GraphPoint('minus_near', None, b, local_coords(b, gamma.end_minus), None))
        elif kind == 'plus_outside':
            factors.append(GraphPoint('plus_free', a, None, _sphere_eval(gamma, 'exit', a, cfg), gamma.end_plus,
                                      flow_time_to(gamma, a, '+')))
        else:
            factors.append(GraphPoint('plus_near', a, None, None, local_coords(a, gamma.end_plus)))
    logger.trace(f"Evaluated {seq}: taus {taus}")
    return Evaluation(seq, taus, factors)


def forget_map(ev: Evaluation, seq: CritSeq) -> Evaluation:
    """Forgets the evaluations at critical points inserted into `seq`.

    Args:
        ev (Evaluation): Evaluation for a sequence obtained from `seq` by insertions.
        seq (CritSeq): The coarser sequence.

    Returns:
        Evaluation: The evaluation the trajectory has for `seq`.
    """
    big = ev.seq
    if not big.contains(seq):
        raise DomainError(f'{big} is not obtained from {seq} by inserting critical points')
    ids = [p.id for p in big.points]
    keep, pos = [], 0
    for p in seq.points:
        pos = ids.index(p.id, pos)
        keep.append(pos)
        pos += 1
    bounds = [-1] + keep + [big.k]
    factors = []
    for kind, (lo, hi) in zip(seq.factor_kinds(), zip(bounds, bounds[1:])):
        first, last = ev.factors[lo + 1], ev.factors[hi]
        if lo + 1 == hi:
            factors.append(first)
            continue
        if kind not in ('connecting', 'identity') or first.kind != 'connecting':
            raise DomainError(f'Cannot forget critical points next to the free end of {seq}')
        factors.append(GraphPoint('connecting', first.source, last.target, first.left, last.right))
    return Evaluation(seq, [ev.taus[i] for i in keep], factors)


def iota(seq: CritSeq, taus: Sequence[float], xs: Sequence, ys: Sequence, T_minus: Optional[float] = None,
         T_plus: Optional[float] = None, t: float = 1.0) -> List[Tuple[str, str, np.ndarray]]:
    """The embedding of D_{t,τ}(seq) into the product of entry and exit sets.

    Free ends are returned in the extended linear coordinates of the chart they
    refer to: Ψ_T(x_1, τ_1 y_1) for an 'outside' start, the point (x_1, τ_1 y_1)
    itself for a 'near' start, and symmetrically at the end.

    Returns:
        list of tuple: (label, critical point id, chart vector) with labels
        'start', 'entry', 'exit' and 'end', in flow order.
    """
    k = seq.k
    if not (len(taus) == len(xs) == len(ys) == k) or k == 0:
        raise DomainError(f'{seq} needs {k} transition times and {k} pairs (x_i, y_i)')
    xs = [np.asarray(x, dtype=float) for x in xs]
    ys = [np.asarray(y, dtype=float) for y in ys]
    q1, qk = seq.points[0], seq.points[-1]
    if seq.start_kind == 'near' and taus[0] * norm(xs[0]) >= t * q1.delta:
        raise NotInDomainError(f'τ1|x1| = {taus[0] * norm(xs[0]):.6g} violates the bound tΔ = {t * q1.delta:.6g}')
    if seq.end_kind == 'near' and taus[-1] * norm(ys[-1]) >= t * qk.delta:
        raise NotInDomainError(f'τk|yk| = {taus[-1] * norm(ys[-1]):.6g} violates the bound tΔ = {t * qk.delta:.6g}')
    out: List[Tuple[str, str, np.ndarray]] = []
    if seq.start_kind == 'outside':
        if T_minus is None or T_minus > 0.0:
            raise NotInDomainError('An outside start needs a flow time T- <= 0', T_minus)
        out.append(('start', q1.id, q1.join(math.exp(-T_minus) * xs[0], math.exp(T_minus) * taus[0] * ys[0])))
    elif seq.start_kind == 'near':
        out.append(('start', q1.id, q1.join(xs[0], taus[0] * ys[0])))
    for i, q in enumerate(seq.points):
        if not (i == 0 and seq.start_kind == 'near'):
            out.append(('entry', q.id, q.join(xs[i], taus[i] * ys[i])))
        if not (i == k - 1 and seq.end_kind == 'near'):
            out.append(('exit', q.id, q.join(taus[i] * xs[i], ys[i])))
    if seq.end_kind == 'outside':
        if T_plus is None or T_plus < 0.0:
            raise NotInDomainError('An outside end needs a flow time T+ >= 0', T_plus)
        out.append(('end', qk.id, qk.join(math.exp(-T_plus) * taus[-1] * xs[-1], math.exp(T_plus) * ys[-1])))
    elif seq.end_kind == 'near':
        out.append(('end', qk.id, qk.join(taus[-1] * xs[-1], ys[-1])))
    return out


PROJECTION_MODES = ('b0_nearest_point', 'iterated_pi_hat', 'blended_extension')

_PENALTY = 1e3


class TubularProjection(object):
    """
    Projection from a neighbourhood of the evaluation image of M(source, target)
    in the connecting graph onto M(source, target), in exit-point coordinates.

    Isolated spaces project to the nearest element. Positive-dimensional
    spaces of breaking number 0 use the nearest-point projection under the
    product metric of the exit and entry sets. Higher breaking numbers glue
    over the critical points the graph point passes close to (π̂), blended
    into the nearest-point projection across transition-time shells.
    """

    def __init__(self, registry: ChartRegistry, source: CriticalPoint, target: CriticalPoint, breaking: int):
        self.registry: ChartRegistry = registry
        self.source: CriticalPoint = source
        self.target: CriticalPoint = target
        self.breaking: int = int(breaking)
        """**(int):** Breaking number of the pair."""
        self.trajectories: TrajectorySet = registry.trajectories(source, target)
        self.cmap: ConnectingMap = registry.cmap(source, target)
        if self.breaking == 0 or self.trajectories.dimension <= 0:
            self.mode: str = 'b0_nearest_point'
        elif registry.cfg['projection_blend']:
            self.mode = 'blended_extension'
        else:
            self.mode = 'iterated_pi_hat'
        self.t: float = registry.t_level(max(self.breaking - 1, 0))
        """**(float):** Transition-time threshold below which π̂ glues over a passed critical point."""
        self._fd = 1e-7 * source.delta

    @property
    def dimension(self) -> int:
        return self.trajectories.dimension

    @property
    def pair(self) -> Tuple[str, str]:
        return self.source.id, self.target.id

    def evaluate(self, m) -> Tuple[np.ndarray, np.ndarray]:
        """The evaluation embedding: an exit point and its entry point at the target."""
        return self.cmap.graph_point(m)

    def _constraint(self, m) -> np.ndarray:
        w, _ = self.cmap(m)
        return self.target.split(w)[1]

    def _nearest_element(self, z) -> np.ndarray:
        p = self.source
        reps = self.trajectories.points
        if not reps:
            raise ProjectionFailure(self.pair, np.asarray(z).tolist(), 'empty trajectory space')
        _, zy = p.split(z)
        dists = [norm(p.split(m)[1] - zy) for m in reps]
        reach = p.delta
        if len(reps) > 1:
            reach = 0.5 * min(norm(a - b) for a, b in itertools.combinations(reps, 2))
        best = int(np.argmin(dists))
        if dists[best] >= reach:
            raise ProjectionFailure(self.pair, np.asarray(z).tolist(),
                                    f'no element within {reach:.4g} (closest {dists[best]:.4g})')
        return reps[best]

    def _polish(self, point, theta: np.ndarray) -> np.ndarray:
        if self.target.index == 0 or theta.size == 0:
            return theta
        cfg = self.registry.cfg
        p = self.source

        def c(th):
            try:
                return self._constraint(p.join(None, point(th))) / self.target.delta
            except MorseError:
                return np.full(self.target.index, 10.0)

        return _gauss_newton(c, theta, cfg, cfg['newton_tol'])

    def nearest_point(self, z, w=None) -> np.ndarray:
        """Nearest element of M(source, target) to the graph point (z, w), or to the exit point z alone."""
        p, q = self.source, self.target
        z = np.asarray(z, dtype=float)
        _, zy = p.split(z)
        reps = self.trajectories.representatives
        if reps:
            base = p.split(min(reps, key=lambda m: norm(p.split(m)[1] - zy)))[1]
        else:
            base = to_sphere(zy, p.delta)
        point, dim = sphere_chart(base, p.delta)
        size = p.n + (q.n if w is not None else 0) + q.index

        def residual(theta):
            m = p.join(None, point(theta))
            try:
                wm, _ = self.cmap(m)
            except MorseError:
                return np.full(size, 10.0)
            parts = [(m - z) / p.delta]
            if w is not None:
                parts.append((wm - w) / q.delta)
            parts.append(_PENALTY * q.split(wm)[1] / q.delta)
            return np.concatenate(parts)

        theta = np.zeros(dim)
        if dim:
            sol = least_squares(residual, theta, xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                max_nfev=int(self.registry.cfg['newton_max_iter']) * (dim + 1))
            theta = self._polish(point, sol.x)
        m = p.join(None, point(theta))
        try:
            c = self._constraint(m)
        except MorseError as e:
            raise ProjectionFailure(self.pair, z.tolist(), f'projected point leaves the domain: {e}')
        if norm(c) > _accept_tol(self.registry, q):
            raise ProjectionFailure(self.pair, z.tolist(), f'Gauss-Newton did not reach M, |c| = {norm(c):.3e}')
        return m

    def pi_hat(self, z, w) -> Optional[Tuple[np.ndarray, float]]:
        """Glues over the critical points the graph point passes within the threshold.

        Returns:
            tuple or None: The glued exit point and the smallest transition time,
            or None when no critical point is passed closely.
        """
        results, _, _ = self.cmap.chain(z)
        visited = []
        for r in results[:-1]:
            tau = norm(r.target.split(r.w)[1]) / r.target.delta
            if tau < self.t:
                visited.append((r.target, tau))
        if not visited:
            return None
        strata, left, prev = [], np.asarray(z, dtype=float), self.source
        for q, _ in visited:
            entry, _ = self.registry.cmap(prev, q)(left)
            strata.append(self.registry.projection(prev, q)(left, entry))
            left, prev = exit_point(q, entry), q
        strata.append(self.registry.projection(prev, self.target)(left, w))
        seq = CritSeq([q for q, _ in visited], self.source, self.target)
        taus = [tau for _, tau in visited]
        solution = _ChainProblem(self.registry, seq, taus, strata).solve()
        return solution.z0, min(taus)

    def __call__(self, z, w) -> np.ndarray:
        if self.trajectories.dimension < 0 or self.trajectories.is_empty():
            raise ProjectionFailure(self.pair, np.asarray(z).tolist(), 'empty trajectory space')
        if self.dimension == 0:
            return self._nearest_element(z)
        if self.mode == 'b0_nearest_point':
            return self.nearest_point(z, w)
        try:
            hat = self.pi_hat(z, w)
        except MorseError as e:
            logger.trace(f"pi-hat of {self.pair} unavailable: {e}")
            hat = None
        if hat is None:
            return self.nearest_point(z, w)
        m_hat, tau_min = hat
        if self.mode == 'iterated_pi_hat':
            return m_hat
        inner, outer = (f * self.t for f in self.registry.cfg['shell_fractions'])
        psi = float(cutoff(tau_min, inner, outer))
        if psi >= 1.0:
            return m_hat
        m_near = self.nearest_point(z, w)
        if psi <= 0.0:
            return m_near
        p = self.source
        blend = to_sphere(psi * p.split(m_hat)[1] + (1.0 - psi) * p.split(m_near)[1], p.delta)
        return self.nearest_point(p.join(None, blend))

    def contains(self, z, w) -> bool:
        try:
            self(z, w)
        except MorseError:
            return False
        return True

    def tangent(self, m) -> np.ndarray:
        """Orthonormal basis of the tangent space of M(source, target) at m, as columns."""
        p = self.source
        _, y = p.split(m)
        point, dim = sphere_chart(y, p.delta)
        basis = tangent_basis(y)
        if self.dimension <= 0 or dim == 0:
            return np.zeros((p.n, 0))
        if self.target.index == 0:
            null = np.eye(dim)
        else:
            jac = _jacobian(lambda th: self._constraint(p.join(None, point(th))), np.zeros(dim), self._fd)
            _, s, vt = np.linalg.svd(jac)
            rank = int(np.sum(s > self.registry.cfg['rank_tol'] * max(s.max(initial=0.0), 1.0)))
            null = vt[rank:].T
        cols = basis @ null
        full = np.vstack([np.zeros((p.chart.stable_dim, cols.shape[1])), cols])
        q, _ = np.linalg.qr(full)
        return q

    def check_submersion(self, points: Sequence) -> List[float]:
        """Finite-difference rank test of the projection at exit points of the graph domain.

        Returns:
            list of float: Smallest singular value of the tangential Jacobian per point.
        """
        p = self.source
        d = max(self.dimension, 0)
        out = []
        for z in points:
            z = np.asarray(z, dtype=float)
            x, y = p.split(z)
            ybasis = tangent_basis(y)

            def pi_of(delta):
                dx, dy = delta[:x.size], delta[x.size:]
                zz = p.join(x + dx, to_sphere(y + ybasis @ dy, p.delta))
                return self(zz, self.cmap(zz)[0])

            n_var = x.size + ybasis.shape[1]
            m0 = pi_of(np.zeros(n_var))
            T = self.tangent(m0)
            jac = T.T @ _jacobian(pi_of, np.zeros(n_var), 1e-6 * p.delta)
            s = np.linalg.svd(jac, compute_uv=False) if jac.size else np.zeros(0)
            rank = int(np.sum(s > self.registry.cfg['rank_tol']))
            if rank < d:
                raise SubmersionViolation(self.pair, rank, d)
            out.append(float(s.min()) if s.size else 0.0)
        return out

    def __repr__(self):
        return "<TubularProjection %s->%s b=%s %s>" % (self.source.id, self.target.id, self.breaking, self.mode)

    def __getstate__(self):
        return {
            'source': self.source.id,
            'target': self.target.id,
            'breaking': self.breaking,
            'mode': self.mode,
            't': self.t,
            'dimension': self.dimension,
        }


def _accept_tol(registry: ChartRegistry, q: CriticalPoint) -> float:
    cfg = registry.cfg
    return max(cfg['eps_stable'], cfg.get('eps_match', registry.model.mode)) * q.delta


def build_tubular(registry: ChartRegistry, source, target) -> TubularProjection:
    """Builds the tubular projection of a pair; lower breaking numbers are built on demand."""
    model = registry.model
    source, target = model.point(source), model.point(target)
    b = breaking_number(model, source, target, registry.cfg, registry)
    projection = TubularProjection(registry, source, target, b)
    logger.debug(f"Built {projection!r}")
    return projection


def build_all(registry: ChartRegistry) -> List[TubularProjection]:
    """Builds every projection of the model in order of increasing breaking number."""
    model = registry.model
    pairs = [(a, b) for a in model.critical_points for b in model.critical_points if registry.connected(a, b)]
    pairs.sort(key=lambda ab: breaking_number(model, ab[0], ab[1], registry.cfg, registry))
    return [registry.projection(a, b) for a, b in pairs]


def _gauss_newton(fun, theta: np.ndarray, cfg: Config, tol: float) -> np.ndarray:
    """Minimum-norm Gauss-Newton steps on `fun`, damped by Armijo backtracking."""
    if theta.size == 0:
        return theta
    c, shrink = cfg['armijo_c'], cfg['armijo_shrink']
    fd = 1e-7
    for _ in range(int(cfg['newton_max_iter'])):
        value = fun(theta)
        r0 = norm(value)
        if r0 <= tol:
            break
        step = np.linalg.lstsq(_jacobian(fun, theta, fd), value, rcond=None)[0]
        alpha = 1.0
        while alpha > 1e-8 and norm(fun(theta - alpha * step)) > (1.0 - c * alpha) * r0:
            alpha *= shrink
        if alpha <= 1e-8:
            break
        theta = theta - alpha * step
        logger.trace(f"Gauss-Newton |r| {r0:.3e} -> step {alpha:g}")
    return theta


class FreeEnd(object):
    """End data of a free factor: the unit vector and flow time of an 'outside' end, the ball point of a 'near' end."""

    def __init__(self, kind: str, vector, time: Optional[float] = None):
        if kind not in ('minus_outside', 'minus_near', 'plus_outside', 'plus_near'):
            raise DomainError(f'Unknown free end kind {kind!r}')
        self.kind: str = kind
        self.vector: np.ndarray = np.asarray(vector, dtype=float)
        """**(ndarray):** x_1 for a free start, y_k for a free end."""
        self.time: Optional[float] = None if time is None else float(time)
        """**(float or None):** T- <= 0 or T+ >= 0 for 'outside' ends."""

    def __repr__(self):
        return "<FreeEnd %s %r T=%s>" % (self.kind, self.vector.tolist(), self.time)

    def __getstate__(self):
        return {'kind': self.kind, 'vector': self.vector.tolist(), 'time': self.time}


class ChartPoint(object):
    """Image of a trajectory under a global chart: transition times and one stratum element per factor."""

    def __init__(self, seq: CritSeq, t: float, taus: Sequence[float], strata: Sequence,
                 residuals: Optional[Dict[str, float]] = None):
        self.seq: CritSeq = seq
        self.t: float = float(t)
        self.taus: Tuple[float, ...] = tuple(float(x) for x in taus)
        self.strata: List = list(strata)
        """**(list):** Exit-point vectors for connecting factors, `FreeEnd` objects for free factors,
        the trajectory itself for the identity chart of free ends."""
        self.residuals: Dict[str, float] = dict(residuals or {})

    def distance(self, other: 'ChartPoint') -> float:
        """Largest componentwise difference to another chart point of the same sequence."""
        if self.seq != other.seq:
            raise DomainError(f'Chart points of {self.seq} and {other.seq} are not comparable')
        diffs = [abs(a - b) for a, b in zip(self.taus, other.taus)]
        for a, b in zip(self.strata, other.strata):
            if isinstance(a, FreeEnd):
                diffs.append(norm(a.vector - b.vector))
                if a.time is not None:
                    diffs.append(abs(a.time - b.time))
            elif isinstance(a, np.ndarray):
                diffs.append(norm(a - b))
        return max(diffs, default=0.0)

    def __repr__(self):
        return "<ChartPoint %s taus=%r>" % (self.seq, list(self.taus))

    def __getstate__(self):
        def pack(s):
            if isinstance(s, np.ndarray):
                return s.tolist()
            return s.__getstate__()
        return {
            'critseq': self.seq.__getstate__(),
            't': self.t,
            'tau': list(self.taus),
            'strata': [pack(s) for s in self.strata],
            'residuals': self.residuals,
        }


class _ChainSolution(object):
    def __init__(self, z0, xs, ys, residual: float):
        self.z0: Optional[np.ndarray] = z0
        self.xs: List[np.ndarray] = xs
        self.ys: List[np.ndarray] = ys
        self.residual: float = residual

    def distance(self, other: '_ChainSolution') -> float:
        parts = [norm(a - b) for a, b in zip(self.xs + self.ys, other.xs + other.ys)]
        if self.z0 is not None:
            parts.append(norm(self.z0 - other.z0))
        return max(parts, default=0.0)


class _ChainProblem(object):
    """
    Entry and exit points at q_1, ..., q_k with prescribed transition times,
    matched by the connecting maps, whose factors project onto the prescribed
    strata. Unknowns live on the spheres S⁻ of a critical start and S⁺ x S⁻ of
    every q_i, parametrized around the broken configuration of the strata.
    """

    def __init__(self, registry: ChartRegistry, seq: CritSeq, taus: Sequence[float], strata: Sequence):
        self.registry = registry
        self.cfg = registry.cfg
        self.model = registry.model
        self.seq = seq
        self.taus = [float(x) for x in taus]
        self.strata = list(strata)
        pts, k = seq.points, seq.k
        if len(self.taus) != k or len(self.strata) != k + 1:
            raise DomainError(f'{seq} needs {k} transition times and {k + 1} strata')
        for tau in self.taus:
            if not 0.0 <= tau < 2.0:
                raise NotInDomainError(f'Transition time {tau} outside [0, 2)', tau)
        self.kinds = seq.factor_kinds()
        self.pairs = seq.factor_pairs()
        self.known_x: Dict[int, np.ndarray] = {}
        self.known_y: Dict[int, np.ndarray] = {}
        if seq.start_kind != 'critical':
            self.known_x[0] = self.strata[0].vector
        if seq.end_kind != 'critical':
            self.known_y[k - 1] = self.strata[-1].vector
        self.projections: Dict[int, TubularProjection] = {}
        self.tangents: Dict[int, np.ndarray] = {}
        for j, (kind, (a, b)) in enumerate(zip(self.kinds, self.pairs)):
            if kind == 'connecting':
                proj = registry.projection(a, b)
                self.projections[j] = proj
                if proj.dimension > 0:
                    self.tangents[j] = proj.tangent(self.strata[j])
        self._guess()
        d = {j: T.shape[1] for j, T in self.tangents.items()}
        self.size = (self.model.dimension + d.get(0, 0) if seq.start_kind == 'critical' else 0) + \
            sum(self.model.dimension + d.get(j, 0) for j in range(1, k)) + \
            (seq.end.index + d.get(k, 0) if seq.end_kind == 'critical' else 0)

    def _guess(self):
        pts, k = self.seq.points, self.seq.k
        xs: List[Optional[np.ndarray]] = [self.known_x.get(i) for i in range(k)]
        ys: List[Optional[np.ndarray]] = [self.known_y.get(i) for i in range(k)]
        z0 = None
        if self.seq.start_kind == 'critical':
            z0 = np.asarray(self.strata[0], dtype=float)
            w, _ = self.registry.cmap(self.seq.start, pts[0])(z0)
            xs[0] = to_sphere(pts[0].split(w)[0], pts[0].delta)
        for j in range(1, k + 1):
            if self.kinds[j] != 'connecting':
                continue
            a, b = self.pairs[j]
            m = np.asarray(self.strata[j], dtype=float)
            if ys[j - 1] is None:
                ys[j - 1] = a.split(m)[1]
            if j < k:
                w, _ = self.registry.cmap(a, b)(m)
                xs[j] = to_sphere(b.split(w)[0], b.delta)
        self.blocks = []
        if z0 is not None:
            p = self.seq.start
            self.blocks.append(('z0', None) + sphere_chart(p.split(z0)[1], p.delta))
        for i, q in enumerate(pts):
            if i not in self.known_x:
                self.blocks.append(('x', i) + sphere_chart(xs[i], q.delta))
            if i not in self.known_y:
                self.blocks.append(('y', i) + sphere_chart(ys[i], q.delta))
        self.n_unknowns = sum(b[3] for b in self.blocks)

    def decode(self, theta: np.ndarray) -> Tuple[Optional[np.ndarray], List[np.ndarray], List[np.ndarray]]:
        k = self.seq.k
        xs = [self.known_x.get(i) for i in range(k)]
        ys = [self.known_y.get(i) for i in range(k)]
        z0, pos = None, 0
        for label, i, point, dim in self.blocks:
            value = point(theta[pos:pos + dim])
            pos += dim
            if label == 'z0':
                z0 = self.seq.start.join(None, value)
            elif label == 'x':
                xs[i] = value
            else:
                ys[i] = value
        return z0, xs, ys

    def _fiber(self, j: int, z, w) -> np.ndarray:
        if j not in self.tangents:
            return np.zeros(0)
        a = self.pairs[j][0]
        m = self.projections[j](z, w)
        return self.tangents[j].T @ (m - self.strata[j]) / a.delta

    def residual(self, theta: np.ndarray, taus: Sequence[float]) -> np.ndarray:
        z0, xs, ys = self.decode(theta)
        pts, k = self.seq.points, self.seq.k
        parts: List[np.ndarray] = []
        try:
            if z0 is not None:
                q = pts[0]
                w, _ = self.registry.cmap(self.seq.start, q)(z0)
                parts += [(w - q.join(xs[0], taus[0] * ys[0])) / q.delta, self._fiber(0, z0, w)]
            for j in range(1, k):
                a, b = pts[j - 1], pts[j]
                z = a.join(taus[j - 1] * xs[j - 1], ys[j - 1])
                w, _ = self.registry.cmap(a, b)(z)
                parts += [(w - b.join(xs[j], taus[j] * ys[j])) / b.delta, self._fiber(j, z, w)]
            if self.seq.end_kind == 'critical':
                a, b = pts[-1], self.seq.end
                z = a.join(taus[-1] * xs[-1], ys[-1])
                w, _ = self.registry.cmap(a, b)(z)
                parts += [b.split(w)[1] / b.delta, self._fiber(k, z, w)]
        except MorseError:
            return np.full(self.size, 10.0)
        return np.concatenate(parts) if parts else np.zeros(0)

    def _run(self, theta0: np.ndarray, taus: Sequence[float]) -> Optional[np.ndarray]:
        tol = self.cfg.get('eps_match', self.model.mode)

        def fun(th):
            return self.residual(th, taus)

        theta = theta0
        if theta.size:
            sol = least_squares(fun, theta0, xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                max_nfev=4 * int(self.cfg['newton_max_iter']) * (theta.size + 1))
            theta = _gauss_newton(fun, sol.x, self.cfg, 1e-3 * tol)
        value = norm(fun(theta))
        logger.trace(f"Chain solve {self.seq} taus {list(taus)}: |r| = {value:.3e}")
        return theta if value <= tol else None

    def solve(self, check_unique: bool = False) -> _ChainSolution:
        theta = self._run(np.zeros(self.n_unknowns), self.taus)
        if theta is None:
            logger.debug(f"Direct solve of {self.seq} failed; continuing from the broken configuration")
            theta = np.zeros(self.n_unknowns)
            for s in np.linspace(0.0, 1.0, 9)[1:]:
                theta = self._run(theta, [s * tau for tau in self.taus])
                if theta is None:
                    raise ChartInversionFailure(str(self.seq), self.taus, 'no solution along the tau continuation')
        solution = _ChainSolution(*self.decode(theta), norm(self.residual(theta, self.taus)))
        self._check_branches(solution)
        if check_unique and theta.size:
            self._check_unique(theta, solution)
        return solution

    def _check_branches(self, solution: _ChainSolution):
        """Isolated factors are fixed by the initial branch; confirm the solution stayed on it."""
        pts, k = self.seq.points, self.seq.k
        for j, proj in self.projections.items():
            if proj.dimension != 0:
                continue
            a = self.pairs[j][0]
            if j == 0:
                z = solution.z0
            else:
                z = a.join(self.taus[j - 1] * solution.xs[j - 1], solution.ys[j - 1])
            w, _ = proj.cmap(z)
            if norm(proj(z, w) - self.strata[j]) > 1e-6 * a.delta:
                raise ChartInversionFailure(str(self.seq), self.taus, f'solution left the branch of factor {j}')

    def _check_unique(self, theta: np.ndarray, solution: _ChainSolution):
        rng = self.cfg.rng()
        spread = self.cfg['multistart_spread']
        scale = min(q.delta for q in self.seq.points)
        for _ in range(int(self.cfg['newton_starts'])):
            start = theta + spread * scale * rng.normal(size=theta.size)
            other = self._run(start, self.taus)
            if other is None:
                continue
            alt = _ChainSolution(*self.decode(other), 0.0)
            if alt.distance(solution) > 1e-6 * scale:
                raise ChartInversionFailure(str(self.seq), self.taus,
                                            f'second solution at distance {alt.distance(solution):.3e}; reduce t')


def _hop(model: MorseModel, q: CriticalPoint, v: np.ndarray, target: CriticalPoint,
         cfg: Config) -> Tuple[List, np.ndarray]:
    """Segments from a chart point of q to the entry set of `target`, and the entry point."""
    segments: List = []
    for _ in range(len(model.critical_points)):
        if norm(q.split(v)[1]) == 0.0:
            raise NotInDomainError(f'Flow converges to {q.id} before reaching {target.id}')
        segs, result = _transfer_from(model, q, v, cfg)
        segments.extend(segs)
        if result.target.id == target.id:
            return segments, result.w
        if result.target.value <= target.value:
            break
        q, v = result.target, result.w
    raise NotInDomainError(f'Flow from {q.id} does not enter U({target.id})', np.asarray(v).tolist())


def _finite_part(segments: List) -> List:
    if segments and isinstance(segments[0], ChartSegment) and segments[0].kind == 'head':
        return segments[1:]
    return segments


def _assemble(problem: _ChainProblem, sol: _ChainSolution) -> GeneralizedTrajectory:
    model, cfg, seq, taus = problem.model, problem.cfg, problem.seq, problem.taus
    pts, k = seq.points, seq.k
    xs, ys = sol.xs, sol.ys
    pieces: List[List] = []
    current: List = []
    q1 = pts[0]
    if seq.start_kind == 'critical':
        p = seq.start
        current.append(ChartSegment(model, p, None, p.split(sol.z0)[1], 0.0))
        segs, v = _hop(model, p, sol.z0, q1, cfg)
        current.extend(segs)
    else:
        v = q1.join(xs[0], taus[0] * ys[0])
        if seq.start_kind == 'outside':
            if model.mode != 'synthetic':
                raise DomainError('Starts outside the chart are box points, available on synthetic models only')
            T_minus = problem.strata[0].time
            if T_minus < 0.0:
                current.append(TransferSegment(model, q1, v, -T_minus, 0.0))
    for i, q in enumerate(pts):
        x_here = q.split(v)[0]
        if taus[i] == 0.0:
            current.append(ChartSegment(model, q, x_here, None, 0.0))
            pieces.append(current)
            current = [ChartSegment(model, q, None, ys[i], 0.0)]
            v = q.join(None, ys[i])
        last = i == k - 1
        if last and seq.end_kind == 'near':
            E = taus[i]
            if 0.0 < E <= 1.0:
                current.append(ChartSegment(model, q, x_here, ys[i], E))
            elif E > 1.0:
                # the end lies ln E before the entry set
                head, finite = current[:len(current) - len(_finite_part(current))], _finite_part(current)
                keep = sum(s.duration for s in finite) - math.log(E)
                if keep < 0.0:
                    raise ChartInversionFailure(str(seq), taus, 'end point lies before the previous exit set')
                current = head + truncate(finite, keep)
            break
        if last and seq.end_kind == 'outside':
            segs, _ = follow(model, LocalPoint(q, v), cfg)
            to_exit = 0.0 if taus[i] == 0.0 else -math.log(taus[i])
            current.extend(truncate(segs, to_exit + problem.strata[-1].time))
            break
        target = pts[i + 1] if not last else seq.end
        segs, v = _hop(model, q, v, target, cfg)
        current.extend(segs)
    if seq.end_kind == 'critical':
        p = seq.end
        current.append(ChartSegment(model, p, p.split(v)[0], None, 0.0))
    pieces.append(current)
    return GeneralizedTrajectory(model, [FlowLine(model, segs) for segs in pieces])


def global_chart(gamma: GeneralizedTrajectory, seq: CritSeq, t: Optional[float] = None, cfg: Config = CONFIG,
                 registry: Optional[ChartRegistry] = None) -> ChartPoint:
    """The global chart of a sequence: transition times and projected factors.

    Args:
        gamma (GeneralizedTrajectory): A trajectory in V_t(seq).
        seq (CritSeq): The sequence.
        t (float, optional): Neighbourhood parameter. Defaults to the first t-ladder value.
        cfg (Config, optional): Tolerances. Defaults to `CONFIG`.
        registry (ChartRegistry, optional): Projection cache. Defaults to the model's shared one.

    Returns:
        ChartPoint
    """
    registry = registry or registry_for(gamma.model, cfg)
    t = registry.t_level(0) if t is None else float(t)
    if seq.is_special:
        q = seq.points[0]
        local = chart_both_inside(gamma, q, cfg)
        bound = local.tau * norm(local.x) * norm(local.y)
        if bound >= t * q.delta ** 2:
            raise NotInDomainError(f'E|ev-||ev+| = {bound:.6g} violates the bound tΔ² = {t * q.delta ** 2:.6g}')
        return ChartPoint(seq, t, (local.tau,), (FreeEnd('minus_near', local.x), FreeEnd('plus_near', local.y)))
    ev = ev_and_tau(gamma, seq, t, cfg)
    strata: List = []
    for g in ev.factors:
        if g.kind == 'connecting':
            strata.append(registry.projection(g.source, g.target)(g.left, g.right))
        elif g.kind == 'identity':
            strata.append(gamma)
        elif g.kind == 'minus_free':
            strata.append(FreeEnd('minus_outside', g.target.split(g.right)[0], g.time))
        elif g.kind == 'minus_near':
            strata.append(FreeEnd('minus_near', g.target.split(g.left)[0]))
        elif g.kind == 'plus_free':
            strata.append(FreeEnd('plus_outside', g.source.split(g.left)[1], g.time))
        else:
            strata.append(FreeEnd('plus_near', g.source.split(g.right)[1]))
    logger.debug(f"Chart {seq}: taus {list(ev.taus)}")
    return ChartPoint(seq, t, ev.taus, strata)


def global_chart_inverse(model: MorseModel, point: ChartPoint, cfg: Config = CONFIG,
                         registry: Optional[ChartRegistry] = None, check_unique: bool = False) -> GeneralizedTrajectory:
    """The trajectory with the given chart coordinates.

    Args:
        model (MorseModel): The model.
        point (ChartPoint): Transition times and strata.
        cfg (Config, optional): Tolerances. Defaults to `CONFIG`.
        registry (ChartRegistry, optional): Projection cache. Defaults to the model's shared one.
        check_unique (bool, optional): Run the multistart uniqueness test of the fiber. Defaults to False.

    Returns:
        GeneralizedTrajectory: Broken exactly at the q_i with τ_i = 0.
    """
    registry = registry or registry_for(model, cfg)
    seq = point.seq
    if seq.is_special:
        q = seq.points[0]
        E = point.taus[0]
        x, y = point.strata[0].vector, point.strata[1].vector
        if not 0.0 <= E <= 1.0:
            raise NotInDomainError('Length parameter must lie in [0, 1]', E)
        if E * norm(x) * norm(y) >= point.t * q.delta ** 2:
            raise NotInDomainError(f'E|x||y| violates the bound tΔ² = {point.t * q.delta ** 2:.6g}')
        return local_trajectory(model, q, E, x, y)
    if seq.k == 0:
        if seq.start_kind != 'critical':
            return point.strata[0]
        p, m = seq.start, np.asarray(point.strata[0], dtype=float)
        segs, w = _hop(model, p, m, seq.end, cfg)
        head = ChartSegment(model, p, None, p.split(m)[1], 0.0)
        tail = ChartSegment(model, seq.end, seq.end.split(w)[0], None, 0.0)
        return GeneralizedTrajectory.unbroken(model, [head] + segs + [tail])
    problem = _ChainProblem(registry, seq, point.taus, point.strata)
    solution = problem.solve(check_unique)
    return _assemble(problem, solution)


def end_condition_transition(point: ChartPoint, side: str = '-') -> ChartPoint:
    """Moves a chart point of a 'near' end condition to the 'outside' chart.

    The transition time at the end rescales as E ↦ E|ev|/Δ, with |ev| the
    norm of the stable (start) or unstable (end) part of the end point.
    """
    seq = point.seq
    kind = seq.start_kind if side == '-' else seq.end_kind
    if kind != 'near' or seq.is_special:
        raise DomainError(f'{seq} has no near end on side {side!r}')
    index = 0 if side == '-' else seq.k - 1
    q = seq.points[index]
    stratum = point.strata[0 if side == '-' else -1]
    r = norm(stratum.vector)
    if r < q.delta:
        raise NotInDomainError(f'End point lies inside the closure of U({q.id}): |ev| = {r:.6g} < Δ')
    taus = list(point.taus)
    taus[index] = taus[index] * r / q.delta
    strata = list(point.strata)
    if side == '-':
        strata[0] = FreeEnd('minus_outside', q.delta * stratum.vector / r, -math.log(r / q.delta))
        new_seq = CritSeq(seq.points, 'outside', seq.end)
    else:
        strata[-1] = FreeEnd('plus_outside', q.delta * stratum.vector / r, math.log(r / q.delta))
        new_seq = CritSeq(seq.points, seq.start, 'outside')
    return ChartPoint(new_seq, point.t, taus, strata)


def _sample_strata(registry: ChartRegistry, seq: CritSeq, rng: np.random.Generator) -> List[np.ndarray]:
    strata = []
    for a, b in seq.factor_pairs():
        reps = registry.trajectories(a, b).representatives
        if not reps:
            raise DomainError(f'M({a.id}, {b.id}) is empty')
        # keep away from the ends of traced arcs
        inner = reps[len(reps) // 4: max(len(reps) - len(reps) // 4, 1)]
        strata.append(inner[int(rng.integers(len(inner)))])
    return strata


def t_bisection(model: MorseModel, seq: CritSeq, cfg: Config = CONFIG, samples: int = 3,
                registry: Optional[ChartRegistry] = None) -> float:
    """Largest t on the ladder for which every sampled fiber of the chart inverse has one solution.

    Args:
        model (MorseModel): The model.
        seq (CritSeq): A sequence with critical ends.
        cfg (Config, optional): Ladder, multistart count and seed. Defaults to `CONFIG`.
        samples (int, optional): Fibers tried per ladder value. Defaults to 3.
        registry (ChartRegistry, optional): Projection cache. Defaults to the model's shared one.

    Returns:
        float: The accepted t, or the smallest ladder value if none passed.
    """
    registry = registry or registry_for(model, cfg)
    if seq.start_kind != 'critical' or seq.end_kind != 'critical' or seq.k == 0:
        raise DomainError(f't-bisection needs a nonempty sequence with critical ends, got {seq}')
    ladder = list(cfg['t_ladder'])
    rng = cfg.rng()
    for t in ladder:
        ok = True
        for _ in range(samples):
            taus = list(rng.uniform(0.1 * t, 0.9 * t, size=seq.k))
            try:
                _ChainProblem(registry, seq, taus, _sample_strata(registry, seq, rng)).solve(check_unique=True)
            except ChartInversionFailure as e:
                logger.debug(f"t = {t} rejected for {seq}: {e}")
                ok = False
                break
        if ok:
            logger.debug(f"t-bisection for {seq}: t = {t}")
            return float(t)
    logger.warning(f"No t on the ladder {ladder} gives unique fibers for {seq}; using {ladder[-1]}")
    return float(ladder[-1])


def _block_basis(q: CriticalPoint, v: np.ndarray, kind: str) -> np.ndarray:
    """Tangent basis in R^n of S⁻ ('sphere'), S̃⁺ ('entry') or S̃⁻ ('exit') at v."""
    x, y = q.split(v)
    sx, sy = q.chart.stable_dim, q.chart.unstable_dim
    if kind == 'sphere':
        return np.vstack([np.zeros((sx, max(sy - 1, 0))), tangent_basis(y)])
    if kind == 'entry':
        tb = tangent_basis(x)
        return np.block([[tb, np.zeros((sx, sy))], [np.zeros((sy, tb.shape[1])), np.eye(sy)]])
    tb = tangent_basis(y)
    return np.block([[np.eye(sx), np.zeros((sx, tb.shape[1]))], [np.zeros((sy, sx)), tb]])


def _retract(q: CriticalPoint, v: np.ndarray, kind: str, step: np.ndarray) -> np.ndarray:
    moved = v + _block_basis(q, v, kind) @ step
    x, y = q.split(moved)
    if kind == 'entry':
        return q.join(to_sphere(x, q.delta), y)
    return q.join(x, to_sphere(y, q.delta))


def transversality_angle(model: MorseModel, seq: CritSeq, strata: Sequence, cfg: Config = CONFIG,
                         registry: Optional[ChartRegistry] = None) -> float:
    """Smallest principal angle between the image of the broken embedding and the graph, at a broken point.

    Args:
        model (MorseModel): The model.
        seq (CritSeq): A nonempty sequence with critical ends.
        strata (sequence): Exit points of the factors of the broken trajectory.
        cfg (Config, optional): Rank tolerance. Defaults to `CONFIG`.
        registry (ChartRegistry, optional): Connecting map cache. Defaults to the model's shared one.

    Returns:
        float: The angle, 0 when the tangent spaces do not span the ambient space.
    """
    registry = registry or registry_for(model, cfg)
    if seq.start_kind != 'critical' or seq.end_kind != 'critical' or seq.k == 0:
        raise DomainError(f'Transversality is tested for nonempty sequences with critical ends, got {seq}')
    chain = seq.chain
    blocks = [(chain[0], np.asarray(strata[0], dtype=float), 'sphere')]
    for i, q in enumerate(seq.points):
        w, _ = registry.cmap(chain[i], q)(strata[i])
        blocks += [(q, w, 'entry'), (q, np.asarray(strata[i + 1], dtype=float), 'exit')]
    bases = [_block_basis(q, v, kind) for q, v, kind in blocks]
    dims = [b.shape[1] for b in bases]
    offsets = np.cumsum([0] + dims)

    def unpack(delta):
        return [_retract(q, v, kind, delta[o:o + d]) for (q, v, kind), o, d in zip(blocks, offsets, dims)]

    def equations(delta):
        pts = unpack(delta)
        out = []
        for i, q in enumerate(seq.points):
            source_point = pts[0] if i == 0 else pts[2 * i]
            w, _ = registry.cmap(chain[i], q)(source_point)
            out.append(w - pts[2 * i + 1])
        w, _ = registry.cmap(seq.points[-1], seq.end)(pts[-1])
        out.append(seq.end.split(w)[1])
        return np.concatenate(out)

    D = int(offsets[-1])
    jac = _jacobian(equations, np.zeros(D), 1e-7 * min(q.delta for q in chain))
    _, s, vt = np.linalg.svd(jac)
    rank = int(np.sum(s > cfg['rank_tol'] * max(s.max(initial=0.0), 1.0)))
    null = vt[rank:].T
    ambient = np.zeros((sum(b.shape[0] for b in bases), D))
    row = 0
    for b, o, d in zip(bases, offsets, dims):
        ambient[row:row + b.shape[0], o:o + d] = b
        row += b.shape[0]
    graph = ambient @ null
    broken_cols = list(range(dims[0]))
    for i, q in enumerate(seq.points):
        entry_off, exit_off = offsets[1 + 2 * i], offsets[2 + 2 * i]
        broken_cols += list(range(entry_off, entry_off + max(q.chart.stable_dim - 1, 0)))
        exit_y = range(exit_off + q.chart.stable_dim, exit_off + dims[2 + 2 * i])
        broken_cols += list(exit_y)
    embedded = ambient[:, broken_cols]
    if graph.shape[1] == 0 or embedded.shape[1] == 0:
        return 0.0
    span = np.linalg.matrix_rank(np.hstack([graph, embedded]), tol=cfg['rank_tol'])
    if span < D:
        return 0.0
    angles = np.sort(subspace_angles(graph, embedded))
    overlap = graph.shape[1] + embedded.shape[1] - D
    angle = float(angles[overlap]) if overlap < angles.size else float(math.pi / 2)
    logger.debug(f"Transversality at {seq}: smallest angle {angle:.4g}")
    return angle


__all__ = ['END_KINDS', 'CritSeq', 'critseq_from_state', 'ChartRegistry', 'registry_for', 'enumerate_critseqs',
           'breaking_number', 'in_V_t', 'Evaluation', 'ev_and_tau', 'forget_map', 'iota', 'PROJECTION_MODES',
           'TubularProjection', 'build_tubular', 'build_all', 'FreeEnd', 'ChartPoint', 'global_chart',
           'global_chart_inverse', 'end_condition_transition', 't_bisection', 'transversality_angle']
