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
This module contains generalized (possibly broken) trajectories: the flow-line
segments they are made of, their sampled images, the renormalized length, the
metric on compactified trajectory spaces, endpoint and level-set evaluations,
and restricted trajectory sets.

A `GeneralizedTrajectory` is a list of unbroken `FlowLine` pieces; consecutive
pieces meet at a breaking critical point. Each piece is a list of segments:

* `ChartSegment` - a piece of the exact linear flow inside one chart,
  including the half-infinite tails into and heads out of the critical point;
* `TransferSegment` - the passage between two charts of a synthetic model;
* `SampledSegment` - an integrated passage of a numeric model.
"""

import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .exceptions import DomainError, EndpointMismatch, EndsOnSliceError, NotInDomainError
from .model import LN2, AmbientPoint, BoxPoint, CriticalPoint, LocalPoint, MorseModel, _normal_form, membership
from .utils import CONFIG, Config, norm

logger = logging.getLogger('pyMorse')

# tails and heads are sampled until they are this close (relative to Δ) to the critical point
_TAIL_CUTOFF = 1e-6


class Segment(object):
    """Common interface of the pieces a flow line is made of."""

    duration: float = 0.0
    f_start: float = 0.0
    f_end: float = 0.0

    @property
    def start(self):
        raise NotImplementedError

    @property
    def end(self):
        raise NotImplementedError

    def sample(self, n: int) -> List[Tuple[float, object, float]]:
        """Returns (time, point, value) triples ordered along the flow."""
        raise NotImplementedError

    def at_level(self, c: float):
        """Returns the point of the segment where f = c."""
        raise NotImplementedError

    def point_at_time(self, s: float):
        """Returns the point reached after flowing for time `s` from the start."""
        raise NotImplementedError

    def truncated(self, s: float) -> 'Segment':
        """The initial part of the segment of duration `s`."""
        raise NotImplementedError


class ChartSegment(Segment):
    """
    The local trajectory γ_{τ,x,y}: s ↦ (e^-s x, e^(s-T) y) for s in [0, T],
    T = -ln τ, running from (x, τy) to (τx, y). With τ = 0 the segment is
    either the tail s ↦ (e^-s x, 0) converging to q (y is None) or the head
    s ↦ (0, e^s y), s <= 0, leaving q (x is None).
    """

    def __init__(self, model: MorseModel, q: CriticalPoint, x, y, tau: float):
        self.model = model
        self.q: CriticalPoint = q
        self.x: Optional[np.ndarray] = None if x is None else np.asarray(x, dtype=float)
        self.y: Optional[np.ndarray] = None if y is None else np.asarray(y, dtype=float)
        self.tau: float = float(tau)
        if not 0.0 <= self.tau <= 1.0:
            raise DomainError('Chart segment parameter tau must lie in [0, 1]', tau)
        if self.tau > 0.0 and (self.x is None or self.y is None):
            raise DomainError('A chart segment with tau > 0 needs both x and y')
        if self.tau == 0.0 and (self.x is None) == (self.y is None):
            raise DomainError('A broken chart pair is a tail segment followed by a head segment')
        self.duration = math.inf if self.tau == 0.0 else -math.log(self.tau)
        self.f_start = self._f(0.0 if self.x is not None else -math.inf)
        self.f_end = self._f(self.duration if self.x is not None else 0.0)

    @property
    def kind(self) -> str:
        if self.tau > 0.0:
            return 'through'
        return 'tail' if self.y is None else 'head'

    def v_at(self, s: float) -> np.ndarray:
        if self.kind == 'tail':
            return self.q.join(math.exp(-s) * self.x, None) if math.isfinite(s) else self.q.origin()
        if self.kind == 'head':
            return self.q.join(None, math.exp(s) * self.y) if math.isfinite(s) else self.q.origin()
        return self.q.join(math.exp(-s) * self.x, math.exp(s - self.duration) * self.y)

    def _f(self, s: float) -> float:
        v = self.v_at(s)
        x, y = self.q.split(v)
        return _normal_form(self.q, x, y)

    @property
    def start(self):
        if self.kind == 'head':
            return self.q
        return LocalPoint(self.q, self.v_at(0.0))

    @property
    def end(self):
        if self.kind == 'tail':
            return self.q
        return LocalPoint(self.q, self.v_at(self.duration if self.kind == 'through' else 0.0))

    def _extent(self) -> float:
        vec = self.x if self.kind == 'tail' else self.y
        r = norm(vec)
        if r == 0.0:
            return 0.0
        return max(math.log(r / (_TAIL_CUTOFF * self.q.delta)), 0.0)

    def sample(self, n: int) -> List[Tuple[float, object, float]]:
        n = max(int(n), 2)
        if self.kind == 'through':
            grid = np.linspace(0.0, self.duration, n) if self.duration > 0 else np.zeros(1)
            return [(s, LocalPoint(self.q, self.v_at(s)), self._f(s)) for s in grid]
        span = self._extent()
        if self.kind == 'tail':
            out = [(s, LocalPoint(self.q, self.v_at(s)), self._f(s)) for s in np.linspace(0.0, span, n)]
            return out + [(math.inf, self.q, self.q.value)]
        out = [(s, LocalPoint(self.q, self.v_at(s)), self._f(s)) for s in np.linspace(-span, 0.0, n)]
        return [(-math.inf, self.q, self.q.value)] + out

    def time_at_level(self, c: float) -> float:
        """Closed form: with u = e^(2s), b u^2 + (c - f(q)) u - a = 0."""
        if not self.f_end <= c <= self.f_start:
            raise NotInDomainError(f'Level {c} is not attained on the chart segment at {self.q.id}')
        d = c - self.q.value
        if self.kind == 'head':
            yy = float(np.dot(self.y, self.y))
            if yy == 0.0 or d >= 0.0:
                return -math.inf
            return 0.5 * math.log(-2.0 * d / yy)
        a = 0.5 * float(np.dot(self.x, self.x))
        b = 0.0 if self.kind == 'tail' else 0.5 * self.tau ** 2 * float(np.dot(self.y, self.y))
        if b == 0.0:
            if d <= 0.0:
                return math.inf if self.kind == 'tail' else self.duration
            u = a / d
        else:
            u = (-d + math.sqrt(d * d + 4.0 * a * b)) / (2.0 * b)
        if u <= 0.0:
            return 0.0
        s = 0.5 * math.log(u)
        return min(max(s, 0.0), self.duration)

    def at_level(self, c: float):
        s = self.time_at_level(c)
        if not math.isfinite(s):
            return self.q
        return LocalPoint(self.q, self.v_at(s))

    def point_at_time(self, s: float):
        if self.kind == 'head':
            raise DomainError('A head segment has no finite start')
        s = min(s, self.duration)
        return self.q if not math.isfinite(s) else LocalPoint(self.q, self.v_at(s))

    def truncated(self, s: float) -> 'ChartSegment':
        if self.kind == 'head':
            raise DomainError('A head segment has no finite start')
        if s >= self.duration:
            return self
        y = np.zeros(self.q.chart.unstable_dim) if self.y is None else math.exp(s - self.duration) * self.y
        return ChartSegment(self.model, self.q, self.x, y, math.exp(-s))

    def __repr__(self):
        return "<ChartSegment %s %s tau=%s>" % (self.q.id, self.kind, self.tau)

    def __getstate__(self):
        return {
            'kind': 'chart',
            'q': self.q.id,
            'x': None if self.x is None else self.x.tolist(),
            'y': None if self.y is None else self.y.tolist(),
            'tau': self.tau,
        }


class TransferSegment(Segment):
    """
    Passage of a synthetic model between the exit sphere of `source` and the
    entry sphere of `target`, parametrized by the time `u` left until entry.
    The stretch within ln 2 of either sphere lies in the 2Δ-ball of the chart
    and is represented in chart coordinates; the rest is a box region tagged
    by the target. A segment without a source starts at a free box point.
    """

    def __init__(self, model: MorseModel, target: CriticalPoint, w, u_start: float, u_end: float = 0.0,
                 source: Optional[CriticalPoint] = None, z=None, total: Optional[float] = None):
        self.model = model
        self.target: CriticalPoint = target
        self.w: np.ndarray = np.asarray(w, dtype=float)
        self.u_start: float = float(u_start)
        self.u_end: float = float(u_end)
        self.source: Optional[CriticalPoint] = source
        self.z: Optional[np.ndarray] = None if z is None else np.asarray(z, dtype=float)
        self.total: Optional[float] = None if total is None else float(total)
        if not 0.0 <= self.u_end <= self.u_start:
            raise DomainError('Transfer segment needs 0 <= u_end <= u_start', (u_start, u_end))
        if self.total is not None and self.u_start > self.total + 1e-12:
            raise DomainError('Transfer segment starts before its exit point', (u_start, total))
        self.duration = self.u_start - self.u_end
        self.f_start = self.value_at(self.u_start)
        self.f_end = self.value_at(self.u_end)

    def _target_v(self, u: float) -> np.ndarray:
        x, y = self.target.split(self.w)
        return self.target.join(math.exp(u) * x, math.exp(-u) * y)

    def _source_v(self, u: float) -> np.ndarray:
        s = self.total - u
        x, y = self.source.split(self.z)
        return self.source.join(math.exp(-s) * x, math.exp(s) * y)

    def _on_source_side(self, u: float) -> bool:
        return self.source is not None and self.total - u < LN2

    def point_at(self, u: float):
        if u <= LN2:
            return LocalPoint(self.target, self._target_v(u))
        if self._on_source_side(u):
            return LocalPoint(self.source, self._source_v(u))
        return BoxPoint(self.target, self.w, u)

    def value_at(self, u: float) -> float:
        if u <= LN2:
            x, y = self.target.split(self._target_v(u))
            return _normal_form(self.target, x, y)
        if self._on_source_side(u):
            x, y = self.source.split(self._source_v(u))
            return _normal_form(self.source, x, y)
        fb = self.value_at(LN2)
        if self.source is not None:
            ua = self.total - LN2
            xa, ya = self.source.split(self._source_v(ua - 1e-15))
            fa = _normal_form(self.source, xa, ya)
            return fb + (fa - fb) * (u - LN2) / (ua - LN2)
        slope = float(np.dot(self._target_v(LN2), self._target_v(LN2)))
        return fb + slope * (u - LN2)

    @property
    def start(self):
        return self.point_at(self.u_start)

    @property
    def end(self):
        return self.point_at(self.u_end)

    def sample(self, n: int) -> List[Tuple[float, object, float]]:
        grid = np.linspace(self.u_start, self.u_end, max(int(n), 2))
        return [(self.u_start - u, self.point_at(u), self.value_at(u)) for u in grid]

    def time_at_level(self, c: float) -> float:
        if not self.f_end <= c <= self.f_start:
            raise NotInDomainError(f'Level {c} is not attained on the transfer into {self.target.id}')
        if self.f_start == self.f_end:
            return 0.0
        u = brentq(lambda u: self.value_at(u) - c, self.u_end, self.u_start, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        return self.u_start - u

    def at_level(self, c: float):
        return self.point_at(self.u_start - self.time_at_level(c))

    def point_at_time(self, s: float):
        return self.point_at(max(self.u_start - s, self.u_end))

    def truncated(self, s: float) -> 'TransferSegment':
        if s >= self.duration:
            return self
        return TransferSegment(self.model, self.target, self.w, self.u_start, self.u_start - s,
                               self.source, self.z, self.total)

    def __repr__(self):
        return "<TransferSegment %s->%s u=[%s, %s]>" % (
            None if self.source is None else self.source.id, self.target.id, self.u_start, self.u_end)

    def __getstate__(self):
        return {
            'kind': 'transfer',
            'target': self.target.id,
            'w': self.w.tolist(),
            'u_start': self.u_start,
            'u_end': self.u_end,
            'source': None if self.source is None else self.source.id,
            'z': None if self.z is None else self.z.tolist(),
            'total': self.total,
        }


class SampledSegment(Segment):
    """An integrated passage of a numeric model, with optional dense output."""

    def __init__(self, model: MorseModel, times, states, dense: Optional[Callable] = None):
        self.model = model
        self.times: np.ndarray = np.asarray(times, dtype=float)
        self.states: np.ndarray = np.atleast_2d(np.asarray(states, dtype=float))
        self.dense = dense
        self.values: np.ndarray = np.array([model.ambient.value(a) for a in self.states])
        self.duration = float(self.times[-1] - self.times[0])
        self.f_start = float(self.values[0])
        self.f_end = float(self.values[-1])

    def state_at(self, t: float) -> np.ndarray:
        if self.dense is not None:
            return np.asarray(self.dense(t), dtype=float)
        return np.array([np.interp(t, self.times, self.states[:, k]) for k in range(self.states.shape[1])])

    @property
    def start(self):
        return AmbientPoint(self.states[0])

    @property
    def end(self):
        return AmbientPoint(self.states[-1])

    def sample(self, n: int) -> List[Tuple[float, object, float]]:
        if self.dense is None:
            return [(t - self.times[0], AmbientPoint(a), f) for t, a, f in zip(self.times, self.states, self.values)]
        grid = np.linspace(self.times[0], self.times[-1], max(int(n), 2))
        out = []
        for t in grid:
            a = self.state_at(t)
            out.append((t - self.times[0], AmbientPoint(a), self.model.ambient.value(a)))
        return out

    def time_at_level(self, c: float) -> float:
        if not self.f_end <= c <= self.f_start:
            raise NotInDomainError(f'Level {c} is not attained on the sampled segment')
        t = brentq(lambda t: self.model.ambient.value(self.state_at(t)) - c, self.times[0], self.times[-1],
                   xtol=1e-14)
        return t - self.times[0]

    def at_level(self, c: float):
        return AmbientPoint(self.state_at(self.times[0] + self.time_at_level(c)))

    def point_at_time(self, s: float):
        return AmbientPoint(self.state_at(self.times[0] + min(s, self.duration)))

    def truncated(self, s: float) -> 'SampledSegment':
        if s >= self.duration:
            return self
        t_end = self.times[0] + s
        keep = self.times < t_end
        times = np.append(self.times[keep], t_end)
        states = np.vstack([self.states[keep], self.state_at(t_end)])
        return SampledSegment(self.model, times, states, self.dense)

    def __repr__(self):
        return "<SampledSegment %s samples, duration %s>" % (len(self.times), self.duration)

    def __getstate__(self):
        return {
            'kind': 'sampled',
            'times': self.times.tolist(),
            'states': self.states.tolist(),
        }


def segment_from_state(model: MorseModel, state: Dict) -> Segment:
    kind = state.get('kind')
    if kind == 'chart':
        return ChartSegment(model, model.point(state['q']), state['x'], state['y'], state['tau'])
    if kind == 'transfer':
        return TransferSegment(model, model.point(state['target']), state['w'], state['u_start'], state['u_end'],
                               None if state.get('source') is None else model.point(state['source']),
                               state.get('z'), state.get('total'))
    if kind == 'sampled':
        return SampledSegment(model, state['times'], state['states'])
    raise DomainError(f'Unknown segment kind {kind!r}')


class FlowLine(object):
    """An unbroken flow line: consecutive segments sharing their junction points."""

    def __init__(self, model: MorseModel, segments: Sequence[Segment]):
        if not segments:
            raise DomainError('A flow line needs at least one segment')
        self.model = model
        self.segments: List[Segment] = list(segments)
        """**(list of Segment):** Segments in flow order."""

    @property
    def start(self):
        return self.segments[0].start

    @property
    def end(self):
        return self.segments[-1].end

    @property
    def f_start(self) -> float:
        return self.segments[0].f_start

    @property
    def f_end(self) -> float:
        return self.segments[-1].f_end

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    def junction_gaps(self) -> List[float]:
        gaps = []
        for a, b in zip(self.segments, self.segments[1:]):
            gaps.append(norm(self.model.embed(a.end) - self.model.embed(b.start)))
        return gaps

    def check_junctions(self, cfg: Config = CONFIG):
        eps = cfg.get('eps_match', self.model.mode)
        scale = min(p.delta for p in self.model.critical_points)
        for i, gap in enumerate(self.junction_gaps()):
            if gap > eps * scale * 10.0:
                raise EndpointMismatch(repr(self.segments[i]), repr(self.segments[i + 1]))

    def point_at_level(self, c: float):
        if c >= self.f_start:
            return self.start
        if c <= self.f_end:
            return self.end
        for seg in self.segments:
            if seg.f_end <= c <= seg.f_start:
                return seg.at_level(c)
        raise NotInDomainError(f'Level {c} not attained')

    def __repr__(self):
        return "<FlowLine %s segments, f %s -> %s>" % (len(self.segments), self.f_start, self.f_end)

    def __getstate__(self):
        return {'segments': [s.__getstate__() for s in self.segments]}


class GeneralizedTrajectory(object):
    """
    A possibly broken trajectory: unbroken pieces γ_0, ..., γ_k where the end
    of γ_i and the start of γ_(i+1) are the same critical point.
    """

    def __init__(self, model: MorseModel, pieces: Sequence[FlowLine]):
        self.model = model
        self.pieces: List[FlowLine] = list(pieces)
        """**(list of FlowLine):** The unbroken pieces in flow order."""
        for a, b in zip(self.pieces, self.pieces[1:]):
            if not (isinstance(a.end, CriticalPoint) and isinstance(b.start, CriticalPoint) and a.end.id == b.start.id):
                raise EndpointMismatch(repr(a.end), repr(b.start))

    @classmethod
    def unbroken(cls, model: MorseModel, segments: Sequence[Segment]) -> 'GeneralizedTrajectory':
        return cls(model, [FlowLine(model, segments)])

    @classmethod
    def concatenate(cls, parts: Sequence['GeneralizedTrajectory']) -> 'GeneralizedTrajectory':
        """Joins trajectories end to end at critical points (a broken concatenation)."""
        pieces: List[FlowLine] = []
        for part in parts:
            pieces.extend(part.pieces)
        return cls(parts[0].model, pieces)

    @classmethod
    def from_state(cls, model: MorseModel, state: Dict) -> 'GeneralizedTrajectory':
        pieces = [FlowLine(model, [segment_from_state(model, s) for s in piece['segments']])
                  for piece in state['pieces']]
        return cls(model, pieces)

    @property
    def k(self) -> int:
        """Number of breaking points (the stratum index)."""
        return len(self.pieces) - 1

    @property
    def breaking_points(self) -> List[CriticalPoint]:
        return [p.end for p in self.pieces[:-1]]

    @property
    def end_minus(self):
        return self.pieces[0].start

    @property
    def end_plus(self):
        return self.pieces[-1].end

    @property
    def finite_length(self) -> Optional[float]:
        if len(self.pieces) != 1:
            return None
        d = self.pieces[0].duration
        return d if math.isfinite(d) else None

    def segments(self) -> List[Segment]:
        return [s for piece in self.pieces for s in piece.segments]

    def chart_segments(self, q: CriticalPoint) -> List[ChartSegment]:
        return [s for s in self.segments() if isinstance(s, ChartSegment) and s.q.id == q.id]

    def image(self, n: int) -> 'SampledImage':
        return SampledImage(self, n)

    def __repr__(self):
        return "<GeneralizedTrajectory k=%s breaking at %r, %r -> %r>" % (
            self.k, [p.id for p in self.breaking_points], self.end_minus, self.end_plus)

    def __getstate__(self):
        def end_state(e):
            return e.state_ref() if isinstance(e, CriticalPoint) else e.__getstate__()
        return {
            'ends': [end_state(self.end_minus), end_state(self.end_plus)],
            'breaking_points': [p.id for p in self.breaking_points],
            'pieces': [p.__getstate__() for p in self.pieces],
            'length': self.finite_length,
        }


class SampledImage(object):
    """
    Samples of the image of a trajectory: `points` follow the reparametrization
    with linearly decreasing function value, `refinement` adds per-segment
    samples so the corner regions near critical points are resolved.
    """

    def __init__(self, trajectory: GeneralizedTrajectory, n: int):
        model = trajectory.model
        pts, levels, refine, gaps = [], [], [], [0.0]
        for piece in trajectory.pieces:
            for c in np.linspace(piece.f_start, piece.f_end, n):
                pts.append(model.embed(piece.point_at_level(c)))
                levels.append(c)
            for seg in piece.segments:
                samples = [model.embed(p) for _, p, _ in seg.sample(n)]
                refine.extend(samples)
                gaps.extend(norm(a - b) for a, b in zip(samples, samples[1:]))
        for q in trajectory.breaking_points:
            refine.append(model.embed(q))
        self.points: np.ndarray = np.array(pts)
        """**(ndarray):** Reparametrized samples, one row per point."""
        self.levels: np.ndarray = np.array(levels)
        """**(ndarray):** Function values prescribed for `points`."""
        self.refinement: np.ndarray = np.array(refine)
        """**(ndarray):** Per-segment samples including limit critical points."""
        self.max_gap: float = max(gaps)
        """**(float):** Largest distance between consecutive segment samples."""

    def all(self) -> np.ndarray:
        return np.vstack([self.points, self.refinement])


def renormalized_length(gamma: GeneralizedTrajectory) -> float:
    """L/(1+L) for a finite unbroken trajectory of time-length L, 1 otherwise."""
    L = gamma.finite_length
    if L is None:
        return 1.0
    return L / (1.0 + L)


def ev_minus(gamma: GeneralizedTrajectory):
    return gamma.end_minus


def ev_plus(gamma: GeneralizedTrajectory):
    return gamma.end_plus


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two finite point sets."""
    da, _ = cKDTree(b).query(a)
    db, _ = cKDTree(a).query(b)
    return float(max(np.max(da), np.max(db)))


def metric(gamma: GeneralizedTrajectory, other: GeneralizedTrajectory, n: Optional[int] = None,
           cfg: Config = CONFIG) -> float:
    """Hausdorff distance of the sampled closed images plus |ℓ - ℓ'|.

    Args:
        gamma, other (GeneralizedTrajectory): Trajectories of the same space.
        n (int, optional): Samples per piece and segment. Defaults to the `samples` setting.
        cfg (Config, optional): Configuration. Defaults to `CONFIG`.

    Returns:
        float: The distance.
    """
    n = int(cfg['samples'] if n is None else n)
    return image_distance(gamma, other, n) + abs(renormalized_length(gamma) - renormalized_length(other))


def image_distance(gamma: GeneralizedTrajectory, other: GeneralizedTrajectory, n: int) -> float:
    return hausdorff(gamma.image(n).all(), other.image(n).all())


def sampling_bound(gamma: GeneralizedTrajectory, n: int) -> float:
    """Bound on the Hausdorff error of the samples: the largest sample gap."""
    return gamma.image(n).max_gap


def ev_level(gamma: GeneralizedTrajectory, surface: Tuple[str, Union[float, CriticalPoint]], cfg: Config = CONFIG,
             allow_ends: bool = False):
    """Evaluates a trajectory on a level set or on an entry/exit sphere.

    Args:
        gamma (GeneralizedTrajectory): The trajectory.
        surface (tuple): ('level', c), ('entry', q) or ('exit', q).
        cfg (Config, optional): Configuration. Defaults to `CONFIG`.
        allow_ends (bool, optional): Accept a trajectory starting or ending on the sphere. Defaults to False.

    Returns:
        The unique intersection point.
    """
    kind, target = surface
    if kind == 'level':
        c = float(target)
        f_hi, f_lo = gamma.pieces[0].f_start, gamma.pieces[-1].f_end
        if c > f_hi or c < f_lo:
            raise NotInDomainError(f'Trajectory does not cross the level {c}', (f_hi, f_lo))
        if not allow_ends and ((c == f_hi and not isinstance(gamma.end_minus, CriticalPoint)) or
                               (c == f_lo and not isinstance(gamma.end_plus, CriticalPoint))):
            raise EndsOnSliceError(f'Trajectory ends on the level {c}')
        for piece in gamma.pieces:
            if piece.f_end <= c <= piece.f_start:
                return piece.point_at_level(c)
    if kind not in ('entry', 'exit'):
        raise DomainError(f'Unknown hypersurface kind {kind!r}')
    q: CriticalPoint = target
    first, last = gamma.segments()[0], gamma.segments()[-1]
    tol = 1e-12
    for seg in gamma.chart_segments(q):
        if kind == 'entry' and seg.x is not None:
            r = norm(seg.x)
            s = math.log(r / q.delta) if r > 0 else -math.inf
            if abs(s) < tol:
                if seg is first and not allow_ends:
                    raise EndsOnSliceError(f'Trajectory starts on the entry sphere of {q.id}')
                s = 0.0
            if 0.0 <= s <= seg.duration:
                return LocalPoint(q, seg.v_at(s))
        if kind == 'exit' and seg.y is not None:
            r = norm(seg.y)
            end = 0.0 if seg.kind == 'head' else seg.duration
            s = end + math.log(q.delta / r) if r > 0 else math.inf
            if abs(s - end) < tol:
                if seg is last and not allow_ends:
                    raise EndsOnSliceError(f'Trajectory ends on the exit sphere of {q.id}')
                s = end
            if (seg.kind == 'head' and s <= 0.0) or 0.0 <= s <= end:
                return LocalPoint(q, seg.v_at(s))
    raise NotInDomainError(f'Trajectory does not cross the {kind} sphere of {q.id}')


def transit_time_in(gamma: GeneralizedTrajectory, q: CriticalPoint) -> float:
    """Time the trajectory spends in U(q) = {|x| < Δ, |y| < Δ}."""
    total = 0.0
    for seg in gamma.chart_segments(q):
        if seg.kind != 'through':
            return math.inf
        lo = math.log(norm(seg.x) / q.delta) if norm(seg.x) > 0 else -math.inf
        hi = seg.duration + (math.log(q.delta / norm(seg.y)) if norm(seg.y) > 0 else math.inf)
        lo, hi = max(lo, 0.0), min(hi, seg.duration)
        total += max(hi - lo, 0.0)
    return total


def distance_to_critical(gamma: GeneralizedTrajectory, q: CriticalPoint) -> float:
    """Closest approach of the image to q, measured in the chart of q."""
    best = math.inf
    for seg in gamma.chart_segments(q):
        if seg.kind != 'through':
            return 0.0
        best = min(best, math.sqrt(2.0 * seg.tau * norm(seg.x) * norm(seg.y)),
                   norm(seg.v_at(0.0)), norm(seg.v_at(seg.duration)))
    return best


class ChartRegion(object):
    """Open set predicate: a neighbourhood region in the chart of a critical point."""

    def __init__(self, q: CriticalPoint, region: str = 'tilde_U_t', t: float = 1.0):
        self.q, self.region, self.t = q, region, t

    def __call__(self, point) -> bool:
        if isinstance(point, CriticalPoint):
            return point.id == self.q.id and membership(self.q, np.zeros(self.q.chart.stable_dim),
                                                     np.zeros(self.q.chart.unstable_dim), self.region, self.t)
        if isinstance(point, LocalPoint) and point.q.id == self.q.id:
            return membership(self.q, point.x, point.y, self.region, self.t)
        if isinstance(point, BoxPoint) and point.q.id == self.q.id and point.u < LN2:
            x, y = self.q.split(point.w)
            return membership(self.q, math.exp(point.u) * x, math.exp(-point.u) * y, self.region, self.t)
        return False

    def __repr__(self):
        return "<ChartRegion %s %s t=%s>" % (self.q.id, self.region, self.t)


def everywhere(point) -> bool:
    return True


def restricted_membership(gamma: GeneralizedTrajectory, intersect: Sequence[Callable] = (),
                          within: Optional[Callable] = None, n: Optional[int] = None, cfg: Config = CONFIG) -> bool:
    """
    True iff the sampled image meets every set in `intersect` and stays in
    `within`. Membership is decided on samples, so sets thinner than the
    sample spacing can be missed.
    """
    n = int(cfg['samples'] if n is None else n)
    points = [p for seg in gamma.segments() for _, p, _ in seg.sample(n)]
    points.extend(gamma.breaking_points)
    within = within or everywhere
    if not all(within(p) for p in points):
        return False
    return all(any(v(p) for p in points) for v in intersect)


__all__ = ['Segment', 'ChartSegment', 'TransferSegment', 'SampledSegment', 'segment_from_state', 'FlowLine',
           'GeneralizedTrajectory', 'SampledImage', 'renormalized_length', 'ev_minus', 'ev_plus', 'hausdorff',
           'metric', 'image_distance', 'sampling_bound', 'ev_level', 'transit_time_in', 'distance_to_critical',
           'ChartRegion', 'everywhere', 'restricted_membership']
