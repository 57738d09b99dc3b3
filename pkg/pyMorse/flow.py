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
This module computes the global flow of a model: the exact linear flow inside
charts, the connecting maps between exit and entry sets (declared or shot),
sampled flow paths with event targets, and the detection of infinite
connecting trajectories between two critical points.
"""

import csv
import logging
import math
import warnings
from typing import IO, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, least_squares

from .exceptions import DomainError, FlowTimeoutError, MorseError, NotInDomainError, UndetectedConnectionWarning
from .model import LN2, BoxPoint, CriticalPoint, LocalPoint, MorseModel
from .trajectory import ChartSegment, GeneralizedTrajectory, Segment, TransferSegment
from .transfer import TransferResult, exit_point, transit_time
from .utils import CONFIG, Config, norm, sphere_chart, to_sphere

logger = logging.getLogger('pyMorse')

UNTIL_KINDS = ('time', 'entry', 'exit', 'level', 'limit')


def region_tag(point) -> str:
    if isinstance(point, CriticalPoint):
        return f'critical:{point.id}'
    if isinstance(point, LocalPoint):
        return f'chart:{point.q.id}'
    if isinstance(point, BoxPoint):
        return f'box:{point.q.id}'
    return 'ambient'


def point_coords(point) -> np.ndarray:
    if isinstance(point, CriticalPoint):
        return point.origin()
    if isinstance(point, LocalPoint):
        return point.v
    if isinstance(point, BoxPoint):
        return point.w
    return point.angles


class FlowSample(object):
    """Samples of one flow path: times, points, region tags and function values."""

    def __init__(self, times: Sequence[float], points: Sequence, values: Sequence[float],
                 converged_to: Optional[CriticalPoint] = None):
        self.times: List[float] = list(times)
        """**(list of float):** Strictly increasing sample times; `inf` for a reached limit."""
        self.points: List = list(points)
        """**(list):** Point objects in flow order."""
        self.values: List[float] = list(values)
        """**(list of float):** Function values at the samples."""
        self.converged_to: Optional[CriticalPoint] = converged_to
        """**(CriticalPoint or None):** Limit reached by the path, if any."""

    @classmethod
    def from_segments(cls, segments: Sequence[Segment], n: int,
                      converged_to: Optional[CriticalPoint] = None) -> 'FlowSample':
        times, points, values = [], [], []
        offset = 0.0
        for seg in segments:
            for s, point, f in seg.sample(n):
                t = offset + s
                if times and t <= times[-1]:
                    continue
                times.append(t)
                points.append(point)
                values.append(f)
            offset += seg.duration
        return cls(times, points, values, converged_to)

    @property
    def tags(self) -> List[str]:
        return [region_tag(p) for p in self.points]

    @property
    def start(self):
        return self.points[0]

    @property
    def end(self):
        return self.points[-1]

    def is_monotone(self, tol: float = 1e-9) -> bool:
        """True if f does not increase between consecutive samples beyond `tol`."""
        return all(b <= a + tol for a, b in zip(self.values, self.values[1:]))

    def write_csv(self, fp: IO):
        writer = csv.writer(fp)
        width = max(len(point_coords(p)) for p in self.points)
        writer.writerow(['time'] + [f'c{i}' for i in range(width)] + ['value', 'region'])
        for t, p, f in zip(self.times, self.points, self.values):
            coords = [repr(float(c)) for c in point_coords(p)]
            coords += [''] * (width - len(coords))
            writer.writerow([repr(float(t))] + coords + [repr(float(f)), region_tag(p)])

    def __len__(self):
        return len(self.times)

    def __repr__(self):
        return "<FlowSample %s points, %s -> %s>" % (len(self.times), region_tag(self.start), region_tag(self.end))

    def __getstate__(self):
        return {
            'times': self.times,
            'points': [p.state_ref() if isinstance(p, CriticalPoint) else p.__getstate__() for p in self.points],
            'values': self.values,
            'converged_to': None if self.converged_to is None else self.converged_to.id,
        }


def _canonical(model: MorseModel, point):
    if isinstance(point, CriticalPoint):
        return ('chart', point, point.origin())
    if isinstance(point, LocalPoint):
        return ('chart', point.q, point.v)
    if isinstance(point, BoxPoint):
        if point.u < LN2:
            x, y = point.q.split(point.w)
            return ('chart', point.q, point.q.join(math.exp(point.u) * x, math.exp(-point.u) * y))
        return ('box', point.q, point.w, point.u)
    for q in model.critical_points:
        x, y = q.split(q.chart.from_ambient(point.angles))
        if norm(x) < 2.0 * q.delta and norm(y) < 2.0 * q.delta:
            return ('chart', q, q.join(x, y))
    return ('ambient', point.angles)


def _transfer_from(model: MorseModel, q: CriticalPoint, v: np.ndarray, cfg: Config) -> Tuple[List[Segment], TransferResult]:
    """Segments from a chart point with y != 0 to the next entry set."""
    x, y = q.split(v)
    r = norm(y)
    s_exit = math.log(q.delta / r)
    z = exit_point(q, v)
    segments: List[Segment] = []
    if s_exit > 0.0:
        segments.append(ChartSegment(model, q, x, math.exp(s_exit) * y, math.exp(-s_exit)))
    if model.mode == 'numeric':
        result = model.engine.first_hit(q, z if s_exit > 0.0 else v, cfg)
        return segments + result.segments(model), result
    result = model.first_hit(q, z, cfg)
    if result is None:
        raise NotInDomainError(f'Exit point of {q.id} enters no chart of model {model.name!r}', z.tolist())
    u_start = result.time + min(s_exit, 0.0)
    segments.append(TransferSegment(model, result.target, result.w, u_start, 0.0, q, z, result.time))
    return segments, result


def follow(model: MorseModel, start, cfg: Config = CONFIG) -> Tuple[List[Segment], CriticalPoint]:
    """Follows the forward flow from a point object to its limit critical point.

    Args:
        model (MorseModel): The model.
        start: A `CriticalPoint`, `LocalPoint`, `BoxPoint` or `AmbientPoint`.
        cfg (Config, optional): Tolerances. Defaults to `CONFIG`.

    Returns:
        tuple: The segments in flow order, the last one a tail, and the limit critical point.
    """
    segments: List[Segment] = []
    state = _canonical(model, start)
    for _ in range(len(model.critical_points) + 1):
        if state[0] == 'box':
            _, q, w, u = state
            segments.append(TransferSegment(model, q, w, u, 0.0))
            state = ('chart', q, w)
            continue
        if state[0] == 'ambient':
            result = model.engine.shoot(state[1], cfg=cfg)
            segments.extend(result.segments(model))
            state = ('chart', result.target, result.w)
            continue
        _, q, v = state
        x, y = q.split(v)
        tol = cfg['eps_stable'] * q.delta
        if norm(y) <= tol:
            segments.append(ChartSegment(model, q, x, None, 0.0))
            logger.trace(f"Flow converged to {q.id} after {len(segments)} segments")
            return segments, q
        segs, result = _transfer_from(model, q, v, cfg)
        segments.extend(segs)
        state = ('chart', result.target, result.w)
    raise FlowTimeoutError(repr(start), cfg['max_time'], 'critical point')


def truncate(segments: Sequence[Segment], time: float) -> List[Segment]:
    out: List[Segment] = []
    acc = 0.0
    for seg in segments:
        if time <= acc + seg.duration:
            out.append(seg.truncated(time - acc))
            return out
        out.append(seg)
        acc += seg.duration
    return out


def _event_time(segments: Sequence[Segment], kind: str, target) -> float:
    acc = 0.0
    for seg in segments:
        if kind == 'level':
            c = float(target)
            if seg.f_end <= c <= seg.f_start:
                return acc + seg.time_at_level(c)
        elif isinstance(seg, ChartSegment) and seg.q.id == target.id:
            if kind == 'entry' and seg.x is not None and norm(seg.x) > 0.0:
                s = math.log(norm(seg.x) / target.delta)
                if 0.0 <= s <= seg.duration:
                    return acc + s
            if kind == 'exit' and seg.kind == 'through' and norm(seg.y) > 0.0:
                s = seg.duration + math.log(target.delta / norm(seg.y))
                if 0.0 <= s <= seg.duration:
                    return acc + s
        acc += seg.duration
    return math.inf


def integrate(model: MorseModel, start, until: Tuple[str, object] = ('limit', None), n: Optional[int] = None,
              cfg: Config = CONFIG) -> FlowSample:
    """Samples the flow path from `start` until an event.

    Args:
        model (MorseModel): The model.
        start: Start point object.
        until (tuple): ('time', T), ('entry', q), ('exit', q), ('level', c) or ('limit', None).
        n (int, optional): Samples per segment. Defaults to the `samples` setting.
        cfg (Config, optional): Tolerances. Defaults to `CONFIG`.

    Returns:
        FlowSample: The sampled path; `converged_to` is set when the limit was reached.
    """
    kind, target = until
    if kind not in UNTIL_KINDS:
        raise DomainError(f'Unknown event kind {kind!r}; expected one of {UNTIL_KINDS}')
    n = int(cfg['samples'] if n is None else n)
    segments, limit = follow(model, start, cfg)
    if kind in ('entry', 'exit'):
        target = model.point(target)
    if kind == 'level' and float(target) > segments[0].f_start:
        raise NotInDomainError(f'Level {target} lies above the start value {segments[0].f_start}')
    if kind == 'level' and float(target) == limit.value:
        kind = 'limit'
    if kind == 'limit':
        return FlowSample.from_segments(segments, n, limit)
    t_event = float(target) if kind == 'time' else _event_time(segments, kind, target)
    if not math.isfinite(t_event):
        if kind == 'time':
            return FlowSample.from_segments(segments, n, limit)
        raise FlowTimeoutError(repr(start), cfg['max_time'], f'{kind} {getattr(target, "id", target)}')
    logger.debug(f"Event {kind} reached at time {t_event:.10g}")
    return FlowSample.from_segments(truncate(segments, t_event), n)


def trajectory_from(model: MorseModel, start, cfg: Config = CONFIG) -> GeneralizedTrajectory:
    """The half-infinite trajectory starting at a point object."""
    segments, _ = follow(model, start, cfg)
    return GeneralizedTrajectory.unbroken(model, segments)


def unstable_trajectory(model: MorseModel, p: CriticalPoint, m, cfg: Config = CONFIG) -> GeneralizedTrajectory:
    """The trajectory leaving `p` through the exit point `m` on its unstable sphere."""
    _, y = p.split(m)
    head = ChartSegment(model, p, None, y, 0.0)
    segments, _ = follow(model, LocalPoint(p, m), cfg)
    return GeneralizedTrajectory.unbroken(model, [head] + segments)


class ConnectingMap(object):
    """
    The map G from the exit set of `source` to the entry set of `target`,
    composed across the charts of intermediate critical points the flow
    passes through.
    """

    def __init__(self, model: MorseModel, source: CriticalPoint, target: CriticalPoint, cfg: Config = CONFIG):
        self.model = model
        self.source: CriticalPoint = model.point(source)
        self.target: CriticalPoint = model.point(target)
        self.cfg = cfg
        if self.source.value <= self.target.value:
            raise DomainError(f'No connecting map from {self.source.id} up to {self.target.id}')

    @property
    def mode(self) -> str:
        return 'analytic' if self.model.mode == 'synthetic' else 'shooting'

    def chain(self, z) -> Tuple[List[TransferResult], np.ndarray, float]:
        """Follows `z` to the entry set of the target.

        Returns:
            tuple: The transfers taken, the entry point and the total flow time.
        """
        q, zq, total = self.source, np.asarray(z, dtype=float), 0.0
        results: List[TransferResult] = []
        tol = self.cfg['eps_stable']
        while True:
            result = self.model.first_hit(q, zq, self.cfg)
            if result is None or result.target.value < self.target.value:
                raise NotInDomainError(f'Exit point of {self.source.id} does not flow into U({self.target.id})',
                                       np.asarray(z).tolist())
            results.append(result)
            total += result.time
            if result.target.id == self.target.id:
                return results, result.w, total
            q = result.target
            if norm(q.split(result.w)[1]) <= tol * q.delta:
                raise NotInDomainError(f'Flow from {self.source.id} converges to {q.id}', np.asarray(z).tolist())
            total += transit_time(q, result.w)
            zq = exit_point(q, result.w)

    def itinerary(self, z) -> Tuple[List[str], List[np.ndarray]]:
        """Intermediate critical points passed and the unstable parts of their entry points."""
        results, _, _ = self.chain(z)
        ids = [r.target.id for r in results[:-1]]
        ys = [r.target.split(r.w)[1] for r in results[:-1]]
        return ids, ys

    def __call__(self, z) -> Tuple[np.ndarray, float]:
        _, w, total = self.chain(z)
        return w, total

    def contains(self, z) -> bool:
        try:
            self.chain(z)
        except MorseError:
            return False
        return True

    def graph_point(self, z) -> Tuple[np.ndarray, np.ndarray]:
        return np.asarray(z, dtype=float), self(z)[0]

    def __repr__(self):
        return "<ConnectingMap %s->%s %s>" % (self.source.id, self.target.id, self.mode)


def connecting_map(model: MorseModel, source, target, z, cfg: Config = CONFIG) -> Tuple[np.ndarray, float]:
    """Entry point on S̃⁺ of `target` reached from the exit point `z` of `source`, and the flow time."""
    return ConnectingMap(model, source, target, cfg)(z)


class TrajectorySet(object):
    """
    The unparametrized infinite trajectories M(p, q), each represented by its
    exit point on the unstable sphere S⁻ of p. Isolated sets list `points`;
    one-parameter families list traced `arcs` and the `ends` where an arc
    approaches a broken trajectory; larger families list `samples`.
    """

    def __init__(self, source: CriticalPoint, target: CriticalPoint, dimension: int, points=(), arcs=(), ends=(),
                 samples=()):
        self.source: CriticalPoint = source
        self.target: CriticalPoint = target
        self.dimension: int = int(dimension)
        """**(int):** Expected dimension |p| - |q| - 1; negative for an empty set."""
        self.points: List[np.ndarray] = [np.asarray(m, dtype=float) for m in points]
        self.arcs: List[np.ndarray] = [np.asarray(a, dtype=float) for a in arcs]
        self.ends: List[np.ndarray] = [np.asarray(m, dtype=float) for m in ends]
        self.samples: List[np.ndarray] = [np.asarray(m, dtype=float) for m in samples]

    @property
    def positive_dimensional(self) -> bool:
        return self.dimension > 0

    @property
    def representatives(self) -> List[np.ndarray]:
        if self.dimension <= 0:
            return list(self.points)
        return [m for arc in self.arcs for m in arc] + list(self.samples)

    def is_empty(self) -> bool:
        return not self.representatives

    def describe(self) -> str:
        if self.dimension < 0:
            return 'empty'
        if self.dimension == 0:
            return f'{len(self.points)} isolated'
        if self.arcs:
            return f'positive-dimensional, dim {self.dimension}, {len(self.arcs)} arcs, {len(self.ends)} ends'
        return f'positive-dimensional, dim {self.dimension}, {len(self.samples)} samples'

    def __len__(self):
        return len(self.points) if self.dimension == 0 else len(self.representatives)

    def __repr__(self):
        return "<TrajectorySet M(%s, %s) %s>" % (self.source.id, self.target.id, self.describe())

    def __getstate__(self):
        return {
            'source': self.source.id,
            'target': self.target.id,
            'dimension': self.dimension,
            'points': [m.tolist() for m in self.points],
            'arcs': [a.tolist() for a in self.arcs],
            'ends': [m.tolist() for m in self.ends],
            'samples': len(self.samples),
        }


def stable_residual(cmap: ConnectingMap, m) -> np.ndarray:
    """Unstable coordinates of the entry point at the target; zero on M(source, target)."""
    w, _ = cmap(m)
    return cmap.target.split(w)[1]


def _accept_tol(model: MorseModel, q: CriticalPoint, cfg: Config) -> float:
    return max(cfg['eps_stable'], cfg.get('eps_event', model.mode)) * q.delta


def _dedupe(points: List[np.ndarray], radius: float) -> List[np.ndarray]:
    out: List[np.ndarray] = []
    for m in points:
        if all(norm(m - o) > radius for o in out):
            out.append(m)
    return out


def _sphere_seeds(p: CriticalPoint, count: int, cfg: Config) -> List[np.ndarray]:
    k = p.index
    if k == 1:
        return [p.join(None, [p.delta]), p.join(None, [-p.delta])]
    if k == 2:
        angles = np.linspace(0.0, 2.0 * math.pi, count, endpoint=False)
        return [p.join(None, p.delta * np.array([math.cos(a), math.sin(a)])) for a in angles]
    rng = cfg.rng()
    return [p.join(None, to_sphere(rng.normal(size=k), p.delta)) for _ in range(count)]


def _scan_circle(cmap: ConnectingMap, cfg: Config) -> List[np.ndarray]:
    """Roots of the scalar stable residual over the exit circle, by sign changes and brentq."""
    p = cmap.source
    count = int(cfg['scan_points'])
    angles = np.linspace(0.0, 2.0 * math.pi, count + 1)

    def m_at(a):
        return p.join(None, p.delta * np.array([math.cos(a), math.sin(a)]))

    def h(a):
        try:
            return float(stable_residual(cmap, m_at(a))[0])
        except MorseError:
            return None

    values = [h(a) for a in angles]
    roots: List[np.ndarray] = []
    for a, b, ha, hb in zip(angles, angles[1:], values, values[1:]):
        if ha is None or hb is None:
            continue
        if ha == 0.0:
            roots.append(m_at(a))
            continue
        if ha * hb > 0.0:
            continue
        try:
            root = brentq(lambda s: h(s) if h(s) is not None else math.nan, a, b, xtol=cfg['bisect_tol'])
        except (ValueError, RuntimeError) as e:
            warnings.warn(UndetectedConnectionWarning(cmap.source.id, cmap.target.id, (a, b, ha, hb), str(e)))
            continue
        roots.append(m_at(root))
    return roots


def _least_squares_roots(cmap: ConnectingMap, seeds: List[np.ndarray], cfg: Config) -> List[np.ndarray]:
    p = cmap.source
    big = 10.0 * cmap.target.delta
    roots = []
    for seed in seeds:
        _, y0 = p.split(seed)
        point, dim = sphere_chart(y0, p.delta)

        def residual(theta):
            try:
                return stable_residual(cmap, p.join(None, point(theta)))
            except MorseError:
                return np.full(cmap.target.index, big)

        sol = least_squares(residual, np.zeros(dim), xtol=1e-15, ftol=1e-15, gtol=1e-15,
                            max_nfev=int(cfg['newton_max_iter']) * (dim + 1))
        roots.append(p.join(None, point(sol.x)))
    return roots


def _is_transverse(cmap: ConnectingMap, m: np.ndarray, cfg: Config) -> bool:
    """Whether the stable residual has a well conditioned derivative along the exit sphere at m."""
    p = cmap.source
    point, dim = sphere_chart(p.split(m)[1], p.delta)
    try:
        jac = _jacobian(lambda th: stable_residual(cmap, p.join(None, point(th))), np.zeros(dim), 1e-7 * p.delta)
    except MorseError:
        return False
    return float(np.linalg.svd(jac, compute_uv=False)[-1]) >= cfg['theta_min']


def _isolated(cmap: ConnectingMap, cfg: Config) -> List[np.ndarray]:
    model, p, q = cmap.model, cmap.source, cmap.target
    general = False
    if p.index == 2 and q.index == 1:
        candidates = _scan_circle(cmap, cfg)
    elif p.index == 1 or q.index == 0:
        candidates = _sphere_seeds(p, int(cfg['scan_points']), cfg)
    else:
        candidates = _least_squares_roots(cmap, _sphere_seeds(p, int(cfg['scan_points']), cfg), cfg)
        general = True
    tol = _accept_tol(model, q, cfg)
    found = []
    for m in candidates:
        try:
            if norm(stable_residual(cmap, m)) > tol:
                continue
        except MorseError:
            continue
        # residuals also fade where the pre-entry point nears the unstable space of q
        if general and not _is_transverse(cmap, m, cfg):
            logger.trace(f"Dropped a degenerate root of M({p.id}, {q.id}) at {m.tolist()}")
            continue
        found.append(m)
    return _dedupe(found, 1e-6 * p.delta)


def _family_residual(cmap: ConnectingMap, m: np.ndarray) -> np.ndarray:
    p = cmap.source
    _, y = p.split(m)
    c = stable_residual(cmap, m)
    return np.concatenate([c, [(float(np.dot(y, y)) - p.delta ** 2) / (2.0 * p.delta)]])


def _jacobian(fun, y: np.ndarray, h: float) -> np.ndarray:
    f0 = fun(y)
    jac = np.zeros((f0.size, y.size))
    for i in range(y.size):
        e = np.zeros(y.size)
        e[i] = h
        jac[:, i] = (fun(y + e) - fun(y - e)) / (2.0 * h)
    return jac


def _null_vector(jac: np.ndarray) -> np.ndarray:
    _, _, vt = np.linalg.svd(jac)
    return vt[-1]


class _FamilyTracer(object):
    """Pseudo-arclength continuation of a one-parameter family on the exit sphere."""

    def __init__(self, cmap: ConnectingMap, cfg: Config):
        self.cmap = cmap
        self.cfg = cfg
        p = cmap.source
        self.fd = 1e-7 * p.delta
        self.h0 = 2.0 * math.pi * p.delta / int(cfg['scan_points'])
        self.h_min = self.h0 * (1e-6 if cmap.model.mode == 'synthetic' else 1e-3)

    def F(self, y: np.ndarray) -> np.ndarray:
        return _family_residual(self.cmap, self.cmap.source.join(None, y))

    def tangent(self, y: np.ndarray, previous: Optional[np.ndarray] = None) -> np.ndarray:
        t = _null_vector(_jacobian(self.F, y, self.fd))
        if previous is not None and float(np.dot(t, previous)) < 0.0:
            t = -t
        return t

    def correct(self, pred: np.ndarray, t: np.ndarray) -> Optional[np.ndarray]:
        y = pred.copy()
        for _ in range(int(self.cfg['newton_max_iter'])):
            try:
                def G(u):
                    return np.concatenate([self.F(u), [float(np.dot(t, u - pred))]])
                g = G(y)
                if norm(g) < 1e-13 * self.cmap.source.delta:
                    return y
                y = y - np.linalg.solve(_jacobian(G, y, self.fd), g)
            except (MorseError, np.linalg.LinAlgError):
                return None
        try:
            residual = norm(self.F(y)[:-1])
        except MorseError:
            return None
        return y if residual <= _accept_tol(self.cmap.model, self.cmap.target, self.cfg) else None

    def crosses_boundary(self, y_a: np.ndarray, y_b: np.ndarray) -> bool:
        p = self.cmap.source
        ids_a, ys_a = self.cmap.itinerary(p.join(None, y_a))
        ids_b, ys_b = self.cmap.itinerary(p.join(None, y_b))
        common = {i: v for i, v in zip(ids_a, ys_a)}
        for i, v in zip(ids_b, ys_b):
            if i in common and float(np.dot(common[i], v)) < 0.0:
                return True
        return False

    def walk(self, start: np.ndarray, direction: float) -> Tuple[List[np.ndarray], Optional[np.ndarray], bool]:
        """Returns the points walked, the end point (if an end was met) and whether the arc closed."""
        points = [start]
        try:
            t = direction * self.tangent(start)
        except MorseError:
            return points, start, False
        h = self.h0
        for _ in range(8 * int(self.cfg['scan_points'])):
            y = points[-1]
            nxt = self.correct(y + h * t, t)
            try:
                ok = nxt is not None and self.cmap.contains(self.cmap.source.join(None, nxt)) and \
                    not self.crosses_boundary(y, nxt)
                t_next = self.tangent(nxt, t) if ok else None
            except MorseError:
                ok = False
            if not ok:
                if h <= self.h_min:
                    return points, y, False
                h *= 0.5
                continue
            if len(points) > 3 and norm(nxt - start) < 0.5 * self.h0:
                return points, None, True
            t = t_next
            points.append(nxt)
            h = min(2.0 * h, self.h0)
        return points, None, False

    def trace(self, seed: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
        forward, end_f, closed = self.walk(seed, 1.0)
        if closed:
            return np.array(forward), []
        backward, end_b, _ = self.walk(seed, -1.0)
        arc = list(reversed(backward[1:])) + forward
        ends = [e for e in (end_b, end_f) if e is not None]
        return np.array(arc), ends


def _trace_families(cmap: ConnectingMap, cfg: Config) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    p = cmap.source
    tracer = _FamilyTracer(cmap, cfg)
    seeds = _sphere_seeds(p, int(cfg['scan_points']), cfg)
    if cmap.target.index > 0:
        seeds = _least_squares_roots(cmap, seeds, cfg)
    arcs, ends = [], []
    for seed in seeds:
        _, y = p.split(seed)
        if not cmap.contains(seed) or norm(tracer.F(y)) > _accept_tol(cmap.model, cmap.target, cfg):
            continue
        if any(np.min(np.linalg.norm(arc - y, axis=1)) < 2.0 * tracer.h0 for arc in arcs):
            continue
        arc, arc_ends = tracer.trace(y)
        logger.debug(f"Traced an arc of M({p.id}, {cmap.target.id}) with {len(arc)} points, "
                     f"{len(arc_ends)} ends")
        arcs.append(arc)
        ends.extend(arc_ends)
    to_exit = [np.array([p.join(None, y) for y in arc]) for arc in arcs]
    return to_exit, [p.join(None, y) for y in ends]


def _sample_family(cmap: ConnectingMap, cfg: Config) -> List[np.ndarray]:
    seeds = _sphere_seeds(cmap.source, 4 * int(cfg['scan_points']), cfg)
    if cmap.target.index > 0:
        seeds = _least_squares_roots(cmap, seeds, cfg)
    tol = _accept_tol(cmap.model, cmap.target, cfg)
    out = []
    for m in seeds:
        try:
            if norm(stable_residual(cmap, m)) <= tol:
                out.append(m)
        except MorseError:
            continue
    return out


def find_infinite_trajectories(model: MorseModel, source, target, cfg: Config = CONFIG) -> TrajectorySet:
    """Detects the infinite trajectories from `source` to `target`.

    Args:
        model (MorseModel): The model.
        source, target (CriticalPoint or str): The limit critical points.
        cfg (Config, optional): Scan resolution and tolerances. Defaults to `CONFIG`.

    Returns:
        TrajectorySet: Exit-point representatives, or traced families when the set is positive-dimensional.
    """
    p, q = model.point(source), model.point(target)
    dimension = p.index - q.index - 1
    if dimension < 0 or p.value <= q.value:
        return TrajectorySet(p, q, min(dimension, -1))
    cmap = ConnectingMap(model, p, q, cfg)
    if dimension == 0:
        points = _isolated(cmap, cfg)
        declared = model.declared.get((p.id, q.id))
        if declared is not None and declared != len(points):
            warnings.warn(UndetectedConnectionWarning(p.id, q.id, None,
                                                      f'declared {declared}, found {len(points)}'))
        logger.debug(f"M({p.id}, {q.id}): {len(points)} isolated trajectories")
        return TrajectorySet(p, q, 0, points=points)
    if dimension == 1:
        arcs, ends = _trace_families(cmap, cfg)
        return TrajectorySet(p, q, 1, arcs=arcs, ends=ends)
    return TrajectorySet(p, q, dimension, samples=_sample_family(cmap, cfg))


__all__ = ['UNTIL_KINDS', 'FlowSample', 'region_tag', 'point_coords', 'follow', 'truncate', 'integrate',
           'trajectory_from', 'unstable_trajectory', 'ConnectingMap', 'connecting_map', 'TrajectorySet',
           'stable_residual', 'find_infinite_trajectories']
