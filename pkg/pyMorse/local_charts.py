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
This module contains the local trajectory spaces around one critical point p
and their charts:

* `both_inside` - trajectories with both ends in Ũ(p), chart (τ, x, y) with
  τ = e^-L, x the stable part of the start and y the unstable part of the end;
* `through` - trajectories from the entry set S̃⁺ to the exit set S̃⁻, chart
  (τ, x ∈ S⁺, y ∈ S⁻) with τ = (|x'| + |y'|)/2Δ = e^-T;
* `from_inside` / `to_inside` - trajectories starting (ending) in Ũ(p) and
  leaving through S̃⁻ (entering through S̃⁺), chart (E, x, y) with E ∈ [0, 2);
* `with_time` - any of the above together with the flow time to the nearest
  crossing of the entry or exit set.

It also contains the extended evaluations onto S̃∓, the transition times and
the restriction maps to local and connecting trajectory spaces.
"""

import logging
import math
from typing import Optional, Tuple

import numpy as np

from .exceptions import BlowupPointError, DomainError, NotInDomainError
from .model import LN2, AmbientPoint, BoxPoint, CriticalPoint, LocalPoint, MorseModel, membership
from .trajectory import ChartSegment, FlowLine, GeneralizedTrajectory, ev_level
from .utils import CONFIG, Config, norm

logger = logging.getLogger('pyMorse')

VARIANTS = ('through', 'from_inside', 'to_inside', 'both_inside', 'with_time')


class LocalChartPoint(object):
    """Coordinates of a trajectory in one of the local charts of `p`."""

    def __init__(self, p: CriticalPoint, variant: str, tau: float, x, y, flow_time: Optional[float] = None,
                 base: Optional[str] = None):
        if variant not in VARIANTS:
            raise DomainError(f'Unknown local chart variant {variant!r}')
        self.p: CriticalPoint = p
        """**(CriticalPoint):** Centre of the chart."""
        self.variant: str = variant
        """**(str):** One of `VARIANTS`."""
        self.tau: float = float(tau)
        """**(float):** τ for through / both_inside, E for from_inside / to_inside."""
        self.x: np.ndarray = np.asarray(x, dtype=float)
        self.y: np.ndarray = np.asarray(y, dtype=float)
        self.flow_time: Optional[float] = None if flow_time is None else float(flow_time)
        """**(float or None):** T⁻ <= 0 or T⁺ >= 0 of the with_time variant."""
        self.base: Optional[str] = base
        """**(str or None):** Variant extended by a with_time point."""

    def as_tuple(self) -> Tuple:
        if self.variant == 'with_time':
            return (self.flow_time, self.tau, self.x, self.y)
        return (self.tau, self.x, self.y)

    def __repr__(self):
        return "<LocalChartPoint %s %s tau=%s x=%r y=%r>" % (self.p.id, self.variant, self.tau, self.x.tolist(),
                                                             self.y.tolist())

    def __getstate__(self):
        state = {
            'p': self.p.id,
            'variant': self.variant,
            'tau': self.tau,
            'x': self.x.tolist(),
            'y': self.y.tolist(),
        }
        if self.variant == 'with_time':
            state['flow_time'] = self.flow_time
            state['base'] = self.base
        return state


def local_coords(p: CriticalPoint, point) -> np.ndarray:
    """Chart coordinates of a point object in the chart of `p`."""
    if isinstance(point, CriticalPoint) and point.id == p.id:
        return p.origin()
    if isinstance(point, LocalPoint) and point.q.id == p.id:
        return point.v
    if isinstance(point, BoxPoint) and point.q.id == p.id and point.u <= LN2:
        x, y = p.split(point.w)
        return p.join(math.exp(point.u) * x, math.exp(-point.u) * y)
    if isinstance(point, AmbientPoint) and p.chart.embedded:
        v = p.chart.from_ambient(point.angles)
        x, y = p.split(v)
        if norm(x) < 2.0 * p.delta and norm(y) < 2.0 * p.delta:
            return v
    raise DomainError(f'Point {point!r} does not lie in the chart of {p.id}')


def _require(p: CriticalPoint, v, region: str, what: str, cfg: Config, t: float = 1.0):
    x, y = p.split(v)
    if not membership(p, x, y, region, t, cfg):
        raise NotInDomainError(f'{what} of the trajectory is not in {region} of {p.id}', np.asarray(v).tolist())


def _broken_at(gamma: GeneralizedTrajectory, p: CriticalPoint) -> bool:
    return any(q.id == p.id for q in gamma.breaking_points)


def broken_pair(model: MorseModel, p: CriticalPoint, x, y) -> GeneralizedTrajectory:
    """The broken trajectory at p: the tail from (x, 0) followed by the head to (0, y)."""
    tail = ChartSegment(model, p, x, None, 0.0)
    head = ChartSegment(model, p, None, y, 0.0)
    return GeneralizedTrajectory(model, [FlowLine(model, [tail]), FlowLine(model, [head])])


def local_trajectory(model: MorseModel, p: CriticalPoint, tau: float, x, y) -> GeneralizedTrajectory:
    """γ_{τ,x,y}: from (x, τy) to (τx, y) in time -ln τ, or the broken pair for τ = 0."""
    if tau == 0.0:
        return broken_pair(model, p, x, y)
    return GeneralizedTrajectory.unbroken(model, [ChartSegment(model, p, x, y, tau)])


def chart_both_inside(gamma: GeneralizedTrajectory, p: CriticalPoint, cfg: Config = CONFIG) -> LocalChartPoint:
    """Chart of trajectories with both ends in Ũ(p).

    Args:
        gamma (GeneralizedTrajectory): A trajectory contained in the chart of `p`.
        p (CriticalPoint): The critical point.
        cfg (Config, optional): Sphere tolerance. Defaults to `CONFIG`.

    Returns:
        LocalChartPoint: (τ, x, y) with τ = e^-L, x from ev₋ and y from ev₊.
    """
    v_minus = local_coords(p, gamma.end_minus)
    v_plus = local_coords(p, gamma.end_plus)
    _require(p, v_minus, 'tilde_U', 'Start', cfg)
    _require(p, v_plus, 'tilde_U', 'End', cfg)
    if gamma.k == 1 and _broken_at(gamma, p):
        tau = 0.0
    elif gamma.k == 0 and gamma.finite_length is not None:
        tau = math.exp(-gamma.finite_length)
    else:
        raise NotInDomainError(f'Trajectory is neither finite nor broken exactly at {p.id}', repr(gamma))
    return LocalChartPoint(p, 'both_inside', tau, p.split(v_minus)[0], p.split(v_plus)[1])


def chart_both_inside_inverse(model: MorseModel, point: LocalChartPoint, cfg: Config = CONFIG) -> GeneralizedTrajectory:
    p = point.p
    if not 0.0 <= point.tau <= 1.0:
        raise NotInDomainError('Length parameter must lie in [0, 1]', point.tau)
    _require(p, p.join(point.x, point.tau * point.y), 'tilde_U', 'Start', cfg)
    _require(p, p.join(point.tau * point.x, point.y), 'tilde_U', 'End', cfg)
    return local_trajectory(model, p, point.tau, point.x, point.y)


def entry_exit(gamma: GeneralizedTrajectory, p: CriticalPoint, cfg: Config = CONFIG) -> Tuple[np.ndarray, np.ndarray]:
    """Evaluations of the trajectory on S̃⁺ and S̃⁻ of p, in chart coordinates."""
    entry = local_coords(p, ev_level(gamma, ('entry', p), cfg, allow_ends=True))
    exit_ = local_coords(p, ev_level(gamma, ('exit', p), cfg, allow_ends=True))
    return entry, exit_


def chart_through(gamma: GeneralizedTrajectory, p: CriticalPoint, cfg: Config = CONFIG) -> LocalChartPoint:
    """Chart (τ, x, y) of a trajectory crossing U(p) from S̃⁺ to S̃⁻; τ = (|x'| + |y'|)/2Δ."""
    entry, exit_ = entry_exit(gamma, p, cfg)
    _require(p, entry, 'tilde_S_plus', 'Entry evaluation', cfg)
    _require(p, exit_, 'tilde_S_minus', 'Exit evaluation', cfg)
    x, y_in = p.split(entry)
    x_out, y = p.split(exit_)
    tau = (norm(x_out) + norm(y_in)) / (2.0 * p.delta)
    return LocalChartPoint(p, 'through', tau, x, y)


def chart_through_inverse(model: MorseModel, point: LocalChartPoint) -> GeneralizedTrajectory:
    """The local piece γ_{τ,x,y} from S̃⁺ to S̃⁻ with |x| = |y| = Δ."""
    p = point.p
    if not 0.0 <= point.tau <= 1.0:
        raise NotInDomainError('Transition parameter must lie in [0, 1]', point.tau)
    for part, name in ((point.x, 'x'), (point.y, 'y')):
        if abs(norm(part) - p.delta) > 1e-9 * p.delta:
            raise NotInDomainError(f'{name} must lie on its sphere of radius {p.delta}', part.tolist())
    return local_trajectory(model, p, point.tau, point.x, point.y)


def extended_eval(gamma: GeneralizedTrajectory, p: CriticalPoint, side: str) -> np.ndarray:
    """The point of S̃⁻ (side '-') or S̃⁺ (side '+') on the extended flow line of the trajectory.

    ρ₋(x, y) = ((|y|/Δ) x, (Δ/|y|) y) applied to ev₋, and symmetrically
    ρ₊(x, y) = ((Δ/|x|) x, (|x|/Δ) y) applied to ev₊.
    """
    if side == '-':
        return rho_minus(p, local_coords(p, gamma.end_minus))
    if side == '+':
        return rho_plus(p, local_coords(p, gamma.end_plus))
    raise DomainError(f'Unknown side {side!r}')


def rho_minus(p: CriticalPoint, v) -> np.ndarray:
    x, y = p.split(v)
    r = norm(y)
    if r == 0.0:
        raise BlowupPointError(f'Point on the stable manifold of {p.id}: exit evaluation undefined')
    return p.join((r / p.delta) * x, (p.delta / r) * y)


def rho_plus(p: CriticalPoint, v) -> np.ndarray:
    x, y = p.split(v)
    r = norm(x)
    if r == 0.0:
        raise BlowupPointError(f'Point on the unstable manifold of {p.id}: entry evaluation undefined')
    return p.join((p.delta / r) * x, (r / p.delta) * y)


def _exit_direction(gamma: GeneralizedTrajectory, p: CriticalPoint, v_start) -> np.ndarray:
    x, y = p.split(v_start)
    if norm(y) > 0.0:
        return p.delta * y / norm(y)
    # starts on the stable manifold; the direction is carried by the head leaving p
    for seg in gamma.chart_segments(p):
        if seg.kind == 'head':
            return p.delta * seg.y / norm(seg.y) if norm(seg.y) > 0 else seg.y
    raise BlowupPointError(f'Trajectory converges to {p.id} without leaving it')


def _entry_direction(gamma: GeneralizedTrajectory, p: CriticalPoint, v_end) -> np.ndarray:
    x, y = p.split(v_end)
    if norm(x) > 0.0:
        return p.delta * x / norm(x)
    for seg in gamma.chart_segments(p):
        if seg.kind == 'tail':
            return p.delta * seg.x / norm(seg.x) if norm(seg.x) > 0 else seg.x
    raise BlowupPointError(f'Trajectory leaves {p.id} without having converged to it')


def chart_from_inside(gamma: GeneralizedTrajectory, p: CriticalPoint, t: float = 1.0,
                      cfg: Config = CONFIG) -> LocalChartPoint:
    """Chart (E, x, y) of a trajectory starting at (x, y') in Ũ(p); E = |y'|/Δ, y on S⁻."""
    v = local_coords(p, gamma.end_minus)
    _require(p, v, 'tilde_U', 'Start', cfg)
    x, y_start = p.split(v)
    E = norm(y_start) / p.delta
    if E * norm(x) >= t * p.delta:
        raise NotInDomainError(f'E|x| = {E * norm(x):.6g} violates E|x| < tΔ = {t * p.delta:.6g}')
    return LocalChartPoint(p, 'from_inside', E, x, _exit_direction(gamma, p, v))


def chart_from_inside_inverse(model: MorseModel, point: LocalChartPoint) -> GeneralizedTrajectory:
    """From (x, E y) to the exit point (E x, y) for E < 1; a zero-length trajectory at (x, E y) for E >= 1."""
    p, E = point.p, point.tau
    if not 0.0 <= E < 2.0:
        raise NotInDomainError('E must lie in [0, 2)', E)
    if E == 0.0:
        return broken_pair(model, p, point.x, point.y)
    if E > 1.0:
        return local_trajectory(model, p, 1.0, point.x, E * point.y)
    return local_trajectory(model, p, E, point.x, point.y)


def chart_to_inside(gamma: GeneralizedTrajectory, p: CriticalPoint, t: float = 1.0,
                    cfg: Config = CONFIG) -> LocalChartPoint:
    """Chart (E, x, y) of a trajectory ending at (x', y) in Ũ(p); E = |x'|/Δ, x on S⁺."""
    v = local_coords(p, gamma.end_plus)
    _require(p, v, 'tilde_U', 'End', cfg)
    x_end, y = p.split(v)
    E = norm(x_end) / p.delta
    if E * norm(y) >= t * p.delta:
        raise NotInDomainError(f'E|y| = {E * norm(y):.6g} violates E|y| < tΔ = {t * p.delta:.6g}')
    return LocalChartPoint(p, 'to_inside', E, _entry_direction(gamma, p, v), y)


def chart_to_inside_inverse(model: MorseModel, point: LocalChartPoint) -> GeneralizedTrajectory:
    p, E = point.p, point.tau
    if not 0.0 <= E < 2.0:
        raise NotInDomainError('E must lie in [0, 2)', E)
    if E == 0.0:
        return broken_pair(model, p, point.x, point.y)
    if E > 1.0:
        return local_trajectory(model, p, 1.0, E * point.x, point.y)
    return local_trajectory(model, p, E, point.x, point.y)


def flow_time_to(gamma: GeneralizedTrajectory, p: CriticalPoint, side: str) -> float:
    """
    T⁻ <= 0 with ev₋ = Ψ_T⁻(entry point on S̃⁺) for side '-', or T⁺ >= 0 with
    ev₊ = Ψ_T⁺(exit point on S̃⁻) for side '+'.
    """
    acc = 0.0
    segments = gamma.segments()
    if side == '-':
        for seg in segments:
            if isinstance(seg, ChartSegment) and seg.q.id == p.id and seg.x is not None and norm(seg.x) > 0:
                s = math.log(norm(seg.x) / p.delta)
                if s <= seg.duration:
                    return -(acc + s)
            acc += seg.duration
        raise NotInDomainError(f'Trajectory never reaches the entry set of {p.id}')
    for seg in reversed(segments):
        if isinstance(seg, ChartSegment) and seg.q.id == p.id and seg.y is not None and norm(seg.y) > 0:
            s = math.log(norm(seg.y) / p.delta)
            if s <= seg.duration or seg.kind == 'head':
                return acc + s
        acc += seg.duration
    raise NotInDomainError(f'Trajectory never leaves through the exit set of {p.id}')


def with_time_inverse_start(p: CriticalPoint, flow_time: float, v) -> np.ndarray:
    """Start point Ψ_T(v) for a chart point `v` and a (nonpositive) flow time."""
    x, y = p.split(v)
    return p.join(math.exp(-flow_time) * x, math.exp(flow_time) * y)


def from_inside_flow_time(E: float) -> float:
    """Flow time T with ev₋ = Ψ_T(ρ₋(ev₋)); nonnegative exactly when E >= 1."""
    if E <= 0.0:
        raise BlowupPointError('E = 0 has no finite flow time')
    return math.log(E)


def transition_time(gamma: GeneralizedTrajectory, p: CriticalPoint, kind: str = 'through',
                    cfg: Config = CONFIG) -> float:
    """Transition time of a trajectory at p.

    Args:
        gamma (GeneralizedTrajectory): The trajectory.
        p (CriticalPoint): The critical point.
        kind (str): 'through' ((|y'| + |x'|)/2Δ at S̃⁺ x S̃⁻), 'minus' (|y'|/Δ at ev₋),
            'plus' (|x'|/Δ at ev₊) or 'tilde' (e^-L for both ends inside).
        cfg (Config, optional): Tolerances. Defaults to `CONFIG`.

    Returns:
        float: 0 exactly for trajectories broken at p.
    """
    if kind == 'through':
        if _broken_at(gamma, p):
            return 0.0
        return chart_through(gamma, p, cfg).tau
    if kind == 'minus':
        _, y = p.split(local_coords(p, gamma.end_minus))
        return norm(y) / p.delta
    if kind == 'plus':
        x, _ = p.split(local_coords(p, gamma.end_plus))
        return norm(x) / p.delta
    if kind == 'tilde':
        return chart_both_inside(gamma, p, cfg).tau
    raise DomainError(f'Unknown transition time kind {kind!r}')


def scaling_identity(t: float, tau: float, x, y) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Rescales the start (x, τy) of a local trajectory to the parameter t/2:
    returns (x', y, s) with x' = (2τ/t) x such that Ψ_s(x, τy) = (x', (t/2) y).
    """
    if tau <= 0.0 or t <= 0.0:
        raise DomainError('Rescaling needs τ > 0 and t > 0', (tau, t))
    factor = 2.0 * tau / t
    return factor * np.asarray(x, dtype=float), np.asarray(y, dtype=float), math.log(t / (2.0 * tau))


def chart_with_time(gamma: GeneralizedTrajectory, p: CriticalPoint, side: str = '-',
                    cfg: Config = CONFIG) -> LocalChartPoint:
    """The through chart of the trajectory together with its flow time to S̃⁺ (side '-') or from S̃⁻ (side '+')."""
    base = chart_through(gamma, p, cfg)
    return LocalChartPoint(p, 'with_time', base.tau, base.x, base.y, flow_time_to(gamma, p, side), base='through')


INVERSES = {
    'through': lambda model, point: chart_through_inverse(model, point),
    'from_inside': lambda model, point: chart_from_inside_inverse(model, point),
    'to_inside': lambda model, point: chart_to_inside_inverse(model, point),
    'both_inside': lambda model, point: chart_both_inside_inverse(model, point),
}


def local_chart_inverse(model: MorseModel, point: LocalChartPoint) -> GeneralizedTrajectory:
    """Inverse of any local chart; with_time points return the local piece between entry and exit."""
    variant = point.base if point.variant == 'with_time' else point.variant
    return INVERSES[variant](model, point)


class GraphPoint(object):
    """
    A point of the graph of a connecting map: the exit evaluation at `source`
    and the entry evaluation at `target`. Free ends are stored as point objects.
    """

    def __init__(self, kind: str, source, target, left, right, time: Optional[float] = None):
        self.kind: str = kind
        """**(str):** 'connecting', 'minus_free' (free start) or 'plus_free' (free end)."""
        self.source = source
        self.target = target
        self.left = left
        """Exit point on S̃⁻ of `source`, or the free start."""
        self.right = right
        """Entry point on S̃⁺ of `target`, or the free end."""
        self.time: Optional[float] = time

    def __repr__(self):
        return "<GraphPoint %s %s->%s>" % (self.kind, getattr(self.source, 'id', 'X'), getattr(self.target, 'id', 'X'))

    def __getstate__(self):
        def pack(v):
            return v.tolist() if isinstance(v, np.ndarray) else v.__getstate__()
        return {
            'kind': self.kind,
            'source': getattr(self.source, 'id', None),
            'target': getattr(self.target, 'id', None),
            'left': pack(self.left),
            'right': pack(self.right),
            'time': self.time,
        }


def _time_between(gamma: GeneralizedTrajectory, p: CriticalPoint, q: CriticalPoint) -> float:
    """Flow time between the exit crossing at p and the entry crossing at q."""
    total = flow_time_to(gamma, p, '+') + flow_time_to(gamma, q, '-')
    L = gamma.finite_length
    if L is not None:
        return L - total
    return math.inf if gamma.k else -total


def restriction(gamma: GeneralizedTrajectory, target: str, p: Optional[CriticalPoint] = None,
                q: Optional[CriticalPoint] = None, t: float = 1.0, cfg: Config = CONFIG):
    """Restricts a trajectory to a local trajectory space or to a connecting graph.

    Args:
        gamma (GeneralizedTrajectory): The trajectory.
        target (str): 'rest1' (M̄_p, through chart), 'rest2_minus' / 'rest2_plus'
            (from_inside / to_inside charts), 'rest3_minus' / 'rest3_plus' (with_time charts),
            'rest4' (connecting graph of (p, q)), 'rest6_minus' (free start to the entry of q)
            or 'rest6_plus' (exit of p to the free end).
        p, q (CriticalPoint, optional): Critical points the restriction refers to.
        t (float, optional): Neighbourhood parameter for the blowup constraints. Defaults to 1.
        cfg (Config, optional): Tolerances. Defaults to `CONFIG`.

    Returns:
        LocalChartPoint or GraphPoint
    """
    if target == 'rest1':
        if _broken_at(gamma, p):
            entry = local_coords(p, ev_level(gamma, ('entry', p), cfg, allow_ends=True))
            exit_ = local_coords(p, ev_level(gamma, ('exit', p), cfg, allow_ends=True))
            return LocalChartPoint(p, 'through', 0.0, p.split(entry)[0], p.split(exit_)[1])
        return chart_through(gamma, p, cfg)
    if target == 'rest2_minus':
        return chart_from_inside(gamma, p, t, cfg)
    if target == 'rest2_plus':
        return chart_to_inside(gamma, p, t, cfg)
    if target in ('rest3_minus', 'rest3_plus'):
        return chart_with_time(gamma, p, '-' if target == 'rest3_minus' else '+', cfg)
    if target == 'rest4':
        left = local_coords(p, ev_level(gamma, ('exit', p), cfg, allow_ends=True))
        right = local_coords(q, ev_level(gamma, ('entry', q), cfg, allow_ends=True))
        return GraphPoint('connecting', p, q, left, right, _time_between(gamma, p, q))
    if target == 'rest6_minus':
        right = local_coords(q, ev_level(gamma, ('entry', q), cfg, allow_ends=True))
        return GraphPoint('minus_free', None, q, gamma.end_minus, right, -flow_time_to(gamma, q, '-'))
    if target == 'rest6_plus':
        left = local_coords(p, ev_level(gamma, ('exit', p), cfg, allow_ends=True))
        return GraphPoint('plus_free', p, None, left, gamma.end_plus, flow_time_to(gamma, p, '+'))
    raise DomainError(f'Unknown restriction target {target!r}')


__all__ = ['VARIANTS', 'LocalChartPoint', 'local_coords', 'broken_pair', 'local_trajectory', 'chart_both_inside',
           'chart_both_inside_inverse', 'entry_exit', 'chart_through', 'chart_through_inverse', 'extended_eval',
           'rho_minus', 'rho_plus', 'chart_from_inside', 'chart_from_inside_inverse', 'chart_to_inside',
           'chart_to_inside_inverse', 'flow_time_to', 'with_time_inverse_start', 'from_inside_flow_time',
           'transition_time', 'scaling_identity', 'chart_with_time', 'local_chart_inverse', 'GraphPoint',
           'restriction']
