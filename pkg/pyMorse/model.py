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
This module contains the Euclidean Morse-Smale flow model: critical points
with their normal-form charts, the nested neighbourhood families around them,
the exact linear local flow, the interpolated vector field used by ambient
(numeric) models, and the `MorseModel` container tying critical points to the
connecting maps between their exit and entry spheres.

Chart coordinates are flat real vectors `v`; the first `stable_dim` entries
are the stable coordinates `x` and the rest the unstable coordinates `y`, so
that the Morse function reads `f(p) + |x|^2/2 - |y|^2/2` and the negative
gradient flow is `(exp(-t) x, exp(t) y)`.
"""

import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import AtlasSchemaError, DomainError
from .utils import CONFIG, Config, cutoff, norm

logger = logging.getLogger('pyMorse')

LN2 = math.log(2.0)

REGIONS = ('tilde_U_t', 'U_t', 'tilde_U', 'U', 'tilde_S_plus', 'tilde_S_minus', 'S_plus', 'S_minus')
"""
**(tuple of str):** Region names accepted by `membership`: the neighbourhoods
Ũ_t, U_t, Ũ = Ũ_1, U = U_1, the entry and exit sets S̃⁺ = {|x| = Δ},
S̃⁻ = {|y| = Δ}, and the stable/unstable spheres S⁺ = S̃⁺ ∩ {y = 0},
S⁻ = S̃⁻ ∩ {x = 0}.
"""


class EuclideanChart(object):
    """
    Normal-form chart of a critical point. In synthetic models the chart is
    abstract; in numeric models `origin` and `frame` place it in the ambient
    angle coordinates as `angles = origin + frame @ v`.
    """

    def __init__(self, stable_dim: int, unstable_dim: int, origin: Optional[Sequence[float]] = None,
                 frame: Optional[np.ndarray] = None):
        self.stable_dim: int = int(stable_dim)
        """**(int):** Number of stable coordinates, n - |p|."""
        self.unstable_dim: int = int(unstable_dim)
        """**(int):** Number of unstable coordinates, |p|."""
        self.origin: Optional[np.ndarray] = None if origin is None else np.asarray(origin, dtype=float)
        """**(ndarray or None):** Ambient coordinates of the critical point."""
        n = self.stable_dim + self.unstable_dim
        self.frame: np.ndarray = np.eye(n) if frame is None else np.asarray(frame, dtype=float)
        """**(ndarray):** Orthogonal matrix taking chart coordinates to ambient directions."""

    @property
    def dim(self) -> int:
        return self.stable_dim + self.unstable_dim

    @property
    def embedded(self) -> bool:
        return self.origin is not None

    def to_ambient(self, v: np.ndarray) -> np.ndarray:
        if self.origin is None:
            raise DomainError('Chart has no ambient embedding (synthetic atlas)')
        return self.origin + self.frame @ np.asarray(v, dtype=float)

    def from_ambient(self, angles: np.ndarray) -> np.ndarray:
        if self.origin is None:
            raise DomainError('Chart has no ambient embedding (synthetic atlas)')
        d = np.asarray(angles, dtype=float) - self.origin
        d = (d + math.pi) % (2.0 * math.pi) - math.pi
        return self.frame.T @ d

    def __getstate__(self):
        return {
            'stable_dim': self.stable_dim,
            'unstable_dim': self.unstable_dim,
            'origin': None if self.origin is None else self.origin.tolist(),
        }


class CriticalPoint(object):
    """A critical point together with its normal-form chart and chart radius Δ."""

    def __init__(self, id: str, index: int, value: float, delta: float, chart: EuclideanChart):
        if delta <= 0:
            raise AtlasSchemaError(f'Critical point {id!r}: delta must be positive, got {delta}')
        if not 0 <= index <= chart.dim or chart.unstable_dim != index:
            raise AtlasSchemaError(f'Critical point {id!r}: index {index} does not match its chart '
                                   f'({chart.stable_dim} stable, {chart.unstable_dim} unstable)')
        self.id: str = str(id)
        """**(str):** Identifier used in sequences, files and reports."""
        self.index: int = int(index)
        """**(int):** Morse index |p|."""
        self.value: float = float(value)
        """**(float):** Critical value f(p)."""
        self.delta: float = float(delta)
        """**(float):** Chart radius parameter Δ."""
        self.chart: EuclideanChart = chart
        """**(EuclideanChart):** Normal-form chart."""

    @property
    def n(self) -> int:
        return self.chart.dim

    @property
    def is_minimum(self) -> bool:
        return self.index == 0

    @property
    def is_maximum(self) -> bool:
        return self.index == self.n

    def split(self, v) -> Tuple[np.ndarray, np.ndarray]:
        v = np.asarray(v, dtype=float)
        return v[:self.chart.stable_dim], v[self.chart.stable_dim:]

    def join(self, x, y) -> np.ndarray:
        x = np.zeros(self.chart.stable_dim) if x is None else np.asarray(x, dtype=float)
        y = np.zeros(self.chart.unstable_dim) if y is None else np.asarray(y, dtype=float)
        return np.concatenate([x, y])

    def origin(self) -> np.ndarray:
        return np.zeros(self.n)

    def __repr__(self):
        return "<Critical point %r index %s value %s delta %s>" % (self.id, self.index, self.value, self.delta)

    def __str__(self):
        return "{0:<10}{1:>6}{2:>12.6g}{3:>10.4g}".format(self.id, self.index, self.value, self.delta)

    def __getstate__(self):
        return {
            'id': self.id,
            'index': self.index,
            'value': self.value,
            'delta': self.delta,
        }

    def state_ref(self) -> Dict:
        return {'kind': 'critical', 'q': self.id}


def _normal_form(p: CriticalPoint, x, y) -> float:
    return p.value + 0.5 * float(np.dot(x, x)) - 0.5 * float(np.dot(y, y))


def normal_form_value(p: CriticalPoint, x, y) -> float:
    """Evaluates the Morse function in the chart of `p`.

    Args:
        p (CriticalPoint): The critical point whose chart is used.
        x (array-like): Stable coordinates, |x| < 2Δ.
        y (array-like): Unstable coordinates, |y| < 2Δ.

    Returns:
        float: f(p) + |x|^2/2 - |y|^2/2
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != p.chart.stable_dim or y.size != p.chart.unstable_dim:
        raise DomainError(f'Coordinates of shape ({x.size}, {y.size}) do not fit the chart of {p.id}')
    if norm(x) >= 2.0 * p.delta or norm(y) >= 2.0 * p.delta:
        raise DomainError(f'Point outside the chart of {p.id}', (x.tolist(), y.tolist()))
    return _normal_form(p, x, y)


def local_flow(t: float, x, y) -> Tuple[np.ndarray, np.ndarray]:
    """Exact negative gradient flow of the normal form: (e^-t x, e^t y)."""
    return math.exp(-t) * np.asarray(x, dtype=float), math.exp(t) * np.asarray(y, dtype=float)


def _sphere_close(r: float, radius: float, eps: float) -> bool:
    return abs(r - radius) <= eps * radius


def membership(p: CriticalPoint, x, y, region: str, t: float = 1.0, cfg: Config = CONFIG,
               mode: str = 'synthetic') -> bool:
    """Tests whether chart coordinates (x, y) of `p` lie in one of the `REGIONS`.

    Args:
        p (CriticalPoint): Owner of the chart.
        x, y (array-like): Stable and unstable coordinates.
        region (str): One of `REGIONS`.
        t (float, optional): Parameter of Ũ_t / U_t, in (0, 1]. Defaults to 1.
        cfg (Config, optional): Source of the sphere tolerance. Defaults to `CONFIG`.
        mode (str, optional): Model mode selecting the tolerance. Defaults to 'synthetic'.

    Returns:
        bool: Whether the point satisfies the region's inequalities.
    """
    if region not in REGIONS:
        raise DomainError(f'Unknown region {region!r}')
    if region in ('tilde_U_t', 'U_t') and not 0.0 < t <= 1.0:
        raise DomainError('Neighbourhood parameter t must lie in (0, 1]', t)
    a, b, d = norm(x), norm(y), p.delta
    eps = cfg.get('eps_sphere', mode)
    if region == 'tilde_U':
        region, t = 'tilde_U_t', 1.0
    elif region == 'U':
        region, t = 'U_t', 1.0
    if region == 'tilde_U_t':
        return a < (1.0 + t) * d and b < (1.0 + t) * d and a * b < d * d * t
    if region == 'U_t':
        return a < d and b < d and a * b < d * d * t
    if region == 'tilde_S_plus':
        return _sphere_close(a, d, eps) and b < 2.0 * d
    if region == 'tilde_S_minus':
        return _sphere_close(b, d, eps) and a < 2.0 * d
    if region == 'S_plus':
        return _sphere_close(a, d, eps) and b <= eps * d
    return _sphere_close(b, d, eps) and a <= eps * d


class NeighborhoodFamily(object):
    """The neighbourhoods Ũ_t(p) and U_t(p) for one value of t."""

    def __init__(self, owner: CriticalPoint, t: float):
        if not 0.0 < t <= 1.0:
            raise DomainError('Neighbourhood parameter t must lie in (0, 1]', t)
        self.owner: CriticalPoint = owner
        """**(CriticalPoint):** Centre of the family."""
        self.t: float = float(t)
        """**(float):** Parameter in (0, 1]."""

    def contains(self, v, tilde: bool = True) -> bool:
        x, y = self.owner.split(v)
        return membership(self.owner, x, y, 'tilde_U_t' if tilde else 'U_t', self.t)

    def boundary_sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Samples points on the boundary of Ũ_t, one per row."""
        p, t, d = self.owner, self.t, self.owner.delta
        knee = t * d / (1.0 + t)
        out = np.zeros((count, p.n))
        for i in range(count):
            piece = rng.integers(3)
            if piece == 0:
                a, b = (1.0 + t) * d, rng.uniform(0.0, knee)
            elif piece == 1:
                a = math.exp(rng.uniform(math.log(knee), math.log((1.0 + t) * d)))
                b = t * d * d / a
            else:
                a, b = rng.uniform(0.0, knee), (1.0 + t) * d
            out[i] = p.join(_random_direction(p.chart.stable_dim, rng) * a,
                            _random_direction(p.chart.unstable_dim, rng) * b)
        return out

    def __repr__(self):
        return "<Neighbourhood family of %r t=%s>" % (self.owner.id, self.t)


def _random_direction(dim: int, rng: np.random.Generator) -> np.ndarray:
    if dim == 0:
        return np.zeros(0)
    v = rng.normal(size=dim)
    return v / norm(v)


def neighborhood_sample(p: CriticalPoint, t: float, count: int, rng: np.random.Generator) -> np.ndarray:
    return NeighborhoodFamily(p, t).boundary_sample(count, rng)


def linear_field(p: CriticalPoint, v) -> np.ndarray:
    """The linear normal-form field (-x, y) in chart coordinates."""
    x, y = p.split(v)
    return p.join(-x, y)


AMBIENT_FUNCTIONS: Dict[str, Tuple[Callable, Callable]] = {
    'cos(theta)+cos(phi)': (
        lambda a: math.cos(a[0]) + math.cos(a[1]),
        lambda a: np.array([-math.sin(a[0]), -math.sin(a[1])]),
    ),
}
"""
**(dict):** Ambient Morse functions on the flat torus that atlas files may
name, mapping the expression to its value and gradient.
"""


class TorusAmbient(object):
    """
    The flat 2-torus with a Morse function `f` and the interpolated field
    Y_r: the linear normal-form field on |v| <= r around each critical point,
    the negative gradient of `f` outside |v| >= 2r.
    """

    def __init__(self, expression: str, r: float):
        if expression not in AMBIENT_FUNCTIONS:
            raise AtlasSchemaError(f'Unsupported ambient function {expression!r}; '
                                   f'known: {sorted(AMBIENT_FUNCTIONS)}')
        self.expression: str = expression
        """**(str):** Name of the Morse function."""
        self.r: float = float(r)
        """**(float):** Inner radius of the interpolation cutoff."""
        self.f, self.grad = AMBIENT_FUNCTIONS[expression]
        self.critical_points: List[CriticalPoint] = []
        """**(list of CriticalPoint):** Filled in by the model once charts are known."""

    dim = 2

    def wrap(self, angles) -> np.ndarray:
        return np.mod(np.asarray(angles, dtype=float), 2.0 * math.pi)

    def embed(self, angles) -> np.ndarray:
        a = np.asarray(angles, dtype=float)
        return np.array([math.cos(a[0]), math.sin(a[0]), math.cos(a[1]), math.sin(a[1])])

    def _nearest(self, angles) -> Tuple[Optional[CriticalPoint], np.ndarray]:
        best, best_v = None, None
        for p in self.critical_points:
            v = p.chart.from_ambient(angles)
            if best is None or norm(v) < norm(best_v):
                best, best_v = p, v
        return best, best_v

    def field(self, angles) -> np.ndarray:
        p, _ = self._nearest(angles)
        if p is None:
            return -self.grad(angles)
        return interpolated_vector_field(self, p, self.r, angles)

    def value(self, angles) -> float:
        """Lyapunov function of Y_r: f blended with the normal form inside the cutoff."""
        p, v = self._nearest(angles)
        f = self.f(angles)
        if p is None:
            return f
        phi = float(cutoff(norm(v), self.r, 2.0 * self.r))
        if phi == 0.0:
            return f
        x, y = p.split(v)
        return (1.0 - phi) * f + phi * _normal_form(p, x, y)

    def __getstate__(self):
        return {'type': 'torus', 'f': self.expression, 'r': self.r}


def interpolated_vector_field(ambient: TorusAmbient, p: CriticalPoint, r: float, point) -> np.ndarray:
    """Blends the ambient negative gradient with the linear field of `p`.

    Args:
        ambient (TorusAmbient): Supplies the ambient gradient.
        p (CriticalPoint): Critical point whose chart carries the linear field.
        r (float): Inner cutoff radius; the blend is linear inside r and pure gradient beyond 2r.
        point (array-like): Ambient angle coordinates.

    Returns:
        ndarray: (1 - φ)(-∇f) + φ Y_lin in ambient coordinates.
    """
    point = np.asarray(point, dtype=float)
    if point.size != ambient.dim or not np.all(np.isfinite(point)):
        raise DomainError('Point outside the ambient domain', point.tolist())
    v = p.chart.from_ambient(point)
    phi = float(cutoff(norm(v), r, 2.0 * r))
    g = -ambient.grad(point)
    if phi == 0.0:
        return g
    lin = p.chart.frame @ linear_field(p, v)
    return (1.0 - phi) * g + phi * lin


class LocalPoint(object):
    """A point given in the chart of a critical point."""

    def __init__(self, q: CriticalPoint, v):
        self.q: CriticalPoint = q
        self.v: np.ndarray = np.asarray(v, dtype=float)

    @property
    def x(self) -> np.ndarray:
        return self.q.split(self.v)[0]

    @property
    def y(self) -> np.ndarray:
        return self.q.split(self.v)[1]

    def __repr__(self):
        return "<LocalPoint %s %r>" % (self.q.id, self.v.tolist())

    def __getstate__(self):
        return {'kind': 'local', 'q': self.q.id, 'v': self.v.tolist()}


class BoxPoint(object):
    """
    A point outside every chart, given by the entry point `w` on S̃⁺ of the
    critical point it flows into next and the remaining time `u` until entry.
    """

    def __init__(self, q: CriticalPoint, w, u: float):
        self.q: CriticalPoint = q
        self.w: np.ndarray = np.asarray(w, dtype=float)
        self.u: float = float(u)

    def __repr__(self):
        return "<BoxPoint %s %r u=%s>" % (self.q.id, self.w.tolist(), self.u)

    def __getstate__(self):
        return {'kind': 'box', 'q': self.q.id, 'w': self.w.tolist(), 'u': self.u}


class AmbientPoint(object):
    """A point of the ambient manifold of a numeric model."""

    def __init__(self, angles):
        self.angles: np.ndarray = np.asarray(angles, dtype=float)

    def __repr__(self):
        return "<AmbientPoint %r>" % (self.angles.tolist(),)

    def __getstate__(self):
        return {'kind': 'ambient', 'angles': self.angles.tolist()}


class MorseModel(object):
    """
    Contains the critical points of a Euclidean Morse-Smale model and the
    connecting maps between them. Synthetic models declare the maps between
    exit and entry spheres directly; numeric models carry a `TorusAmbient`
    and shoot them through the interpolated field.
    """

    def __init__(self, name: str, dimension: int, critical_points: Sequence[CriticalPoint],
                 transfers: Sequence = (), ambient: Optional[TorusAmbient] = None,
                 declared: Optional[Dict[Tuple[str, str], int]] = None, engine=None):
        self.name: str = name
        """**(str):** Model name."""
        self.dimension: int = int(dimension)
        """**(int):** Dimension n of the manifold."""
        self.critical_points: List[CriticalPoint] = sorted(critical_points, key=lambda p: -p.value)
        """**(list of CriticalPoint):** Critical points by decreasing value."""
        self.transfers: List = list(transfers)
        """**(list):** Declared connecting maps (synthetic mode)."""
        self.ambient: Optional[TorusAmbient] = ambient
        """**(TorusAmbient or None):** Ambient manifold (numeric mode)."""
        self.declared: Dict[Tuple[str, str], int] = dict(declared or {})
        """**(dict):** Declared trajectory counts per (source, target) pair."""
        self.engine = engine
        """Shooting engine used in numeric mode."""
        self._by_id: Dict[str, CriticalPoint] = {p.id: p for p in self.critical_points}
        if ambient is not None:
            ambient.critical_points = self.critical_points
        if engine is not None:
            engine.bind(self)
        self.check()

    @property
    def mode(self) -> str:
        return 'synthetic' if self.ambient is None else 'numeric'

    def point(self, id) -> CriticalPoint:
        if isinstance(id, CriticalPoint):
            return id
        try:
            return self._by_id[str(id)]
        except KeyError:
            raise DomainError(f'Model {self.name!r} has no critical point {id!r}')

    def transfers_from(self, p: CriticalPoint) -> List:
        """Declared maps out of `p`, ordered by decreasing target value."""
        return sorted((m for m in self.transfers if m.source.id == p.id), key=lambda m: -m.target.value)

    def first_hit(self, p: CriticalPoint, z, cfg: Config = CONFIG):
        """
        Follows the flow from the exit point `z` of `p` to the first chart it
        enters. Returns a `pyMorse.transfer.TransferResult` or None when the
        flow line enters no chart.
        """
        z = np.asarray(z, dtype=float)
        if self.engine is not None:
            return self.engine.first_hit(p, z, cfg)
        for m in self.transfers_from(p):
            if m.contains(z):
                return m.apply(z)
        return None

    def check(self):
        """Validates index bounds, chart shapes and the direction of declared maps."""
        for p in self.critical_points:
            if p.n != self.dimension:
                raise AtlasSchemaError(f'Critical point {p.id!r} has a chart of dimension {p.n}, '
                                       f'model dimension is {self.dimension}')
        for m in self.transfers:
            if m.source.value <= m.target.value:
                raise AtlasSchemaError(f'Connecting map {m.source.id}->{m.target.id} does not decrease f')
            if m.source.index == 0:
                raise AtlasSchemaError(f'Connecting map out of the minimum {m.source.id!r}')
        if self.mode == 'numeric':
            # chart closures pairwise disjoint
            pts = self.critical_points
            for i, p in enumerate(pts):
                for q in pts[i + 1:]:
                    gap = norm(p.chart.from_ambient(q.chart.origin))
                    reach = 2.0 * math.sqrt(2.0) * (p.delta + q.delta)
                    if gap <= reach:
                        raise AtlasSchemaError(f'Charts of {p.id!r} and {q.id!r} overlap '
                                               f'(distance {gap:.4g}, need > {reach:.4g})')
        logger.debug(f"Model {self.name} checked: {len(self.critical_points)} critical points, "
                     f"{len(self.transfers)} declared maps, mode {self.mode}")

    def embed(self, point) -> np.ndarray:
        """Vector representing a point object for Hausdorff distances."""
        if isinstance(point, CriticalPoint):
            return self.embed_local(point, point.origin())
        if isinstance(point, LocalPoint):
            return self.embed_local(point.q, point.v)
        if isinstance(point, BoxPoint):
            return self.embed_box(point.q, point.w, point.u)
        return self.embed_ambient(point.angles)

    def value(self, point) -> float:
        """Function value of a point; box points have no intrinsic value."""
        if isinstance(point, CriticalPoint):
            return point.value
        if isinstance(point, LocalPoint):
            return _normal_form(point.q, point.x, point.y)
        if isinstance(point, AmbientPoint):
            return self.ambient.value(point.angles)
        raise DomainError('Box points carry no intrinsic function value', point)

    def point_from_state(self, state: Dict):
        kind = state.get('kind')
        if kind == 'critical':
            return self.point(state['q'])
        if kind == 'local':
            return LocalPoint(self.point(state['q']), state['v'])
        if kind == 'box':
            return BoxPoint(self.point(state['q']), state['w'], state['u'])
        if kind == 'ambient':
            return AmbientPoint(state['angles'])
        raise AtlasSchemaError(f'Unknown point kind {kind!r}')

    def embed_local(self, q: CriticalPoint, v) -> np.ndarray:
        """Vector used for Hausdorff distances of a chart point."""
        v = np.asarray(v, dtype=float)
        if self.mode == 'numeric':
            return self.ambient.embed(q.chart.to_ambient(v))
        return np.concatenate([[self._tag(q, 0)], v, [0.0]])

    def embed_box(self, q: CriticalPoint, w, u: float) -> np.ndarray:
        return np.concatenate([[self._tag(q, 1)], np.asarray(w, dtype=float), [-u * q.delta]])

    def embed_ambient(self, angles) -> np.ndarray:
        return self.ambient.embed(angles)

    def _tag(self, q: CriticalPoint, kind: int) -> float:
        # regions are kept far apart so that distances never mix them
        return 1000.0 * (2 * self.critical_points.index(q) + kind + 1)

    def __repr__(self):
        return "<MorseModel %r dim %s, %s critical points, %s>" % (
            self.name, self.dimension, len(self.critical_points), self.mode)

    def __str__(self):
        rows = ["{0:<10}{1:>6}{2:>12}{3:>10}".format('ID', 'INDEX', 'VALUE', 'DELTA')]
        rows += [str(p) for p in self.critical_points]
        return '\n'.join(rows)

    def __getstate__(self):
        state = {
            'name': self.name,
            'dimension': self.dimension,
            'critical_points': [p.__getstate__() for p in self.critical_points],
            'connecting_maps': [m.__getstate__() for m in self.transfers],
        }
        if self.ambient is not None:
            state['ambient'] = self.ambient.__getstate__()
        if self.declared:
            state['declared'] = [{'source': s, 'target': t, 'count': c} for (s, t), c in self.declared.items()]
        return state


__all__ = ['REGIONS', 'EuclideanChart', 'CriticalPoint', 'NeighborhoodFamily', 'normal_form_value',
           'local_flow', 'membership', 'neighborhood_sample', 'linear_field', 'interpolated_vector_field',
           'TorusAmbient', 'AMBIENT_FUNCTIONS', 'LocalPoint', 'BoxPoint', 'AmbientPoint', 'MorseModel', 'LN2']
