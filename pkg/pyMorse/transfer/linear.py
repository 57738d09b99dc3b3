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
Linear connecting maps of synthetic atlases.

A `LinearTransfer` sends an exit point z of its source to the pre-entry vector
v = A z + b in the chart of its target, and from there along the linear flow
to the entry set {|x| = Δ}: w = (Δ v_x/|v_x|, v_y |v_x|/Δ). The flow time
between the two sets is the constant `time`. An optional `margin` bounds
|v_x| from below; exit points whose pre-entry point comes closer to the
unstable space of the target lie outside the domain of the map.
"""

import logging
import math
from typing import Dict, List, Optional

import numpy as np

from ..exceptions import AtlasSchemaError, NotInDomainError
from ..model import LN2, CriticalPoint
from ..utils import norm

logger = logging.getLogger('pyMorse')


class TransferResult(object):
    """Outcome of following the flow from an exit point to the next entry set."""

    def __init__(self, source: Optional[CriticalPoint], z, target: CriticalPoint, w, time: float,
                 segments: Optional[List] = None):
        self.source: CriticalPoint = source
        """**(CriticalPoint):** Critical point whose exit set holds `z`."""
        self.z: np.ndarray = np.asarray(z, dtype=float)
        """**(ndarray):** Exit point, chart coordinates of `source`."""
        self.target: CriticalPoint = target
        """**(CriticalPoint):** Critical point whose entry set was hit."""
        self.w: np.ndarray = np.asarray(w, dtype=float)
        """**(ndarray):** Entry point, chart coordinates of `target`."""
        self.time: float = float(time)
        """**(float):** Flow time from `z` to `w`."""
        self._segments = segments

    def segments(self, model) -> List:
        if self._segments is not None:
            return self._segments
        from ..trajectory import TransferSegment
        return [TransferSegment(model, self.target, self.w, self.time, 0.0, self.source, self.z, self.time)]

    def __repr__(self):
        return "<TransferResult %s->%s T=%s w=%r>" % (getattr(self.source, 'id', None), self.target.id, self.time, self.w.tolist())

    def __getstate__(self):
        return {
            'source': None if self.source is None else self.source.id,
            'target': self.target.id,
            'z': self.z.tolist(),
            'w': self.w.tolist(),
            'time': self.time,
        }


class LinearTransfer(object):
    """An affine connecting map between the exit set of `source` and the entry set of `target`."""

    kind = 'linear'

    def __init__(self, source: CriticalPoint, target: CriticalPoint, matrix, offset=None, time: float = 2.0,
                 margin: float = 0.0):
        self.source: CriticalPoint = source
        self.target: CriticalPoint = target
        self.matrix: np.ndarray = np.atleast_2d(np.asarray(matrix, dtype=float))
        """**(ndarray):** Linear part A, shape (n, n)."""
        self.offset: np.ndarray = np.zeros(target.n) if offset is None else np.asarray(offset, dtype=float)
        """**(ndarray):** Translation b."""
        self.time: float = float(time)
        """**(float):** Flow time between exit and entry set."""
        self.margin: float = float(margin)
        """**(float):** Smallest admissible |v_x| of a pre-entry point."""
        n = source.n
        if self.matrix.shape != (target.n, n) or self.offset.shape != (target.n,):
            raise AtlasSchemaError(f'Connecting map {source.id}->{target.id}: matrix {self.matrix.shape} '
                                   f'and offset {self.offset.shape} do not fit dimension {n}')
        if self.margin < 0.0:
            raise AtlasSchemaError(f'Connecting map {source.id}->{target.id}: negative margin {self.margin}')
        if self.time < 2.0 * LN2:
            raise AtlasSchemaError(f'Connecting map {source.id}->{target.id}: flow time {self.time} '
                                   f'is shorter than the chart margins 2 ln 2')

    @classmethod
    def from_params(cls, source: CriticalPoint, target: CriticalPoint, params: Dict) -> 'LinearTransfer':
        if 'matrix' in params:
            matrix = params['matrix']
        elif 'scale' in params:
            matrix = float(params['scale']) * np.eye(source.n)
        elif 'diag' in params:
            matrix = np.diag(params['diag'])
        else:
            raise AtlasSchemaError(f'Connecting map {source.id}->{target.id} needs matrix, scale or diag')
        return cls(source, target, matrix, params.get('offset'), params.get('time', 2.0), params.get('margin', 0.0))

    def pre_entry(self, z) -> np.ndarray:
        return self.matrix @ np.asarray(z, dtype=float) + self.offset

    def entry(self, z) -> np.ndarray:
        """Entry point on S̃⁺ of the target (no domain check)."""
        v = self.pre_entry(z)
        vx, vy = self.target.split(v)
        r = norm(vx)
        d = self.target.delta
        return self.target.join(d * vx / r, vy * r / d)

    def contains(self, z) -> bool:
        vx, _ = self.target.split(self.pre_entry(z))
        if norm(vx) == 0.0 or norm(vx) < self.margin:
            return False
        _, wy = self.target.split(self.entry(z))
        return norm(wy) < self.target.delta

    def apply(self, z) -> TransferResult:
        if not self.contains(z):
            raise NotInDomainError(f'Exit point does not flow from {self.source.id} into U({self.target.id})',
                                   np.asarray(z).tolist())
        return TransferResult(self.source, z, self.target, self.entry(z), self.time)

    def __call__(self, z):
        result = self.apply(z)
        return result.w, result.time

    def __repr__(self):
        return "<LinearTransfer %s->%s T=%s>" % (self.source.id, self.target.id, self.time)

    def __getstate__(self):
        return {
            'source': self.source.id,
            'target': self.target.id,
            'kind': self.kind,
            'params': {
                'matrix': self.matrix.tolist(),
                'offset': self.offset.tolist(),
                'time': self.time,
                'margin': self.margin,
            },
        }


def exit_point(q: CriticalPoint, w) -> np.ndarray:
    """Exit point on S̃⁻ of a chart point entering at `w` on S̃⁺; needs w_y != 0."""
    x, y = q.split(w)
    r = norm(y)
    if r == 0.0:
        raise NotInDomainError(f'Entry point on the stable sphere of {q.id} never leaves U({q.id})')
    d = q.delta
    return q.join(x * r / d, d * y / r)


def transit_time(q: CriticalPoint, w) -> float:
    """Time from the entry point `w` to the exit set of `q`."""
    _, y = q.split(w)
    r = norm(y)
    return math.inf if r == 0.0 else math.log(q.delta / r)


__all__ = ['TransferResult', 'LinearTransfer', 'exit_point', 'transit_time']
