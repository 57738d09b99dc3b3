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
Built-in example models and the JSON atlas loader.

The synthetic atlases (`sphere_height_<n>`, `chain3`, `chain4`) declare their
connecting maps as linear maps between exit and entry spheres. They need not
come from a closed manifold: only the chart data and the maps are modelled.
`torus_Yr` is the numeric model on the flat torus with f = cos θ + cos φ and
the interpolated field Y_r.

An atlas file looks like::

    {
        "name": "chain3",
        "dimension": 2,
        "critical_points": [{"id": "max", "index": 2, "value": 2.0, "delta": 0.25}, ...],
        "connecting_maps": [{"source": "max", "target": "s", "kind": "linear",
                             "params": {"scale": 2.0}}, ...],
        "ambient": {"type": "torus", "f": "cos(theta)+cos(phi)", "r": 0.6},
        "declared": [{"source": "max", "target": "s", "count": 2}, ...]
    }

Critical points of numeric atlases also carry `origin` (ambient angles) and
optionally `frame` (an orthogonal matrix taking chart to ambient directions).
Linear `params` take one of `matrix`, `scale` or `diag`, and optionally
`offset`, `time` and `margin`.
"""

import logging
import math
import os
from typing import Callable, Dict, Union

import numpy as np

try:
    import ujson as json
except ImportError:
    import json

from .exceptions import AtlasSchemaError
from .model import CriticalPoint, EuclideanChart, MorseModel, TorusAmbient
from .transfer import LinearTransfer, ShootingEngine

logger = logging.getLogger('pyMorse')

TRANSFER_KINDS: Dict[str, type] = {
    LinearTransfer.kind: LinearTransfer,
}
"""**(dict):** Connecting map classes by the `kind` used in atlas files."""

DELTA = 0.25


def _point(id: str, index: int, value: float, n: int, delta: float = DELTA, origin=None, frame=None) -> CriticalPoint:
    return CriticalPoint(id, index, value, delta, EuclideanChart(n - index, index, origin, frame))


def sphere_height(n: int = 2, delta: float = DELTA) -> MorseModel:
    """The height function on the n-sphere: a maximum, a minimum and the identity connecting map."""
    if n < 1:
        raise AtlasSchemaError(f'sphere_height needs n >= 1, got {n}')
    top = _point('max', n, 1.0, n, delta)
    bottom = _point('min', 0, -1.0, n, delta)
    declared = {('max', 'min'): 2} if n == 1 else {}
    return MorseModel(f'sphere_height_{n}', n, [top, bottom], [LinearTransfer(top, bottom, np.eye(n))],
                      declared=declared)


def chain3(delta: float = DELTA) -> MorseModel:
    """A maximum, a saddle and a minimum in dimension 2, with two trajectories per adjacent pair."""
    top = _point('max', 2, 2.0, 2, delta)
    saddle = _point('s', 1, 0.0, 2, delta)
    bottom = _point('min', 0, -2.0, 2, delta)
    transfers = [
        LinearTransfer(top, saddle, 2.0 * np.eye(2)),
        LinearTransfer(saddle, bottom, np.diag([1.0, 2.0])),
        LinearTransfer(top, bottom, 3.0 * np.eye(2)),
    ]
    return MorseModel('chain3', 2, [top, saddle, bottom], transfers,
                      declared={('max', 's'): 2, ('s', 'min'): 2})


def chain4(delta: float = DELTA) -> MorseModel:
    """
    Two saddles of index 2 and 1 between a maximum and a minimum in dimension
    3, so that M(max, min) can break twice.

    The stable part of every pre-entry point into a saddle stays away from
    zero (a margin into s1, offsets into s2), so each connection is a
    transverse root. M(max, s1) is the pair of poles (+-delta, 0, 0), M(s1, s2)
    the exit points with y = (+-delta, 0), and M(max, s2) the two half circles
    of z2 = 0 between the poles.
    """
    top = _point('max', 3, 3.0, 3, delta)
    s1 = _point('s1', 2, 2.0, 3, delta)
    s2 = _point('s2', 1, 1.0, 3, delta)
    bottom = _point('min', 0, 0.0, 3, delta)
    transfers = [
        LinearTransfer(top, s1, np.diag([2.0, 0.5, 0.5]), margin=delta),
        LinearTransfer(s1, s2, np.diag([1.0, 1.0, 2.0]), [2.0 * delta, 0.0, 0.0]),
        LinearTransfer(s2, bottom, np.diag([1.0, 1.0, 2.0])),
        LinearTransfer(top, s2, np.diag([1.0, 1.0, 2.0]), [0.0, 3.0 * delta, 0.0]),
        LinearTransfer(top, bottom, 3.0 * np.eye(3)),
        LinearTransfer(s1, bottom, 3.0 * np.eye(3)),
    ]
    return MorseModel('chain4', 3, [top, s1, s2, bottom], transfers,
                      declared={('max', 's1'): 2, ('s1', 's2'): 2, ('s2', 'min'): 2})


def torus_Yr(r: float = 0.6, delta: float = 0.2) -> MorseModel:
    """cos θ + cos φ on the flat torus, integrated along the interpolated field Y_r."""
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    points = [
        _point('max', 2, 2.0, 2, delta, origin=(0.0, 0.0)),
        _point('sa', 1, 0.0, 2, delta, origin=(math.pi, 0.0)),
        _point('sb', 1, 0.0, 2, delta, origin=(0.0, math.pi), frame=swap),
        _point('min', 0, -2.0, 2, delta, origin=(math.pi, math.pi)),
    ]
    declared = {('max', 'sa'): 2, ('max', 'sb'): 2, ('sa', 'min'): 2, ('sb', 'min'): 2}
    return MorseModel('torus_Yr', 2, points, ambient=TorusAmbient('cos(theta)+cos(phi)', r),
                      declared=declared, engine=ShootingEngine())


BUILTIN: Dict[str, Callable[[], MorseModel]] = {
    'chain3': chain3,
    'chain4': chain4,
    'torus_Yr': torus_Yr,
}
"""**(dict):** Example constructors by name; `sphere_height_<n>` is resolved separately."""


def _require(state: Dict, key: str, where: str):
    if key not in state:
        raise AtlasSchemaError(f'{where}: missing key {key!r}')
    return state[key]


def from_dict(state: Dict, name: str = 'atlas') -> MorseModel:
    """Builds a model from a parsed atlas.

    Args:
        state (dict): The atlas, in the layout described in the module docstring.
        name (str, optional): Fallback name when the atlas has none. Defaults to 'atlas'.

    Returns:
        MorseModel
    """
    if not isinstance(state, dict):
        raise AtlasSchemaError(f'Atlas must be a JSON object, got {type(state).__name__}')
    name = state.get('name', name)
    n = int(_require(state, 'dimension', name))
    points = []
    for i, cp in enumerate(_require(state, 'critical_points', name)):
        where = f'{name}: critical_points[{i}]'
        frame = cp.get('frame')
        points.append(_point(str(_require(cp, 'id', where)), int(_require(cp, 'index', where)),
                             float(_require(cp, 'value', where)), n, float(cp.get('delta', DELTA)),
                             cp.get('origin'), None if frame is None else np.asarray(frame, dtype=float)))
    by_id = {p.id: p for p in points}
    if len(by_id) != len(points):
        raise AtlasSchemaError(f'{name}: duplicate critical point ids')

    def lookup(pid, where):
        try:
            return by_id[str(pid)]
        except KeyError:
            raise AtlasSchemaError(f'{where}: unknown critical point {pid!r}')

    transfers = []
    for i, cm in enumerate(state.get('connecting_maps', [])):
        where = f'{name}: connecting_maps[{i}]'
        kind = cm.get('kind', 'linear')
        if kind not in TRANSFER_KINDS:
            raise AtlasSchemaError(f'{where}: unknown kind {kind!r}; known: {sorted(TRANSFER_KINDS)}')
        source = lookup(_require(cm, 'source', where), where)
        target = lookup(_require(cm, 'target', where), where)
        transfers.append(TRANSFER_KINDS[kind].from_params(source, target, cm.get('params', {})))
    ambient, engine = None, None
    if state.get('ambient') is not None:
        amb = state['ambient']
        if amb.get('type') != 'torus':
            raise AtlasSchemaError(f'{name}: unsupported ambient type {amb.get("type")!r}')
        if transfers:
            raise AtlasSchemaError(f'{name}: numeric atlases shoot their connecting maps; drop connecting_maps')
        ambient = TorusAmbient(_require(amb, 'f', f'{name}: ambient'), float(amb.get('r', 0.6)))
        engine = ShootingEngine()
        for p in points:
            if not p.chart.embedded:
                raise AtlasSchemaError(f'{name}: critical point {p.id!r} of a numeric atlas needs an origin')
    declared = {}
    for d in state.get('declared', []):
        declared[(lookup(d['source'], name).id, lookup(d['target'], name).id)] = int(d['count'])
    model = MorseModel(name, n, points, transfers, ambient, declared, engine)
    logger.debug(f"Loaded atlas {name}: {len(points)} critical points, mode {model.mode}")
    return model


def load(source: Union[str, Dict]) -> MorseModel:
    """Returns a built-in example by name, or the model of an atlas file or dict.

    Args:
        source (str or dict): 'chain3', 'chain4', 'torus_Yr', 'sphere_height_<n>', a path to a JSON
            atlas, or an already parsed atlas.

    Returns:
        MorseModel
    """
    if isinstance(source, dict):
        return from_dict(source)
    if source in BUILTIN:
        return BUILTIN[source]()
    if source.startswith('sphere_height_'):
        suffix = source[len('sphere_height_'):]
        if not suffix.isdigit():
            raise AtlasSchemaError(f'Bad sphere dimension in {source!r}')
        return sphere_height(int(suffix))
    if not os.path.isfile(source):
        raise AtlasSchemaError(f'{source!r} is neither a built-in example ({", ".join(sorted(BUILTIN))}, '
                               f'sphere_height_<n>) nor an atlas file')
    with open(source) as fp:
        try:
            state = json.load(fp)
        except ValueError as e:
            raise AtlasSchemaError(f'{source}: invalid JSON ({e})')
    return from_dict(state, os.path.splitext(os.path.basename(source))[0])


__all__ = ['TRANSFER_KINDS', 'DELTA', 'sphere_height', 'chain3', 'chain4', 'torus_Yr', 'BUILTIN', 'from_dict',
           'load']
