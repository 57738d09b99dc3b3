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
This module contains generic utilities and configuration information for use
by the other submodules of the `pyMorse` package: the trace logger, the
tolerance configuration, the quintic cutoff and a few sphere helpers.
"""

import copy
import io
import logging
import logging.handlers
import os
import traceback
from typing import Dict, Any, Optional, List, Union

import numpy as np

from .exceptions import ConfigError

_srcfile = __file__
TRACE = logging.DEBUG - 5


class TraceLogger(logging.Logger):
    def __init__(self, name):
        logging.Logger.__init__(self, name)
        logging.addLevelName(TRACE, 'TRACE')
        return

    def trace(self, msg, *args, **kwargs):
        self.log(TRACE, msg, *args, **kwargs)

    def findCaller(self, stack_info=False, stacklevel=1):
        """
        Overload built-in findCaller method
        to omit not only logging/__init__.py but also the current file
        """
        f = logging.currentframe()
        if f is not None:
            f = f.f_back
        orig_f = f
        while f and stacklevel > 1:
            f = f.f_back
            stacklevel -= 1
        if not f:
            f = orig_f
        rv = "(unknown file)", 0, "(unknown function)", None
        while hasattr(f, "f_code"):
            co = f.f_code
            filename = os.path.normcase(co.co_filename)
            if filename in (logging._srcfile, _srcfile):
                f = f.f_back
                continue
            sinfo = None
            if stack_info:
                sio = io.StringIO()
                sio.write('Stack (most recent call last):\n')
                traceback.print_stack(f, file=sio)
                sinfo = sio.getvalue()
                if sinfo[-1] == '\n':
                    sinfo = sinfo[:-1]
                sio.close()
            rv = (co.co_filename, f.f_lineno, co.co_name, sinfo)
            break
        return rv


def configure_trace_logging():
    if getattr(logging.handlers.logging.getLoggerClass(), 'trace', None) is None:
        logging.setLoggerClass(TraceLogger)


DEFAULTS: Dict[str, Any] = {
    'eps_sphere.synthetic': 1e-9,
    'eps_sphere.numeric': 1e-6,
    'eps_match.synthetic': 1e-8,
    'eps_match.numeric': 1e-5,
    'eps_event.synthetic': 1e-8,
    'eps_event.numeric': 1e-6,
    'eps_stable': 1e-8,
    'rk_rtol': 1e-10,
    'rk_atol': 1e-12,
    'max_time': 200.0,
    'samples': 512,
    'scan_points': 72,
    'bisect_tol': 1e-10,
    'newton_starts': 8,
    'newton_max_iter': 50,
    'newton_tol': 1e-12,
    'armijo_c': 1e-4,
    'armijo_shrink': 0.5,
    'multistart_spread': 0.05,
    't_ladder': [0.5, 0.25, 0.125, 0.0625],
    'shell_fractions': [0.5, 0.9],
    'projection_blend': True,
    'theta_min': 1e-3,
    'rank_tol': 1e-7,
    'avoid_radius': 1e-3,
    'assoc_tol': 1e-5,
    'inverse_tol': 1e-6,
    'verify_samples': 20,
    'seed': 0,
}
"""
**(dict):** Every numeric knob of the library with its default value.
Keys with a `.synthetic` or `.numeric` suffix are looked up per model mode.
Tolerances named `eps_match` and `eps_stable` are relative to the chart
radius of the critical point they are applied at.
"""


def _default_for(key: str) -> Any:
    if key in DEFAULTS:
        return DEFAULTS[key]
    return next((v for k, v in DEFAULTS.items() if k.startswith(key + '.')), None)


def _parse_value(raw: str, like: Any = None) -> Union[bool, int, float, str, List[float]]:
    """Parses a configuration value, typed after `like` (the default of the key) when given."""
    text = raw.strip()
    if like is not None:
        try:
            if isinstance(like, bool):
                if text.lower() not in ('true', 'yes', 'on', 'false', 'no', 'off'):
                    raise ValueError(text)
                return text.lower() in ('true', 'yes', 'on')
            if isinstance(like, list):
                return [float(item) for item in text.strip('[]').split(',') if item.strip()]
            if isinstance(like, int):
                return int(text)
            if isinstance(like, float):
                return float(text)
        except ValueError:
            raise ConfigError(f"Cannot read {text!r} as {type(like).__name__}")
    if text.lower() in ('true', 'yes', 'on'):
        return True
    if text.lower() in ('false', 'no', 'off'):
        return False
    if ',' in text:
        return [float(item) for item in text.strip('[]').split(',') if item.strip()]
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


class Config(object):
    """
    Holds the tolerances, sample counts and t-ladder used by every numeric
    operation. Instances are passed explicitly; operations default to the
    module-level `CONFIG`.
    """

    def __init__(self, **overrides):
        self._values: Dict[str, Any] = copy.deepcopy(DEFAULTS)
        """**(dict):** Current values, keyed like `DEFAULTS`."""
        for key, value in overrides.items():
            self.set(key.replace('__', '.'), value)

    @classmethod
    def load(cls, path: str) -> 'Config':
        """Reads a key=value configuration file.

        Args:
            path (str): Path of the file. Blank lines and `#` comments are ignored.

        Returns:
            Config: A new configuration with the file's values applied on top of the defaults.
        """
        cfg = cls()
        with open(path) as fp:
            for lineno, line in enumerate(fp, start=1):
                line = line.split('#', 1)[0].strip()
                if not line:
                    continue
                if '=' not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
                key, raw = line.split('=', 1)
                key = key.strip()
                try:
                    value = _parse_value(raw, _default_for(key))
                except ConfigError as e:
                    raise ConfigError(f"{path}:{lineno}: {key}: {e}")
                cfg.set(key, value)
        return cfg

    def set(self, key: str, value: Any):
        if key not in self._values and not any(k.startswith(key + '.') for k in self._values):
            raise ConfigError(f"Unknown configuration key {key!r}")
        if key in self._values:
            self._values[key] = value
        else:
            # a bare key sets both mode variants
            for k in list(self._values):
                if k.startswith(key + '.'):
                    self._values[k] = value

    def get(self, key: str, mode: Optional[str] = None) -> Any:
        if mode is not None and f'{key}.{mode}' in self._values:
            return self._values[f'{key}.{mode}']
        if key in self._values:
            return self._values[key]
        raise ConfigError(f"Unknown configuration key {key!r} (mode {mode!r})")

    def __getitem__(self, key: str) -> Any:
        return self.get(key)

    def copy(self, **overrides) -> 'Config':
        cfg = Config()
        cfg._values = copy.deepcopy(self._values)
        for key, value in overrides.items():
            cfg.set(key.replace('__', '.'), value)
        return cfg

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(int(self.get('seed')))

    def __repr__(self):
        return "<pyMorse Config %r>" % (self._values,)

    def __getstate__(self):
        return dict(self._values)


# A global configuration used as the default by every operation.
CONFIG = Config()


def smoothstep(s: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Quintic smoothstep, 0 for s <= 0 and 1 for s >= 1, C2 in between."""
    s = np.clip(s, 0.0, 1.0)
    return s * s * s * (s * (6.0 * s - 15.0) + 10.0)


def cutoff(r: Union[float, np.ndarray], inner: float, outer: float) -> Union[float, np.ndarray]:
    """1 on [0, inner], 0 on [outer, inf), quintic in between."""
    return 1.0 - smoothstep((np.asarray(r, dtype=float) - inner) / (outer - inner))


def norm(v) -> float:
    return float(np.linalg.norm(v)) if np.size(v) else 0.0


def to_sphere(v: np.ndarray, radius: float) -> np.ndarray:
    """Radial projection of a nonzero vector onto the sphere of the given radius."""
    n = norm(v)
    if n == 0.0:
        raise ValueError("Cannot project the zero vector onto a sphere")
    return radius * np.asarray(v, dtype=float) / n


def tangent_basis(p: np.ndarray) -> np.ndarray:
    """
    Orthonormal basis of the tangent space of the round sphere through `p`,
    as the columns of a (dim, dim - 1) matrix. Empty for 0-spheres.
    """
    p = np.asarray(p, dtype=float)
    dim = p.size
    if dim <= 1:
        return np.zeros((dim, 0))
    u = p / norm(p)
    # Householder reflection taking e_0 to u; its other columns span u-perp
    e = np.zeros(dim)
    e[0] = 1.0
    w = e - u
    if norm(w) < 1e-14:
        return np.eye(dim)[:, 1:]
    w = w / norm(w)
    h = np.eye(dim) - 2.0 * np.outer(w, w)
    return h[:, 1:]


def sphere_chart(base: np.ndarray, radius: float):
    """
    Local parametrization of a sphere around `base`: returns a function taking
    tangent coordinates to sphere points (radial retraction), and its dimension.
    """
    base = np.asarray(base, dtype=float)
    basis = tangent_basis(base)

    def point(theta: np.ndarray) -> np.ndarray:
        if basis.shape[1] == 0:
            return base.copy()
        return to_sphere(base + basis @ np.asarray(theta, dtype=float), radius)
    return point, basis.shape[1]


def get_object_properties(obj: Any, deep_copy: bool = True, remove_private: bool = False, recursive: bool = True) -> Optional[Dict[str, Any]]:
    """
    Flattens a value object into JSON-friendly data: objects with
    `__getstate__` are expanded recursively, numpy arrays become lists.
    """
    if obj is None:
        return None

    if isinstance(obj, np.ndarray):
        return obj.tolist()

    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()

    if isinstance(obj, (list, tuple)):
        return [get_object_properties(item, deep_copy, remove_private, recursive) for item in obj]

    if isinstance(obj, dict):
        return {key: get_object_properties(value, deep_copy, remove_private, recursive)
                for key, value in obj.items()}

    getstate = getattr(type(obj), '__getstate__', None)
    if getstate is not None and getstate is not getattr(object, '__getstate__', None):
        state = obj.__getstate__()
        if not isinstance(state, dict):
            return state
        ret = copy.deepcopy(state) if deep_copy else dict(state)
    elif hasattr(obj, '__dict__'):
        ret = copy.deepcopy(vars(obj)) if deep_copy else dict(vars(obj))
    else:
        return obj

    if recursive:
        ret = {key: get_object_properties(value, deep_copy, remove_private, recursive)
               for key, value in ret.items()}

    if remove_private:
        for key in [k for k in ret.keys() if k[0] == '_']:
            del ret[key]

    return ret


__all__ = ['TRACE', 'TraceLogger', 'configure_trace_logging', 'Config', 'CONFIG',
           'DEFAULTS', 'smoothstep', 'cutoff', 'norm', 'to_sphere', 'tangent_basis',
           'sphere_chart', 'get_object_properties']
