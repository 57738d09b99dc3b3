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
This module contains the exception hierarchy raised by `pyMorse`. Every error
derives from `MorseError`; domain violations additionally derive from
`DomainError` so callers can treat "this point is outside the operation's
domain" uniformly.
"""

from typing import Any, Optional


class MorseError(Exception):
    """Base class of every error raised by pyMorse."""


class ConfigError(MorseError):
    """A configuration file or override names an unknown key or bad value."""


class AtlasSchemaError(MorseError):
    """A JSON atlas violates the schema or the model fails its consistency checks."""


class DomainError(MorseError, ValueError):
    def __init__(self, what: str, value: Any = None):
        self.value = value
        if value is None:
            super().__init__(what)
        else:
            super().__init__(f'{what} (got {value!r})')


class NotInDomainError(DomainError):
    """The point or trajectory is not in the domain of the requested map."""


class EndsOnSliceError(DomainError):
    """The trajectory ends on the hypersurface instead of crossing it."""


class BlowupPointError(DomainError):
    """Extended evaluation is undefined on the stable or unstable manifold."""


class UnresolvedLimitError(MorseError):
    def __init__(self, point: Any, near: Optional[str] = None):
        self.point = point
        self.near = near
        super().__init__(
            f'Trajectory from {point!r} approaches a critical point that is not listed in the model'
            + (f' (closest: {near})' if near else ''))


class FlowTimeoutError(MorseError):
    def __init__(self, point: Any, max_time: float, target: str):
        self.point = point
        self.max_time = max_time
        super().__init__(f'Flow from {point!r} did not reach {target} within time {max_time}')


class UndetectedConnectionWarning(UserWarning):
    """A connection was bracketed while scanning an exit sphere but could not be isolated."""

    def __init__(self, source: str, target: str, data: Any, detail: str = ''):
        self.data = data
        text = f'Connection {source}->{target} not isolated'
        if data is not None:
            text += f', bracketing data {data!r}'
        super().__init__(text + (f': {detail}' if detail else ''))


class ProjectionFailure(MorseError):
    def __init__(self, pair: str, point: Any, reason: str = ''):
        self.point = point
        super().__init__(f'Tubular projection for {pair} failed at {point!r}' + (f': {reason}' if reason else ''))


class SubmersionViolation(MorseError):
    def __init__(self, pair: str, rank: int, expected: int):
        super().__init__(f'Tubular projection for {pair} has Jacobian rank {rank}, expected {expected}')


class ChartInversionFailure(MorseError):
    def __init__(self, seq: str, taus: Any, reason: str):
        self.taus = taus
        super().__init__(f'Inverting the chart of {seq} at taus={taus!r} failed: {reason}')


class EndpointMismatch(MorseError):
    def __init__(self, left: str, right: str):
        super().__init__(f'Factors do not match: {left} ends where {right} does not start')


__all__ = ['MorseError', 'ConfigError', 'AtlasSchemaError', 'DomainError', 'NotInDomainError',
           'EndsOnSliceError', 'BlowupPointError', 'UnresolvedLimitError', 'FlowTimeoutError',
           'UndetectedConnectionWarning', 'ProjectionFailure', 'SubmersionViolation',
           'ChartInversionFailure', 'EndpointMismatch']
