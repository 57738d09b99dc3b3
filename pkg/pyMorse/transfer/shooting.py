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
Shooting of connecting maps for numeric models: the interpolated vector field
is integrated with an adaptive Runge-Kutta scheme from an exit point until it
crosses the entry set of another chart.
"""

import logging
from typing import Callable, List, Optional

import numpy as np
from scipy.integrate import solve_ivp

from ..exceptions import FlowTimeoutError, NotInDomainError, UnresolvedLimitError
from ..model import CriticalPoint
from ..utils import CONFIG, Config, norm
from .linear import TransferResult

logger = logging.getLogger('pyMorse')


class ShootingEngine(object):
    """Integrates the ambient field of a numeric `MorseModel` between charts."""

    kind = 'shooting'

    def __init__(self):
        self.model = None
        """**(MorseModel):** Model the engine shoots in; set by `bind`."""

    def bind(self, model):
        self.model = model

    def _entry_event(self, q: CriticalPoint) -> Callable:
        def event(t, a):
            v = q.chart.from_ambient(a)
            x, y = q.split(v)
            if norm(y) < q.delta and norm(v) < 3.0 * q.delta:
                return norm(x) - q.delta
            return q.delta
        event.terminal = True
        event.direction = -1
        return event

    def integrate(self, a0, t_max: float, events: List[Callable], cfg: Config = CONFIG):
        field = self.model.ambient.field
        return solve_ivp(lambda t, a: field(a), (0.0, t_max), np.asarray(a0, dtype=float), method='RK45',
                         rtol=cfg['rk_rtol'], atol=cfg['rk_atol'], events=events or None, dense_output=True)

    def first_hit(self, p: CriticalPoint, z, cfg: Config = CONFIG) -> Optional[TransferResult]:
        """Shoots from the exit point `z` of `p` to the first entry set it crosses.

        Args:
            p (CriticalPoint): Source critical point.
            z (ndarray): Exit point in the chart of `p`.
            cfg (Config, optional): Integrator tolerances and time limit. Defaults to `CONFIG`.

        Returns:
            TransferResult: The entry point, snapped onto |x| = Δ, with its flow time and the sampled path.
        """
        return self.shoot(p.chart.to_ambient(z), p, z, cfg)

    def shoot(self, a0, source: Optional[CriticalPoint] = None, z=None, cfg: Config = CONFIG) -> TransferResult:
        """Shoots from an ambient point; `source` and `z` only label the result."""
        from ..trajectory import SampledSegment

        a0 = np.asarray(a0, dtype=float)
        bound = self.model.ambient.value(a0) if source is None else source.value
        targets = [q for q in self.model.critical_points if q.value < bound]
        events = [self._entry_event(q) for q in targets]
        sol = self.integrate(a0, float(cfg['max_time']), events, cfg)
        if sol.status == -1:
            raise UnresolvedLimitError(a0.tolist(), sol.message)
        for q, t_hit, y_hit in zip(targets, sol.t_events, sol.y_events):
            if len(t_hit):
                v = q.chart.from_ambient(y_hit[0])
                x, y = q.split(v)
                w = q.join(q.delta * x / norm(x), y)
                logger.trace(f"Shot {getattr(source, 'id', 'ambient')}->{q.id} in time {t_hit[0]:.10g}, |x| residual "
                             f"{abs(norm(x) - q.delta):.3g}")
                segment = SampledSegment(self.model, sol.t, sol.y.T, sol.sol)
                return TransferResult(source, a0 if z is None else z, q, w, float(t_hit[0]), [segment])
        end = sol.y[:, -1]
        for q in self.model.critical_points:
            if norm(q.chart.from_ambient(end)) < cfg.get('eps_event', 'numeric'):
                raise UnresolvedLimitError(end.tolist(), q.id)
        raise FlowTimeoutError(a0.tolist(), cfg['max_time'], 'entry set')

    def connecting(self, p: CriticalPoint, q: CriticalPoint, z, cfg: Config = CONFIG) -> TransferResult:
        result = self.first_hit(p, z, cfg)
        if result.target.id != q.id:
            raise NotInDomainError(f'Exit point of {p.id} enters U({result.target.id}), not U({q.id})',
                                   np.asarray(z).tolist())
        return result

    def __repr__(self):
        return "<ShootingEngine %r>" % (None if self.model is None else self.model.name,)

    def __getstate__(self):
        return {'kind': self.kind}


__all__ = ['ShootingEngine']
