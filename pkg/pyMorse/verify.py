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
Verification suites.

Each check is a named case of one suite (charts, transitions, metric, gluing,
blowup, stratification) computing a residual against a tolerance on one
model. `VerificationRun.new` runs the selected cases concurrently in the
event loop's executor and collects `CaseResult` objects; `table()` renders
them for the command line.
"""

import asyncio
import logging
import math
import time
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import humanfriendly
from humanfriendly.tables import format_pretty_table
import numpy as np

from .exceptions import DomainError, MorseError
from .flow import unstable_trajectory
from .global_charts import (ChartRegistry, CritSeq, FreeEnd, end_condition_transition, enumerate_critseqs,
                            global_chart, registry_for)
from .gluing import GluingInput, breaking_convergence, check_associativity, exit_point, glue, glue_finite_end
from .local_charts import broken_pair, chart_both_inside, chart_through, local_trajectory, transition_time
from .model import MorseModel
from .trajectory import (GeneralizedTrajectory, ev_level, image_distance, metric, sampling_bound,
                         transit_time_in)
from .utils import CONFIG, Config, norm

logger = logging.getLogger('pyMorse')

SUITES = ('charts', 'transitions', 'metric', 'gluing', 'blowup', 'stratification')

_CASES: Dict[str, List[Tuple[str, Callable]]] = {suite: [] for suite in SUITES}


def case(suite: str, name: str):
    """Registers a check `fn(model, cfg, registry) -> (residual, tol, detail)` in a suite."""
    def register(fn):
        _CASES[suite].append((name, fn))
        return fn
    return register


class CaseResult(object):
    """Outcome of one verification case."""

    def __init__(self, suite: str, name: str, residual: float, tol: float, detail: str = '',
                 elapsed: float = 0.0, error: Optional[str] = None):
        self.suite: str = suite
        self.name: str = name
        self.residual: float = float(residual)
        """**(float):** Largest violation measured over the samples of the case."""
        self.tol: float = float(tol)
        self.detail: str = detail
        self.elapsed: float = float(elapsed)
        """**(float):** Wall time in seconds."""
        self.error: Optional[str] = error
        """**(str or None):** Message of the exception that aborted the case."""

    @property
    def passed(self) -> bool:
        return self.error is None and self.residual <= self.tol

    def __repr__(self):
        return "<CaseResult %s/%s %s residual=%.3g>" % (self.suite, self.name,
                                                      'PASS' if self.passed else 'FAIL', self.residual)

    def __getstate__(self):
        return {
            'suite': self.suite,
            'name': self.name,
            'residual': self.residual,
            'tol': self.tol,
            'passed': self.passed,
            'detail': self.detail,
            'elapsed': self.elapsed,
            'error': self.error,
        }


def _direction(dim: int, rng: np.random.Generator) -> np.ndarray:
    if dim == 0:
        return np.zeros(0)
    v = rng.normal(size=dim)
    return v / norm(v)


def _ball(dim: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    return _direction(dim, rng) * radius * rng.uniform(0.1, 1.0)


def _samples(cfg: Config) -> int:
    return int(cfg['verify_samples'])


def _chain_seqs(model: MorseModel, cfg: Config, registry: ChartRegistry, max_k: int = 2) -> List[CritSeq]:
    """Nonempty sequences with critical ends between connected pairs of the model."""
    seqs = []
    for a in model.critical_points:
        for b in model.critical_points:
            if a.value > b.value and registry.connected(a, b):
                seqs += [s for s in enumerate_critseqs(model, a, b, cfg, registry) if 1 <= s.k <= max_k]
    return seqs


def _sample_factors(registry: ChartRegistry, seq: CritSeq, rng: np.random.Generator) -> List[GeneralizedTrajectory]:
    factors = []
    for a, b in zip(seq.chain, seq.chain[1:]):
        reps = registry.trajectories(a, b).representatives
        if not reps:
            raise DomainError(f'M({a.id}, {b.id}) is empty')
        factors.append(unstable_trajectory(registry.model, a, reps[int(rng.integers(len(reps)))], registry.cfg))
    return factors


@case('charts', 'both_inside_roundtrip')
def _both_inside_roundtrip(model: MorseModel, cfg: Config, registry: ChartRegistry):
    rng = cfg.rng()
    worst = 0.0
    for p in model.critical_points:
        sx, sy = p.chart.stable_dim, p.chart.unstable_dim
        for _ in range(_samples(cfg)):
            tau = rng.uniform(0.0, 1.0)
            x, y = _ball(sx, p.delta, rng), _ball(sy, p.delta, rng)
            local = chart_both_inside(local_trajectory(model, p, tau, x, y), p, cfg)
            worst = max(worst, abs(local.tau - tau), norm(local.x - x), norm(local.y - y))
    return worst, 1e-10, f'{len(model.critical_points)} critical points'


@case('charts', 'through_transit_time')
def _through_transit_time(model: MorseModel, cfg: Config, registry: ChartRegistry):
    rng = cfg.rng()
    worst, tried = 0.0, 0
    for p in model.critical_points:
        if p.is_minimum or p.is_maximum:
            continue
        for _ in range(_samples(cfg)):
            tau = rng.uniform(0.01, 0.99)
            x = _direction(p.chart.stable_dim, rng) * p.delta
            y = _direction(p.chart.unstable_dim, rng) * p.delta
            gamma = local_trajectory(model, p, tau, x, y)
            worst = max(worst, abs(chart_through(gamma, p, cfg).tau - tau),
                        abs(transit_time_in(gamma, p) + math.log(tau)))
            tried += 1
    return worst, 1e-8, f'{tried} samples'


@case('transitions', 'minus_through_relation')
def _minus_through(model: MorseModel, cfg: Config, registry: ChartRegistry):
    """⁻τ·|x| = Δ·τ for trajectories starting in Ũ(p) outside U(p) and crossing it."""
    rng = cfg.rng()
    worst, tried = 0.0, 0
    for p in model.critical_points:
        if p.is_minimum or p.is_maximum:
            continue
        for _ in range(_samples(cfg)):
            r = rng.uniform(1.05, 1.9)
            x = _direction(p.chart.stable_dim, rng) * p.delta * r
            y = _direction(p.chart.unstable_dim, rng) * p.delta
            gamma = local_trajectory(model, p, rng.uniform(0.01, 0.5), x, y)
            entry = ev_level(gamma, ('entry', p), cfg, allow_ends=True)
            through = norm(entry.y) / p.delta
            minus = transition_time(gamma, p, 'minus', cfg)
            worst = max(worst, abs(minus * norm(x) - p.delta * through))
            tried += 1
    return worst, 1e-10, f'{tried} samples'


@case('transitions', 'tilde_minus_relation')
def _tilde_minus(model: MorseModel, cfg: Config, registry: ChartRegistry):
    """τ̃·|y| = Δ·⁻τ for trajectories with both ends in Ũ(p)."""
    rng = cfg.rng()
    worst, tried = 0.0, 0
    for p in model.critical_points:
        if p.is_minimum:
            continue
        for _ in range(_samples(cfg)):
            x = _ball(p.chart.stable_dim, p.delta, rng)
            y = _ball(p.chart.unstable_dim, p.delta, rng)
            gamma = local_trajectory(model, p, rng.uniform(0.01, 1.0), x, y)
            tilde = transition_time(gamma, p, 'tilde', cfg)
            minus = transition_time(gamma, p, 'minus', cfg)
            worst = max(worst, abs(tilde * norm(y) - p.delta * minus))
            tried += 1
    return worst, 1e-10, f'{tried} samples'


@case('metric', 'broken_stratum_bound')
def _broken_stratum_bound(model: MorseModel, cfg: Config, registry: ChartRegistry):
    """Image distance to the broken pair stays below |x' - x| + |y' - y| + 4Δ√τ'."""
    rng = cfg.rng()
    n = int(cfg['samples'])
    worst, slack = -math.inf, 0.0
    for p in model.critical_points:
        sx, sy = p.chart.stable_dim, p.chart.unstable_dim
        for _ in range(_samples(cfg)):
            x, y = _ball(sx, p.delta, rng), _ball(sy, p.delta, rng)
            x2 = x + _ball(sx, 0.05 * p.delta, rng)
            y2 = y + _ball(sy, 0.05 * p.delta, rng)
            tau = rng.uniform(0.0, 0.2)
            glued, broken = local_trajectory(model, p, tau, x2, y2), broken_pair(model, p, x, y)
            bound = norm(x2 - x) + norm(y2 - y) + 4.0 * p.delta * math.sqrt(tau)
            gap = sampling_bound(glued, n) + sampling_bound(broken, n)
            slack = max(slack, gap)
            worst = max(worst, image_distance(glued, broken, n) - bound - gap)
    return max(worst, 0.0), 0.0, f'largest sampling slack {slack:.3g}'


@case('metric', 'symmetry_and_triangle')
def _symmetry_and_triangle(model: MorseModel, cfg: Config, registry: ChartRegistry):
    rng = cfg.rng()
    n = int(cfg['samples'])
    worst = 0.0
    for p in model.critical_points:
        sx, sy = p.chart.stable_dim, p.chart.unstable_dim
        trio = [local_trajectory(model, p, rng.uniform(0.0, 1.0), _ball(sx, p.delta, rng), _ball(sy, p.delta, rng))
                for _ in range(3)]
        a, b, c = trio
        worst = max(worst, abs(metric(a, b, n, cfg) - metric(b, a, n, cfg)))
        slack = 2.0 * max(sampling_bound(g, n) for g in trio)
        worst = max(worst, metric(a, c, n, cfg) - metric(a, b, n, cfg) - metric(b, c, n, cfg) - slack)
    return worst, 0.0, 'symmetry exact, triangle up to twice the sampling bound'


@case('metric', 'length_separation')
def _length_separation(model: MorseModel, cfg: Config, registry: ChartRegistry):
    """A constant trajectory of length 0 and the broken constant at p are at distance exactly 1."""
    worst = 0.0
    for p in model.critical_points:
        x, y = np.zeros(p.chart.stable_dim), np.zeros(p.chart.unstable_dim)
        d = metric(local_trajectory(model, p, 1.0, x, y), broken_pair(model, p, x, y), cfg=cfg)
        worst = max(worst, abs(d - 1.0))
    return worst, 1e-12, ''


@case('gluing', 'chart_inverse')
def _chart_inverse(model: MorseModel, cfg: Config, registry: ChartRegistry):
    rng = cfg.rng()
    t = registry.t_level(0)
    worst, tried = 0.0, 0
    for seq in _chain_seqs(model, cfg, registry):
        for _ in range(max(_samples(cfg) // 4, 1)):
            factors = _sample_factors(registry, seq, rng)
            taus = list(rng.uniform(0.05 * t, 0.9 * t, size=seq.k))
            glued = glue(seq, GluingInput(factors, taus), t, cfg, registry)
            point = global_chart(glued, seq, t, cfg, registry)
            worst = max([worst] + [abs(a - b) for a, b in zip(point.taus, taus)] +
                        [norm(m - exit_point(f, cfg)) for m, f in zip(point.strata, factors)])
            tried += 1
    return worst, 1e-6, f'{tried} glued trajectories'


@case('gluing', 'corner_semantics')
def _corner_semantics(model: MorseModel, cfg: Config, registry: ChartRegistry):
    """A glued trajectory spends time -ln τ_i in U(q_i)."""
    rng = cfg.rng()
    worst, tried = 0.0, 0
    for seq in _chain_seqs(model, cfg, registry):
        factors = _sample_factors(registry, seq, rng)
        for j in range(3, 11):
            taus = [2.0 ** -j] * seq.k
            glued = glue(seq, GluingInput(factors, taus), cfg=cfg, registry=registry)
            worst = max([worst] + [abs(transit_time_in(glued, q) + math.log(tau))
                                   for q, tau in zip(seq.points, taus)])
            tried += 1
    return worst, 1e-6, f'{tried} glued trajectories'


@case('gluing', 'associativity')
def _associativity(model: MorseModel, cfg: Config, registry: ChartRegistry):
    worst, pairs, failures = 0.0, 0, 0
    samples = max(_samples(cfg) // 4, 1)
    for refined in _chain_seqs(model, cfg, registry):
        for mask in range(2 ** refined.k - 1):
            kept = [p for i, p in enumerate(refined.points) if mask >> i & 1]
            report = check_associativity(model, CritSeq(kept, refined.start, refined.end), refined, samples,
                                         cfg=cfg, registry=registry)
            worst = max(worst, report.max_residual)
            failures += len(report.failures)
            pairs += 1
    if failures:
        worst = math.inf
    return worst, cfg['assoc_tol'], f'{pairs} insertion pairs, {failures} failed samples'


@case('gluing', 'breaking_convergence')
def _convergence(model: MorseModel, cfg: Config, registry: ChartRegistry):
    seqs = _chain_seqs(model, cfg, registry, max_k=1)
    if not seqs:
        return 0.0, 0.0, 'no sequence to glue along'
    fit = breaking_convergence(model, seqs[0], cfg=cfg, registry=registry)
    return max(0.45 - fit.alpha, 0.0), 0.0, f'{seqs[0]}: C = {fit.C:.3g}, alpha = {fit.alpha:.3g}'


@case('blowup', 'end_condition_transition')
def _end_transition(model: MorseModel, cfg: Config, registry: ChartRegistry):
    """The near-start chart and the outside-start chart differ by E ↦ E|x|/Δ on their overlap."""
    rng = cfg.rng()
    t = registry.t_level(0)
    worst, tried = 0.0, 0
    for seq in _chain_seqs(model, cfg, registry, max_k=1):
        q, end = seq.points[0], seq.end
        if q.chart.stable_dim == 0:
            continue
        reps = registry.trajectories(q, end).representatives
        near, outside = CritSeq([q], 'near', end), CritSeq([q], 'outside', end)
        for _ in range(max(_samples(cfg) // 4, 1)):
            r = rng.uniform(1.05, 1.4)
            x1 = _direction(q.chart.stable_dim, rng) * q.delta * r
            E = rng.uniform(0.05, 0.9) * t / r
            m = reps[int(rng.integers(len(reps)))]
            gamma = glue_finite_end(model, near, [E], [FreeEnd('minus_near', x1), m], t, cfg, registry)
            a = global_chart(gamma, near, t, cfg, registry)
            if a.taus[0] * norm(a.strata[0].vector) >= t * q.delta:
                return math.inf, 1e-8, f'{near}: chart image violates E|x| < tΔ'
            b = global_chart(gamma, outside, t, cfg, registry)
            worst = max(worst, b.distance(end_condition_transition(a, '-')))
            tried += 1
    return worst, 1e-8, f'{tried} overlap samples'


@case('stratification', 'zero_taus_break')
def _zero_taus_break(model: MorseModel, cfg: Config, registry: ChartRegistry):
    """Gluing breaks at q_i exactly when τ_i = 0, and the chart returns τ_i = 0 exactly there."""
    rng = cfg.rng()
    t = registry.t_level(0)
    mismatches, tried = 0, 0
    for seq in _chain_seqs(model, cfg, registry):
        for mask in range(2 ** seq.k):
            factors = _sample_factors(registry, seq, rng)
            taus = [0.0 if mask >> i & 1 else float(rng.uniform(0.05 * t, 0.9 * t)) for i in range(seq.k)]
            glued = glue(seq, GluingInput(factors, taus), t, cfg, registry)
            expected = [q.id for q, tau in zip(seq.points, taus) if tau == 0.0]
            if [q.id for q in glued.breaking_points] != expected:
                mismatches += 1
            point = global_chart(glued, seq, t, cfg, registry)
            if [q.id for q, tau in zip(seq.points, point.taus) if tau == 0.0] != expected:
                mismatches += 1
            tried += 1
    return float(mismatches), 0.0, f'{tried} inputs'


class VerificationRun(object):
    """
    Runs verification cases on one model and keeps their results.
    """
    @classmethod
    async def new(cls, model: MorseModel, suites: Sequence[str] = ('all',), cfg: Config = CONFIG,
                  catch_errors: bool = True):
        """Instantiates the run and executes the selected suites.

        Args:
            model (MorseModel): The model to verify.
            suites (sequence of str, optional): Suite names, or 'all'. Defaults to ('all',).
            cfg (Config, optional): Sample counts, tolerances and seed. Defaults to `CONFIG`.
            catch_errors (bool, optional): Record exceptions of pyMorse as failed cases instead of raising.
                Defaults to True.
        """
        self = cls()
        self.model: MorseModel = model
        self.cfg: Config = cfg
        self.suites: List[str] = list(SUITES) if 'all' in suites else list(suites)
        """**(list of str):** The suites that were run."""
        for suite in self.suites:
            if suite not in SUITES:
                raise DomainError(f'Unknown suite {suite!r}; known: {", ".join(SUITES)}')
        self.registry: ChartRegistry = registry_for(model, cfg)
        self.results: List[CaseResult] = []
        """**(list of `CaseResult`):** One entry per case, in registration order."""
        self.elapsed: float = 0.0
        await self.run(catch_errors)
        return self

    def _run_case(self, suite: str, name: str, fn: Callable, catch_errors: bool) -> CaseResult:
        start = time.monotonic()
        try:
            residual, tol, detail = fn(self.model, self.cfg, self.registry)
        except MorseError as e:
            if not catch_errors:
                raise
            logger.warning(f"Case {suite}/{name} on {self.model.name} raised {e!r}")
            return CaseResult(suite, name, math.inf, 0.0, elapsed=time.monotonic() - start, error=str(e))
        result = CaseResult(suite, name, residual, tol, detail, time.monotonic() - start)
        logger.debug(repr(result))
        return result

    async def run(self, catch_errors: bool = True):
        loop = asyncio.get_running_loop()
        start = time.monotonic()
        jobs = [loop.run_in_executor(None, self._run_case, suite, name, fn, catch_errors)
                for suite in self.suites for name, fn in _CASES[suite]]
        self.results = list(await asyncio.gather(*jobs))
        self.elapsed = time.monotonic() - start

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def table(self) -> str:
        rows = [[r.suite, r.name, 'PASS' if r.passed else 'FAIL', f'{r.residual:.3g}', f'{r.tol:.3g}',
                 humanfriendly.format_timespan(r.elapsed), r.error or r.detail] for r in self.results]
        summary = (f"{self.model.name}: {sum(r.passed for r in self.results)}/{len(self.results)} cases passed "
                   f"in {humanfriendly.format_timespan(self.elapsed)}")
        columns = ['Suite', 'Case', 'Result', 'Residual', 'Tol', 'Time', 'Detail']
        return format_pretty_table(rows, columns) + '\n' + summary

    def __repr__(self):
        return "<VerificationRun %s %s %s>" % (self.model.name, self.suites, 'PASS' if self.passed else 'FAIL')

    def __getstate__(self):
        return {
            'model': self.model.name,
            'suites': self.suites,
            'passed': self.passed,
            'elapsed': self.elapsed,
            'cases': [r.__getstate__() for r in self.results],
        }


def verify(model: MorseModel, suites: Sequence[str] = ('all',), cfg: Config = CONFIG) -> VerificationRun:
    """Runs `VerificationRun.new` to completion outside of an event loop."""
    return asyncio.run(VerificationRun.new(model, suites, cfg))


__all__ = ['SUITES', 'case', 'CaseResult', 'VerificationRun', 'verify']
