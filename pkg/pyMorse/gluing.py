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
Gluing maps on the compactified trajectory spaces.

`glue` takes trajectories between consecutive critical points of a sequence
together with transition times, and returns the generalized trajectory whose
global chart has those coordinates. Zero transition times and broken factors
are handled by cutting the input into blocks at every zero transition time and
gluing each block on its own, so the output breaks exactly where the input
asks for it.

`glue_finite_end` covers sequences with free end conditions, and the module
closes with the associativity and gluing-breaking convergence harnesses used
by the verification suites.
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import DomainError, EndpointMismatch, MorseError, NotInDomainError
from .flow import unstable_trajectory
from .global_charts import (ChartPoint, ChartRegistry, CritSeq, FreeEnd, global_chart_inverse, registry_for)
from .model import CriticalPoint, MorseModel
from .trajectory import GeneralizedTrajectory, ev_level, metric
from .utils import CONFIG, Config, norm

logger = logging.getLogger('pyMorse')


class GluingInput(object):
    """
    Trajectories γ_0, ..., γ_k and transition times τ_1, ..., τ_k, where γ_j
    runs from q_j to q_(j+1) and may itself be broken.
    """

    def __init__(self, factors: Sequence[GeneralizedTrajectory], taus: Sequence[float]):
        self.factors: List[GeneralizedTrajectory] = list(factors)
        """**(list of GeneralizedTrajectory):** One trajectory per factor, in flow order."""
        self.taus: Tuple[float, ...] = tuple(float(x) for x in taus)
        """**(tuple of float):** Transition time at each junction."""
        if not self.factors or len(self.factors) != len(self.taus) + 1:
            raise DomainError(f'{len(self.factors)} factors do not fit {len(self.taus)} transition times')
        if any(tau < 0.0 for tau in self.taus):
            raise NotInDomainError('Transition times must be nonnegative', list(self.taus))
        for a, b in zip(self.factors, self.factors[1:]):
            if not (isinstance(a.end_plus, CriticalPoint) and isinstance(b.end_minus, CriticalPoint)
                    and a.end_plus.id == b.end_minus.id):
                raise EndpointMismatch(repr(a.end_plus), repr(b.end_minus))

    @classmethod
    def from_alternating(cls, items: Sequence) -> 'GluingInput':
        """Builds the input from the alternating list (γ_0, τ_1, γ_1, ..., τ_k, γ_k)."""
        return cls(items[0::2], items[1::2])

    @property
    def model(self) -> MorseModel:
        return self.factors[0].model

    @property
    def seq(self) -> CritSeq:
        start, end = self.factors[0].end_minus, self.factors[-1].end_plus
        if not (isinstance(start, CriticalPoint) and isinstance(end, CriticalPoint)):
            raise DomainError('Factors with free ends are glued with glue_finite_end')
        return CritSeq([f.end_minus for f in self.factors[1:]], start, end)

    def __repr__(self):
        return "<GluingInput %s taus=%r>" % (self.seq, list(self.taus))

    def __getstate__(self):
        return {
            'factors': [f.__getstate__() for f in self.factors],
            'taus': list(self.taus),
        }


def exit_point(gamma: GeneralizedTrajectory, cfg: Config = CONFIG) -> np.ndarray:
    """The exit point on the unstable sphere of the start of an unbroken infinite trajectory."""
    if gamma.k != 0 or not isinstance(gamma.end_minus, CriticalPoint):
        raise DomainError(f'Expected an unbroken trajectory leaving a critical point, got {gamma!r}')
    return np.asarray(ev_level(gamma, ('exit', gamma.end_minus), cfg, allow_ends=True).v, dtype=float)


def _blocks(data: GluingInput) -> List[Tuple[List[GeneralizedTrajectory], List[float]]]:
    """Unbroken pieces grouped into runs joined by positive transition times."""
    model = data.model
    blocks: List[Tuple[List[GeneralizedTrajectory], List[float]]] = [([], [])]
    for j, factor in enumerate(data.factors):
        for i, piece in enumerate(factor.pieces):
            gap = None
            if i > 0:
                gap = 0.0
            elif j > 0:
                gap = data.taus[j - 1]
            if gap == 0.0:
                blocks.append(([], []))
            elif gap is not None:
                blocks[-1][1].append(gap)
            blocks[-1][0].append(GeneralizedTrajectory(model, [piece]))
    return blocks


def glue(seq: CritSeq, data: GluingInput, t: Optional[float] = None, cfg: Config = CONFIG,
         registry: Optional[ChartRegistry] = None) -> GeneralizedTrajectory:
    """The gluing map of a sequence with critical ends.

    Args:
        seq (CritSeq): The sequence q_1, ..., q_k with its critical ends.
        data (GluingInput): Factors between consecutive points and the transition times.
        t (float, optional): Upper bound of the transition times. Defaults to the first t-ladder value.
        cfg (Config, optional): Tolerances. Defaults to `CONFIG`.
        registry (ChartRegistry, optional): Projection cache. Defaults to the model's shared one.

    Returns:
        GeneralizedTrajectory: Broken exactly at the zero transition times and at the breaking points of the factors.
    """
    model = data.model
    if data.seq != seq:
        raise EndpointMismatch(str(seq), str(data.seq))
    if seq.k == 0:
        return data.factors[0]
    registry = registry or registry_for(model, cfg)
    t = registry.t_level(0) if t is None else float(t)
    if any(tau >= t for tau in data.taus):
        raise NotInDomainError(f'Transition times must lie in [0, {t})', list(data.taus))
    parts = []
    for pieces, taus in _blocks(data):
        if len(pieces) == 1:
            parts.append(pieces[0])
            continue
        sub = CritSeq([p.end_minus for p in pieces[1:]], pieces[0].end_minus, pieces[-1].end_plus)
        point = ChartPoint(sub, t, taus, [exit_point(p, cfg) for p in pieces])
        parts.append(global_chart_inverse(model, point, cfg, registry))
    logger.debug(f"Glued {seq} in {len(parts)} blocks")
    return GeneralizedTrajectory.concatenate(parts)


def glue_finite_end(model: MorseModel, seq: CritSeq, taus: Sequence[float], strata: Sequence,
                    t: Optional[float] = None, cfg: Config = CONFIG,
                    registry: Optional[ChartRegistry] = None) -> GeneralizedTrajectory:
    """Gluing for sequences with a free end condition.

    Args:
        model (MorseModel): The model.
        seq (CritSeq): A sequence whose start or end is 'outside' or 'near'.
        taus (sequence of float): Transition times; the parameter at a 'near' end is E in [0, 1 + t).
        strata (sequence): Per factor, a `FreeEnd` for free factors and an unbroken
            trajectory or exit point for connecting factors.
        t (float, optional): Neighbourhood parameter. Defaults to the first t-ladder value.
        cfg (Config, optional): Tolerances. Defaults to `CONFIG`.
        registry (ChartRegistry, optional): Projection cache. Defaults to the model's shared one.

    Returns:
        GeneralizedTrajectory
    """
    if seq.start_kind == 'critical' and seq.end_kind == 'critical':
        raise DomainError(f'{seq} has no free end; use glue')
    registry = registry or registry_for(model, cfg)
    t = registry.t_level(0) if t is None else float(t)
    taus = [float(x) for x in taus]
    strata = [exit_point(s, cfg) if isinstance(s, GeneralizedTrajectory) else s for s in strata]
    kinds = seq.factor_kinds()
    for i, tau in enumerate(taus):
        near = (i == 0 and seq.start_kind == 'near') or (i == seq.k - 1 and seq.end_kind == 'near')
        upper = 1.0 + t if near else t
        if not 0.0 <= tau < upper:
            raise NotInDomainError(f'Parameter {i + 1} must lie in [0, {upper})', tau)
    for kind, s in zip(kinds, strata):
        if kind.startswith(('minus', 'plus')) and not isinstance(s, FreeEnd):
            raise DomainError(f'Factor of kind {kind} needs a FreeEnd, got {s!r}')
    if not seq.is_special:
        if kinds[0] == 'minus_near' and taus[0] * norm(strata[0].vector) >= t * seq.points[0].delta:
            raise NotInDomainError(f'E|x| violates the bound tΔ at {seq.points[0].id}')
        if kinds[-1] == 'plus_near' and taus[-1] * norm(strata[-1].vector) >= t * seq.points[-1].delta:
            raise NotInDomainError(f'E|y| violates the bound tΔ at {seq.points[-1].id}')
    return global_chart_inverse(model, ChartPoint(seq, t, taus, strata), cfg, registry)


class AssociativityReport(object):
    """Residuals of the two ways of gluing along a sequence and one of its refinements."""

    def __init__(self, seq: CritSeq, refined: CritSeq, residuals: Sequence[float], tol: float,
                 failures: Sequence[str] = ()):
        self.seq: CritSeq = seq
        self.refined: CritSeq = refined
        self.residuals: List[float] = [float(r) for r in residuals]
        """**(list of float):** Metric distance of the two outputs, per sample."""
        self.tol: float = float(tol)
        self.failures: List[str] = list(failures)
        """**(list of str):** Messages of samples where one side could not be glued."""

    @property
    def max_residual(self) -> float:
        return max(self.residuals, default=0.0)

    @property
    def passed(self) -> bool:
        return not self.failures and self.max_residual < self.tol

    def __repr__(self):
        return "<AssociativityReport %s in %s max=%.3g %s>" % (
            self.seq, self.refined, self.max_residual, 'PASS' if self.passed else 'FAIL')

    def __getstate__(self):
        return {
            'seq': str(self.seq),
            'refined': str(self.refined),
            'residuals': self.residuals,
            'max_residual': self.max_residual,
            'tol': self.tol,
            'failures': self.failures,
            'passed': self.passed,
        }


def _insertions(seq: CritSeq, refined: CritSeq) -> List[List[CriticalPoint]]:
    """Points of `refined` inserted between consecutive points of the chain of `seq`."""
    outer = [p.id for p in seq.chain]
    inner = [p.id for p in refined.chain]
    if outer[0] != inner[0] or outer[-1] != inner[-1]:
        raise DomainError(f'{refined} does not refine {seq}')
    try:
        positions = [inner.index(pid) for pid in outer]
    except ValueError:
        raise DomainError(f'{refined} does not refine {seq}')
    if positions != sorted(positions):
        raise DomainError(f'{refined} does not refine {seq}')
    return [list(refined.chain[a + 1:b]) for a, b in zip(positions, positions[1:])]


def _sample_factor(registry: ChartRegistry, a: CriticalPoint, b: CriticalPoint,
                   rng: np.random.Generator) -> GeneralizedTrajectory:
    reps = registry.trajectories(a, b).representatives
    if not reps:
        raise DomainError(f'M({a.id}, {b.id}) is empty')
    return unstable_trajectory(registry.model, a, reps[int(rng.integers(len(reps)))], registry.cfg)


def check_associativity(model: MorseModel, seq: CritSeq, refined: CritSeq, samples: int = 10,
                        zero_inner: bool = False, cfg: Config = CONFIG,
                        registry: Optional[ChartRegistry] = None) -> AssociativityReport:
    """Compares gluing along `refined` with gluing the inserted blocks first, then along `seq`.

    Args:
        model (MorseModel): The model.
        seq (CritSeq): The coarse sequence, with critical ends.
        refined (CritSeq): `seq` with critical points inserted.
        samples (int, optional): Random inputs. Defaults to 10.
        zero_inner (bool, optional): Use zero transition times at the inserted points. Defaults to False.
        cfg (Config, optional): Seed, t-ladder and `assoc_tol`. Defaults to `CONFIG`.
        registry (ChartRegistry, optional): Projection cache. Defaults to the model's shared one.

    Returns:
        AssociativityReport
    """
    registry = registry or registry_for(model, cfg)
    inserted = _insertions(seq, refined)
    t = registry.t_level(0)
    # inner transition times stay below the blending shell of the projections
    top = 0.9 * cfg['shell_fractions'][0] * t
    rng = cfg.rng()
    residuals, failures = [], []
    for n in range(samples):
        chain = refined.chain
        factors = [_sample_factor(registry, a, b, rng) for a, b in zip(chain, chain[1:])]
        taus = list(rng.uniform(0.05 * t, top, size=refined.k))
        outer_ids = {p.id for p in seq.points}
        if zero_inner:
            taus = [tau if p.id in outer_ids else 0.0 for p, tau in zip(refined.points, taus)]
        try:
            left = glue(refined, GluingInput(factors, taus), t, cfg, registry)
            inner_factors, outer_taus, cursor = [], [], 0
            for j, block in enumerate(inserted):
                sub_factors = factors[cursor:cursor + len(block) + 1]
                sub_taus = taus[cursor:cursor + len(block)]
                sub_seq = CritSeq(block, seq.chain[j], seq.chain[j + 1])
                inner_factors.append(glue(sub_seq, GluingInput(sub_factors, sub_taus), t, cfg, registry))
                cursor += len(block) + 1
                if j < seq.k:
                    outer_taus.append(taus[cursor - 1])
            right = glue(seq, GluingInput(inner_factors, outer_taus), t, cfg, registry)
        except MorseError as e:
            logger.warning(f"Associativity sample {n} for {seq} in {refined} failed: {e}")
            failures.append(str(e))
            continue
        residuals.append(metric(left, right, cfg=cfg))
        logger.trace(f"Associativity sample {n}: residual {residuals[-1]:.3g}")
    report = AssociativityReport(seq, refined, residuals, cfg['assoc_tol'], failures)
    logger.debug(repr(report))
    return report


class ConvergenceFit(object):
    """Fit d(glue(τ), broken) ≈ C·τ^α over a geometric sequence of transition times."""

    def __init__(self, seq: CritSeq, taus: Sequence[float], distances: Sequence[float], C: float, alpha: float):
        self.seq: CritSeq = seq
        self.taus: List[float] = [float(x) for x in taus]
        self.distances: List[float] = [float(d) for d in distances]
        self.C: float = float(C)
        """**(float):** Fitted constant."""
        self.alpha: float = float(alpha)
        """**(float):** Fitted exponent."""

    @property
    def monotone(self) -> bool:
        """Whether the distance decreases along the (decreasing) transition times."""
        return all(b <= a * (1.0 + 1e-9) for a, b in zip(self.distances, self.distances[1:]))

    def __repr__(self):
        return "<ConvergenceFit %s C=%.4g alpha=%.4g>" % (self.seq, self.C, self.alpha)

    def __getstate__(self):
        return {
            'seq': str(self.seq),
            'taus': self.taus,
            'distances': self.distances,
            'C': self.C,
            'alpha': self.alpha,
            'monotone': self.monotone,
        }


def breaking_convergence(model: MorseModel, seq: CritSeq, factors: Optional[Sequence[GeneralizedTrajectory]] = None,
                         js: Sequence[int] = range(3, 13), cfg: Config = CONFIG,
                         registry: Optional[ChartRegistry] = None) -> ConvergenceFit:
    """Distance between glued and broken trajectories as all transition times shrink like 2^-j.

    Args:
        model (MorseModel): The model.
        seq (CritSeq): A nonempty sequence with critical ends.
        factors (sequence of GeneralizedTrajectory, optional): Unbroken factors. Defaults to random representatives.
        js (sequence of int, optional): Exponents j. Defaults to 3, ..., 12.
        cfg (Config, optional): Sample count and seed. Defaults to `CONFIG`.
        registry (ChartRegistry, optional): Projection cache. Defaults to the model's shared one.

    Returns:
        ConvergenceFit: The least-squares fit of log d against log τ.
    """
    registry = registry or registry_for(model, cfg)
    if seq.k == 0:
        raise DomainError('Gluing along the empty sequence does not move the input')
    if factors is None:
        rng = cfg.rng()
        factors = [_sample_factor(registry, a, b, rng) for a, b in zip(seq.chain, seq.chain[1:])]
    broken = GeneralizedTrajectory.concatenate(factors)
    taus, distances = [], []
    for j in js:
        tau = 2.0 ** -j
        glued = glue(seq, GluingInput(factors, [tau] * seq.k), cfg=cfg, registry=registry)
        taus.append(tau)
        distances.append(metric(glued, broken, cfg=cfg))
        logger.trace(f"tau = 2^-{j}: distance {distances[-1]:.4g}")
    logs = np.log(np.maximum(distances, np.finfo(float).tiny))
    alpha, log_c = np.polyfit(np.log(taus), logs, 1)
    fit = ConvergenceFit(seq, taus, distances, math.exp(log_c), alpha)
    logger.debug(repr(fit))
    return fit


__all__ = ['GluingInput', 'exit_point', 'glue', 'glue_finite_end', 'AssociativityReport', 'check_associativity',
           'ConvergenceFit', 'breaking_convergence']
