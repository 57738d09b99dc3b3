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
Command line interface: `pymorse <command> <model> ...`.

Models are built-in example names or JSON atlas paths (see `pyMorse.examples`).
Exit codes: 0 on success, 1 when a verification fails, 2 on usage, schema or
domain errors.
"""

import argparse
import csv
import logging
import math
import sys
from typing import List, Optional

try:
    import ujson as json
except ImportError:
    import json

from humanfriendly.tables import format_pretty_table

from . import examples
from .exceptions import AtlasSchemaError, ConfigError, MorseError
from .flow import integrate, point_coords, region_tag, unstable_trajectory
from .global_charts import CritSeq, enumerate_critseqs, registry_for
from .gluing import GluingInput, glue
from .model import AmbientPoint, BoxPoint, LocalPoint, MorseModel
from .trajectory import GeneralizedTrajectory, metric, sampling_bound
from .utils import CONFIG, TRACE, Config, get_object_properties
from .verify import SUITES, verify

logger = logging.getLogger('pyMorse')

_LEVELS = [logging.WARNING, logging.INFO, logging.DEBUG, TRACE]


def _floats(text: str) -> List[float]:
    return [float(v) for v in text.split(',') if v.strip()]


def parse_point(model: MorseModel, text: str):
    """Parses 'id:v1,v2,...' (chart point), 'box:id:w1,...:u' or 'ambient:a1,a2'."""
    parts = text.split(':')
    if parts[0] == 'ambient' and len(parts) == 2:
        return AmbientPoint(_floats(parts[1]))
    if parts[0] == 'box' and len(parts) == 4:
        return BoxPoint(model.point(parts[1]), _floats(parts[2]), float(parts[3]))
    if len(parts) == 2:
        return LocalPoint(model.point(parts[0]), _floats(parts[1]))
    raise ConfigError(f'Cannot parse point {text!r}; expected id:v1,..., box:id:w1,...:u or ambient:a1,a2')


def parse_until(model: MorseModel, text: str):
    kind, _, arg = text.partition(':')
    if kind == 'limit':
        return ('limit', None)
    if kind in ('time', 'level'):
        return (kind, float(arg))
    if kind in ('entry', 'exit'):
        return (kind, model.point(arg))
    raise ConfigError(f'Cannot parse event {text!r}; expected limit, time:T, level:c, entry:id or exit:id')


def _dump(state, path: Optional[str]):
    text = json.dumps(get_object_properties(state, deep_copy=False), indent=4)
    if path is None:
        print(text)
    else:
        with open(path, 'w') as f:
            f.write(text)


def _read_trajectory(model: Optional[MorseModel], path: str):
    with open(path) as f:
        state = json.load(f)
    if 'trajectory' in state:
        model = model or examples.load(state['model'])
        state = state['trajectory']
    if model is None:
        raise AtlasSchemaError(f'{path}: trajectory file names no model')
    return model, GeneralizedTrajectory.from_state(model, state)


def cmd_show(args, model: MorseModel, cfg: Config) -> int:
    print(repr(model))
    print(str(model))
    rows = []
    registry = registry_for(model, cfg)
    for a in model.critical_points:
        for b in model.critical_points:
            if a.index > b.index and a.value > b.value and registry.connected(a, b):
                rows.append([a.id, b.id, a.index - b.index - 1, registry.trajectories(a, b).describe()])
    if rows:
        print(format_pretty_table(rows, ['Source', 'Target', 'Dimension', 'Trajectories']))
    return 0


def cmd_flow(args, model: MorseModel, cfg: Config) -> int:
    sample = integrate(model, parse_point(model, args.start), parse_until(model, args.until), args.n, cfg)
    if args.out is None:
        sample.write_csv(sys.stdout)
    else:
        with open(args.out, 'w', newline='') as f:
            sample.write_csv(f)
    return 0


def cmd_critseqs(args, model: MorseModel, cfg: Config) -> int:
    seqs = enumerate_critseqs(model, args.source, args.target, cfg)
    print(format_pretty_table([[str(s), s.k] for s in seqs], ['Sequence', 'k']))
    return 0


def cmd_distance(args, model: MorseModel, cfg: Config) -> int:
    _, a = _read_trajectory(model, args.first)
    _, b = _read_trajectory(model, args.second)
    n = args.samples or int(cfg['samples'])
    d = metric(a, b, n, cfg)
    logger.info(f"Sampling bounds: {sampling_bound(a, n):.3g}, {sampling_bound(b, n):.3g}")
    print(repr(d))
    return 0


def cmd_glue(args, model: MorseModel, cfg: Config) -> int:
    points = [model.point(p) for p in args.seq.split(',') if p]
    seq = CritSeq(points, model.point(args.source), model.point(args.target))
    taus = _floats(args.taus) if args.taus else []
    chain = seq.chain
    if args.factors:
        exits = [_floats(f) for f in args.factors.split(';')]
    else:
        registry = registry_for(model, cfg)
        picks = [int(i) for i in args.pick.split(',')] if args.pick else [0] * (len(chain) - 1)
        exits = [registry.trajectories(a, b).representatives[i] for a, b, i in zip(chain, chain[1:], picks)]
    if len(exits) != len(chain) - 1:
        raise ConfigError(f'{seq} needs {len(chain) - 1} factors, got {len(exits)}')
    factors = [unstable_trajectory(model, a, m, cfg) for a, m in zip(chain, exits)]
    gamma = glue(seq, GluingInput(factors, taus), cfg=cfg)
    _dump({'model': model.name, 'trajectory': gamma.__getstate__()}, args.out)
    return 0


def cmd_verify(args, model: MorseModel, cfg: Config) -> int:
    if args.t is not None:
        cfg.set('t_ladder', [args.t])
    if args.tol is not None:
        cfg.set('assoc_tol', args.tol)
    run = verify(model, args.suite, cfg)
    print(run.table())
    if args.json:
        _dump(run.__getstate__(), args.json)
    return 0 if run.passed else 1


def cmd_export_plot(args, model: Optional[MorseModel], cfg: Config) -> int:
    model, gamma = _read_trajectory(model, args.trajectory)
    n = args.n or int(cfg['samples'])
    out = sys.stdout if args.out is None else open(args.out, 'w', newline='')
    try:
        writer = csv.writer(out)
        width = len(model.embed(gamma.pieces[0].start))
        writer.writerow(['piece', 'time', 'value', 'region'] + [f'e{i}' for i in range(width)] +
                        [f'c{i}' for i in range(model.dimension)])
        for index, piece in enumerate(gamma.pieces):
            offset = 0.0
            for seg in piece.segments:
                for s, point, f in seg.sample(n):
                    coords = [repr(float(c)) for c in point_coords(point)]
                    writer.writerow([index, repr(offset + s), repr(float(f)), region_tag(point)] +
                                    [repr(float(c)) for c in model.embed(point)] + coords)
                if math.isfinite(seg.duration):
                    offset += seg.duration
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='pymorse',
                                     description='Trajectory spaces of Euclidean Morse-Smale models: flows, '
                                                 'critical point sequences, metrics, gluing and verification.')
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help='Increase logging (-v info, -vv debug, -vvv trace)')
    parser.add_argument('--config', default=None, help='key = value file overriding the default tolerances')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('show', help='Print the critical points and trajectory spaces of a model')
    p.add_argument('model')
    p.set_defaults(func=cmd_show)

    p = sub.add_parser('flow', help='Sample a flow path as CSV')
    p.add_argument('model')
    p.add_argument('--start', required=True, help='id:v1,..., box:id:w1,...:u or ambient:a1,a2')
    p.add_argument('--until', default='limit', help='limit, time:T, level:c, entry:id or exit:id')
    p.add_argument('-n', type=int, default=None, help='Samples per segment')
    p.add_argument('--out', default=None, help='CSV file, stdout by default')
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser('critseqs', help='List the critical point sequences between two ends')
    p.add_argument('model')
    p.add_argument('--from', dest='source', required=True, help="Critical point id or 'X'")
    p.add_argument('--to', dest='target', required=True, help="Critical point id or 'X'")
    p.set_defaults(func=cmd_critseqs)

    p = sub.add_parser('distance', help='Distance of two trajectory files')
    p.add_argument('model')
    p.add_argument('first')
    p.add_argument('second')
    p.add_argument('--samples', type=int, default=None)
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser('glue', help='Glue trajectories along a sequence and write the result as JSON')
    p.add_argument('model')
    p.add_argument('--from', dest='source', required=True)
    p.add_argument('--to', dest='target', required=True)
    p.add_argument('--seq', default='', help='Comma separated intermediate critical points')
    p.add_argument('--taus', default='', help='Comma separated transition times')
    p.add_argument('--factors', default=None, help='Semicolon separated exit points, one per factor')
    p.add_argument('--pick', default=None, help='Comma separated representative indices, one per factor')
    p.add_argument('--out', default=None)
    p.set_defaults(func=cmd_glue)

    p = sub.add_parser('verify', help='Run verification suites')
    p.add_argument('model')
    p.add_argument('--suite', action='append', choices=list(SUITES) + ['all'], default=None)
    p.add_argument('--t', type=float, default=None, help='Fixed neighbourhood parameter instead of the ladder')
    p.add_argument('--tol', type=float, default=None, help='Associativity tolerance')
    p.add_argument('--json', default=None, help='Write the report as JSON')
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser('export-plot', help='Write a trajectory file as CSV for plotting')
    p.add_argument('trajectory')
    p.add_argument('--model', default=None, help='Model, when the file does not name one')
    p.add_argument('-n', type=int, default=None)
    p.add_argument('--out', default=None)
    p.set_defaults(func=cmd_export_plot)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=_LEVELS[min(args.verbose, len(_LEVELS) - 1)],
                        format='%(levelname)s %(name)s: %(message)s')
    if getattr(args, 'suite', None) is None and args.command == 'verify':
        args.suite = ['all']
    try:
        cfg = CONFIG.copy() if args.config is None else Config.load(args.config)
        model = examples.load(args.model) if getattr(args, 'model', None) else None
        return args.func(args, model, cfg)
    except (AtlasSchemaError, ConfigError) as e:
        print(f'pymorse: {e}', file=sys.stderr)
        return 2
    except MorseError as e:
        print(f'pymorse: {type(e).__name__}: {e}', file=sys.stderr)
        return 2


if __name__ == '__main__':
    sys.exit(main())
