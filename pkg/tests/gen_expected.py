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
"""Regenerates the expected values of a dataset case from the current implementation."""

import argparse
import json
import os
import sys

from pyMorse import load
from pyMorse.flow import find_infinite_trajectories
from pyMorse.global_charts import breaking_number, enumerate_critseqs
from pyMorse.utils import get_object_properties


def update_case(folder):
    with open(os.path.join(folder, 'case.json')) as f:
        data = json.load(f)

    case = data['input']
    model = load(case['model'])

    if 'from' in case:
        seqs = enumerate_critseqs(model, case['from'], case['to'])
        data['values'] = {
            'sequences': sorted(str(s) for s in seqs),
            'breaking_number': breaking_number(model, case['from'], case['to']),
        }
    else:
        found = find_infinite_trajectories(model, case['source'], case['target'])
        state = get_object_properties(found)
        data['values'] = {'dimension': state['dimension']}
        if found.dimension == 0:
            data['values']['count'] = len(state['points'])

    with open(os.path.join(folder, 'case.json'), "w") as f:
        f.write(json.dumps(data, indent=4))


def main():

    parser = argparse.ArgumentParser(
        description='Regenerate case.json values from the current implementation.')
    parser.add_argument('--folder', required=True,
                        help='Dataset case folder containing a case.json with an input block')

    args = parser.parse_args()

    if not os.path.isfile(os.path.join(args.folder, 'case.json')):
        print(f'{args.folder} has no case.json', file=sys.stderr)
        sys.exit(1)

    update_case(args.folder)


if __name__ == '__main__':
    main()
