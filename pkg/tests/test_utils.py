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
import logging

import numpy as np
import pytest

from pyMorse import ConfigError
from pyMorse.utils import (TRACE, Config, cutoff, get_object_properties, norm, sphere_chart, tangent_basis,
                           to_sphere)


class TestConfig():

    def test_mode_lookup(self):
        cfg = Config()
        assert cfg.get('eps_sphere', 'synthetic') == 1e-9
        assert cfg.get('eps_sphere', 'numeric') == 1e-6
        assert cfg['samples'] == 512

    def test_bare_key_sets_both_modes(self):
        cfg = Config(eps_sphere=1e-4)
        assert cfg.get('eps_sphere', 'synthetic') == 1e-4
        assert cfg.get('eps_sphere', 'numeric') == 1e-4

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            Config().set('warp_factor', 9)
        with pytest.raises(ConfigError):
            Config().get('warp_factor')

    def test_copy_is_independent(self):
        base = Config()
        other = base.copy(t_ladder=[0.5])
        other['t_ladder'].append(0.1)
        assert base['t_ladder'] == [0.5, 0.25, 0.125, 0.0625]

    def test_load(self, tmp_path):
        path = tmp_path / 'pymorse.cfg'
        path.write_text('# tolerances\nsamples = 64\nt_ladder = 0.5, 0.25\neps_match.numeric = 1e-4\n\n')
        cfg = Config.load(str(path))
        assert cfg['samples'] == 64
        assert cfg['t_ladder'] == [0.5, 0.25]
        assert cfg.get('eps_match', 'numeric') == 1e-4

    def test_load_errors(self, tmp_path):
        path = tmp_path / 'bad.cfg'
        path.write_text('samples 64\n')
        with pytest.raises(ConfigError):
            Config.load(str(path))

    @pytest.mark.parametrize("raw", ["0.5", "[0.5]", "0.5,"])
    def test_load_single_item_list(self, tmp_path, raw):
        path = tmp_path / 'ladder.cfg'
        path.write_text(f't_ladder = {raw}\n')
        assert Config.load(str(path))['t_ladder'] == [0.5]

    def test_load_typed_by_default(self, tmp_path):
        path = tmp_path / 'typed.cfg'
        path.write_text('rk_rtol = 1\nscan_points = 36\neps_event = 1e-7\n')
        cfg = Config.load(str(path))
        assert isinstance(cfg['rk_rtol'], float)
        assert cfg['scan_points'] == 36
        assert cfg.get('eps_event', 'numeric') == 1e-7

    def test_load_bad_value(self, tmp_path):
        path = tmp_path / 'bad.cfg'
        path.write_text('scan_points = many\n')
        with pytest.raises(ConfigError):
            Config.load(str(path))

    def test_rng_is_seeded(self):
        assert Config().rng().random() == Config().rng().random()


class TestHelpers():

    def test_cutoff(self):
        assert cutoff(0.5, 1.0, 2.0) == 1.0
        assert cutoff(3.0, 1.0, 2.0) == 0.0
        assert cutoff(1.5, 1.0, 2.0) == pytest.approx(0.5)

    def test_norm_of_empty(self):
        assert norm(np.zeros(0)) == 0.0

    def test_to_sphere(self):
        np.testing.assert_allclose(to_sphere(np.array([3.0, 4.0]), 0.5), [0.3, 0.4])
        with pytest.raises(ValueError):
            to_sphere(np.zeros(2), 1.0)

    @pytest.mark.parametrize("p", [[1.0, 0.0, 0.0], [0.0, 0.0, 2.0], [-1.0, 1.0, 1.0]])
    def test_tangent_basis(self, p):
        basis = tangent_basis(np.array(p))
        assert basis.shape == (3, 2)
        np.testing.assert_allclose(basis.T @ np.array(p), 0.0, atol=1e-12)
        np.testing.assert_allclose(basis.T @ basis, np.eye(2), atol=1e-12)

    def test_sphere_chart(self):
        point, dim = sphere_chart(np.array([0.0, 0.25]), 0.25)
        assert dim == 1
        assert norm(point(np.array([0.1]))) == pytest.approx(0.25)
        np.testing.assert_allclose(point(np.zeros(1)), [0.0, 0.25])

    def test_object_properties(self):
        state = get_object_properties({'a': np.arange(3), 'b': (np.float64(1.5), None)})
        assert state == {'a': [0, 1, 2], 'b': [1.5, None]}


class TestLogging():

    def test_trace_level(self):
        logger = logging.getLogger('pyMorse')
        assert logging.getLevelName(TRACE) == 'TRACE'
        assert hasattr(logger, 'trace')
