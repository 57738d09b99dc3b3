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
This package contains the connecting maps between the exit set of one
critical point and the entry set of another: declared linear maps for
synthetic atlases and shooting through the ambient field for numeric models.
"""

from .linear import LinearTransfer, TransferResult, exit_point, transit_time
from .shooting import ShootingEngine


__all__ = [
    'LinearTransfer', 'TransferResult', 'ShootingEngine', 'exit_point', 'transit_time'
]
