"""Cooperative multi-agent learning with hierarchies of reward machines"""

# SPDX-License-Identifier: BSD-3-Clause

from pathlib import Path
from importlib.metadata import version, PackageNotFoundError


try:
    __version__ = version(__name__)
except PackageNotFoundError:
    __version__ = "0.0.dev0"

ASSETS_DIR = Path(__file__).parent / "assets"

del PackageNotFoundError, version
