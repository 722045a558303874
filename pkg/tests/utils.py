"""General test utilities"""

# SPDX-License-Identifier: BSD-3-Clause

from os.path import abspath, dirname, join

from hrmarl import ASSETS_DIR
from hrmarl.envs import ACTIONS

TEST_CASE_DIR = abspath(join(dirname(__file__), "cases"))

_ACTION_KEYS = {"U": "up", "D": "down", "L": "left", "R": "right", "S": "stay"}


def get_test_path(bname, test_dir=TEST_CASE_DIR):
    """Helper method to return the path of a test case file.

    :param bname: Test case base name.
    :type bname: str
    :param test_dir: Test case directory name.
    :type test_dir: str
    :returns: Absolute path to the test case file.
    :rtype: str

    """
    return abspath(join(test_dir, bname))


def get_asset_path(*parts):
    """Path of a bundled asset file, e.g. ``get_asset_path("pass", "team.rm")``."""
    return str(ASSETS_DIR.joinpath(*parts))


def joint_actions(script):
    """Turns a whitespace-separated script such as ``"URS SSR"`` into joint actions.

    Each token holds one letter per agent: ``U``, ``D``, ``L``, ``R`` or ``S``.

    """
    return [
        tuple(ACTIONS.index(_ACTION_KEYS[ch]) for ch in token)
        for token in script.split()
    ]


def getattr_nested(obj, idxs):
    """Helper method for recursively fetching an item from the given object.

    :param obj: Object containing the item to retrieve.
    :type obj: object
    :param idxs: List of attribute names / indices / keys to retrieve the item.
    :type idxs: list(str, int)
    :returns: None or the item.

    """
    if len(idxs) == 0:
        return obj

    idx = idxs.pop(0)

    if isinstance(obj, dict):
        if idx in obj:
            return getattr_nested(obj[idx], idxs)
    elif isinstance(obj, (list, tuple)) and isinstance(idx, int):
        if idx < len(obj):
            return getattr_nested(obj[idx], idxs)
    else:
        return getattr_nested(getattr(obj, idx), idxs)
