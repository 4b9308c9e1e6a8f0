"""Graph-based control plane for programmable hexagonal photonic meshes."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401
