"""NV spin-echo simulation in a rotating diamond with a 13C bath."""

from ._nvrot import *  # noqa: F401,F403
from ._nvrot import __doc__  # noqa: F401

__version__ = "0.1.0"
