"""Python bindings for the statenet cooking-state classifier."""

from ._statenet import *  # noqa: F401,F403
from ._statenet import __doc__  # noqa: F401
