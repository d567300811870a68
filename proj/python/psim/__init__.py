"""Surrogate process simulator toolkit.

A synthetic phosphorus-removal plant, six next-step forecasting model
families, training/tuning, a step/reset simulation environment, and
compounding-error diagnostics. The heavy lifting lives in the C++ core
exposed through the `_psim` extension.
"""

from ._psim import *  # noqa: F401,F403
from ._psim import __doc__ as _core_doc  # noqa: F401
