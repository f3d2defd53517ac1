"""Loss-landscape analysis toolkit.

Trains small classifiers under configurable schemes, finds low-loss
polygonal-chain connections between independently trained modes, detects
loss barriers on linear segments, and evaluates loss surfaces on planes
spanned by modes and their connections.
"""

from .core import DimensionMismatch, ParamVector, RngStream, axpy_combine
from .net import LossReport, MlpSpec, backward, forward_loss, init_params

__all__ = [
    "DimensionMismatch",
    "ParamVector",
    "RngStream",
    "axpy_combine",
    "LossReport",
    "MlpSpec",
    "backward",
    "forward_loss",
    "init_params",
]

__version__ = "0.1.0"
