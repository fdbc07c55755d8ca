"""Online familywise-error-rate control under arbitrary dependence."""
from importlib.metadata import PackageNotFoundError, version

from .core import DecisionRecord, History, HypothesisTruth, ProtocolError, PValueRecord, StreamState
from .kernels import BACKEND
from .procedures import (
    AdaptiveSpending,
    AlphaSpending,
    ContinuousGraph,
    ContinuousSpending,
    Geometric,
    OnlineFallback,
    audit_budget,
    make_interpolation_function,
)

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"
