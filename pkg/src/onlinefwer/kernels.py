"""Backend selection for the level recursions.

The compiled extension is used when it imports; setting
``ONLINEFWER_PURE_PYTHON=1`` forces the pure-Python implementation.
"""
import os

from . import _pykernels

python_backend = _pykernels
compiled_backend = None

if not os.environ.get("ONLINEFWER_PURE_PYTHON"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND = backend.BACKEND

adaptive_spending = backend.adaptive_spending
geometric = backend.geometric
graph = backend.graph
spending = backend.spending
