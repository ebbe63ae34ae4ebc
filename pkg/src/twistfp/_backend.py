"""Kernel backend selection.

Prefers the compiled Cython extension; falls back to the pure-Python port
when the extension is unavailable. Set TWISTFP_PURE=1 to force the
pure-Python backend (used by the benchmark and the parity tests).
"""

import os

if os.environ.get("TWISTFP_PURE"):
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as kernels

BACKEND = kernels.BACKEND
FIELD_PENDULUM = kernels.FIELD_PENDULUM
FIELD_HAMTWIST = kernels.FIELD_HAMTWIST
flow = kernels.flow
flow_batch = kernels.flow_batch
