"""Backend selection for the hot loops.

The compiled extension is used when it was built; otherwise the numpy
fallback is imported.  Setting ``TSTEER_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
rk4_trig_flow = _kernels_py.rk4_trig_flow

if os.environ.get("TSTEER_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        rk4_trig_flow = _ckernels.rk4_trig_flow
        BACKEND = "compiled"

trig_velocity = _kernels_py.trig_velocity

__all__ = ["BACKEND", "rk4_trig_flow", "trig_velocity"]
