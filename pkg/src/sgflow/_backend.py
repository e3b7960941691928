"""Select the compiled kernel core, or the NumPy fallback when it is absent.

Set ``SGFLOW_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

BACKEND = "python"
if not os.environ.get("SGFLOW_PURE_PYTHON"):
    try:
        from . import _core as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
else:
    _impl = _fallback

trig_sums = _impl.trig_sums
hermite_eval = _impl.hermite_eval
ramp_sum = _impl.ramp_sum
ball_scan_1d = _impl.ball_scan_1d

PLAIN = _fallback.PLAIN
MINUS_STEP = _fallback.MINUS_STEP
MINUS_RAMP = _fallback.MINUS_RAMP
