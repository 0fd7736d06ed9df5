"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Set ``SYSALIAS_DISABLE_NUMBA=1`` before import to force the numpy path.
Complex inputs always take the numpy path; the compiled kernels are
specialised for float64.
"""
import os

from . import _ref

_disabled = os.environ.get("SYSALIAS_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _disabled:
        raise ImportError("numba disabled by SYSALIAS_DISABLE_NUMBA")
    from . import _jit
except ImportError:
    _jit = None

BACKEND = "numba" if _jit is not None else "numpy"
_impl = _jit if _jit is not None else _ref

expm_ss = _impl.expm_ss
sqrtm_db = _impl.sqrtm_db
log1p_pade = _impl.log1p_pade
betainc_reg = _impl.betainc_reg
confusion_sweep = _impl.confusion_sweep
admm_block = _impl.admm_block


def is_real64(X) -> bool:
    return X.dtype.kind == "f" and X.dtype.itemsize == 8


__all__ = [
    "BACKEND", "expm_ss", "sqrtm_db", "log1p_pade", "betainc_reg",
    "confusion_sweep", "admm_block", "is_real64",
]
