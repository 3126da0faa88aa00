"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``CPCSIM_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

MH, ALWAYS, NEVER = _kernels_py.MH, _kernels_py.ALWAYS, _kernels_py.NEVER

_impl = _kernels_py
BACKEND = "python"
if os.environ.get("CPCSIM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

sample_rows = _impl.sample_rows
naming_sweep = _impl.naming_sweep
mh_chain = _impl.mh_chain
