"""Backend selection for the inner loops.

The compiled extension is used when it imports; set ``XPMCHANNEL_BACKEND=python``
to force the numpy fallback.  ``BACKEND`` names the active implementation.
"""
import os

from . import _kernels_py

if os.environ.get("XPMCHANNEL_BACKEND", "").lower() == "python":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

mixture_loglik = _impl.mixture_loglik
xpm_phase_rotate = _impl.xpm_phase_rotate

__all__ = ["BACKEND", "mixture_loglik", "xpm_phase_rotate"]
