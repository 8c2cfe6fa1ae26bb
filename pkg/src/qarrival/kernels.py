"""Backend selection for the hot kernels.

The compiled extension is preferred; set ``QARRIVAL_PURE_PYTHON=1`` to force
the numpy fallback (useful for debugging and for the backend cross-check).
"""
import logging
import os

logger = logging.getLogger(__name__)

if os.environ.get("QARRIVAL_PURE_PYTHON") == "1":
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:  # extension not built
        from . import _kernels_py as _impl

        BACKEND = "python"
        logger.debug("compiled kernels unavailable, using numpy fallback")

packet_eval = _impl.packet_eval
transfer_scatter = _impl.transfer_scatter

__all__ = ["BACKEND", "packet_eval", "transfer_scatter"]
