"""Kernel selection: compiled extension if importable, else the Python port.

Set ``QHBOOT_PURE_PYTHON=1`` to force the fallback.
"""
import os

if os.environ.get("QHBOOT_PURE_PYTHON", "") not in ("", "0"):
    from qhboot._kernels_python import bl_chain_value, circular_counts

    COMPILED = False
else:
    try:
        from qhboot._kernels import bl_chain_value, circular_counts

        COMPILED = True
    except ImportError:  # pragma: no cover
        from qhboot._kernels_python import bl_chain_value, circular_counts

        COMPILED = False

__all__ = ["COMPILED", "bl_chain_value", "circular_counts"]
