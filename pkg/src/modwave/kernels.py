"""Backend selection for the hot integration loops.

The compiled extension ``modwave._kernels`` is used when it imports; the
pure numpy module ``modwave._fallback`` is used otherwise, or when the
environment variable ``MODWAVE_PURE_PYTHON`` is set to a non-empty value
other than ``0``.
"""

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("MODWAVE_PURE_PYTHON", "0") in ("", "0"):
    try:
        from . import _kernels as _impl  # noqa: F811

        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback


def backend_module(name=None):
    """Return the kernel module for ``name`` ('compiled', 'python' or None)."""
    if name is None:
        return _impl
    if name == "python":
        return _fallback
    if name == "compiled":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def compiled_available():
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        return False
    return True


chain_integrate = _impl.chain_integrate
mathieu_integrate = _impl.mathieu_integrate
mathieu_traces = _impl.mathieu_traces
