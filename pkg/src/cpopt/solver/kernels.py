"""Kernel backend selection.

The compiled Cython extension is preferred when it imported cleanly; the
numpy implementation is the fallback and the parity reference.  Set
CPOPT_PURE_PYTHON=1 to force the fallback regardless of availability.
"""

from __future__ import annotations

import os

from . import kernels_py

try:
    if os.environ.get("CPOPT_PURE_PYTHON") == "1":
        raise ImportError("pure-python kernels forced by environment")
    from . import _kernels as _compiled  # type: ignore[attr-defined]

    HAVE_COMPILED = True
except ImportError:
    _compiled = None
    HAVE_COMPILED = False

DEFAULT_KERNEL = "compiled" if HAVE_COMPILED else "pure"


def get_kernels(name: str | None = None):
    """Return the kernel module for `name` (None or 'auto' picks the best
    available backend)."""
    if name in (None, "auto"):
        name = DEFAULT_KERNEL
    if name == "pure":
        return kernels_py
    if name == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError(
                "compiled kernels requested but the extension is not available"
            )
        return _compiled
    raise ValueError(f"unknown kernel backend {name!r}")
