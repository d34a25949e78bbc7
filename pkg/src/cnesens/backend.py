"""Kernel backend selection.

The hot numeric kernels exist twice: a numba-compiled version
(`_kernels_numba`) and a pure-numpy fallback (`_kernels_numpy`).
The environment variable ``CNESENS_BACKEND`` picks one at import time:

  * ``auto``  (default) -- numba if importable, else numpy
  * ``numba`` -- require numba, fail loudly if unavailable
  * ``numpy`` -- force the pure-numpy path

``benchmarks/kernel_bench.py`` compares the two.
"""

from __future__ import annotations

import os

_choice = os.environ.get("CNESENS_BACKEND", "auto").strip().lower()

if _choice not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"CNESENS_BACKEND={_choice!r} not understood; use 'auto', 'numba' or 'numpy'"
    )

if _choice == "numpy":
    from . import _kernels_numpy as kernels

    BACKEND = "numpy"
else:
    try:
        from . import _kernels_numba as kernels

        BACKEND = "numba"
    except ImportError:
        if _choice == "numba":
            raise
        from . import _kernels_numpy as kernels

        BACKEND = "numpy"


def get_kernels(name: str | None = None):
    """Kernel module for an explicit backend name, or the active one."""
    if name is None or name == BACKEND:
        return kernels
    if name == "numpy":
        from . import _kernels_numpy

        return _kernels_numpy
    if name == "numba":
        from . import _kernels_numba

        return _kernels_numba
    raise ValueError(f"unknown backend {name!r}")
