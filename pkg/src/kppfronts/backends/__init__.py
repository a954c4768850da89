"""Backend selection for the hot time-stepping kernels.

The environment variable KPPFRONTS_BACKEND picks the implementation:

* ``numba`` -- JIT kernels (error if numba cannot be imported),
* ``numpy`` -- pure numpy/scipy fallback,
* unset    -- numba when available, numpy otherwise.

``kernels`` is the selected module; both expose identical functions so the
rest of the package is backend-agnostic.
"""

import os

_requested = os.environ.get("KPPFRONTS_BACKEND", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise RuntimeError(
        f"KPPFRONTS_BACKEND={_requested!r} not understood (use 'numba' or 'numpy')")

if _requested == "numpy":
    from . import kernels_numpy as kernels
elif _requested == "numba":
    from . import kernels_numba as kernels
else:
    try:
        from . import kernels_numba as kernels
    except ImportError:
        from . import kernels_numpy as kernels

BACKEND = "numba" if kernels.JIT else "numpy"


def get_backend(name):
    """Return a kernels module by name, independent of the active default."""
    if name == "numpy":
        from . import kernels_numpy
        return kernels_numpy
    if name == "numba":
        from . import kernels_numba
        return kernels_numba
    raise ValueError(f"unknown backend {name!r}")
