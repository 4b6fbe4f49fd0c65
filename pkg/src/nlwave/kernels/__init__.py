"""Backend selection for the hot kernels.

NLWAVE_BACKEND=numba|numpy picks the implementation; unset (or "auto")
prefers numba and falls back to pure numpy when numba is unavailable.
Both backends expose the same functions with identical semantics; see
benchmarks/bench_kernels.py for a speed comparison.
"""

import os

_choice = os.environ.get("NLWAVE_BACKEND", "auto").strip().lower()

if _choice in ("", "auto"):
    try:
        from . import numba_backend as _impl

        BACKEND = "numba"
    except ImportError:
        from . import numpy_backend as _impl

        BACKEND = "numpy"
elif _choice == "numba":
    from . import numba_backend as _impl

    BACKEND = "numba"
elif _choice == "numpy":
    from . import numpy_backend as _impl

    BACKEND = "numpy"
else:
    raise ImportError(
        f"NLWAVE_BACKEND={_choice!r} not recognized (use 'numba' or 'numpy')"
    )

diff_quotient = _impl.diff_quotient
nonlinear_step = _impl.nonlinear_step
linear_step = _impl.linear_step
discrete_energy = _impl.discrete_energy

__all__ = [
    "BACKEND",
    "diff_quotient",
    "nonlinear_step",
    "linear_step",
    "discrete_energy",
]
