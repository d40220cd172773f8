"""Element-kernel backend selection.

The compiled Cython core is used when it was built; otherwise (or when the
environment variable CORROP_PURE_PYTHON is set to a non-empty value) the
vectorized numpy fallback takes over. Both backends implement the same three
functions with identical semantics; see benchmarks/bench_assembly.py for a
side-by-side timing.
"""

import os

from . import numpy_backend

if os.environ.get("CORROP_PURE_PYTHON"):
    _impl = numpy_backend
    BACKEND = "numpy"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = numpy_backend
        BACKEND = "numpy"

residual_cells = _impl.residual_cells
jacobian_cells = _impl.jacobian_cells
second_derivative_cells = _impl.second_derivative_cells
