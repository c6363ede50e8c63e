"""Select the compiled scaling kernels when available, else the numpy fallback.

Set ``RFMRANK_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
if os.environ.get("RFMRANK_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
else:
    _impl = _kernels_py

feature_moments = _impl.feature_moments
solve_increments = _impl.solve_increments

OK = _kernels_py.OK
FROZEN = _kernels_py.FROZEN
UNCONVERGED = _kernels_py.UNCONVERGED

python_kernels = _kernels_py
