"""Kernel dispatch: numba-compiled hot loops with a pure-numpy fallback.

Set ``CPPRUNER_NO_NUMBA=1`` to force the numpy path.  ``CPPRUNER_THREADS``
caps the numba worker count (0 or unset = automatic).
"""

import os

import numpy as np

from . import numpy_impl

_no_numba = os.environ.get("CPPRUNER_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

USING_NUMBA = False
if not _no_numba:
    try:
        from . import numba_impl as _impl

        USING_NUMBA = True
        _threads = os.environ.get("CPPRUNER_THREADS", "").strip()
        if _threads and _threads != "0":
            import numba

            numba.set_num_threads(max(1, min(int(_threads), numba.config.NUMBA_NUM_THREADS)))
    except ImportError:
        _impl = numpy_impl
else:
    _impl = numpy_impl

xoshiro256pp_fill = _impl.xoshiro256pp_fill
jacobi_eigvals_sym = _impl.jacobi_eigvals_sym
nn_min_sqdists = _impl.nn_min_sqdists


def cp_reconstruct(factors):
    """Dense tensor from CP factor matrices (each of shape R x I_d)."""
    if USING_NUMBA and len(factors) == 3:
        return _impl.cp_reconstruct_3d(
            np.ascontiguousarray(factors[0]),
            np.ascontiguousarray(factors[1]),
            np.ascontiguousarray(factors[2]),
        )
    return numpy_impl.cp_reconstruct_dense(factors)
