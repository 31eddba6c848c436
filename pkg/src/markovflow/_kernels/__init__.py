"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import time from ``MARKOVFLOW_JIT``:
``"0"``/``"false"``/``"off"`` forces numpy, anything else uses numba when it
is importable.  ``BACKEND`` records the choice.
"""

import os

import numpy as np

from . import _numpy

_flag = os.environ.get("MARKOVFLOW_JIT", "1").strip().lower()
_want_jit = _flag not in ("0", "false", "off", "no")

_impl = _numpy
BACKEND = "numpy"
if _want_jit:
    try:
        from . import _numba
    except ImportError:  # pragma: no cover - numba is a hard dependency in CI
        pass
    else:
        _impl = _numba
        BACKEND = "numba"


def expm_batch(A):
    A = np.ascontiguousarray(A, dtype=np.float64)
    return _impl.expm_batch(A)


def cumsimpson(y, h):
    y = np.ascontiguousarray(y, dtype=np.float64)
    h = np.ascontiguousarray(h, dtype=np.float64)
    return _impl.cumsimpson(y, h)


def rk4_propagate(M0, Qs, h):
    return _impl.rk4_propagate(
        np.ascontiguousarray(M0, dtype=np.float64),
        np.ascontiguousarray(Qs, dtype=np.float64),
        np.ascontiguousarray(h, dtype=np.float64),
    )


def pbs_series(A, h, tol, max_terms):
    total, n, last = _impl.pbs_series(
        np.ascontiguousarray(A, dtype=np.float64),
        np.ascontiguousarray(h, dtype=np.float64),
        float(tol),
        int(max_terms),
    )
    return total, int(n), float(last)


__all__ = ["BACKEND", "expm_batch", "cumsimpson", "rk4_propagate", "pbs_series"]
