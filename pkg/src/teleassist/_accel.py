"""JIT toggle for the numeric kernels.

The hot quaternion/geometry kernels in :mod:`teleassist.kernels` are compiled
with numba by default. Set ``TELEASSIST_NUMBA=0`` (or ``false``/``off``) to run
the pure-numpy fallback instead -- useful for debugging tracebacks, coverage,
and for measuring the JIT gain (see ``benchmarks/bench_kernels.py``).
"""

import os

_flag = os.environ.get("TELEASSIST_NUMBA", "1").strip().lower()
JIT_ENABLED = _flag not in ("0", "false", "off", "no")

if JIT_ENABLED:
    from numba import njit
else:

    def njit(func=None, **kwargs):
        # mimic both @njit and @njit(cache=True) spellings
        if func is not None and callable(func):
            return func

        def wrapper(f):
            return f

        return wrapper
