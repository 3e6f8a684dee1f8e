"""Dispatch for the hot numeric kernels.

Layout conventions (float64, C-contiguous) shared by both backends:

* state row ``y = [s, x_1..x_n, r, d]`` (length n + 3)
* costate row ``p = [p_s, p_x1..p_xn, p_r]`` (length n + 2)
* controls ``u`` are node values, shape (N + 1, n), linearly interpolated
  between nodes, so the RK4 half-step control is the mean of two nodes.

``EPICON_BACKEND=numpy`` selects the vectorized fallback; the default uses
numba-compiled scalar loops when numba is importable.
"""

from ._accel import BACKEND, HAS_NUMBA

if HAS_NUMBA:
    from ._loops import (
        discrete_cost_gradient,
        exhaustive_piecewise,
        rk4_adjoint,
        rk4_forward,
    )
else:
    from ._vector import (
        discrete_cost_gradient,
        exhaustive_piecewise,
        rk4_adjoint,
        rk4_forward,
    )

__all__ = [
    "BACKEND",
    "discrete_cost_gradient",
    "exhaustive_piecewise",
    "rk4_adjoint",
    "rk4_forward",
]
