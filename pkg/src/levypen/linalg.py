"""Dense solves for the small systems (n of order 10) used throughout."""
from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg as sla

from .errors import SingularSystemError


def solve_refined(mat, rhs):
    """Solve ``mat @ x = rhs`` by partial-pivoting LU plus one refinement step.

    Returns ``(x, residual_inf_norm, condition_number)``.  Raises
    :class:`SingularSystemError` if the factorisation breaks down.
    """
    mat = np.asarray(mat, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("error", sla.LinAlgWarning)
        try:
            lu = sla.lu_factor(mat)
            x = sla.lu_solve(lu, rhs)
            x = x + sla.lu_solve(lu, rhs - mat @ x)
        except (sla.LinAlgWarning, ValueError, np.linalg.LinAlgError) as exc:
            raise SingularSystemError(f"LU solve failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("LU solve produced non-finite values")
    residual = float(np.max(np.abs(mat @ x - rhs))) if rhs.size else 0.0
    return x, residual, float(np.linalg.cond(mat))
