# Copyright (C) 2025 bvspectra contributors
# See LICENSE for copying information.

import logging
import math
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad_vec

logger = logging.getLogger(__name__)


class QuadratureError(Exception):
    pass


def _sample_point(a: float, b: float) -> float:
    if math.isfinite(a) and math.isfinite(b):
        return 0.5 * (a + b)
    if math.isfinite(a):
        return a + 1.0
    if math.isfinite(b):
        return b - 1.0
    return 0.0


def integrate(
    f: Callable[[float], np.ndarray],
    a: float,
    b: float,
    epsabs: float = 1e-12,
    epsrel: float = 1e-10,
    limit: int = 2000,
    points: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """Adaptive Gauss-Kronrod integral of a complex array-valued f over [a, b].

    Real and imaginary parts are integrated as one stacked real vector.
    """
    shape = np.shape(f(_sample_point(a, b)))
    if a == b:
        return np.zeros(shape, dtype=complex)
    if a > b:
        return -integrate(f, b, a, epsabs, epsrel, limit, points)

    size = int(np.prod(shape)) if shape else 1

    def stacked(x: float) -> np.ndarray:
        v = np.asarray(f(x), dtype=complex).ravel()
        return np.concatenate([v.real, v.imag])

    finite = math.isfinite(a) and math.isfinite(b)
    inner = None
    if finite and points:
        inner = sorted(p for p in points if a < p < b) or None

    try:
        res, err, info = quad_vec(
            stacked, a, b, epsabs=epsabs, epsrel=epsrel, norm="max", limit=limit, points=inner, full_output=True
        )
    except Exception as e:
        raise QuadratureError(f"failed to integrate on [{a}, {b}]: {e}")

    allowed = 100.0 * max(epsabs, epsrel * float(np.max(np.abs(res)))) if np.all(np.isfinite(res)) else 0.0
    if not np.all(np.isfinite(res)) or (info.status != 0 and err > allowed):
        raise QuadratureError(
            f"quadrature did not converge on [{a}, {b}]: {info.message} (error estimate {err:.3e}, {info.neval} evaluations)"
        )
    if info.status != 0:
        logger.debug(f"quadrature stopped early (status {info.status}) on [{a}, {b}], error estimate {err:.3e}")

    value = res[:size] + 1j * res[size:]
    return value.reshape(shape)
