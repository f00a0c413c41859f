# Copyright (C) 2025 bvspectra contributors
# See LICENSE for copying information.

from typing import Tuple

import numpy as np
import scipy.linalg


def singular_values(a: np.ndarray) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    if a.size == 0:
        return np.zeros(0)
    return scipy.linalg.svdvals(a)


def numerical_rank(a: np.ndarray, rtol: float = 1e-10) -> int:
    s = singular_values(a)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def near_singular(a: np.ndarray, rtol: float = 1e-10) -> Tuple[bool, float]:
    """Whether a square matrix is numerically singular, and its 2-norm condition number."""
    s = singular_values(a)
    smax, smin = s[0], s[-1]
    cond = np.inf if smin == 0.0 else smax / smin
    return bool(smin < rtol * max(1.0, smax)), float(cond)


def null_space(a: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    return scipy.linalg.null_space(a, rcond=rtol)


def range_basis(a: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    if not np.any(a):
        return np.zeros((a.shape[0], 0), dtype=complex)
    return scipy.linalg.orth(a, rcond=rtol)


def projector(basis: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto the span of orthonormal columns."""
    return basis @ basis.conj().T


def psd_split(gram: np.ndarray, rtol: float = 1e-10) -> Tuple[np.ndarray, np.ndarray]:
    """(null basis, range basis) of a Hermitian positive semi-definite matrix."""
    gram = 0.5 * (gram + gram.conj().T)
    values, vectors = scipy.linalg.eigh(gram)
    top = max(float(np.max(np.abs(values))), 0.0) if values.size else 0.0
    small = values <= rtol * top
    return vectors[:, small], vectors[:, ~small]


def is_hermitian(a: np.ndarray, tol: float = 1e-12) -> bool:
    a = np.atleast_2d(a)
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol * max(1.0, np.max(np.abs(a), initial=0.0)))


def min_eigenvalue(a: np.ndarray) -> float:
    a = np.atleast_2d(a)
    return float(scipy.linalg.eigvalsh(0.5 * (a + a.conj().T))[0])


def hermitian_part(a: np.ndarray) -> Tuple[np.ndarray, float]:
    """Symmetrized matrix and the size of the discarded skew part."""
    sym = 0.5 * (a + a.conj().T)
    return sym, float(np.max(np.abs(a - sym), initial=0.0))
