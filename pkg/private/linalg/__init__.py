# Copyright (C) 2025 bvspectra contributors
# See LICENSE for copying information.

from .linalg import (
    singular_values,
    numerical_rank,
    near_singular,
    null_space,
    range_basis,
    projector,
    psd_split,
    is_hermitian,
    min_eigenvalue,
    hermitian_part,
)

__all__ = [
    "singular_values",
    "numerical_rank",
    "near_singular",
    "null_space",
    "range_basis",
    "projector",
    "psd_split",
    "is_hermitian",
    "min_eigenvalue",
    "hermitian_part",
]
