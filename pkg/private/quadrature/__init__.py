# Copyright (C) 2025 bvspectra contributors
# See LICENSE for copying information.

from .quadrature import integrate, QuadratureError

__all__ = ["integrate", "QuadratureError"]
