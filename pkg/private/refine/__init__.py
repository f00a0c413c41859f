# Copyright (C) 2025 bvspectra contributors
# See LICENSE for copying information.

from .refine import UntilStable

__all__ = ["UntilStable"]
