# Copyright (C) 2025 bvspectra contributors
# See LICENSE for copying information.

from typing import Any, Callable, Optional, Tuple

import numpy as np


class UntilStable:
    """Doubles a resolution parameter until two successive results agree.

    f(level) returns an array; the loop stops once
    |f(2L) - f(L)|_max <= tol * max(1, |f(2L)|_max).
    """

    def __init__(self, start: float, max_doublings: int, tol: float):
        self.start = start
        self.max_doublings = max_doublings
        self.tol = tol

    def do(self, f: Callable[[float], Any]) -> Tuple[Any, float, Optional[Exception]]:
        level = self.start
        previous = np.asarray(f(level))
        change = np.inf
        for attempt in range(self.max_doublings):
            level = level * 2
            current = np.asarray(f(level))
            change = float(np.max(np.abs(current - previous), initial=0.0))
            scale = max(1.0, float(np.max(np.abs(current), initial=0.0)))
            if change <= self.tol * scale:
                return current, change, None
            previous = current

        return previous, change, Exception(
            f"no stable value after {self.max_doublings} doublings (last change {change:.3e}, level {level})"
        )
