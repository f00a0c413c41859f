import logging
import threading
from collections import OrderedDict
from typing import Callable, Generic, Hashable, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")


class EvaluatorCache(Generic[T]):
    """Thread-safe keyed cache of lazily built evaluators (fundamental matrices per λ)."""

    def __init__(self, max_entries: int = 128):
        self._lock = threading.RLock()
        self._entries: "OrderedDict[Hashable, T]" = OrderedDict()
        self.max_entries = max_entries

    def get(self, key: Hashable, create: Callable[[], T]) -> T:
        with self._lock:
            if key in self._entries:
                self._entries.move_to_end(key)
                return self._entries[key]

        value = create()

        with self._lock:
            if key in self._entries:
                return self._entries[key]
            self._entries[key] = value
            if len(self._entries) > self.max_entries:
                evicted, _ = self._entries.popitem(last=False)
                logger.debug(f"evaluator cache full, dropped {evicted}")
            return value

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def close(self) -> None:
        with self._lock:
            self._entries.clear()
