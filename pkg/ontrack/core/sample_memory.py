"""Training-sample memories of the online tracker."""
from collections import deque
from dataclasses import dataclass
from typing import Deque, Generic, List, Optional, Tuple, TypeVar

from ontrack.logging_config import get_logger

logger = get_logger(__name__)

T = TypeVar("T")


@dataclass(frozen=True)
class MemoryEntry(Generic[T]):
    """A stored sample with the frame it came from and its peak score."""

    frame_index: int
    score: float
    payload: T
    pinned: bool = False


class ClsMemory(Generic[T]):
    """Bounded classification memory with windowed best-sample admission.

    Within each window of ``window`` offered frames the highest-scoring
    offer is kept as the candidate; when the window closes the candidate is
    appended. Beyond ``capacity`` the oldest unpinned entry is evicted.
    Pinned (first-frame) entries are never evicted.
    """

    def __init__(self, capacity: int, window: int):
        if capacity < 1 or window < 1:
            raise ValueError(f"capacity and window must be positive, got {capacity}, {window}")
        self.capacity = capacity
        self.window = window
        self._entries: List[MemoryEntry[T]] = []
        self._candidate: Optional[MemoryEntry[T]] = None
        self._offered = 0
        self.admitted = 0

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def entries(self) -> Tuple[MemoryEntry[T], ...]:
        return tuple(self._entries)

    @property
    def candidate(self) -> Optional[MemoryEntry[T]]:
        return self._candidate

    def pin(self, payloads: List[T], frame_index: int = 0, score: float = 1.0) -> None:
        """Store first-frame samples that are never evicted."""
        pinned = sum(e.pinned for e in self._entries) + len(payloads)
        if pinned > self.capacity:
            raise ValueError(f"{pinned} pinned samples exceed memory capacity {self.capacity}")
        for payload in payloads:
            self._entries.append(MemoryEntry(frame_index, score, payload, pinned=True))
        self._evict()

    def offer(self, frame_index: int, score: float, payload: T) -> Optional[MemoryEntry[T]]:
        """Consider one frame's sample; returns the entry admitted when a window closes."""
        if self._candidate is None or score > self._candidate.score:
            self._candidate = MemoryEntry(frame_index, float(score), payload)
        self._offered += 1
        if self._offered < self.window:
            return None
        admitted = self._candidate
        self._candidate = None
        self._offered = 0
        self._entries.append(admitted)
        self.admitted += 1
        self._evict()
        logger.debug(f"[Memory] Admitted frame {admitted.frame_index} (score {admitted.score:.3f}), size {len(self)}")
        return admitted

    def _evict(self) -> None:
        while len(self._entries) > self.capacity:
            index = next(i for i, e in enumerate(self._entries) if not e.pinned)
            del self._entries[index]


class RegSampleMemory(Generic[T]):
    """First-frame samples plus a FIFO of the most recent online samples."""

    def __init__(self, maxlen: int):
        if maxlen < 1:
            raise ValueError(f"maxlen must be positive, got {maxlen}")
        self.first_frame: Tuple[T, ...] = ()
        self._online: Deque[MemoryEntry[T]] = deque(maxlen=maxlen)

    def __len__(self) -> int:
        return len(self._online)

    def seed(self, samples: List[T]) -> None:
        self.first_frame = tuple(samples)

    def add(self, frame_index: int, score: float, payload: T) -> MemoryEntry[T]:
        entry = MemoryEntry(frame_index, float(score), payload)
        self._online.append(entry)
        return entry

    def online(self) -> Tuple[T, ...]:
        """Snapshot of the online samples, oldest first."""
        return tuple(e.payload for e in self._online)
