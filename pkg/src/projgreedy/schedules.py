"""Index schedules ``i(1), i(2), ...`` over the sets ``1..K``.

Indices are 1-based at this surface. Random schedules draw from numpy's
PCG64 bit generator seeded with a 64-bit integer; the generator name is part
of the reproducibility contract and is written to run metadata.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidCustom

RNG_NAME = "numpy.random.PCG64"

CYCLIC = "cyclic"
RANDOM = "random"
CUSTOM = "custom"


@dataclass(frozen=True)
class Schedule:
    kind: str
    K: int
    seed: Optional[int] = None
    items: Optional[tuple] = None
    wrap: bool = True

    def __post_init__(self):
        if self.K < 2:
            raise ValueError("a schedule needs K >= 2")
        if self.kind == RANDOM and self.seed is None:
            raise ValueError("a random schedule needs a seed")
        if self.kind == RANDOM and not (0 <= self.seed < 2**64):
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.kind == CUSTOM:
            _check_custom(self.items, self.K, self.wrap)
        elif self.kind not in (CYCLIC, RANDOM):
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    @classmethod
    def cyclic(cls, K):
        return cls(CYCLIC, int(K))

    @classmethod
    def random(cls, K, seed):
        return cls(RANDOM, int(K), seed=int(seed))

    @classmethod
    def custom(cls, items: Sequence[int], K: Optional[int] = None, wrap=True):
        items = tuple(int(i) for i in items)
        if K is None:
            K = max(items) if items else 0
        return cls(CUSTOM, int(K), items=items, wrap=bool(wrap))

    def start(self) -> "ScheduleState":
        return ScheduleState(self)

    def prefix(self, n: int) -> np.ndarray:
        """The first ``n`` indices (fewer for an exhausted non-wrapping list)."""
        return self.start().take(n)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "K": self.K}
        if self.kind == RANDOM:
            out["seed"] = self.seed
            out["rng"] = RNG_NAME
        if self.kind == CUSTOM:
            out["list"] = list(self.items)
            out["wrap"] = self.wrap
        return out

    @classmethod
    def from_dict(cls, spec: dict) -> "Schedule":
        kind = spec.get("kind", CYCLIC)
        K = spec.get("K")
        if kind == CUSTOM:
            return cls.custom(spec["list"], K, spec.get("wrap", True))
        if K is None:
            raise ValueError("schedule spec needs K")
        if kind == RANDOM:
            return cls.random(K, spec.get("seed", 0))
        if kind == CYCLIC:
            return cls.cyclic(K)
        raise ValueError(f"unknown schedule kind {kind!r}")


def _check_custom(items, K, wrap):
    if not items:
        raise InvalidCustom("custom schedule is empty")
    for a, b in zip(items, items[1:]):
        if a == b:
            raise InvalidCustom(f"adjacent repeat of index {a}")
    if any(not 1 <= i <= K for i in items):
        raise InvalidCustom(f"custom indices must lie in 1..{K}")
    if wrap:
        if len(items) > 1 and items[0] == items[-1]:
            raise InvalidCustom("wraparound repeats the first index")
        if len(items) == 1:
            raise InvalidCustom("a single index cannot wrap without repeating")
        missing = set(range(1, K + 1)) - set(items)
        if missing:
            raise InvalidCustom(f"wrapping schedule never visits {sorted(missing)}")


class ScheduleState:
    """Mutable cursor over a schedule; one per run."""

    def __init__(self, schedule: Schedule):
        self.schedule = schedule
        self.n = 0
        self.last = 0
        self._rng = (np.random.Generator(np.random.PCG64(schedule.seed))
                     if schedule.kind == RANDOM else None)

    @property
    def exhausted(self) -> bool:
        s = self.schedule
        return s.kind == CUSTOM and not s.wrap and self.n >= len(s.items)

    def next_index(self) -> int:
        got = self.take(1)
        if got.size == 0:
            raise StopIteration("custom schedule exhausted")
        return int(got[0])

    def take(self, count: int) -> np.ndarray:
        """Advance by up to ``count`` indices and return them (int64, 1-based)."""
        s = self.schedule
        K = s.K
        if count <= 0:
            return np.empty(0, dtype=np.int64)
        if s.kind == CYCLIC:
            out = (np.arange(self.n, self.n + count) % K) + 1
        elif s.kind == CUSTOM:
            items = np.asarray(s.items, dtype=np.int64)
            if s.wrap:
                out = items[np.arange(self.n, self.n + count) % len(items)]
            else:
                out = items[self.n:self.n + count]
        else:
            # uniform over the K-1 indices different from the previous one; the
            # draw order is first index, then offsets, so chunking is irrelevant
            out = np.empty(count, dtype=np.int64)
            start = 0
            if self.n == 0:
                out[0] = self._rng.integers(0, K) + 1
                start = 1
            prev = self.last - 1 if self.n > 0 else out[0] - 1
            if count > start:
                steps = self._rng.integers(1, K, size=count - start)
                out[start:] = (prev + np.cumsum(steps)) % K + 1
        out = out.astype(np.int64)
        self.n += out.size
        if out.size:
            self.last = int(out[-1])
        return out


def validate_prefix(seq: Sequence[int], K: int, window: int) -> bool:
    """No adjacent repeats, and every index in every length-``window`` slice."""
    if window < K:
        raise ValueError("window must be at least K")
    a = np.asarray(seq, dtype=np.int64)
    if a.size and np.any(a[1:] == a[:-1]):
        return False
    n = a.size
    if n <= window:
        return set(range(1, K + 1)) <= set(a.tolist())
    for k in range(1, K + 1):
        pos = np.flatnonzero(a == k)
        if pos.size == 0:
            return False
        # slices start at 0..n-window; each must hold an occurrence of k
        if pos[0] >= window or pos[-1] < n - window:
            return False
        if pos.size > 1 and np.max(np.diff(pos)) > window:
            return False
    return True


def default_window(K: int) -> int:
    return 50 * K
