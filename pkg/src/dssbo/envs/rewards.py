"""Sparse and delayed reward feedback."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from ..errors import ContractViolation


@dataclass(frozen=True)
class RewardMode:
    kind: str = "dense"  # dense | sparse | delayed
    period: int = 1      # S for sparse mode
    lag: int = 0         # delay for delayed mode

    def __post_init__(self):
        if self.kind not in ("dense", "sparse", "delayed"):
            raise ContractViolation(f"unknown reward mode {self.kind!r}")
        if self.kind == "sparse" and self.period < 1:
            raise ContractViolation("sparse period must be >= 1")
        if self.kind == "delayed" and self.lag < 0:
            raise ContractViolation("delay must be >= 0")

    @classmethod
    def dense(cls):
        return cls()

    @classmethod
    def sparse(cls, S: int):
        return cls("sparse", period=S)

    @classmethod
    def delayed(cls, lag: int):
        return cls("delayed", lag=lag)


class RewardWrapper:
    """Streaming filter. ``push(r)`` returns the value emitted this step and
    ``flush()`` returns everything still withheld at episode end."""

    def __init__(self, mode: RewardMode = RewardMode()):
        self.mode = mode
        self.reset()

    def reset(self) -> None:
        self._step = 0
        self._pending = 0.0
        self._queue: list[float] = []

    def push(self, r: float) -> float:
        self._step += 1
        m = self.mode
        if m.kind == "dense":
            return r
        if m.kind == "sparse":
            self._pending += r
            if self._step % m.period == 0:
                out, self._pending = self._pending, 0.0
                return out
            return 0.0
        self._queue.append(r)
        if len(self._queue) > m.lag:
            return self._queue.pop(0)
        return 0.0

    def flush(self) -> float:
        if self.mode.kind == "sparse":
            out, self._pending = self._pending, 0.0
            return out
        out = 0.0
        for r in self._queue:
            out += r
        self._queue = []
        return out


def wrap_rewards(stream: Iterable[float], mode: RewardMode) -> list[float]:
    """Emitted rewards per step; the withheld tail is added to the final step."""
    w = RewardWrapper(mode)
    out = [w.push(float(r)) for r in stream]
    if out:
        out[-1] += w.flush()
    return out
