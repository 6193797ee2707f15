"""One-directional message queues between the controller and the supervisor.

Recommendations are delayed by a latency model drawn at enqueue time, so a
message only becomes visible to ``poll`` once simulated time has caught up.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from enum import Enum
from typing import Any, Generic, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

# Total processing times (s) of thirteen prompt executions on the flight unit.
MEASURED_LATENCIES_S = (142.16652, 503.93877, 67.04244, 45.08423, 158.52138, 150.72553,
                        133.59947, 182.3077, 223.62077, 319.04848, 234.8831, 260.19935,
                        461.65709)

BUS_EVENT_COLUMNS = ["direction", "enqueued_at", "visible_at", "polled_at", "payload_kind",
                     "payload_id"]


class QueueClosed(RuntimeError):
    pass


class LatencyKind(str, Enum):
    FIXED = "fixed"
    UNIFORM = "uniform"
    EMPIRICAL = "empirical"


@dataclass(frozen=True)
class LatencyModel:
    kind: LatencyKind = LatencyKind.EMPIRICAL
    value: float = 0.0
    low: float = 0.0
    high: float = 0.0
    samples: tuple[float, ...] = MEASURED_LATENCIES_S

    def __post_init__(self):
        object.__setattr__(self, "kind", LatencyKind(self.kind))
        object.__setattr__(self, "samples", tuple(float(s) for s in self.samples))
        if self.kind is LatencyKind.FIXED and self.value < 0:
            raise ValueError("fixed latency must be non-negative")
        if self.kind is LatencyKind.UNIFORM and not 0 <= self.low <= self.high:
            raise ValueError("uniform latency needs 0 <= low <= high")
        if self.kind is LatencyKind.EMPIRICAL:
            if not self.samples or min(self.samples) <= 0:
                raise ValueError("empirical latency samples must be non-empty and positive")

    @classmethod
    def fixed(cls, seconds: float) -> "LatencyModel":
        return cls(LatencyKind.FIXED, value=seconds)

    @classmethod
    def uniform(cls, low: float, high: float) -> "LatencyModel":
        return cls(LatencyKind.UNIFORM, low=low, high=high)

    @classmethod
    def empirical(cls, samples: Sequence[float] = MEASURED_LATENCIES_S) -> "LatencyModel":
        return cls(LatencyKind.EMPIRICAL, samples=tuple(samples))

    def draw(self, rng: np.random.Generator) -> float:
        if self.kind is LatencyKind.FIXED:
            return self.value
        if self.kind is LatencyKind.UNIFORM:
            return float(rng.uniform(self.low, self.high))
        return self.samples[int(rng.integers(len(self.samples)))]


@dataclass(frozen=True)
class Envelope(Generic[T]):
    payload: T
    enqueued_at: float
    visible_at: float
    seq: int


class MessageQueue(Generic[T]):
    """Single-producer single-consumer queue gated by simulated visibility time.

    Neither ``enqueue`` nor ``poll`` ever blocks waiting for the other side.
    """

    def __init__(self, name: str, latency: LatencyModel | None = None,
                 rng: np.random.Generator | None = None, events: list | None = None):
        self.name = name
        self.latency = latency
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.events = events
        self._pending: list[Envelope[T]] = []
        self._lock = threading.Lock()
        self._seq = 0
        self._closed = False

    def close(self) -> None:
        with self._lock:
            self._closed = True

    @property
    def closed(self) -> bool:
        return self._closed

    def __len__(self) -> int:
        with self._lock:
            return len(self._pending)

    def enqueue(self, payload: T, now: float) -> Envelope[T]:
        delay = self.latency.draw(self.rng) if self.latency is not None else 0.0
        with self._lock:
            if self._closed:
                raise QueueClosed(f"queue {self.name!r} is closed")
            env = Envelope(payload, now, now + delay, self._seq)
            self._seq += 1
            self._pending.append(env)
        return env

    def poll(self, now: float) -> T | None:
        env = self.poll_envelope(now)
        return None if env is None else env.payload

    def poll_envelope(self, now: float) -> Envelope[T] | None:
        with self._lock:
            for i, env in enumerate(self._pending):
                if env.visible_at <= now:
                    del self._pending[i]
                    break
            else:
                return None
        if self.events is not None:
            self.events.append(bus_event(self.name, env, now))
        return env

    def drain(self, now: float) -> list[T]:
        out = []
        while (item := self.poll(now)) is not None:
            out.append(item)
        return out


def _payload_info(payload: Any) -> tuple[str, Any]:
    kind = type(payload).__name__
    for attr in ("window_id", "episode_id"):
        if hasattr(payload, attr):
            return kind, getattr(payload, attr)
    return kind, ""


def bus_event(direction: str, env: Envelope, polled_at: float) -> list:
    kind, pid = _payload_info(env.payload)
    return [direction, repr(env.enqueued_at), repr(env.visible_at), repr(polled_at), kind, pid]


def enqueue(queue: MessageQueue, payload, now: float) -> Envelope:
    return queue.enqueue(payload, now)


def poll(queue: MessageQueue, now: float):
    return queue.poll(now)


class AgentBus:
    """The two queues wiring controller and supervisor together.

    Summaries travel instantly; recommendations pick up the configured latency.
    """

    def __init__(self, latency: LatencyModel, rng: np.random.Generator | None = None):
        self.events: list[list] = []
        self.summaries: MessageQueue = MessageQueue("summary", None, events=self.events)
        self.recommendations: MessageQueue = MessageQueue("recommendation", latency, rng,
                                                          events=self.events)

    def close(self) -> None:
        self.summaries.close()
        self.recommendations.close()
