"""Per-episode summaries and their windowed aggregation."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .plant import ThermalConfig

SUMMARY_COLUMNS = ["episode_id", "n_steps", "near_threshold_steps", "avg_gradient",
                   "danger_pct", "violation", "sim_time_end"]


class EmptyTrace(ValueError):
    pass


class Termination(str, Enum):
    VIOLATION = "violation"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class StepRecord:
    step: int
    sensors: tuple[float, ...]
    peak: float
    action: tuple[float, ...] = ()
    reward: float = 0.0


@dataclass
class EpisodeTrace:
    episode_id: int
    steps: list[StepRecord] = field(default_factory=list)
    termination: Termination = Termination.TIMEOUT
    sim_time_end: float = 0.0

    @classmethod
    def from_peaks(cls, peaks: Sequence[float], episode_id: int = 0,
                   threshold: float = 60.0, sim_time_end: float = 0.0) -> "EpisodeTrace":
        steps = [StepRecord(i, (float(p),), float(p)) for i, p in enumerate(peaks)]
        term = (Termination.VIOLATION if peaks and peaks[-1] > threshold
                else Termination.TIMEOUT)
        return cls(episode_id, steps, term, sim_time_end)

    @property
    def peaks(self) -> list[float]:
        return [s.peak for s in self.steps]


@dataclass(frozen=True)
class EpisodeSummary:
    episode_id: int
    n_steps: int
    near_threshold_steps: int
    avg_gradient: float
    danger_pct: float
    terminated_by_violation: bool
    sim_time_end: float = 0.0

    def __post_init__(self):
        if not 0 <= self.near_threshold_steps <= self.n_steps:
            raise ValueError("near_threshold_steps must lie in [0, n_steps]")
        if not 0.0 <= self.danger_pct <= 1.0:
            raise ValueError("danger_pct is a fraction in [0, 1]")


@dataclass(frozen=True)
class WindowMetrics:
    window_id: int
    n_episodes: int
    avg_duration: float | None
    avg_gradient: float | None
    avg_danger_pct: float | None  # percent
    current_alpha: float

    @property
    def empty(self) -> bool:
        return self.n_episodes == 0


def summarize_episode(trace: EpisodeTrace, cfg: ThermalConfig) -> EpisodeSummary:
    peaks = trace.peaks
    n = len(peaks)
    if n == 0:
        raise EmptyTrace(f"episode {trace.episode_id} has no steps")
    floor = cfg.threshold - cfg.near_band
    near = sum(1 for p in peaks if p >= floor)
    grad = (peaks[-1] - peaks[0]) / (n - 1) if n > 1 else 0.0
    return EpisodeSummary(
        episode_id=trace.episode_id,
        n_steps=n,
        near_threshold_steps=near,
        avg_gradient=grad,
        danger_pct=near / n,
        terminated_by_violation=trace.termination is Termination.VIOLATION,
        sim_time_end=trace.sim_time_end,
    )


def aggregate_window(summaries: Sequence[EpisodeSummary], current_alpha: float,
                     window_id: int = 0) -> WindowMetrics:
    n = len(summaries)
    if n == 0:
        return WindowMetrics(window_id, 0, None, None, None, current_alpha)
    return WindowMetrics(
        window_id=window_id,
        n_episodes=n,
        avg_duration=sum(s.n_steps for s in summaries) / n,
        avg_gradient=sum(s.avg_gradient for s in summaries) / n,
        avg_danger_pct=100.0 * sum(s.danger_pct for s in summaries) / n,
        current_alpha=current_alpha,
    )


def summary_row(s: EpisodeSummary) -> list:
    return [s.episode_id, s.n_steps, s.near_threshold_steps, repr(s.avg_gradient),
            repr(s.danger_pct), int(s.terminated_by_violation), repr(s.sim_time_end)]


def write_summaries(path: str | Path, summaries: Iterable[EpisodeSummary]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for s in summaries:
            w.writerow(summary_row(s))


def read_summaries(path: str | Path) -> list[EpisodeSummary]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(EpisodeSummary(
                episode_id=int(row["episode_id"]),
                n_steps=int(row["n_steps"]),
                near_threshold_steps=int(row["near_threshold_steps"]),
                avg_gradient=float(row["avg_gradient"]),
                danger_pct=float(row["danger_pct"]),
                terminated_by_violation=row["violation"].strip().lower() in ("1", "true"),
                sim_time_end=float(row["sim_time_end"]),
            ))
    return out
