"""Observation, action decoding and reward for the thermal control task."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .plant import CoreCommand, CoreState, PlantState, ThermalConfig


class ActionSpace(str, Enum):
    AGGREGATE = "aggregate"
    PER_CORE = "per_core"


@dataclass(frozen=True)
class RewardConfig:
    r_survive: float = 0.1
    w_cpu: float = 3.0
    w_safe: float = 0.3
    margin_band: float = 5.0
    violation_penalty: float = -10.0

    def __post_init__(self):
        if self.violation_penalty >= 0:
            raise ValueError("violation_penalty must be negative")
        if min(self.w_cpu, self.w_safe) < 0:
            raise ValueError("reward weights must be non-negative")
        if self.margin_band <= 0:
            raise ValueError("margin_band must be positive")


def compute_danger_ratio(sensors: Sequence[float], cfg: ThermalConfig) -> float:
    """Fraction of sensors at or above 90% of the threshold."""
    if len(sensors) < 1:
        raise ValueError("need at least one sensor")
    cutoff = 0.9 * cfg.threshold
    return sum(1 for t in sensors if t >= cutoff) / len(sensors)


def cpu_utilization(cores: Sequence[CoreState], cfg: ThermalConfig) -> float:
    """Frequency-scaled share of managed-core capacity in use."""
    total = 0.0
    for core in cores:
        if core.index == 0 or not core.active:
            continue
        total += core.frequency / cfg.f_max
    return total / cfg.managed_cores


def action_dim(space: ActionSpace, cfg: ThermalConfig) -> int:
    return 2 if ActionSpace(space) is ActionSpace.AGGREGATE else cfg.managed_cores


def observation_dim(cfg: ThermalConfig, space: ActionSpace) -> int:
    return cfg.sensor_count + 3 + action_dim(space, cfg)


def build_observation(sensors: Sequence[float], ambient: float, state: PlantState,
                      prev_action: np.ndarray, cfg: ThermalConfig) -> np.ndarray:
    """[T_i/threshold..., danger_ratio, T_amb/threshold, utilization, prev_action...]"""
    temps = np.asarray(sensors, dtype=float) / cfg.threshold
    head = [compute_danger_ratio(sensors, cfg), ambient / cfg.threshold,
            cpu_utilization(state.cores, cfg)]
    return np.concatenate([temps, head, np.asarray(prev_action, dtype=float)])


def decode_action(raw: np.ndarray, space: ActionSpace, cfg: ThermalConfig) -> list[CoreCommand]:
    """Map a raw action in [-1, 1]^d to commands for cores 1..15.

    Aggregate mode activates ``round(fraction * 15)`` cores, lowest index first,
    all at one frequency. Per-core mode switches a core off for a negative
    component and otherwise maps ``[0, 1]`` onto ``[f_min, f_max]``.
    """
    raw = np.clip(np.asarray(raw, dtype=float), -1.0, 1.0)
    span = cfg.f_max - cfg.f_min
    managed = range(1, cfg.total_cores)
    if ActionSpace(space) is ActionSpace.AGGREGATE:
        fraction = 0.5 * (raw[0] + 1.0)
        k = int(round(fraction * cfg.managed_cores))
        freq = cfg.f_min + 0.5 * (raw[1] + 1.0) * span
        return [CoreCommand(i, n < k, freq if n < k else 0.0) for n, i in enumerate(managed)]
    if raw.shape[0] != cfg.managed_cores:
        raise ValueError(f"per-core action needs {cfg.managed_cores} components")
    return [CoreCommand(i, bool(x >= 0.0), cfg.f_min + max(x, 0.0) * span if x >= 0.0 else 0.0)
            for i, x in zip(managed, raw)]


def compute_reward(prev: PlantState, action: np.ndarray, next_state: PlantState,
                   cfg: RewardConfig, tcfg: ThermalConfig,
                   sensors: Sequence[float] | None = None) -> tuple[float, bool]:
    """Per-step reward and whether the step is a thermal violation.

    ``prev`` and ``action`` are accepted for interface symmetry; the reward
    depends only on the resulting state.
    """
    peak = max(sensors) if sensors is not None else next_state.peak
    if peak > tcfg.threshold:
        return cfg.violation_penalty, True
    util = cpu_utilization(next_state.cores, tcfg)
    margin = min(max((tcfg.threshold - peak) / cfg.margin_band, 0.0), 1.0)
    return cfg.r_survive + cfg.w_cpu * util + cfg.w_safe * margin, False
