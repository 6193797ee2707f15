"""Supervisor data types and the deterministic rule engine."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from ..telemetry import WindowMetrics


class EmptyWindow(ValueError):
    pass


class Backend(str, Enum):
    RULES = "rules"
    REMOTE = "remote"


class UtilizationClass(str, Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    MIXED = "mixed"


class Tool(str, Enum):
    INCREASE = "increase_exploration"
    MODERATE = "moderate_exploration"
    DECREASE = "decrease_exploration"
    KEEP = "keep_alpha"
    RESET = "reset_alpha"


ALPHA_FLOOR = 0.05
ALPHA_CEIL = 0.8


@dataclass(frozen=True)
class SupervisorConfig:
    window_duration: float = 3600.0
    backend: Backend = Backend.RULES
    alpha_default: float = 0.2
    increase_range: tuple[float, float] = (0.4, 0.8)
    moderate_range: tuple[float, float] = (0.2, 0.4)
    decrease_range: tuple[float, float] = (0.05, 0.2)
    duration_low: float = 10.0  # steps; below is Low
    duration_high: float = 60.0  # steps; above is High
    danger_low: float = 20.0  # percent
    danger_high: float = 60.0  # percent
    gradient_high: float = 0.1  # °C/step
    mixed_nudge: bool = False  # +-0.05 instead of keep_alpha on Mixed windows
    nudge_step: float = 0.05
    # remote backend
    endpoint: str = "http://127.0.0.1:8080/v1"
    model: str = "local-model"
    timeout: float = 600.0
    api_key: str = ""

    def __post_init__(self):
        object.__setattr__(self, "backend", Backend(self.backend))
        for name in ("increase_range", "moderate_range", "decrease_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must satisfy 0 < low <= high")
            object.__setattr__(self, name, (float(lo), float(hi)))
        if not (self.decrease_range[1] <= self.moderate_range[0]
                and self.moderate_range[1] <= self.increase_range[0]):
            raise ValueError("alpha ranges must be ordered and non-overlapping")
        if self.window_duration <= 0:
            raise ValueError("window_duration must be positive")
        if self.alpha_default <= 0:
            raise ValueError("alpha_default must be positive")
        if not (self.duration_low <= self.duration_high and self.danger_low <= self.danger_high):
            raise ValueError("classification bounds must be ordered")

    def range_for(self, tool: Tool) -> tuple[float, float] | None:
        return {Tool.INCREASE: self.increase_range, Tool.MODERATE: self.moderate_range,
                Tool.DECREASE: self.decrease_range}.get(tool)


@dataclass(frozen=True)
class ToolCall:
    tool: Tool
    alpha_value: float | None = None
    rationale: str = ""
    parse_ok: bool = True

    def __post_init__(self):
        object.__setattr__(self, "tool", Tool(self.tool))
        if self.tool is Tool.KEEP:
            return
        if self.alpha_value is None or not math.isfinite(self.alpha_value) or self.alpha_value <= 0:
            raise ValueError(f"{self.tool.value} needs a positive alpha_value")

    def resolve(self, current_alpha: float) -> float:
        return current_alpha if self.tool is Tool.KEEP else float(self.alpha_value)


def validate_tool_call(call: ToolCall, cfg: SupervisorConfig) -> str | None:
    """Return a problem description, or None if ``call`` honours its tool's range."""
    if call.tool is Tool.RESET:
        if call.alpha_value != cfg.alpha_default:
            return f"reset_alpha must set {cfg.alpha_default}"
        return None
    bounds = cfg.range_for(call.tool)
    if bounds is not None and not bounds[0] <= call.alpha_value <= bounds[1]:
        return f"{call.tool.value} alpha {call.alpha_value} outside [{bounds[0]}, {bounds[1]}]"
    return None


@dataclass(frozen=True)
class AlphaRecommendation:
    alpha: float
    source: Backend
    window_id: int
    issued_at: float
    latency: float = 0.0  # backend processing time, s
    tool: Tool = Tool.KEEP
    parse_ok: bool = True
    rationale: str = field(default="", compare=False)


def _band(value: float, low: float, high: float) -> UtilizationClass:
    if value < low:
        return UtilizationClass.LOW
    if value > high:
        return UtilizationClass.HIGH
    return UtilizationClass.MEDIUM


def duration_class(avg_duration: float, cfg: SupervisorConfig) -> UtilizationClass:
    return _band(avg_duration, cfg.duration_low, cfg.duration_high)


def danger_class(avg_danger_pct: float, cfg: SupervisorConfig) -> UtilizationClass:
    return _band(avg_danger_pct, cfg.danger_low, cfg.danger_high)


def classify_utilization(m: WindowMetrics, cfg: SupervisorConfig) -> UtilizationClass:
    if m.n_episodes < 1:
        raise EmptyWindow(f"window {m.window_id} has no episodes")
    by_duration = duration_class(m.avg_duration, cfg)
    by_danger = danger_class(m.avg_danger_pct, cfg)
    return by_duration if by_duration is by_danger else UtilizationClass.MIXED


_RANK = {UtilizationClass.LOW: 0, UtilizationClass.MEDIUM: 1, UtilizationClass.HIGH: 2}


def _tool_for_alpha(alpha: float, cfg: SupervisorConfig) -> Tool:
    if alpha >= cfg.increase_range[0]:
        return Tool.INCREASE
    if alpha >= cfg.moderate_range[0]:
        return Tool.MODERATE
    return Tool.DECREASE


def recommend_alpha(m: WindowMetrics, current_alpha: float, cfg: SupervisorConfig) -> ToolCall:
    """Rule-engine decision for one window; alpha is the midpoint of the band."""
    cls = classify_utilization(m, cfg)
    note = (f"duration {m.avg_duration:.1f} steps, danger {m.avg_danger_pct:.1f}% -> {cls.value}")
    if m.avg_gradient is not None and m.avg_gradient > cfg.gradient_high:
        note += f"; fast heating ({m.avg_gradient:.4f} C/step)"

    tool = {UtilizationClass.LOW: Tool.INCREASE, UtilizationClass.MEDIUM: Tool.MODERATE,
            UtilizationClass.HIGH: Tool.DECREASE}.get(cls)
    if tool is not None:
        lo, hi = cfg.range_for(tool)
        return ToolCall(tool, round(0.5 * (lo + hi), 12), note)

    if not cfg.mixed_nudge:
        return ToolCall(Tool.KEEP, None, note + "; keeping current alpha")
    # lean towards exploitation when the danger signal runs ahead of duration
    hotter = _RANK[danger_class(m.avg_danger_pct, cfg)] > _RANK[duration_class(m.avg_duration, cfg)]
    step = -cfg.nudge_step if hotter else cfg.nudge_step
    alpha = min(max(current_alpha + step, ALPHA_FLOOR), ALPHA_CEIL)
    alpha = round(alpha, 10)
    return ToolCall(_tool_for_alpha(alpha, cfg), alpha, note + f"; nudging alpha by {step:+.2f}")
