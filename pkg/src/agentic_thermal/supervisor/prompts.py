"""Prompt rendering for the supervising language model."""

from __future__ import annotations

from dataclasses import dataclass

from ..plant import ThermalConfig
from ..telemetry import WindowMetrics
from .rules import SupervisorConfig

SYSTEM_TEMPLATE = """\
You tune the entropy coefficient (α) of a Soft Actor-Critic agent that controls \
CPU cores under a thermal limit. Goal: maximum CPU usage and maximum episode \
length. The best operating point sits just below the limit.
THERMAL LIMIT: {threshold:g}°C (critical threshold)

UTILIZATION PATTERNS:
- Low utilization: episodes shorter than {dur_lo:g} steps, or less than {dang_lo:g}% of steps in the danger zone. The agent is not pushing the CPU, or it violates too early.
- Medium utilization: episodes of {dur_lo:g}-{dur_hi:g} steps, or {dang_lo:g}-{dang_hi:g}% of steps in the danger zone.
- High utilization: episodes longer than {dur_hi:g} steps, or more than {dang_hi:g}% of steps in the danger zone. The agent runs close to the limit without violating.
The average thermal gradient is the heating rate in °C per step; above {grad:g} means fast change. Treat it as a secondary signal, not as the classification.

α STRATEGY:
- Low utilization -> increase_exploration, α in [{inc_lo:g}, {inc_hi:g}]
- Medium utilization -> moderate_exploration, α in [{mod_lo:g}, {mod_hi:g}]
- High utilization -> decrease_exploration, α in [{dec_lo:g}, {dec_hi:g}]
- Mixed or unclear -> keep_alpha, or move α by at most {nudge:g}
- reset_alpha sets α back to {default:g}

The danger zone is any sensor at or above {danger:g}°C. Many danger-zone steps with \
no violations mean the CPU is running near its safe maximum; with long episodes \
count that as high utilization. Few danger-zone steps mean under-utilization.

Justify your α choice in one line, then call one tool. Calling a tool is required.
"""

USER_TEMPLATE = """\
Window #{window_id}: {n_episodes} scenarios

METRICS:
- Avg duration: {duration:.1f} steps
- Avg gradient: {gradient:.4f}
- Avg % in danger zone: {danger:.1f}%

Current α: {alpha:.3f}

Optimize for maximum CPU usage and episode duration; temperatures close to the \
threshold are acceptable. Adjust α?
"""


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    user_text: str

    def messages(self) -> list[dict]:
        return [{"role": "system", "content": self.system_text},
                {"role": "user", "content": self.user_text}]


def build_prompts(m: WindowMetrics, cfg: SupervisorConfig,
                  tcfg: ThermalConfig | None = None) -> PromptBundle:
    tcfg = tcfg or ThermalConfig()
    system = SYSTEM_TEMPLATE.format(
        threshold=tcfg.threshold, danger=tcfg.danger_floor,
        dur_lo=cfg.duration_low, dur_hi=cfg.duration_high,
        dang_lo=cfg.danger_low, dang_hi=cfg.danger_high, grad=cfg.gradient_high,
        inc_lo=cfg.increase_range[0], inc_hi=cfg.increase_range[1],
        mod_lo=cfg.moderate_range[0], mod_hi=cfg.moderate_range[1],
        dec_lo=cfg.decrease_range[0], dec_hi=cfg.decrease_range[1],
        nudge=cfg.nudge_step, default=cfg.alpha_default,
    )
    user = USER_TEMPLATE.format(
        window_id=m.window_id, n_episodes=m.n_episodes,
        duration=m.avg_duration or 0.0, gradient=m.avg_gradient or 0.0,
        danger=m.avg_danger_pct or 0.0, alpha=m.current_alpha,
    )
    return PromptBundle(system, user)
