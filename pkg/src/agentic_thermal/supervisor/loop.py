"""Windowed supervision: collect episode summaries, decide once per window."""

from __future__ import annotations

import threading
from typing import Callable, Protocol

from ..bus import AgentBus, LatencyModel, MessageQueue
from ..plant import ThermalConfig
from ..telemetry import EpisodeSummary, aggregate_window
from .prompts import PromptBundle, build_prompts
from .remote import RemoteBackend
from .rules import (AlphaRecommendation, Backend, SupervisorConfig, ToolCall,
                    recommend_alpha)

RECOMMENDATION_COLUMNS = ["window_id", "issued_at", "latency_s", "tool", "alpha", "source",
                          "parse_ok"]


class DecisionBackend(Protocol):
    source: str

    def decide(self, metrics, bundle: PromptBundle,
               current_alpha: float) -> tuple[ToolCall, float]: ...


class RulesBackend:
    source = "rules"

    def __init__(self, cfg: SupervisorConfig):
        self.cfg = cfg

    def decide(self, metrics, bundle, current_alpha):
        return recommend_alpha(metrics, current_alpha, self.cfg), 0.0


def make_backend(cfg: SupervisorConfig, **kw) -> DecisionBackend:
    if cfg.backend is Backend.REMOTE:
        return RemoteBackend(cfg, **kw)
    return RulesBackend(cfg)


class Supervisor:
    """Drains the summary queue and emits at most one recommendation per window.

    ``tick`` is cheap when nothing is due, so a cooperative driver can call it
    on every simulated step.
    """

    def __init__(self, cfg: SupervisorConfig, summaries: MessageQueue,
                 recommendations: MessageQueue, alpha_source: Callable[[], float],
                 backend: DecisionBackend | None = None, tcfg: ThermalConfig | None = None,
                 start_time: float = 0.0):
        self.cfg = cfg
        self.tcfg = tcfg or ThermalConfig()
        self.summaries = summaries
        self.recommendations = recommendations
        self.alpha_source = alpha_source
        self.backend = backend or make_backend(cfg)
        self.buffer: list[EpisodeSummary] = []
        self.window_index = 0
        self.next_boundary = start_time + cfg.window_duration
        self.log: list[list] = []
        self.emitted: list[AlphaRecommendation] = []

    def tick(self, now: float) -> list[AlphaRecommendation]:
        self.buffer.extend(self.summaries.drain(now))
        out = []
        while now >= self.next_boundary:
            self.window_index += 1
            rec = self._close_window(now)
            if rec is not None:
                out.append(rec)
            self.next_boundary += self.cfg.window_duration
        return out

    def _close_window(self, now: float) -> AlphaRecommendation | None:
        batch, self.buffer = self.buffer, []
        if not batch:
            return None
        current = self.alpha_source()
        metrics = aggregate_window(batch, current, self.window_index)
        bundle = build_prompts(metrics, self.cfg, self.tcfg)
        call, backend_latency = self.backend.decide(metrics, bundle, current)
        rec = AlphaRecommendation(
            alpha=call.resolve(current),
            source=Backend(self.backend.source),
            window_id=self.window_index,
            issued_at=now,
            latency=backend_latency,
            tool=call.tool,
            parse_ok=call.parse_ok,
            rationale=call.rationale,
        )
        env = self.recommendations.enqueue(rec, now)
        self.log.append([rec.window_id, repr(rec.issued_at), repr(env.visible_at - env.enqueued_at),
                         rec.tool.value, repr(rec.alpha), rec.source.value, int(rec.parse_ok)])
        self.emitted.append(rec)
        return rec


def run_supervisor_loop(summaries: MessageQueue, recommendations: MessageQueue,
                        clock: Callable[[], float], cfg: SupervisorConfig,
                        alpha_source: Callable[[], float], stop: threading.Event,
                        backend: DecisionBackend | None = None,
                        poll_interval: float = 0.05) -> Supervisor:
    """Run a supervisor against ``clock`` until ``stop`` is set.

    Meant for a dedicated thread; the control loop only touches the queues.
    """
    sup = Supervisor(cfg, summaries, recommendations, alpha_source, backend,
                     start_time=clock())
    while not stop.is_set():
        sup.tick(clock())
        stop.wait(poll_interval)
    sup.tick(clock())
    return sup


def replay_summaries(summaries: list[EpisodeSummary], cfg: SupervisorConfig,
                     initial_alpha: float = 1.0,
                     backend: DecisionBackend | None = None) -> list[AlphaRecommendation]:
    """Re-run supervision over recorded summaries, windowed by ``sim_time_end``.

    Each recommendation is applied immediately to the alpha the next window sees.
    """
    bus = AgentBus(LatencyModel.fixed(0.0))
    alpha = [initial_alpha]
    sup = Supervisor(cfg, bus.summaries, bus.recommendations, lambda: alpha[0], backend)
    out: list[AlphaRecommendation] = []

    def advance(now: float) -> None:
        for rec in sup.tick(now):
            alpha[0] = bus.recommendations.poll(now).alpha
            out.append(rec)

    for s in sorted(summaries, key=lambda s: (s.sim_time_end, s.episode_id)):
        while sup.next_boundary < s.sim_time_end:
            advance(sup.next_boundary)
        bus.summaries.enqueue(s, s.sim_time_end)
        advance(s.sim_time_end)
    # close the trailing partial window as if it had run to its boundary
    if sup.buffer or len(bus.summaries):
        advance(sup.next_boundary)
    return out
