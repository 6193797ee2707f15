"""Experiment orchestration: control loop, supervision wiring, metrics and logs."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .bus import BUS_EVENT_COLUMNS, AgentBus
from .config import ExperimentConfig, Mode
from .control import (action_dim, build_observation, compute_reward, cpu_utilization,
                      decode_action, observation_dim)
from .plant import (CoreCommand, ThermalConfig, ambient_at, initial_state,
                    node_powers, read_sensors, step_plant)
from .sac import SACAgent
from .supervisor import RECOMMENDATION_COLUMNS, Supervisor, make_backend
from .telemetry import (EpisodeSummary, EpisodeTrace, StepRecord, Termination,
                        summarize_episode, summary_row, SUMMARY_COLUMNS)

log = logging.getLogger(__name__)

LOSS_COLUMNS = ["update_idx", "critic_loss", "actor_loss", "alpha", "alpha_mode"]
REPORT_NAME = "report.txt"


class MissingLog(FileNotFoundError):
    pass


def telemetry_columns(cfg: ThermalConfig) -> list[str]:
    return (["sim_time", "step"] + [f"T_sensor_{i}" for i in range(cfg.sensor_count)]
            + ["T_ambient", "active_cores", "mean_freq_ghz", "power_w"])


# -- metrics -----------------------------------------------------------------------

@dataclass(frozen=True)
class Stat:
    mean: float
    std: float = 0.0

    def __str__(self) -> str:
        return f"{self.mean:.2f} ± {self.std:.2f}"


def _stat(values: Sequence[float]) -> Stat:
    if len(values) == 0:
        return Stat(float("nan"), float("nan"))
    arr = np.asarray(values, dtype=float)
    return Stat(float(arr.mean()), float(arr.std()))


@dataclass(frozen=True)
class HorizonMetrics:
    thermal_violations: Stat
    avg_episode_duration: Stat  # steps
    avg_cpu_utilization: Stat  # percent
    n_episodes: int = 0


@dataclass(frozen=True)
class WindowBreakdown:
    window_id: int
    n_episodes: int
    violations: int
    avg_duration: float | None


@dataclass
class MetricsReport:
    mode: str
    environment: str
    seeds: list[int]
    full: HorizonMetrics
    early: HorizonMetrics
    early_slice: float
    sim_duration: float
    windows: list[WindowBreakdown] = field(default_factory=list)

    @property
    def thermal_violations(self) -> Stat:
        return self.full.thermal_violations

    @property
    def avg_episode_duration(self) -> Stat:
        return self.full.avg_episode_duration

    @property
    def avg_cpu_utilization(self) -> Stat:
        return self.full.avg_cpu_utilization


def horizon_metrics(summaries: Sequence[EpisodeSummary], utilization: Sequence[float],
                    ) -> HorizonMetrics:
    return HorizonMetrics(
        thermal_violations=Stat(float(sum(s.terminated_by_violation for s in summaries))),
        avg_episode_duration=_stat([s.n_steps for s in summaries]),
        avg_cpu_utilization=_stat([100.0 * u for u in utilization]),
        n_episodes=len(summaries),
    )


def window_breakdown(summaries: Sequence[EpisodeSummary], window: float,
                     sim_duration: float) -> list[WindowBreakdown]:
    n_windows = max(1, math.ceil(sim_duration / window))
    buckets: list[list[EpisodeSummary]] = [[] for _ in range(n_windows)]
    for s in summaries:
        # an episode ending exactly on a boundary belongs to the window it closes
        k = min(n_windows - 1, max(0, math.ceil(s.sim_time_end / window) - 1))
        buckets[k].append(s)
    return [WindowBreakdown(i + 1, len(b), sum(s.terminated_by_violation for s in b),
                            (sum(s.n_steps for s in b) / len(b)) if b else None)
            for i, b in enumerate(buckets)]


def combine_reports(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Mean ± std across repeated runs (std of the per-run means)."""
    if len(reports) == 1:
        return reports[0]

    def merge(h: Sequence[HorizonMetrics]) -> HorizonMetrics:
        return HorizonMetrics(
            thermal_violations=_stat([x.thermal_violations.mean for x in h]),
            avg_episode_duration=_stat([x.avg_episode_duration.mean for x in h]),
            avg_cpu_utilization=_stat([x.avg_cpu_utilization.mean for x in h]),
            n_episodes=sum(x.n_episodes for x in h),
        )

    first = reports[0]
    return MetricsReport(
        mode=first.mode, environment=first.environment,
        seeds=[s for r in reports for s in r.seeds],
        full=merge([r.full for r in reports]), early=merge([r.early for r in reports]),
        early_slice=first.early_slice, sim_duration=first.sim_duration, windows=[],
    )


# -- report file -----------------------------------------------------------------

def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else repr(float(x))


def format_report(r: MetricsReport) -> str:
    lines = [
        "# MetricsReport",
        f'mode = "{r.mode}"',
        f'environment = "{r.environment}"',
        f"seeds = {r.seeds}",
        f"sim_duration = {_fmt(r.sim_duration)}",
        f"early_slice = {_fmt(r.early_slice)}",
    ]
    for name, h in (("full", r.full), ("early", r.early)):
        lines += [
            "", f"[{name}]",
            f"n_episodes = {h.n_episodes}",
            f"thermal_violations_mean = {_fmt(h.thermal_violations.mean)}",
            f"thermal_violations_std = {_fmt(h.thermal_violations.std)}",
            f"avg_episode_duration_mean = {_fmt(h.avg_episode_duration.mean)}",
            f"avg_episode_duration_std = {_fmt(h.avg_episode_duration.std)}",
            f"avg_cpu_utilization_mean = {_fmt(h.avg_cpu_utilization.mean)}",
            f"avg_cpu_utilization_std = {_fmt(h.avg_cpu_utilization.std)}",
        ]
    for w in r.windows:
        lines += ["", "[[windows]]", f"window_id = {w.window_id}",
                  f"n_episodes = {w.n_episodes}", f"violations = {w.violations}",
                  f"avg_duration = {_fmt(w.avg_duration if w.avg_duration is not None else float('nan'))}"]
    return "\n".join(lines) + "\n"


def read_report(path: str | Path) -> MetricsReport:
    from .config import tomllib

    path = Path(path)
    if path.is_dir():
        path = path / REPORT_NAME
    if not path.exists():
        raise MissingLog(f"no report at {path}")
    doc = tomllib.loads(path.read_text())

    def horizon(d: dict) -> HorizonMetrics:
        return HorizonMetrics(
            Stat(d["thermal_violations_mean"], d["thermal_violations_std"]),
            Stat(d["avg_episode_duration_mean"], d["avg_episode_duration_std"]),
            Stat(d["avg_cpu_utilization_mean"], d["avg_cpu_utilization_std"]),
            d.get("n_episodes", 0),
        )

    windows = [WindowBreakdown(w["window_id"], w["n_episodes"], w["violations"],
                               None if math.isnan(w["avg_duration"]) else w["avg_duration"])
               for w in doc.get("windows", [])]
    return MetricsReport(doc["mode"], doc["environment"], list(doc["seeds"]),
                         horizon(doc["full"]), horizon(doc["early"]), doc["early_slice"],
                         doc["sim_duration"], windows)


# -- comparison --------------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonRecord:
    metric: str
    horizon: str
    baseline: float
    agentic: float

    @property
    def percent_change(self) -> float:
        return (self.agentic - self.baseline) / self.baseline * 100.0


def compare(baseline: MetricsReport, agentic: MetricsReport) -> list[ComparisonRecord]:
    out = []
    for horizon in ("early", "full"):
        b, a = getattr(baseline, horizon), getattr(agentic, horizon)
        out.append(ComparisonRecord("avg_episode_duration", horizon,
                                    b.avg_episode_duration.mean, a.avg_episode_duration.mean))
        out.append(ComparisonRecord("thermal_violations", horizon,
                                    b.thermal_violations.mean, a.thermal_violations.mean))
        out.append(ComparisonRecord("avg_cpu_utilization", horizon,
                                    b.avg_cpu_utilization.mean, a.avg_cpu_utilization.mean))
    return out


def format_comparison(records: Sequence[ComparisonRecord]) -> str:
    rows = [f"{'metric':<22} {'horizon':<7} {'baseline':>12} {'agentic':>12} {'change':>9}"]
    for r in records:
        rows.append(f"{r.metric:<22} {r.horizon:<7} {r.baseline:>12.2f} {r.agentic:>12.2f} "
                    f"{r.percent_change:>+8.1f}%")
    return "\n".join(rows)


# -- the run -----------------------------------------------------------------------

@dataclass
class RunResult:
    config: ExperimentConfig
    report: MetricsReport
    summaries: list[EpisodeSummary]
    telemetry: list[list]
    losses: list[list]
    recommendations: list[list]
    bus_events: list[list]
    overrides: list[tuple[int, float, float]]  # (iteration, sim_time, alpha)
    alpha_trace: list[float]
    output_dir: Path | None = None


def _telemetry_row(t: float, step: int, sensors, t_amb: float, cores, tcfg) -> list:
    active = [c for c in cores if c.active]
    mean_f = sum(c.frequency for c in active) / len(active) if active else 0.0
    power = float(node_powers(cores, tcfg).sum())
    return [repr(t), step, *(repr(float(x)) for x in sensors), repr(t_amb), len(active),
            repr(mean_f), repr(power)]


def run_experiment(cfg: ExperimentConfig, output_dir: str | Path | None = None,
                   write_files: bool = True) -> RunResult:
    """Run one seed of a baseline or agentic experiment."""
    cfg = cfg.resolved()
    tcfg, profile = cfg.plant, cfg.ambient
    ctl = cfg.controller
    space = ctl.action_space
    agentic = cfg.mode is Mode.AGENTIC

    ss = np.random.SeedSequence(cfg.seed)
    agent_ss, bus_ss = ss.spawn(2)
    agent = SACAgent(observation_dim(tcfg, space), action_dim(space, tcfg), ctl.sac, agent_ss)

    bus = supervisor = None
    if agentic:
        bus = AgentBus(cfg.latency, np.random.default_rng(bus_ss))
        supervisor = Supervisor(cfg.supervisor, bus.summaries, bus.recommendations,
                                lambda: agent.alpha, make_backend(cfg.supervisor), tcfg)

    state = initial_state(tcfg, profile, seed=cfg.seed)
    end_time = cfg.sim_duration
    all_off = [CoreCommand(i, False) for i in range(1, tcfg.total_cores)]
    d = action_dim(space, tcfg)

    telemetry: list[list] = []
    losses: list[list] = []
    summaries: list[EpisodeSummary] = []
    util_steps: list[tuple[float, float]] = []
    overrides: list[tuple[int, float, float]] = []
    alpha_trace: list[float] = []
    iteration = 0
    episode_id = 0

    def supervise(now: float) -> None:
        if supervisor is not None:
            supervisor.tick(now)

    while state.sim_time < end_time:
        episode_id += 1
        trace = EpisodeTrace(episode_id)
        prev_action = np.zeros(d)
        sensors = read_sensors(state, tcfg)
        obs = build_observation(sensors, ambient_at(profile, state.sim_time), state,
                                prev_action, tcfg)
        truncated = False
        for k in range(ctl.episode_cap):
            now = state.sim_time
            supervise(now)
            if bus is not None:
                rec = bus.recommendations.poll(now)
                if rec is not None:
                    agent.set_alpha(rec.alpha)
                    overrides.append((iteration, now, rec.alpha))

            raw = agent.select_action(obs)
            commands = decode_action(raw, space, tcfg)
            t_amb = ambient_at(profile, now)
            nxt = step_plant(state, commands, profile, tcfg)
            telemetry.append(_telemetry_row(now, iteration, sensors, t_amb, nxt.cores, tcfg))
            next_sensors = read_sensors(nxt, tcfg)
            reward, violation = compute_reward(state, raw, nxt, cfg.reward, tcfg, next_sensors)
            next_obs = build_observation(next_sensors, ambient_at(profile, nxt.sim_time), nxt,
                                         raw, tcfg)
            agent.store(obs, raw, reward, next_obs, violation)
            util_steps.append((now, cpu_utilization(nxt.cores, tcfg)))
            if agent.ready() and iteration % ctl.sac.train_every == 0:
                rec_loss = agent.update()
                losses.append([rec_loss["update_idx"], repr(rec_loss["critic_loss"]),
                               repr(rec_loss["actor_loss"]), repr(rec_loss["alpha"]),
                               rec_loss["alpha_mode"]])
            alpha_trace.append(agent.alpha)
            trace.steps.append(StepRecord(k, tuple(next_sensors), max(next_sensors),
                                          tuple(float(x) for x in raw), reward))
            iteration += 1
            state, sensors, obs = nxt, next_sensors, next_obs
            if violation:
                trace.termination = Termination.VIOLATION
                break
            if state.sim_time >= end_time:
                truncated = True
                break

        trace.sim_time_end = state.sim_time
        if truncated:
            # cut off by the end of the run: neither a violation nor a timeout
            break
        summary = summarize_episode(trace, tcfg)
        summaries.append(summary)
        if bus is not None:
            bus.summaries.enqueue(summary, state.sim_time)

        # cool-down with managed cores off
        hold_until = min(state.sim_time + ctl.cooldown, end_time)
        while state.sim_time < hold_until:
            now = state.sim_time
            supervise(now)
            nxt = step_plant(state, all_off, profile, tcfg)
            telemetry.append(_telemetry_row(now, -1, sensors, ambient_at(profile, now),
                                            nxt.cores, tcfg))
            state = nxt
            sensors = read_sensors(state, tcfg)

    full = horizon_metrics(summaries, [u for _, u in util_steps])
    early_summaries = [s for s in summaries if s.sim_time_end <= cfg.early_slice]
    early = horizon_metrics(early_summaries, [u for t, u in util_steps if t < cfg.early_slice])
    report = MetricsReport(cfg.mode.value, cfg.environment.value, [cfg.seed], full, early,
                           cfg.early_slice, cfg.sim_duration,
                           window_breakdown(summaries, cfg.window_duration, cfg.sim_duration))

    result = RunResult(
        config=cfg, report=report, summaries=summaries, telemetry=telemetry, losses=losses,
        recommendations=supervisor.log if supervisor else [],
        bus_events=bus.events if bus else [], overrides=overrides, alpha_trace=alpha_trace,
    )
    out = output_dir if output_dir is not None else cfg.output_dir
    if write_files and out is not None:
        result.output_dir = write_run(result, out)
    return result


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_run(result: RunResult, out: str | Path) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    tcfg = result.config.plant
    _write_csv(out / "telemetry.csv", telemetry_columns(tcfg), result.telemetry)
    _write_csv(out / "episodes.csv", SUMMARY_COLUMNS,
               (summary_row(s) for s in result.summaries))
    _write_csv(out / "recommendations.csv", RECOMMENDATION_COLUMNS, result.recommendations)
    _write_csv(out / "bus_events.csv", BUS_EVENT_COLUMNS, result.bus_events)
    _write_csv(out / "losses.csv", LOSS_COLUMNS, result.losses)
    (out / REPORT_NAME).write_text(format_report(result.report))
    emit_plot_data(out)
    return out


def run_repeats(cfg: ExperimentConfig, output_dir: str | Path | None = None,
                repeats: int | None = None) -> tuple[MetricsReport, list[RunResult]]:
    """Run ``repeats`` consecutive seeds and combine their reports."""
    n = repeats or cfg.repeats
    base = Path(output_dir) if output_dir is not None else (
        Path(cfg.output_dir) if cfg.output_dir else None)
    results = []
    for i in range(n):
        seed_cfg = cfg.with_overrides(seed=cfg.seed + i)
        out = None
        if base is not None:
            out = base if n == 1 else base / f"seed_{cfg.seed + i}"
        results.append(run_experiment(seed_cfg, out))
    combined = combine_reports([r.report for r in results])
    if base is not None and n > 1:
        base.mkdir(parents=True, exist_ok=True)
        (base / REPORT_NAME).write_text(format_report(combined))
    return combined, results


# -- plot series -------------------------------------------------------------------

def _read_rows(path: Path) -> list[dict]:
    if not path.exists():
        raise MissingLog(f"missing log file {path}")
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def emit_plot_data(run_dir: str | Path) -> dict[str, Path]:
    """Write plain numeric plot series derived from a run directory's logs.

    * ``plot_episode_mean.csv``: control iteration at which each episode ended
      and the running mean of all episode lengths completed so far.
    * ``plot_alpha_markers.csv``: iterations at which an alpha override was applied.
    * ``plot_latency.csv``: delivery latency of each recommendation.
    """
    run_dir = Path(run_dir)
    episodes = _read_rows(run_dir / "episodes.csv")
    recs = _read_rows(run_dir / "recommendations.csv")
    events = _read_rows(run_dir / "bus_events.csv")
    telemetry = _read_rows(run_dir / "telemetry.csv")

    mean_rows = []
    total = 0
    iteration = 0
    for n, ep in enumerate(episodes, start=1):
        steps = int(ep["n_steps"])
        iteration += steps
        total += steps
        mean_rows.append([iteration, ep["episode_id"], repr(total / n)])

    control_at = {row["sim_time"]: int(row["step"]) for row in telemetry if int(row["step"]) >= 0}
    alpha_of = {r["window_id"]: r["alpha"] for r in recs}
    marker_rows = []
    for ev in events:
        if ev["direction"] != "recommendation":
            continue
        it = control_at.get(ev["polled_at"])
        if it is not None:
            marker_rows.append([it, ev["polled_at"], ev["payload_id"],
                                alpha_of.get(ev["payload_id"], "")])

    latency_rows = [[i, r["window_id"], r["latency_s"]] for i, r in enumerate(recs, start=1)]

    paths = {
        "episode_mean": run_dir / "plot_episode_mean.csv",
        "alpha_markers": run_dir / "plot_alpha_markers.csv",
        "latency": run_dir / "plot_latency.csv",
    }
    _write_csv(paths["episode_mean"], ["iteration", "episode_id", "running_mean_length"],
               mean_rows)
    _write_csv(paths["alpha_markers"], ["iteration", "sim_time", "window_id", "alpha"],
               marker_rows)
    _write_csv(paths["latency"], ["prompt", "window_id", "latency_s"], latency_rows)
    return paths
