"""Experiment configuration and its TOML file format.

The file has one table per subsystem; every key maps onto a dataclass field
and unknown keys are rejected::

    [experiment]   mode, environment, seed, sim_duration, window_duration,
                   early_slice, repeats, output_dir
    [plant]        ThermalConfig fields
    [ambient]      AmbientProfile fields
    [controller]   SACConfig fields plus action_space, episode_cap, cooldown
    [reward]       RewardConfig fields
    [supervisor]   SupervisorConfig fields (endpoint/model/timeout/api_key may
                   also come from AGENTIC_THERMAL_LLM_URL, _MODEL, _TIMEOUT,
                   _API_KEY)
    [latency]      kind = "fixed" | "uniform" | "empirical", value, low, high,
                   samples
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any

from .bus import LatencyModel
from .control import ActionSpace, RewardConfig
from .plant import AmbientKind, AmbientProfile, ThermalConfig
from .sac import SACConfig
from .supervisor.rules import SupervisorConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigInvalid(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


class Mode(str, Enum):
    BASELINE = "baseline"
    AGENTIC = "agentic"


class Environment(str, Enum):
    GROUND = "ground"
    ORBIT = "orbit"


GROUND_DURATION = 4 * 3600.0
GROUND_WINDOW = 3600.0
ORBIT_DURATION = 3 * 5400.0
ORBIT_WINDOW = 900.0


@dataclass(frozen=True)
class ControllerConfig:
    sac: SACConfig = field(default_factory=SACConfig)
    action_space: ActionSpace = ActionSpace.AGGREGATE
    episode_cap: int = 1000
    cooldown: float = 10.0  # simulated s between episodes

    def __post_init__(self):
        object.__setattr__(self, "action_space", ActionSpace(self.action_space))
        if self.episode_cap < 1:
            raise ValueError("episode_cap must be >= 1")
        if self.cooldown < 0:
            raise ValueError("cooldown must be >= 0")


@dataclass(frozen=True)
class ExperimentConfig:
    mode: Mode = Mode.BASELINE
    environment: Environment = Environment.GROUND
    seed: int = 0
    sim_duration: float | None = None
    window_duration: float | None = None
    early_slice: float | None = None  # default: first half of the run
    repeats: int = 1
    output_dir: str | None = None
    plant: ThermalConfig = field(default_factory=ThermalConfig)
    ambient: AmbientProfile | None = None
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    supervisor: SupervisorConfig = field(default_factory=SupervisorConfig)
    latency: LatencyModel = field(default_factory=LatencyModel)

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "environment", Environment(self.environment))
        if self.repeats < 1:
            raise ConfigInvalid(["experiment.repeats: must be >= 1"])

    def with_overrides(self, **kw) -> "ExperimentConfig":
        """Copy with top-level fields replaced; ``None`` values are ignored."""
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def resolved(self) -> "ExperimentConfig":
        """Fill environment-dependent defaults and validate cross-field constraints."""
        ground = self.environment is Environment.GROUND
        sim_duration = self.sim_duration
        if sim_duration is None:
            sim_duration = GROUND_DURATION if ground else ORBIT_DURATION
        window = self.window_duration
        if window is None:
            window = GROUND_WINDOW if ground else ORBIT_WINDOW
        early = self.early_slice if self.early_slice is not None else sim_duration / 2.0
        ambient = self.ambient
        if ambient is None:
            ambient = AmbientProfile.ground() if ground else AmbientProfile.orbital()
        problems = []
        if sim_duration <= 0:
            problems.append("experiment.sim_duration: must be positive")
        if window <= 0:
            problems.append("experiment.window_duration: must be positive")
        if not 0 < early <= sim_duration:
            problems.append("experiment.early_slice: must lie in (0, sim_duration]")
        if problems:
            raise ConfigInvalid(problems)
        return replace(self, sim_duration=float(sim_duration), window_duration=float(window),
                       early_slice=float(early), ambient=ambient,
                       supervisor=replace(self.supervisor, window_duration=float(window)))


# -- file loading ----------------------------------------------------------------

_EXPERIMENT_KEYS = {"mode", "environment", "seed", "sim_duration", "window_duration",
                    "early_slice", "repeats", "output_dir"}


def _build(cls, section: str, data: dict, errors: list[str], **extra):
    if not isinstance(data, dict):
        errors.append(f"{section}: expected a table")
        return None
    names = {f.name for f in fields(cls)} - set(extra)
    unknown = sorted(set(data) - names)
    for key in unknown:
        errors.append(f"{section}.{key}: unknown key")
    kwargs = {k: v for k, v in data.items() if k in names}
    for k, v in kwargs.items():
        if isinstance(v, list):
            kwargs[k] = tuple(v)
    try:
        return cls(**kwargs, **extra)
    except (TypeError, ValueError) as exc:
        errors.append(f"{section}: {exc}")
        return None


def config_from_dict(doc: dict[str, Any]) -> ExperimentConfig:
    errors: list[str] = []
    known = {"experiment", "plant", "ambient", "controller", "reward", "supervisor", "latency"}
    for key in sorted(set(doc) - known):
        errors.append(f"{key}: unknown section")

    exp = dict(doc.get("experiment", {}))
    for key in sorted(set(exp) - _EXPERIMENT_KEYS):
        errors.append(f"experiment.{key}: unknown key")
        exp.pop(key)

    kw: dict[str, Any] = {k: v for k, v in exp.items()}
    for name in ("mode", "environment"):
        if name in kw:
            try:
                kw[name] = (Mode if name == "mode" else Environment)(kw[name])
            except ValueError:
                errors.append(f"experiment.{name}: invalid value {kw[name]!r}")
                kw.pop(name)

    if "plant" in doc:
        kw["plant"] = _build(ThermalConfig, "plant", doc["plant"], errors)
    if "ambient" in doc:
        amb = dict(doc["ambient"])
        env = Environment(kw.get("environment", Environment.GROUND))
        amb.setdefault("kind", AmbientKind.GROUND.value if env is Environment.GROUND
                       else AmbientKind.ORBITAL.value)
        kw["ambient"] = _build(AmbientProfile, "ambient", amb, errors)
    if "controller" in doc:
        ctl = dict(doc["controller"])
        outer = {k: ctl.pop(k) for k in ("action_space", "episode_cap", "cooldown") if k in ctl}
        sac = _build(SACConfig, "controller", ctl, errors)
        if sac is not None:
            kw["controller"] = _build(ControllerConfig, "controller", outer, errors, sac=sac)
    if "reward" in doc:
        kw["reward"] = _build(RewardConfig, "reward", doc["reward"], errors)
    if "supervisor" in doc:
        kw["supervisor"] = _build(SupervisorConfig, "supervisor", doc["supervisor"], errors)
    if "latency" in doc:
        kw["latency"] = _build(LatencyModel, "latency", doc["latency"], errors)

    if errors:
        raise ConfigInvalid(errors)
    kw = {k: v for k, v in kw.items() if v is not None}
    try:
        return ExperimentConfig(**kw)
    except ConfigInvalid:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid([f"experiment: {exc}"]) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    with path.open("rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigInvalid([f"{path}: {exc}"]) from exc
    return config_from_dict(doc)
