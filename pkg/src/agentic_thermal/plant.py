"""Lumped RC thermal model of a 16-core compute node.

Each sensor is one thermal node. Cores are assigned to nodes in contiguous
index blocks, every node exchanges heat with the ambient through
``ambient_resistance`` and with every other node through
``inter_node_resistance``. Integration is explicit Euler.

All plant constants are artifact choices; the flight SoC's thermal mass and
conductances are not known.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np


class CommandAddressesReservedCore(ValueError):
    """A core command targeted core 0, which is reserved for system tasks."""


@dataclass(frozen=True)
class ThermalConfig:
    threshold: float = 60.0
    near_band: float = 1.0
    danger_floor: float = 59.0
    sensor_count: int = 4
    f_min: float = 1.0
    f_max: float = 2.0
    total_cores: int = 16
    managed_cores: int = 15
    node_capacitance: float = 10.0  # J/°C
    ambient_resistance: float = 8.0  # °C/W
    inter_node_resistance: float = 8.0  # °C/W
    p_static: float = 0.5  # W per active core
    p_dyn_coeff: float = 0.4  # W/GHz^3
    dt: float = 1.0
    sensor_noise: float = 0.0  # half-width of uniform noise, °C

    def __post_init__(self):
        if not self.f_min < self.f_max:
            raise ValueError("f_min must be below f_max")
        if self.near_band <= 0:
            raise ValueError("near_band must be positive")
        if not self.threshold > self.danger_floor:
            raise ValueError("threshold must exceed danger_floor")
        if self.sensor_count < 1:
            raise ValueError("sensor_count must be >= 1")
        if self.managed_cores != self.total_cores - 1:
            raise ValueError("managed_cores must equal total_cores - 1 (core 0 reserved)")
        if min(self.node_capacitance, self.ambient_resistance, self.inter_node_resistance) <= 0:
            raise ValueError("thermal constants must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.dt >= self.min_time_constant / 5.0:
            raise ValueError(
                f"dt={self.dt} too large for explicit Euler "
                f"(fastest time constant {self.min_time_constant:.3f} s)"
            )

    @property
    def time_constant(self) -> float:
        """Isolated-node time constant C * R_amb."""
        return self.node_capacitance * self.ambient_resistance

    @property
    def min_time_constant(self) -> float:
        # Fastest mode of the all-to-all coupled network.
        rate = 1.0 / self.ambient_resistance
        if self.sensor_count > 1:
            rate += self.sensor_count / self.inter_node_resistance
        return self.node_capacitance / rate

    def node_of(self, core_index: int) -> int:
        return core_index * self.sensor_count // self.total_cores


class AmbientKind(str, Enum):
    GROUND = "ground"
    ORBITAL = "orbital"


@dataclass(frozen=True)
class AmbientProfile:
    kind: AmbientKind = AmbientKind.GROUND
    # ground lab: conditioned during the first part of every day
    conditioned_temp: float = 22.0
    conditioned_duration: float = 10 * 3600.0
    night_mean: float = 24.0
    night_amplitude: float = 2.0
    day_length: float = 24 * 3600.0
    # low Earth orbit
    period: float = 5400.0
    sun_fraction: float = 0.5
    sun_temp: float = 30.0
    eclipse_temp: float = 8.0
    transition_width: float = 300.0

    def __post_init__(self):
        object.__setattr__(self, "kind", AmbientKind(self.kind))
        if self.kind is AmbientKind.ORBITAL:
            if not 0.0 < self.sun_fraction < 1.0:
                raise ValueError("sun_fraction must lie in (0, 1)")
            if self.period <= 0:
                raise ValueError("period must be positive")
            shortest_phase = min(self.sun_fraction, 1.0 - self.sun_fraction) * self.period
            if not 0.0 <= self.transition_width < shortest_phase:
                raise ValueError("transition_width must be shorter than either phase")
        else:
            if not 0.0 <= self.conditioned_duration <= self.day_length:
                raise ValueError("conditioned_duration must fit within day_length")

    @classmethod
    def ground(cls, **kw) -> "AmbientProfile":
        return cls(kind=AmbientKind.GROUND, **kw)

    @classmethod
    def orbital(cls, **kw) -> "AmbientProfile":
        return cls(kind=AmbientKind.ORBITAL, **kw)


def ambient_at(profile: AmbientProfile, t: float) -> float:
    """Ambient temperature (°C) at simulated time ``t`` seconds."""
    if profile.kind is AmbientKind.ORBITAL:
        phase = math.fmod(t, profile.period)
        if phase < 0:
            phase += profile.period
        sun_end = profile.sun_fraction * profile.period
        w = profile.transition_width
        # ramps sit at the end of each phase so t=0 is the start of full sun
        if phase < sun_end:
            start, hold, target = profile.sun_temp, sun_end - w, profile.eclipse_temp
            if phase < hold:
                return start
            return start + (target - start) * (phase - hold) / w
        hold = profile.period - w
        if phase < hold:
            return profile.eclipse_temp
        return profile.eclipse_temp + (profile.sun_temp - profile.eclipse_temp) * (phase - hold) / w

    day_t = math.fmod(t, profile.day_length)
    if day_t < profile.conditioned_duration:
        return profile.conditioned_temp
    night_len = profile.day_length - profile.conditioned_duration
    x = (day_t - profile.conditioned_duration) / night_len
    return profile.night_mean + profile.night_amplitude * math.sin(2.0 * math.pi * x)


@dataclass(frozen=True)
class CoreState:
    index: int
    active: bool
    frequency: float
    load: float = 1.0


@dataclass(frozen=True)
class CoreCommand:
    index: int
    active: bool
    frequency: float = 0.0


@dataclass(frozen=True)
class PlantState:
    sim_time: float
    node_temps: tuple[float, ...]
    cores: tuple[CoreState, ...]
    rng_stream: int = 0
    step_count: int = 0

    def __post_init__(self):
        if not all(math.isfinite(t) for t in self.node_temps):
            raise ValueError("non-finite node temperature")

    @property
    def peak(self) -> float:
        return max(self.node_temps)


def initial_state(cfg: ThermalConfig, profile: AmbientProfile, seed: int = 0,
                  temps: Sequence[float] | None = None) -> PlantState:
    """Plant at ambient, core 0 at f_max, managed cores off."""
    if temps is None:
        temps = [ambient_at(profile, 0.0)] * cfg.sensor_count
    if len(temps) != cfg.sensor_count:
        raise ValueError("need one temperature per sensor node")
    cores = [CoreState(0, True, cfg.f_max, 1.0)]
    cores += [CoreState(i, False, 0.0, 1.0) for i in range(1, cfg.total_cores)]
    return PlantState(0.0, tuple(float(t) for t in temps), tuple(cores), seed, 0)


def core_power(core: CoreState, cfg: ThermalConfig) -> float:
    if not core.active:
        return 0.0
    return cfg.p_static + cfg.p_dyn_coeff * core.frequency ** 3 * core.load


def node_powers(cores: Sequence[CoreState], cfg: ThermalConfig) -> np.ndarray:
    p = np.zeros(cfg.sensor_count)
    for core in cores:
        p[cfg.node_of(core.index)] += core_power(core, cfg)
    return p


def apply_commands(cores: Sequence[CoreState], commands: Sequence[CoreCommand],
                   cfg: ThermalConfig) -> tuple[CoreState, ...]:
    out = list(cores)
    for cmd in commands:
        if cmd.index == 0:
            raise CommandAddressesReservedCore("core 0 is reserved and cannot be commanded")
        if not 1 <= cmd.index < cfg.total_cores:
            raise ValueError(f"core index {cmd.index} out of range")
        if cmd.active:
            f = min(max(cmd.frequency, cfg.f_min), cfg.f_max)
            out[cmd.index] = CoreState(cmd.index, True, f, out[cmd.index].load)
        else:
            out[cmd.index] = CoreState(cmd.index, False, 0.0, out[cmd.index].load)
    return tuple(out)


def step_plant(state: PlantState, commands: Sequence[CoreCommand], profile: AmbientProfile,
               cfg: ThermalConfig) -> PlantState:
    """Apply ``commands`` then advance every node by one Euler step of ``cfg.dt``."""
    cores = apply_commands(state.cores, commands, cfg)
    temps = np.asarray(state.node_temps, dtype=float)
    t_amb = ambient_at(profile, state.sim_time)
    power = node_powers(cores, cfg)
    flow = power - (temps - t_amb) / cfg.ambient_resistance
    if cfg.sensor_count > 1:
        # sum_j (T_i - T_j) = n*T_i - sum(T)
        flow -= (cfg.sensor_count * temps - temps.sum()) / cfg.inter_node_resistance
    new = temps + cfg.dt * flow / cfg.node_capacitance
    return PlantState(
        sim_time=state.sim_time + cfg.dt,
        node_temps=tuple(float(x) for x in new),
        cores=cores,
        rng_stream=state.rng_stream,
        step_count=state.step_count + 1,
    )


def read_sensors(state: PlantState, cfg: ThermalConfig) -> tuple[float, ...]:
    if cfg.sensor_noise <= 0.0:
        return state.node_temps
    rng = np.random.default_rng([state.rng_stream, state.step_count])
    noise = rng.uniform(-cfg.sensor_noise, cfg.sensor_noise, size=cfg.sensor_count)
    return tuple(float(t + n) for t, n in zip(state.node_temps, noise))


def equilibrium_temps(power: Sequence[float], t_amb: float, cfg: ThermalConfig) -> np.ndarray:
    """Steady state of the RC network for constant node powers and ambient."""
    n = cfg.sensor_count
    g = np.eye(n) / cfg.ambient_resistance
    if n > 1:
        g += (n * np.eye(n) - np.ones((n, n))) / cfg.inter_node_resistance
    return t_amb + np.linalg.solve(g, np.asarray(power, dtype=float))
