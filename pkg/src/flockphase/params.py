"""Parameter sets for the interaction model, the flight plant, and the arena.

Units: distances in meters, speeds in m/s, angles in radians, times in
seconds. Gains are dimensionless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import ClassVar


class ParameterError(ValueError):
    """A parameter set violates one of its invariants."""


@dataclass
class ModelParams:
    """Interaction gains, equilibrium distances, and ranges of action.

    Defaults are the calibrated field set used by all scenarios; only the
    alignment/attraction gains are normally varied.
    """

    gamma_ali: float = 0.4            # alignment intensity
    gamma_att: float = 0.5            # attraction intensity
    gamma_acc: float = 0.15           # longitudinal speed adaptation intensity
    gamma_z: float = 0.55             # vertical interaction intensity
    gamma_par: float = 0.1            # vertical damping intensity
    gamma_rep: float = 5.5            # intruder repulsion intensity
    gamma_nav: float = 0.75           # lateral navigation intensity
    gamma_perp: float = 0.25          # vertical navigation intensity
    d0_v: float = 7.5                 # speed equilibrium distance
    d0_z: float = 2.6                 # vertical equilibrium separation
    d0_ali: float = 8.0               # alignment equilibrium distance
    d0_att: float = 6.5               # attraction equilibrium distance
    l_acc: float = 9.5                # speed range of action
    l_z: float = 10.5                 # vertical range of action
    l_ali: float = 20.5               # alignment range of action
    l_att: float = 14.0               # attraction range of action
    l_rep: float = 12.0               # intruder repulsion range of action
    a_z: float = 0.75                 # vertical saturation distance
    sigma_z: float = math.sqrt(2.0)   # vertical weighting of the pair distance
    alpha_ali: float = 0.6            # alignment anisotropy coefficient
    alpha_att: float = 0.48           # attraction anisotropy coefficient
    k_neighbors: int = 1              # influential neighbors each agent reacts to
    v_min: float = 2.0                # cruise floor of the commanded speed; heading-validity threshold
    v_max: float = 2.5                # speed ceiling
    vz_max: float = 0.6               # vertical speed clamp (platforms rate-limit climb/sink hard)
    dphi_max: float = 0.5             # heading increment clamp per control tick (turn-rate limit)
    command_gain: float = 1.0         # loop gain on composed increments before clamping

    def __post_init__(self) -> None:
        for name in ("l_acc", "l_z", "l_ali", "l_att", "l_rep"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive")
        if self.a_z <= 0:
            raise ParameterError("a_z must be positive")
        if self.sigma_z < 1.0:
            raise ParameterError("sigma_z must be >= 1")
        if not (0.0 < self.v_min < self.v_max):
            raise ParameterError("require 0 < v_min < v_max")
        if self.vz_max <= 0:
            raise ParameterError("vz_max must be positive")
        if self.k_neighbors not in (1, 2):
            raise ParameterError("k_neighbors must be 1 or 2")
        if self.dphi_max <= 0:
            raise ParameterError("dphi_max must be positive")
        if self.command_gain <= 0:
            raise ParameterError("command_gain must be positive")


@dataclass
class ArenaSpec:
    """Cylindrical flight volume: a circular fence plus an altitude band."""

    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 25.0
    z_min: float = 5.0
    z_max: float = 15.0
    wall_gain: float = 5.5            # fence repulsion intensity
    wall_range: float = 10.0          # fence interaction range

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ParameterError("arena radius must be positive")
        if not self.z_min < self.z_max:
            raise ParameterError("require z_min < z_max")
        if self.wall_range <= 0:
            raise ParameterError("wall_range must be positive")


@dataclass
class NavGoal:
    """Operational goal: a target altitude and an optional target direction."""

    z_alt: float = 10.0
    heading_goal: float | None = None


@dataclass
class FlightParams:
    """First-order plant constants and loop rates.

    The default setpoint horizon compensates the plant lag: it makes the
    speed measured at the end of a control period read back 97% of the speed
    that was commanded, so per-tick command increments integrate almost
    exactly (the small leak keeps speeds mean-reverting toward the cruise
    floor). Without compensation a horizon equal to the control period lets
    the lag eat ~64% of every command and the swarm decays below its minimum
    flying speed.
    """

    SPEED_READBACK: ClassVar[float] = 0.97

    tau: float = 1.119                # plant time constant
    dt_phys: float = 0.1              # physics step
    dt_ctrl: float = 0.5              # control period (setpoint refresh)
    time_to_target: float | None = None   # setpoint horizon; None = lag-compensated
    telemetry_staleness: float = 1.0  # uplink latency of the telemetry feed (one refresh period)

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ParameterError("tau must be positive")
        if self.dt_phys <= 0 or self.dt_ctrl <= 0:
            raise ParameterError("step sizes must be positive")
        if self.dt_phys > self.dt_ctrl:
            raise ParameterError("dt_phys must not exceed dt_ctrl")
        ratio = self.dt_ctrl / self.dt_phys
        if abs(ratio - round(ratio)) > 1e-9:
            raise ParameterError("dt_ctrl must be an integer multiple of dt_phys")
        if self.time_to_target is None:
            unit = math.exp(-(self.dt_ctrl - self.dt_phys) / self.tau) * (
                1.0 - math.exp(-self.dt_phys / self.tau)
            ) / self.dt_phys
            self.time_to_target = self.SPEED_READBACK / unit
        if self.time_to_target <= 0:
            raise ParameterError("time_to_target must be positive")
        if self.telemetry_staleness < 0:
            raise ParameterError("telemetry_staleness must be >= 0")

    @property
    def steps_per_ctrl(self) -> int:
        return round(self.dt_ctrl / self.dt_phys)


@dataclass
class InitSpec:
    """Initial placement of the swarm inside the arena."""

    r_init: float = 10.0              # spawn disc radius around the arena center
    z_low: float = 8.0
    z_high: float = 12.0
    v_init: float = 1.0               # initial horizontal speed
    min_separation: float = 1.0       # enforced by rejection sampling

    def __post_init__(self) -> None:
        if self.r_init <= 0:
            raise ParameterError("r_init must be positive")
        if not self.z_low < self.z_high:
            raise ParameterError("require z_low < z_high")
        if self.min_separation < 0:
            raise ParameterError("min_separation must be >= 0")
