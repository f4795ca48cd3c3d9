"""Discrete-time world stepping: commands become position setpoints at the
control rate, and each drone relaxes toward its setpoint with a first-order
plant integrated exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    AgentState,
    CommandDelta,
    compose_commands_batch,
    wrap_angle,
    wrap_angles,
)
from .params import ArenaSpec, FlightParams, InitSpec, ModelParams, NavGoal


class SimulationDiverged(RuntimeError):
    """A state variable became non-finite; the run is aborted."""

    def __init__(self, time: float, detail: str):
        super().__init__(f"non-finite state at t={time:.3f}s: {detail}")
        self.time = time
        self.detail = detail


@dataclass
class World:
    """Complete simulation state at one instant.

    Agent arrays are row-aligned: ``setpoint[i]`` is agent ``i``'s active
    target. Intruders are kinematic (no plant) and never social.
    """

    time: float
    pos: np.ndarray        # (N, 3)
    vel: np.ndarray        # (N, 3)
    heading: np.ndarray    # (N,)
    setpoint: np.ndarray   # (N, 3)
    intruder_pos: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    intruder_vel: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    intruder_heading: np.ndarray = field(default_factory=lambda: np.zeros(0))
    intruder_speed: np.ndarray = field(default_factory=lambda: np.zeros(0))
    seed: int | None = None

    @property
    def n_agents(self) -> int:
        return self.pos.shape[0]

    @property
    def n_intruders(self) -> int:
        return self.intruder_pos.shape[0]

    def swarm_states(self) -> list[AgentState]:
        return [
            AgentState(i, self.pos[i].copy(), self.vel[i].copy(), float(self.heading[i]))
            for i in range(self.n_agents)
        ]

    def intruder_states(self) -> list[AgentState]:
        return [
            AgentState(
                self.n_agents + m,
                self.intruder_pos[m].copy(),
                self.intruder_vel[m].copy(),
                float(self.intruder_heading[m]),
            )
            for m in range(self.n_intruders)
        ]

    def barycenter(self) -> np.ndarray:
        return self.pos.mean(axis=0)

    def copy(self) -> "World":
        return World(
            time=self.time,
            pos=self.pos.copy(),
            vel=self.vel.copy(),
            heading=self.heading.copy(),
            setpoint=self.setpoint.copy(),
            intruder_pos=self.intruder_pos.copy(),
            intruder_vel=self.intruder_vel.copy(),
            intruder_heading=self.intruder_heading.copy(),
            intruder_speed=self.intruder_speed.copy(),
            seed=self.seed,
        )


def command_to_setpoint(
    state: AgentState, cmd: CommandDelta, fp: FlightParams, p: ModelParams
) -> np.ndarray:
    """Convert a (clamped) command increment into a position setpoint a
    ``time_to_target`` horizon ahead."""
    phi = wrap_angle(state.heading + cmd.d_heading)
    v = min(max(state.speed_h + cmd.d_speed, 0.0), p.v_max)
    v_z = min(max(float(state.velocity[2]) + cmd.d_vz, -p.vz_max), p.vz_max)
    step = fp.time_to_target * np.array([v * math.cos(phi), v * math.sin(phi), v_z])
    return state.position + step


def relax_step(pos: np.ndarray, setpoint: np.ndarray, fp: FlightParams) -> np.ndarray:
    """One exact exponential relaxation step of the first-order plant,
    applied per axis."""
    decay = math.exp(-fp.dt_phys / fp.tau)
    return setpoint + (np.asarray(pos, dtype=float) - setpoint) * decay


def control_tick(
    world: World,
    model: ModelParams,
    fp: FlightParams,
    goal: NavGoal,
    arena: ArenaSpec,
    neighbor_snapshot: tuple[np.ndarray, np.ndarray] | None = None,
) -> list[tuple[int, int]]:
    """Refresh every agent's setpoint from a synchronous snapshot (in place).

    ``neighbor_snapshot`` optionally provides (positions, headings) at which
    other agents are perceived, for stale-telemetry modeling. Returns the
    coincident pairs flagged this tick.
    """
    n_pos = n_head = None
    if neighbor_snapshot is not None:
        n_pos, n_head = neighbor_snapshot
    d_speed, d_vz, d_heading, collisions = compose_commands_batch(
        world.pos,
        world.vel,
        world.heading,
        world.intruder_pos,
        goal,
        arena,
        model,
        neighbor_pos=n_pos,
        neighbor_heading=n_head,
    )
    phi = wrap_angles(world.heading + d_heading)
    speed_h = np.hypot(world.vel[:, 0], world.vel[:, 1])
    v = np.clip(speed_h + d_speed, 0.0, model.v_max)
    v_z = np.clip(world.vel[:, 2] + d_vz, -model.vz_max, model.vz_max)
    world.setpoint = world.pos + fp.time_to_target * np.stack(
        [v * np.cos(phi), v * np.sin(phi), v_z], axis=1
    )
    return collisions


def phys_step(world: World, fp: FlightParams, model: ModelParams) -> None:
    """Advance one physics step (in place): relax agents toward their
    setpoints, recompute velocity by position differencing, refresh headings
    where the horizontal speed supports them, and move intruders along their
    straight-line tracks."""
    new_pos = relax_step(world.pos, world.setpoint, fp)
    world.vel = (new_pos - world.pos) / fp.dt_phys
    world.pos = new_pos
    speed_h = np.hypot(world.vel[:, 0], world.vel[:, 1])
    moving = speed_h > model.v_min
    world.heading = np.where(
        moving, np.arctan2(world.vel[:, 1], world.vel[:, 0]), world.heading
    )
    if world.n_intruders:
        step = world.intruder_speed * fp.dt_phys
        world.intruder_vel = np.stack(
            [
                world.intruder_speed * np.cos(world.intruder_heading),
                world.intruder_speed * np.sin(world.intruder_heading),
                np.zeros_like(world.intruder_speed),
            ],
            axis=1,
        )
        world.intruder_pos[:, 0] += step * np.cos(world.intruder_heading)
        world.intruder_pos[:, 1] += step * np.sin(world.intruder_heading)
    world.time += fp.dt_phys


def check_finite(world: World) -> None:
    """Raise :class:`SimulationDiverged` if any state component is non-finite."""
    for name, arr in (
        ("position", world.pos),
        ("velocity", world.vel),
        ("heading", world.heading),
        ("setpoint", world.setpoint),
    ):
        if not np.isfinite(arr).all():
            bad = np.argwhere(~np.isfinite(arr))
            raise SimulationDiverged(world.time, f"{name} agent {int(bad[0][0])}")


def step_world(
    world: World,
    model: ModelParams,
    fp: FlightParams,
    goal: NavGoal,
    arena: ArenaSpec,
) -> World:
    """Advance one control period: one synchronous command refresh followed by
    exactly ``dt_ctrl / dt_phys`` physics steps. Pure: returns a new world.

    Intruders coast along their current heading/speed; their guidance is
    applied by the scenario layer between periods.
    """
    out = world.copy()
    control_tick(out, model, fp, goal, arena)
    for _ in range(fp.steps_per_ctrl):
        phys_step(out, fp, model)
    check_finite(out)
    return out


def init_world(
    n: int,
    seed: int,
    arena: ArenaSpec,
    init: InitSpec | None = None,
    max_tries: int = 10_000,
) -> World:
    """Seeded initial world: agents uniform in a disc around the arena center
    with a minimum pairwise separation (rejection sampling), altitudes uniform
    in the spawn band, headings uniform, all at the initial cruise speed."""
    if n < 2:
        raise ValueError("swarm scenarios require at least 2 agents")
    spec = init or InitSpec()
    rng = np.random.default_rng(seed)
    placed: list[np.ndarray] = []
    for _ in range(n):
        for attempt in range(max_tries):
            radius = spec.r_init * math.sqrt(rng.uniform())
            angle = rng.uniform(0.0, 2.0 * math.pi)
            z = rng.uniform(spec.z_low, spec.z_high)
            candidate = np.array(
                [
                    arena.center[0] + radius * math.cos(angle),
                    arena.center[1] + radius * math.sin(angle),
                    z,
                ]
            )
            if all(
                np.linalg.norm(candidate - other) >= spec.min_separation
                for other in placed
            ):
                placed.append(candidate)
                break
        else:
            raise RuntimeError("could not place agents with the requested separation")
    pos = np.stack(placed)
    heading = wrap_angles(rng.uniform(-math.pi, math.pi, size=n))
    vel = spec.v_init * np.stack(
        [np.cos(heading), np.sin(heading), np.zeros(n)], axis=1
    )
    return World(
        time=0.0,
        pos=pos,
        vel=vel,
        heading=heading,
        setpoint=pos.copy(),
        seed=seed,
    )
