"""Declarative scenarios and their execution: gain schedules, the baseline /
switching / intruder experiment layouts, and the intruder's pursuit policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import (
    SimulationDiverged,
    World,
    check_finite,
    control_tick,
    init_world,
    phys_step,
)
from .model import AgentState, wrap_angle
from .params import ArenaSpec, FlightParams, InitSpec, ModelParams, NavGoal
from .trajio import Event, LogRecord


@dataclass
class GainSchedule:
    """Ordered fixed-gain segments: (duration, gamma_ali, gamma_att)."""

    segments: list[tuple[float, float, float]]

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValueError("schedule needs at least one segment")
        for duration, ali, att in self.segments:
            if duration <= 0:
                raise ValueError("segment durations must be positive")
            if ali < 0 or att < 0:
                raise ValueError("gains must be >= 0")

    @property
    def total_duration(self) -> float:
        return float(sum(seg[0] for seg in self.segments))

    def boundaries(self, offset: float = 0.0) -> list[tuple[float, float, float, float]]:
        """Segment windows as (t_start, t_end, gamma_ali, gamma_att)."""
        out = []
        t = offset
        for duration, ali, att in self.segments:
            out.append((t, t + duration, ali, att))
            t += duration
        return out

    def gain_at(self, t: float) -> tuple[float, float]:
        """Right-continuous piecewise-constant lookup; times beyond the end
        hold the last segment's gains."""
        elapsed = 0.0
        for duration, ali, att in self.segments:
            elapsed += duration
            if t < elapsed:
                return ali, att
        last = self.segments[-1]
        return last[1], last[2]

    @staticmethod
    def constant(duration: float, gamma_ali: float, gamma_att: float) -> "GainSchedule":
        return GainSchedule([(duration, gamma_ali, gamma_att)])


@dataclass
class IntruderPolicy:
    """Pursuit parameters of the non-social intruder."""

    speed: float = 2.5
    altitude: float = 10.0
    lock_distance: float = 5.0
    pause_duration: float = 15.0
    approach_start_distance: float = 25.0

    def __post_init__(self) -> None:
        if self.speed <= 0:
            raise ValueError("intruder speed must be positive")
        if self.lock_distance <= 0:
            raise ValueError("lock_distance must be positive")


@dataclass
class IntruderPhase:
    """Mutable pursuit-cycle state: approach -> locked -> exit (pause)."""

    phase: str = "approach"
    pause_left: float = 0.0


@dataclass
class ScenarioSpec:
    """One executable experiment."""

    kind: str                  # baseline | switching | intruder
    n_drones: int
    duration: float
    schedule: GainSchedule
    intruder_policy: IntruderPolicy | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("baseline", "switching", "intruder"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if (self.intruder_policy is not None) != (self.kind == "intruder"):
            raise ValueError("intruder_policy must be present iff kind == 'intruder'")
        if abs(self.duration - self.schedule.total_duration) > 1e-6:
            raise ValueError("spec duration must equal the schedule duration")


def _gain_steps(start: float, stop: float, step: float) -> list[float]:
    if stop < start:
        raise ValueError("empty gain range")
    if step <= 0:
        raise ValueError("step must be positive")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def make_baseline(
    n: int,
    gamma_att: float,
    ali_range: tuple[float, float],
    step: float,
    dwell: float,
    seed: int = 0,
) -> ScenarioSpec:
    """Gain-stepping scenario: the alignment gain walks up its range, one
    dwell-long segment per value, at fixed attraction gain."""
    values = _gain_steps(ali_range[0], ali_range[1], step)
    schedule = GainSchedule([(dwell, v, gamma_att) for v in values])
    return ScenarioSpec(
        kind="baseline",
        n_drones=n,
        duration=schedule.total_duration,
        schedule=schedule,
        seed=seed,
    )


def make_switching(
    n: int,
    low: float,
    high: float,
    dwell: float,
    cycles: int,
    gamma_att: float = 0.5,
    seed: int = 0,
) -> ScenarioSpec:
    """Alternating-gain scenario: low/high alignment, one dwell each,
    repeated for the requested number of cycles."""
    if not low < high:
        raise ValueError("require low < high")
    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    segments = []
    for _ in range(cycles):
        segments.append((dwell, low, gamma_att))
        segments.append((dwell, high, gamma_att))
    schedule = GainSchedule(segments)
    return ScenarioSpec(
        kind="switching",
        n_drones=n,
        duration=schedule.total_duration,
        schedule=schedule,
        seed=seed,
    )


def make_intruder(
    n: int,
    schedule: GainSchedule,
    policy: IntruderPolicy | None = None,
    seed: int = 0,
) -> ScenarioSpec:
    """Intruder scenario over an arbitrary gain schedule."""
    return ScenarioSpec(
        kind="intruder",
        n_drones=n,
        duration=schedule.total_duration,
        schedule=schedule,
        intruder_policy=policy or IntruderPolicy(),
        seed=seed,
    )


def intruder_update(
    intruder: AgentState,
    swarm_barycenter: np.ndarray,
    arena: ArenaSpec,
    policy: IntruderPolicy,
    phase: IntruderPhase,
    dt: float,
) -> tuple[AgentState, IntruderPhase]:
    """One guidance tick of the intruder's pursuit cycle.

    APPROACH homes on the current barycenter; LOCKED (inside
    ``lock_distance``) freezes the heading and continues straight; once past
    the barycenter and outside the arena the intruder holds position for
    ``pause_duration`` before re-approaching. Altitude is never touched.
    """
    phase = IntruderPhase(phase.phase, phase.pause_left)
    x, y = float(intruder.position[0]), float(intruder.position[1])
    bx, by = float(swarm_barycenter[0]), float(swarm_barycenter[1])
    heading = intruder.heading
    speed = policy.speed

    if phase.phase == "exit":
        if phase.pause_left > 1e-9:
            phase.pause_left -= dt
            speed = 0.0
        else:
            phase.phase = "approach"
            phase.pause_left = 0.0

    if phase.phase == "approach":
        if math.hypot(bx - x, by - y) <= policy.lock_distance:
            phase.phase = "locked"
        else:
            heading = math.atan2(by - y, bx - x)

    if phase.phase == "locked":
        r = math.hypot(x - arena.center[0], y - arena.center[1])
        behind = (x - bx) * math.cos(heading) + (y - by) * math.sin(heading) > 0.0
        if r > arena.radius and behind:
            phase.phase = "exit"
            phase.pause_left = policy.pause_duration
            speed = 0.0

    velocity = np.array([speed * math.cos(heading), speed * math.sin(heading), 0.0])
    state = AgentState(intruder.id, intruder.position.copy(), velocity, heading)
    return state, phase


@dataclass
class ScenarioResult:
    """Metrics trace, events, and optional trajectory records of one run."""

    spec: ScenarioSpec
    t: np.ndarray
    P: np.ndarray
    D: np.ndarray
    min_dist: np.ndarray
    gamma_ali: np.ndarray
    gamma_att: np.ndarray
    intruder_distance: np.ndarray      # nan when no intruder
    in_window: np.ndarray              # bool; intruder within the analysis radius
    events: list[Event]
    windows: list[tuple[float, float | None]]
    records: list[LogRecord]
    final_world: World | None
    diverged: bool = False


class ScenarioAborted(RuntimeError):
    """Plant divergence: carries the partial result collected so far."""

    def __init__(self, cause: SimulationDiverged, partial: ScenarioResult):
        super().__init__(str(cause))
        self.partial = partial


def _spawn_intruder(world: World, arena: ArenaSpec, policy: IntruderPolicy, seed: int) -> None:
    rng = np.random.default_rng([seed, 0x1D7])
    angle = rng.uniform(0.0, 2.0 * math.pi)
    r = 1.2 * arena.radius
    pos = np.array(
        [arena.center[0] + r * math.cos(angle), arena.center[1] + r * math.sin(angle), policy.altitude]
    )
    heading = wrap_angle(angle + math.pi)  # initially toward the center
    world.intruder_pos = pos[None, :].copy()
    world.intruder_heading = np.array([heading])
    world.intruder_speed = np.array([policy.speed])
    world.intruder_vel = np.array(
        [[policy.speed * math.cos(heading), policy.speed * math.sin(heading), 0.0]]
    )


def run_scenario(
    spec: ScenarioSpec,
    model: ModelParams,
    fp: FlightParams,
    arena: ArenaSpec,
    goal: NavGoal | None = None,
    init_spec: InitSpec | None = None,
    log_rate: float | None = None,
) -> ScenarioResult:
    """Execute one scenario deterministically.

    Metrics are sampled at every control boundary; trajectory records (when
    ``log_rate`` is set) at that rate, which must divide the physics rate.
    Raises :class:`ScenarioAborted` (with the partial result attached) if the
    plant diverges.
    """
    goal = goal or NavGoal()
    world = init_world(spec.n_drones, spec.seed, arena, init_spec)
    policy = spec.intruder_policy
    phase = IntruderPhase() if policy else None
    if policy:
        _spawn_intruder(world, arena, policy, spec.seed)

    phys_per_ctrl = fp.steps_per_ctrl
    total_phys = round(spec.duration / fp.dt_phys)
    if abs(total_phys * fp.dt_phys - spec.duration) > 1e-6:
        raise ValueError("duration must be a multiple of dt_phys")
    log_every = 0
    if log_rate is not None:
        log_every = round(1.0 / (log_rate * fp.dt_phys))
        if log_every < 1 or abs(log_every * log_rate * fp.dt_phys - 1.0) > 1e-6:
            raise ValueError("log_rate must divide the physics rate")

    # Telemetry arrives at 1 Hz while control runs at 2 Hz, so the age of the
    # neighbor states seen by the controller sawtooths between the configured
    # staleness and one telemetry refresh older.
    lag_base = round(fp.telemetry_staleness / fp.dt_ctrl)
    snapshots: list[tuple[np.ndarray, np.ndarray]] = []

    n_agents = spec.n_drones
    times, Ps, Ds, minds, alis, atts, intr_d, in_win = ([] for _ in range(8))
    events: list[Event] = []
    windows: list[tuple[float, float | None]] = []
    records: list[LogRecord] = []
    window_open_t: float | None = None
    prev_gains: tuple[float, float] | None = None
    mp = model
    diverged = False

    def emit_records(t: float, ali: float, att: float) -> None:
        for i in range(n_agents):
            records.append(
                LogRecord(
                    time=t,
                    agent_id=i,
                    role="swarm",
                    position=tuple(world.pos[i]),
                    velocity=tuple(world.vel[i]),
                    setpoint=tuple(world.setpoint[i]),
                    gamma_ali=ali,
                    gamma_att=att,
                )
            )
        for m in range(world.n_intruders):
            records.append(
                LogRecord(
                    time=t,
                    agent_id=n_agents + m,
                    role="intruder",
                    position=tuple(world.intruder_pos[m]),
                    velocity=tuple(world.intruder_vel[m]),
                    setpoint=tuple(world.intruder_pos[m]),
                    gamma_ali=ali,
                    gamma_att=att,
                )
            )

    try:
        for n in range(total_phys + 1):
            t = n * fp.dt_phys
            world.time = t
            at_ctrl = n % phys_per_ctrl == 0
            ali, att = spec.schedule.gain_at(t)
            if at_ctrl:
                check_finite(world)
                if (ali, att) != prev_gains:
                    mp = replace(model, gamma_ali=ali, gamma_att=att)
                    events.append(Event(time=t, kind="gain_change", value=ali, value2=att))
                    prev_gains = (ali, att)

                if n < total_phys:
                    if policy:
                        state, phase = intruder_update(
                            world.intruder_states()[0],
                            world.barycenter(),
                            arena,
                            policy,
                            phase,
                            fp.dt_ctrl,
                        )
                        world.intruder_heading[0] = state.heading
                        world.intruder_speed[0] = float(
                            math.hypot(state.velocity[0], state.velocity[1])
                        )
                        world.intruder_vel[0] = state.velocity
                    snapshot = None
                    if lag_base > 0:
                        tick = n // phys_per_ctrl
                        lag = lag_base + (tick % 2)
                        snapshots.append((world.pos.copy(), world.heading.copy()))
                        if len(snapshots) > lag_base + 2:
                            snapshots.pop(0)
                        snapshot = snapshots[max(0, len(snapshots) - 1 - lag)]
                    for i, j in control_tick(world, mp, fp, goal, arena, snapshot):
                        events.append(Event(time=t, kind="collision", a=i, b=j, value=0.0))

                # metrics sample
                speed = np.linalg.norm(world.vel, axis=1)
                valid = speed > 0.0
                if valid.any():
                    units = world.vel[valid] / speed[valid, None]
                    P = float(np.linalg.norm(units.mean(axis=0)))
                else:
                    P = 0.0
                center = world.pos.mean(axis=0)
                D = float(np.sqrt(np.mean(np.sum((world.pos - center) ** 2, axis=1))))
                diff = world.pos[:, None, :] - world.pos[None, :, :]
                dist = np.sqrt(np.sum(diff**2, axis=2))
                np.fill_diagonal(dist, np.inf)
                mind = float(dist.min())

                if policy:
                    d_b = float(np.linalg.norm(world.intruder_pos[0] - center))
                    inside = d_b <= policy.approach_start_distance and phase.phase != "exit"
                else:
                    d_b, inside = float("nan"), False

                if inside and window_open_t is None:
                    window_open_t = t
                    events.append(Event(time=t, kind="intrusion_open", a=0, value=d_b))
                elif not inside and window_open_t is not None:
                    windows.append((window_open_t, t))
                    events.append(Event(time=t, kind="intrusion_close", a=0, value=d_b))
                    window_open_t = None

                times.append(t)
                Ps.append(P)
                Ds.append(D)
                minds.append(mind)
                alis.append(ali)
                atts.append(att)
                intr_d.append(d_b)
                in_win.append(inside)

            if log_every and n % log_every == 0:
                emit_records(t, ali, att)
            if n < total_phys:
                phys_step(world, fp, mp)
    except SimulationDiverged as exc:
        diverged = True
        events.append(Event(time=exc.time, kind="diverged"))
        if window_open_t is not None:
            windows.append((window_open_t, None))
        partial = ScenarioResult(
            spec=spec,
            t=np.array(times),
            P=np.array(Ps),
            D=np.array(Ds),
            min_dist=np.array(minds),
            gamma_ali=np.array(alis),
            gamma_att=np.array(atts),
            intruder_distance=np.array(intr_d),
            in_window=np.array(in_win, dtype=bool),
            events=events,
            windows=windows,
            records=records,
            final_world=world,
            diverged=True,
        )
        raise ScenarioAborted(exc, partial) from exc

    if window_open_t is not None:
        windows.append((window_open_t, None))

    return ScenarioResult(
        spec=spec,
        t=np.array(times),
        P=np.array(Ps),
        D=np.array(Ds),
        min_dist=np.array(minds),
        gamma_ali=np.array(alis),
        gamma_att=np.array(atts),
        intruder_distance=np.array(intr_d),
        in_window=np.array(in_win, dtype=bool),
        events=events,
        windows=windows,
        records=records,
        final_world=world,
        diverged=diverged,
    )
