"""Deterministic 3D drone-swarm flocking simulator and analysis toolkit.

A swarm of first-order-lag drones steers by pairwise alignment/attraction
rules toward a small set of influential neighbors; scenarios sweep the gains
to map swarming/schooling phases, probe switching dynamics, and quantify
intruder response.
"""

from .params import (
    ArenaSpec,
    FlightParams,
    InitSpec,
    ModelParams,
    NavGoal,
    ParameterError,
)
from .model import (
    AgentState,
    CommandDelta,
    DegeneratePairError,
    InfluenceScore,
    PairGeometry,
    alignment_turn,
    attraction_turn,
    border_terms,
    compose_command,
    intruder_turn,
    intruder_vertical,
    nav_heading,
    nav_vertical,
    pair_geometry,
    pair_influence,
    select_influential,
    speed_interaction,
    vertical_damping,
    vertical_interaction,
    wrap_angle,
)
from .dynamics import (
    SimulationDiverged,
    World,
    command_to_setpoint,
    init_world,
    relax_step,
    step_world,
)
from .scenarios import (
    GainSchedule,
    IntruderPhase,
    IntruderPolicy,
    ScenarioAborted,
    ScenarioResult,
    ScenarioSpec,
    intruder_update,
    make_baseline,
    make_intruder,
    make_switching,
    run_scenario,
)
from .metrics import (
    MetricsSample,
    SegmentStats,
    dispersion,
    min_distance,
    polarization,
    random_baseline,
    recovery_time,
    segment_stats,
    susceptibility,
    transition_time,
)
from .trajio import (
    Event,
    LogParseError,
    LogRecord,
    ResampleSpec,
    Resampled,
    differentiate,
    read_events,
    read_log,
    resample,
    smooth,
    synchronize,
    write_events,
    write_log,
)
from .sweep import CellResult, SweepSpec, emit_tables, expand_grid, run_sweep

__version__ = "0.1.0"
