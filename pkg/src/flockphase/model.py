"""Pairwise interaction rules, influential-neighbor selection, and command
composition.

Every function here is pure and operates on instantaneous state snapshots.
Angles live in (-pi, pi]; the viewing angle ``psi`` of a neighbor is its
bearing in the focal agent's horizontal frame, ``dphi`` is the heading
difference, ``d_z`` the signed vertical offset (neighbor minus focal), and
``d_c`` the vertically weighted pair distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import ArenaSpec, ModelParams, NavGoal

# Pairs closer than this are treated as coincident: they contribute no social
# terms and are reported as collisions.
DEGENERATE_DISTANCE = 1e-9

# Peak of |sin(psi) * (1 + cos(psi))|, reached at psi = pi/3.
_REPULSION_SHAPE_MAX = 3.0 * math.sqrt(3.0) / 4.0


class DegeneratePairError(ValueError):
    """Two agents are coincident; the pair geometry is undefined."""


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = (angle + math.pi) % (2.0 * math.pi) - math.pi
    return math.pi if wrapped == -math.pi else wrapped


def wrap_angles(angles: np.ndarray) -> np.ndarray:
    """Vectorized :func:`wrap_angle`."""
    wrapped = np.remainder(angles + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)


@dataclass
class AgentState:
    """Kinematic state of one drone: position, velocity, and ground-course
    heading (valid whenever the horizontal speed exceeds ``v_min``)."""

    id: int
    position: np.ndarray
    velocity: np.ndarray
    heading: float

    def __post_init__(self) -> None:
        self.position = np.asarray(self.position, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)

    @property
    def speed_h(self) -> float:
        """Horizontal (longitudinal) speed."""
        return float(math.hypot(self.velocity[0], self.velocity[1]))


@dataclass
class PairGeometry:
    """Relative state of a directed pair: viewing angle, heading difference,
    signed vertical offset, and weighted distance."""

    psi: float
    dphi: float
    d_z: float
    d_c: float


@dataclass
class CommandDelta:
    """Per-tick command increments: longitudinal speed, vertical speed, and
    heading."""

    d_speed: float = 0.0
    d_vz: float = 0.0
    d_heading: float = 0.0


@dataclass
class InfluenceScore:
    """Ranking entry for one neighbor: the norm of its pairwise contributions."""

    neighbor_id: int
    score: float
    contributions: tuple[float, float, float]  # (d_speed, d_vz, d_heading)


def pair_geometry(i: AgentState, j: AgentState, sigma_z: float) -> PairGeometry:
    """Relative geometry of neighbor ``j`` as seen from ``i``.

    Raises :class:`DegeneratePairError` when the two agents are coincident;
    the caller substitutes zero social terms and flags a collision.
    """
    dx = float(j.position[0] - i.position[0])
    dy = float(j.position[1] - i.position[1])
    dz = float(j.position[2] - i.position[2])
    d_c = math.sqrt(dx * dx + dy * dy + (dz / sigma_z) ** 2)
    if d_c < DEGENERATE_DISTANCE:
        raise DegeneratePairError(f"agents {i.id} and {j.id} are coincident")
    psi = wrap_angle(math.atan2(dy, dx) - i.heading)
    dphi = wrap_angle(j.heading - i.heading)
    return PairGeometry(psi=psi, dphi=dphi, d_z=dz, d_c=d_c)


def speed_interaction(g: PairGeometry, p: ModelParams) -> float:
    """Longitudinal speed increment from one neighbor: positive (speed up)
    off a neighbor ahead inside the speed equilibrium distance, negative
    beyond it; mirrored for neighbors behind."""
    return (
        p.gamma_acc
        * math.cos(g.psi)
        * (p.d0_v - g.d_c)
        / (1.0 + g.d_c / p.l_acc)
    )


def vertical_interaction(g: PairGeometry, p: ModelParams) -> float:
    """Vertical speed increment from one neighbor.

    Restores the vertical separation toward ``d0_z``: repels when the pair is
    vertically closer than the equilibrium separation (away from downwash),
    attracts when farther, and vanishes at co-altitude where no direction is
    preferred. Gated by a Gaussian of the weighted distance.
    """
    magnitude = math.tanh((abs(g.d_z) - p.d0_z) / p.a_z)
    direction = math.copysign(1.0, g.d_z) if g.d_z != 0.0 else 0.0
    return p.gamma_z * magnitude * direction * math.exp(-((g.d_c / p.l_z) ** 2))


def alignment_turn(g: PairGeometry, p: ModelParams) -> float:
    """Heading increment aligning the focal agent with one neighbor."""
    return (
        p.gamma_ali
        * math.sin(g.dphi)
        * (1.0 + p.alpha_ali * math.cos(g.psi))
        * (g.d_c + p.d0_ali)
        * math.exp(-((g.d_c / p.l_ali) ** 2))
    )


def attraction_turn(g: PairGeometry, p: ModelParams) -> float:
    """Heading increment turning toward (or, inside ``d0_att``, away from)
    one neighbor."""
    return (
        p.gamma_att
        * math.sin(g.psi)
        * (1.0 - p.alpha_att * math.cos(g.psi))
        * (g.d_c - p.d0_att)
        / (1.0 + (g.d_c / p.l_att) ** 2)
    )


def pair_influence(contribs: tuple[float, float, float], v_i: float) -> float:
    """Influence score of one neighbor: the norm of its contributions, with
    the heading term scaled by the focal speed ``v_i`` (caller clamps to
    ``v_min``)."""
    d_speed, d_vz, d_heading = contribs
    return math.sqrt(d_speed**2 + d_vz**2 + (d_heading * v_i) ** 2)


def nav_vertical(z: float, goal: NavGoal, p: ModelParams) -> float:
    """Vertical increment restoring the agent toward the target altitude."""
    return -p.gamma_perp * math.tanh((z - goal.z_alt) / p.a_z)


def nav_heading(phi: float, goal: NavGoal, p: ModelParams) -> float:
    """Heading increment toward the goal direction; zero when no direction
    is set (the free-flight configuration)."""
    if goal.heading_goal is None:
        return 0.0
    return p.gamma_nav * math.sin(goal.heading_goal - phi)


def intruder_turn(g_ik: PairGeometry, p: ModelParams) -> float:
    """Heading increment turning away from an intruder at geometry ``g_ik``."""
    return (
        -p.gamma_rep
        * math.sin(g_ik.psi)
        * (1.0 + math.cos(g_ik.psi))
        * math.exp(-((g_ik.d_c / p.l_rep) ** 2))
    )


def intruder_vertical(g_ik: PairGeometry, p: ModelParams) -> float:
    """Vertical increment escaping an intruder: climb when above it, descend
    when below. ``g_ik.d_z`` is intruder-minus-focal, so the escape offset is
    its negation."""
    return (
        p.gamma_z
        * math.tanh(-g_ik.d_z / p.a_z)
        * math.exp(-((g_ik.d_c / p.l_z) ** 2))
    )


def vertical_damping(v_z: float, v: float, p: ModelParams) -> float:
    """Damping of the vertical speed, normalized by the longitudinal speed
    (floored at ``v_min``); the argument saturates at +/- pi/2."""
    arg = v_z / max(v, p.v_min)
    arg = max(-math.pi / 2.0, min(math.pi / 2.0, arg))
    return -p.gamma_par * math.sin(arg)


def border_terms(state: AgentState, arena: ArenaSpec) -> tuple[float, float]:
    """Fence interaction: a repulsive heading increment away from the nearest
    boundary point, and an attenuation factor in [0, 1] applied to the
    alignment and attraction terms (1 far from the fence, 0 at it).

    Outside the arena the repulsion turns the agent straight toward the
    center at the peak magnitude of the repulsion shape, and social steering
    is fully attenuated.
    """
    rx = float(state.position[0]) - arena.center[0]
    ry = float(state.position[1]) - arena.center[1]
    r = math.hypot(rx, ry)
    d_wall = arena.radius - r
    if d_wall < 0.0:
        psi_center = wrap_angle(math.atan2(-ry, -rx) - state.heading)
        turn = math.copysign(1.0, psi_center) if psi_center != 0.0 else 0.0
        return arena.wall_gain * _REPULSION_SHAPE_MAX * turn, 0.0
    gauss = math.exp(-((d_wall / arena.wall_range) ** 2))
    attenuation = 1.0 - gauss
    if r == 0.0:
        return 0.0, attenuation
    psi_wall = wrap_angle(math.atan2(ry, rx) - state.heading)
    repulsion = -arena.wall_gain * math.sin(psi_wall) * (1.0 + math.cos(psi_wall)) * gauss
    return repulsion, attenuation


def _ranked_pairs(
    focal: AgentState,
    others: list[AgentState],
    p: ModelParams,
    attenuation: float,
) -> tuple[list[InfluenceScore], list[float], list[int]]:
    """Pairwise terms for all valid neighbors, ranked by descending influence
    with ties broken by smaller weighted distance, then smaller id.

    Returns the ranked scores, their weighted distances, and the ids of
    degenerate (coincident) neighbors.
    """
    v_eff = max(focal.speed_h, p.v_min)
    entries: list[tuple[float, float, int, InfluenceScore]] = []
    degenerate: list[int] = []
    for other in others:
        try:
            g = pair_geometry(focal, other, p.sigma_z)
        except DegeneratePairError:
            degenerate.append(other.id)
            continue
        d_speed = speed_interaction(g, p)
        d_vz = vertical_interaction(g, p)
        d_heading = attenuation * (alignment_turn(g, p) + attraction_turn(g, p))
        score = pair_influence((d_speed, d_vz, d_heading), v_eff)
        entry = InfluenceScore(other.id, score, (d_speed, d_vz, d_heading))
        entries.append((-score, g.d_c, other.id, entry))
    entries.sort(key=lambda e: (e[0], e[1], e[2]))
    return [e[3] for e in entries], [e[1] for e in entries], degenerate


def select_influential(
    focal: AgentState, others: list[AgentState], p: ModelParams
) -> list[int]:
    """Ids of the ``k_neighbors`` most influential neighbors of ``focal``
    (all of them when fewer exist)."""
    ranked, _, _ = _ranked_pairs(focal, others, p, attenuation=1.0)
    return [entry.neighbor_id for entry in ranked[: p.k_neighbors]]


def compose_command(
    focal: AgentState,
    swarm: list[AgentState],
    intruders: list[AgentState],
    goal: NavGoal,
    arena: ArenaSpec,
    p: ModelParams,
) -> CommandDelta:
    """Full command increment for one agent from a synchronous snapshot.

    Social terms are summed over the influential neighbors (fence attenuation
    applied to the alignment/attraction part before ranking), then navigation,
    vertical damping, intruder avoidance, and fence repulsion are added. The
    composed sums are scaled by ``command_gain`` (the raw pairwise magnitudes
    reach several radians per tick at field distances, which the discrete
    update cannot track stably), then the heading increment is clamped to
    ``+/- dphi_max`` and the speed increments are clamped so the commanded
    speeds stay within bounds. A lone agent may be commanded to hover; with
    neighbors present the floor is the ``v_min`` cruise speed.
    """
    wall_turn, attenuation = border_terms(focal, arena)
    ranked, _, _ = _ranked_pairs(focal, swarm, p, attenuation)
    selected = ranked[: p.k_neighbors]

    d_speed = sum(entry.contributions[0] for entry in selected)
    d_vz = sum(entry.contributions[1] for entry in selected)
    d_heading = sum(entry.contributions[2] for entry in selected)

    v_h = focal.speed_h
    v_z = float(focal.velocity[2])
    z = float(focal.position[2])

    d_vz += vertical_damping(v_z, v_h, p)
    d_vz += nav_vertical(z, goal, p)
    d_heading += nav_heading(focal.heading, goal, p)
    d_heading += wall_turn

    for intruder in intruders:
        try:
            g_ik = pair_geometry(focal, intruder, p.sigma_z)
        except DegeneratePairError:
            continue
        d_heading += intruder_turn(g_ik, p)
        d_vz += intruder_vertical(g_ik, p)

    d_speed *= p.command_gain
    d_vz *= p.command_gain
    d_heading *= p.command_gain
    d_heading = max(-p.dphi_max, min(p.dphi_max, d_heading))
    floor = p.v_min if swarm else 0.0
    d_speed = min(max(v_h + d_speed, floor), p.v_max) - v_h
    d_vz = min(max(v_z + d_vz, -p.vz_max), p.vz_max) - v_z
    return CommandDelta(d_speed=d_speed, d_vz=d_vz, d_heading=d_heading)


def _border_arrays(
    pos: np.ndarray, heading: np.ndarray, arena: ArenaSpec
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`border_terms` over all agents."""
    rx = pos[:, 0] - arena.center[0]
    ry = pos[:, 1] - arena.center[1]
    r = np.hypot(rx, ry)
    d_wall = arena.radius - r
    gauss = np.exp(-((np.maximum(d_wall, 0.0) / arena.wall_range) ** 2))
    attenuation = np.where(d_wall < 0.0, 0.0, 1.0 - gauss)

    psi_wall = wrap_angles(np.arctan2(ry, rx) - heading)
    inside = -arena.wall_gain * np.sin(psi_wall) * (1.0 + np.cos(psi_wall)) * gauss
    inside = np.where(r == 0.0, 0.0, inside)
    psi_center = wrap_angles(np.arctan2(-ry, -rx) - heading)
    outside = arena.wall_gain * _REPULSION_SHAPE_MAX * np.sign(psi_center)
    turn = np.where(d_wall < 0.0, outside, inside)
    return turn, attenuation


def compose_commands_batch(
    pos: np.ndarray,
    vel: np.ndarray,
    heading: np.ndarray,
    intruder_pos: np.ndarray,
    goal: NavGoal,
    arena: ArenaSpec,
    p: ModelParams,
    neighbor_pos: np.ndarray | None = None,
    neighbor_vel: np.ndarray | None = None,
    neighbor_heading: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[tuple[int, int]]]:
    """Command increments for every agent at once; the array analogue of
    :func:`compose_command` used by the stepping engine.

    ``neighbor_*`` optionally supply the (possibly stale) states other agents
    are seen at; own state is always current. Returns ``(d_speed, d_vz,
    d_heading, collisions)`` where collisions lists coincident pairs (i < j).
    """
    n = pos.shape[0]
    if neighbor_pos is None:
        neighbor_pos, neighbor_heading = pos, heading

    dx = neighbor_pos[None, :, 0] - pos[:, None, 0]
    dy = neighbor_pos[None, :, 1] - pos[:, None, 1]
    dz = neighbor_pos[None, :, 2] - pos[:, None, 2]
    d_c = np.sqrt(dx * dx + dy * dy + (dz / p.sigma_z) ** 2)
    psi = wrap_angles(np.arctan2(dy, dx) - heading[:, None])
    dphi = wrap_angles(neighbor_heading[None, :] - heading[:, None])
    cos_psi = np.cos(psi)
    sin_psi = np.sin(psi)

    dv_pair = p.gamma_acc * cos_psi * (p.d0_v - d_c) / (1.0 + d_c / p.l_acc)
    dvz_pair = (
        p.gamma_z
        * np.tanh((np.abs(dz) - p.d0_z) / p.a_z)
        * np.sign(dz)
        * np.exp(-((d_c / p.l_z) ** 2))
    )
    ali = (
        p.gamma_ali
        * np.sin(dphi)
        * (1.0 + p.alpha_ali * cos_psi)
        * (d_c + p.d0_ali)
        * np.exp(-((d_c / p.l_ali) ** 2))
    )
    att = (
        p.gamma_att
        * sin_psi
        * (1.0 - p.alpha_att * cos_psi)
        * (d_c - p.d0_att)
        / (1.0 + (d_c / p.l_att) ** 2)
    )

    wall_turn, attenuation = _border_arrays(pos, heading, arena)
    turn_pair = attenuation[:, None] * (ali + att)

    speed_h = np.hypot(vel[:, 0], vel[:, 1])
    v_eff = np.maximum(speed_h, p.v_min)
    score = np.sqrt(dv_pair**2 + dvz_pair**2 + (turn_pair * v_eff[:, None]) ** 2)

    invalid = np.eye(n, dtype=bool)
    degenerate = (d_c < DEGENERATE_DISTANCE) & ~invalid
    collisions = [(int(a), int(b)) for a, b in np.argwhere(degenerate) if a < b]
    invalid |= degenerate

    score = np.where(invalid, -np.inf, score)
    d_c_key = np.where(invalid, np.inf, d_c)
    ids = np.broadcast_to(np.arange(n), (n, n))
    order = np.lexsort((ids, d_c_key, -score), axis=-1)

    k = p.k_neighbors
    n_valid = (~invalid).sum(axis=1)
    take = order[:, :k]
    chosen = np.arange(k)[None, :] < np.minimum(n_valid, k)[:, None]

    def _gather(values: np.ndarray) -> np.ndarray:
        return np.where(chosen, np.take_along_axis(values, take, axis=1), 0.0).sum(axis=1)

    d_speed = _gather(dv_pair)
    d_vz = _gather(dvz_pair)
    d_heading = _gather(turn_pair)

    arg = np.clip(vel[:, 2] / v_eff, -np.pi / 2.0, np.pi / 2.0)
    d_vz = d_vz - p.gamma_par * np.sin(arg)
    d_vz = d_vz - p.gamma_perp * np.tanh((pos[:, 2] - goal.z_alt) / p.a_z)
    if goal.heading_goal is not None:
        d_heading = d_heading + p.gamma_nav * np.sin(goal.heading_goal - heading)
    d_heading = d_heading + wall_turn

    for m in range(intruder_pos.shape[0]):
        ix = intruder_pos[m, 0] - pos[:, 0]
        iy = intruder_pos[m, 1] - pos[:, 1]
        iz = intruder_pos[m, 2] - pos[:, 2]
        d_ik = np.sqrt(ix * ix + iy * iy + (iz / p.sigma_z) ** 2)
        psi_k = wrap_angles(np.arctan2(iy, ix) - heading)
        d_heading = d_heading - p.gamma_rep * np.sin(psi_k) * (1.0 + np.cos(psi_k)) * np.exp(
            -((d_ik / p.l_rep) ** 2)
        )
        d_vz = d_vz + p.gamma_z * np.tanh(-iz / p.a_z) * np.exp(-((d_ik / p.l_z) ** 2))

    d_speed = d_speed * p.command_gain
    d_vz = d_vz * p.command_gain
    d_heading = d_heading * p.command_gain
    d_heading = np.clip(d_heading, -p.dphi_max, p.dphi_max)
    floor = p.v_min if n >= 2 else 0.0
    d_speed = np.clip(speed_h + d_speed, floor, p.v_max) - speed_h
    d_vz = np.clip(vel[:, 2] + d_vz, -p.vz_max, p.vz_max) - vel[:, 2]
    return d_speed, d_vz, d_heading, collisions
