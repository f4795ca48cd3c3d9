"""Order parameters and response statistics: polarization, dispersion,
minimal inter-agent distance, susceptibility, and transition/recovery timing.

All functions are pure and operate on plain arrays; series are assumed to be
sampled on a uniform time grid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np


@dataclass
class MetricsSample:
    """Swarm-level indicators at one instant."""

    time: float
    polarization: float
    dispersion: float
    min_distance: float


@dataclass
class SegmentStats:
    """Aggregates over one fixed-gain window after transient removal."""

    gamma_ali: float
    gamma_att: float
    mean_P: float
    std_P: float
    chi_P: float
    mean_D: float
    std_D: float
    mean_mindist: float
    n_samples: int
    window: tuple[float, float]


def polarization(velocities: np.ndarray) -> float:
    """Norm of the mean 3D unit-velocity vector, in [0, 1].

    Agents with zero speed carry no direction and are excluded; an empty set
    yields 0.
    """
    v = np.asarray(velocities, dtype=float)
    speed = np.linalg.norm(v, axis=1)
    valid = speed > 0.0
    if not valid.any():
        return 0.0
    units = v[valid] / speed[valid, None]
    return float(np.linalg.norm(units.mean(axis=0)))


def dispersion(positions: np.ndarray) -> float:
    """Root-mean-square distance of the agents from their barycenter."""
    u = np.asarray(positions, dtype=float)
    center = u.mean(axis=0)
    return float(np.sqrt(np.mean(np.sum((u - center) ** 2, axis=1))))


def min_distance(positions: np.ndarray) -> float:
    """Minimum pairwise 3D Euclidean distance (unweighted)."""
    u = np.asarray(positions, dtype=float)
    if u.shape[0] < 2:
        raise ValueError("min_distance needs at least 2 agents")
    diff = u[:, None, :] - u[None, :, :]
    dist = np.sqrt(np.sum(diff**2, axis=2))
    np.fill_diagonal(dist, np.inf)
    return float(dist.min())


def susceptibility(p_series: np.ndarray, n_agents: int) -> float:
    """Alignment susceptibility: ``N`` times the population variance of the
    polarization over the window."""
    p = np.asarray(p_series, dtype=float)
    if p.size < 2:
        raise ValueError("susceptibility needs at least 2 samples")
    return float(n_agents * p.var())


def random_baseline(n_agents: int) -> float:
    """Expected polarization of ``n_agents`` independently oriented agents:
    ``0.5 * sqrt(pi / N)``."""
    if n_agents < 1:
        raise ValueError("n_agents must be >= 1")
    return 0.5 * math.sqrt(math.pi / n_agents)


def _window_stats(
    t: np.ndarray,
    P: np.ndarray,
    D: np.ndarray,
    mind: np.ndarray,
    n_agents: int,
    gamma_ali: float,
    gamma_att: float,
    window: tuple[float, float],
) -> SegmentStats:
    return SegmentStats(
        gamma_ali=gamma_ali,
        gamma_att=gamma_att,
        mean_P=float(P.mean()),
        std_P=float(P.std()),
        chi_P=float(n_agents * P.var()),
        mean_D=float(D.mean()),
        std_D=float(D.std()),
        mean_mindist=float(mind.mean()),
        n_samples=int(P.size),
        window=window,
    )


def segment_stats(
    t: np.ndarray,
    P: np.ndarray,
    D: np.ndarray,
    mind: np.ndarray,
    schedule,
    n_agents: int,
    transient_cut: float = 10.0,
) -> list[SegmentStats]:
    """Per-segment aggregates of a metrics series under a gain schedule.

    The first ``transient_cut`` seconds of each fixed-gain segment are
    dropped; segments shorter than the cut are skipped with a warning.
    The final segment includes its right endpoint.
    """
    t = np.asarray(t, dtype=float)
    out: list[SegmentStats] = []
    eps = 1e-9
    start = float(t[0]) if t.size else 0.0
    boundaries = schedule.boundaries(offset=start)
    for idx, (t0, t1, gamma_ali, gamma_att) in enumerate(boundaries):
        last = idx == len(boundaries) - 1
        lo = t0 + transient_cut
        if last:
            mask = (t >= lo - eps) & (t <= t1 + eps)
        else:
            mask = (t >= lo - eps) & (t < t1 - eps)
        if not mask.any():
            warnings.warn(
                f"segment [{t0:g}, {t1:g}]s has no samples after the "
                f"{transient_cut:g}s transient cut; skipped",
                stacklevel=2,
            )
            continue
        out.append(
            _window_stats(
                t[mask], P[mask], D[mask], mind[mask],
                n_agents, gamma_ali, gamma_att, (lo, float(t1)),
            )
        )
    return out


def _sustained_crossing(
    t: np.ndarray,
    ok: np.ndarray,
    start_index: int,
    sustain: float,
) -> float | None:
    """First time from ``start_index`` where ``ok`` holds continuously for
    ``sustain`` seconds (inclusive window); None when never confirmed."""
    n = t.size
    if n < 2:
        return None
    dt = float(t[1] - t[0])
    need = int(math.floor(sustain / dt + 1e-9)) + 1
    run = 0
    runs = np.zeros(n, dtype=int)
    for i in range(n - 1, -1, -1):
        run = run + 1 if ok[i] else 0
        runs[i] = run
    for i in range(start_index, n):
        if runs[i] >= need and t[i] + sustain <= t[-1] + 1e-9:
            return float(t[i])
    return None


def transition_time(
    t: np.ndarray,
    P: np.ndarray,
    t_switch: float,
    direction: str,
    n_agents: int,
    school_threshold: float = 0.8,
    swarm_margin: float = 0.15,
    sustain: float = 2.0,
) -> float | None:
    """Elapsed time from a gain switch until the target state is reached.

    ``direction`` is ``"to_school"`` (polarization >= 0.8 sustained) or
    ``"to_swarm"`` (polarization <= random baseline + margin sustained).
    Returns None when the series never confirms the state.
    """
    t = np.asarray(t, dtype=float)
    P = np.asarray(P, dtype=float)
    if direction == "to_school":
        ok = P >= school_threshold
    elif direction == "to_swarm":
        ok = P <= random_baseline(n_agents) + swarm_margin
    else:
        raise ValueError(f"unknown direction {direction!r}")
    start_index = int(np.searchsorted(t, t_switch - 1e-9))
    crossing = _sustained_crossing(t, ok, start_index, sustain)
    if crossing is None:
        return None
    return crossing - t_switch


def recovery_time(
    t: np.ndarray,
    P: np.ndarray,
    window: tuple[float, float],
    baseline_window: float = 10.0,
    recovery_fraction: float = 0.8,
    sustain: float = 2.0,
) -> float | None:
    """Elapsed time from an intrusion-window close until the polarization
    regains ``recovery_fraction`` of its pre-intrusion mean, sustained.

    The reference level is the mean polarization over the ``baseline_window``
    seconds preceding the window opening. Returns None when the series never
    recovers (or carries no pre-intrusion samples).
    """
    t = np.asarray(t, dtype=float)
    P = np.asarray(P, dtype=float)
    t_open, t_close = window
    base_mask = (t >= t_open - baseline_window - 1e-9) & (t < t_open - 1e-9)
    if not base_mask.any():
        return None
    threshold = recovery_fraction * float(P[base_mask].mean())
    ok = P >= threshold
    start_index = int(np.searchsorted(t, t_close - 1e-9))
    crossing = _sustained_crossing(t, ok, start_index, sustain)
    if crossing is None:
        return None
    return crossing - t_close
