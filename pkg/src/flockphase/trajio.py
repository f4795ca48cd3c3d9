"""Trajectory/event log formats and the trajectory preprocessing pipeline:
resampling on a common grid with a C1 local-cubic interpolant, analytic
differentiation, and zero-lag polynomial smoothing.

Files are plain delimited text: comment-prefixed header lines (schema version,
config hash, seed, clamps), a column line, then one record per line with
floats at 9 significant digits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import Akima1DInterpolator
from scipy.signal import savgol_coeffs, savgol_filter

TRAJ_SCHEMA = "flockphase-traj v1"
EVENTS_SCHEMA = "flockphase-events v1"

TRAJ_COLUMNS = (
    "time", "agent_id", "role",
    "x", "y", "z", "vx", "vy", "vz",
    "sp_x", "sp_y", "sp_z",
    "gamma_ali", "gamma_att",
)
EVENT_COLUMNS = ("time", "kind", "a", "b", "value", "value2")

ROLES = ("swarm", "intruder")


class LogParseError(ValueError):
    """A log file violates the schema; carries the offending line number."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.line_no = line_no


@dataclass
class LogRecord:
    """One trajectory sample of one agent."""

    time: float
    agent_id: int
    role: str
    position: tuple[float, float, float]
    velocity: tuple[float, float, float]
    setpoint: tuple[float, float, float]
    gamma_ali: float
    gamma_att: float


@dataclass
class Event:
    """One structured entry of a run's event sidecar."""

    time: float
    kind: str          # gain_change | intrusion_open | intrusion_close | collision | diverged
    a: int | None = None
    b: int | None = None
    value: float | None = None
    value2: float | None = None


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def _write_header(fh, schema: str, header: dict | None, columns) -> None:
    fh.write(f"# {schema}\n")
    for key in sorted(header or {}):
        fh.write(f"# {key}: {header[key]}\n")
    fh.write("# columns: " + ",".join(columns) + "\n")


def _read_header(path, lines, schema: str, columns) -> tuple[dict, int]:
    if not lines or lines[0].strip() != f"# {schema}":
        raise LogParseError(path, 1, f"expected schema line '# {schema}'")
    header: dict[str, str] = {}
    i = 1
    while i < len(lines) and lines[i].startswith("#"):
        body = lines[i][1:].strip()
        if body.startswith("columns:"):
            got = tuple(c.strip() for c in body[len("columns:"):].split(","))
            missing = [c for c in columns if c not in got]
            if missing:
                raise LogParseError(path, i + 1, f"missing column '{missing[0]}'")
            if got != tuple(columns):
                raise LogParseError(path, i + 1, "unexpected column order")
            return header, i + 1
        if ":" in body:
            key, _, value = body.partition(":")
            header[key.strip()] = value.strip()
        i += 1
    raise LogParseError(path, i, "missing columns line")


def write_log(path, records: list[LogRecord], header: dict | None = None) -> None:
    """Write a trajectory log; records are stored in the given order."""
    path = Path(path)
    with path.open("w") as fh:
        _write_header(fh, TRAJ_SCHEMA, header, TRAJ_COLUMNS)
        for r in records:
            fields = (
                _fmt(r.time), str(r.agent_id), r.role,
                _fmt(r.position[0]), _fmt(r.position[1]), _fmt(r.position[2]),
                _fmt(r.velocity[0]), _fmt(r.velocity[1]), _fmt(r.velocity[2]),
                _fmt(r.setpoint[0]), _fmt(r.setpoint[1]), _fmt(r.setpoint[2]),
                _fmt(r.gamma_ali), _fmt(r.gamma_att),
            )
            fh.write(",".join(fields) + "\n")


def read_log(path) -> tuple[list[LogRecord], dict]:
    """Read a trajectory log, validating schema, roles, and per-agent time
    monotonicity. Returns (records, header)."""
    path = Path(path)
    lines = path.read_text().splitlines()
    header, first = _read_header(path, lines, TRAJ_SCHEMA, TRAJ_COLUMNS)
    records: list[LogRecord] = []
    last_time: dict[int, float] = {}
    roles: dict[int, str] = {}
    for line_no in range(first, len(lines)):
        line = lines[line_no].strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(TRAJ_COLUMNS):
            raise LogParseError(
                path, line_no + 1,
                f"expected {len(TRAJ_COLUMNS)} fields, got {len(parts)}",
            )
        try:
            t = float(parts[0])
            agent_id = int(parts[1])
            role = parts[2]
            values = [float(v) for v in parts[3:]]
        except ValueError as exc:
            raise LogParseError(path, line_no + 1, str(exc)) from exc
        if role not in ROLES:
            raise LogParseError(path, line_no + 1, f"unknown role {role!r}")
        if agent_id in last_time and t <= last_time[agent_id]:
            raise LogParseError(
                path, line_no + 1, f"non-monotone time for agent {agent_id}"
            )
        if roles.setdefault(agent_id, role) != role:
            raise LogParseError(
                path, line_no + 1, f"role changed for agent {agent_id}"
            )
        last_time[agent_id] = t
        records.append(
            LogRecord(
                time=t,
                agent_id=agent_id,
                role=role,
                position=tuple(values[0:3]),
                velocity=tuple(values[3:6]),
                setpoint=tuple(values[6:9]),
                gamma_ali=values[9],
                gamma_att=values[10],
            )
        )
    return records, header


def _fmt_opt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return _fmt(value)


def write_events(path, events: list[Event], header: dict | None = None) -> None:
    """Write the structured event sidecar."""
    path = Path(path)
    with path.open("w") as fh:
        _write_header(fh, EVENTS_SCHEMA, header, EVENT_COLUMNS)
        for e in events:
            fh.write(
                ",".join(
                    (
                        _fmt(e.time), e.kind,
                        "" if e.a is None else str(e.a),
                        "" if e.b is None else str(e.b),
                        _fmt_opt(e.value), _fmt_opt(e.value2),
                    )
                )
                + "\n"
            )


def read_events(path) -> tuple[list[Event], dict]:
    path = Path(path)
    lines = path.read_text().splitlines()
    header, first = _read_header(path, lines, EVENTS_SCHEMA, EVENT_COLUMNS)
    events: list[Event] = []
    for line_no in range(first, len(lines)):
        line = lines[line_no].strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(EVENT_COLUMNS):
            raise LogParseError(path, line_no + 1, "bad event row")
        events.append(
            Event(
                time=float(parts[0]),
                kind=parts[1],
                a=int(parts[2]) if parts[2] else None,
                b=int(parts[3]) if parts[3] else None,
                value=float(parts[4]) if parts[4] else None,
                value2=float(parts[5]) if parts[5] else None,
            )
        )
    return events, header


@dataclass
class ResampleSpec:
    """Target rate and optional smoothing of the preprocessing pipeline."""

    rate: float = 10.0
    smooth_window: int = 0     # odd sample count; 0 disables smoothing
    smooth_degree: int = 2

    def __post_init__(self) -> None:
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        if self.smooth_window:
            if self.smooth_window % 2 == 0 or self.smooth_window < 3:
                raise ValueError("smooth_window must be odd and >= 3")
            if not 0 <= self.smooth_degree < self.smooth_window:
                raise ValueError("smooth_degree must be < smooth_window")


class Resampled:
    """A series resampled onto a uniform grid, carrying its interpolant so
    velocities come from analytic differentiation rather than finite
    differences."""

    def __init__(self, t: np.ndarray, values: np.ndarray, grid: np.ndarray):
        self._interp = Akima1DInterpolator(t, values, axis=0)
        self._deriv = self._interp.derivative()
        self.t = grid
        self.values = np.asarray(self._interp(grid), dtype=float)

    def derivative(self) -> np.ndarray:
        return np.asarray(self._deriv(self.t), dtype=float)


def _validate_knots(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.size < 5:
        raise ValueError("resampling needs at least 5 samples")
    dt = np.diff(t)
    if (dt <= 0).any():
        if (dt == 0).any():
            raise ValueError("duplicate timestamps")
        raise ValueError("timestamps must be increasing")
    return t


def make_grid(t_start: float, t_end: float, rate: float) -> np.ndarray:
    """Uniform grid at ``rate`` covering [t_start, t_end]."""
    count = int(math.floor((t_end - t_start) * rate + 1e-9)) + 1
    return t_start + np.arange(count) / rate


def resample(
    t: np.ndarray, values: np.ndarray, spec: ResampleSpec, grid: np.ndarray | None = None
) -> Resampled:
    """Resample a series onto a uniform grid with a C1 interpolant passing
    through every input sample."""
    t = _validate_knots(t)
    if grid is None:
        grid = make_grid(float(t[0]), float(t[-1]), spec.rate)
    return Resampled(t, np.asarray(values, dtype=float), grid)


def differentiate(resampled: Resampled) -> np.ndarray:
    """Analytic derivative of the interpolant on the resampled grid."""
    return resampled.derivative()


def smooth(values: np.ndarray, spec: ResampleSpec) -> np.ndarray:
    """Zero-lag local least-squares polynomial smoothing.

    Interior samples use the full symmetric window; endpoints shrink the
    window symmetrically (the fit degree drops only where the window becomes
    too short to support it).
    """
    y = np.asarray(values, dtype=float)
    w, d = spec.smooth_window, spec.smooth_degree
    if not w:
        return y.copy()
    n = y.shape[0]
    if w > n:
        raise ValueError("smooth_window exceeds the series length")
    out = savgol_filter(y, w, d, axis=0, mode="interp")
    half = w // 2
    for idx in list(range(half)) + list(range(n - half, n)):
        h = min(idx, n - 1 - idx)
        if h == 0:
            out[idx] = y[idx]
            continue
        window = 2 * h + 1
        coeffs = savgol_coeffs(window, min(d, window - 1), use="dot")
        out[idx] = coeffs @ y[idx - h: idx + h + 1]
    return out


def synchronize(
    tracks: dict, rate: float
) -> tuple[np.ndarray, dict[object, Resampled]]:
    """Resample several (t, values) tracks onto one grid covering the
    intersection of their time ranges."""
    if not tracks:
        raise ValueError("no tracks to synchronize")
    spec = ResampleSpec(rate=rate)
    cleaned = {key: (_validate_knots(t), np.asarray(v, float)) for key, (t, v) in tracks.items()}
    start = max(float(t[0]) for t, _ in cleaned.values())
    end = min(float(t[-1]) for t, _ in cleaned.values())
    if end < start:
        raise ValueError("tracks do not overlap in time")
    grid = make_grid(start, end, rate)
    return grid, {key: Resampled(t, v, grid) for key, (t, v) in cleaned.items()}


def records_to_tracks(records: list[LogRecord]) -> dict[int, dict]:
    """Group log records per agent into time-ordered arrays."""
    by_agent: dict[int, dict] = {}
    for r in records:
        entry = by_agent.setdefault(
            r.agent_id,
            {"role": r.role, "t": [], "pos": [], "vel": [], "gamma_ali": [], "gamma_att": []},
        )
        entry["t"].append(r.time)
        entry["pos"].append(r.position)
        entry["vel"].append(r.velocity)
        entry["gamma_ali"].append(r.gamma_ali)
        entry["gamma_att"].append(r.gamma_att)
    for entry in by_agent.values():
        for key in ("t", "pos", "vel", "gamma_ali", "gamma_att"):
            entry[key] = np.asarray(entry[key], dtype=float)
    return by_agent
