"""File formats and dataset assembly.

Robot config: flat key = value text, one entry per line, '#' comments.
Lengths mm, moduli MPa, areas mm^4.  Optional rigid transforms T_WB
(base in world), T_BI (image in base) and T_GM (marker offset) are given
as 12 numbers, row-major 3x4.

Trajectory CSV: optional '# key=value' pragma lines, then a header
't,q_s,theta,delta,x,y[,z]' and data rows.  Angles are stored in degrees
in files and converted to radians at this boundary; all other numbers
pass through verbatim with 17 significant digits, so write/read
round-trips are lossless.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import butter, filtfilt

from .errors import (
    FrameError,
    InvalidCutoff,
    ParseError,
    ValidationError,
)
from .calibration import Measurement
from .kinematics import micro_trajectory
from .model import ConfigState, RobotParams, UncertaintyParams

_REQUIRED_KEYS = ("L", "r", "E_p", "E_i", "E_s", "I_p", "I_i", "I_s")
_TRANSFORM_KEYS = ("T_WB", "T_BI", "T_GM")
_FMT = "%.17g"


@dataclass(frozen=True, eq=False)
class RobotConfig:
    """Robot parameters plus the optional rig transforms (4x4, identity default)."""

    params: RobotParams
    T_WB: np.ndarray = field(default_factory=lambda: np.eye(4))
    T_BI: np.ndarray = field(default_factory=lambda: np.eye(4))
    T_GM: np.ndarray = field(default_factory=lambda: np.eye(4))


@dataclass
class TrajectoryRecord:
    """One trajectory sample; angles in radians, z None for 2-D data."""

    t: float
    q_s: float
    theta: float
    delta: float
    x: float
    y: float
    z: float | None = None


def default_params() -> RobotParams:
    """Bench single-segment robot: 44.3 mm NiTi segment, three secondaries."""
    return RobotParams(
        L=44.3, r=3.0,
        E_p=41000.0, E_i=41000.0, E_s=41000.0,
        I_p=0.0312, I_i=0.0312, I_s=0.0010,
        n=3,
    )


def _check_rigid(T: np.ndarray, key: str) -> None:
    R = T[:3, :3]
    if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9 or abs(np.linalg.det(R) - 1.0) > 1e-9:
        raise ValidationError(f"{key} is not a valid rigid transform")


def load_robot_config(path) -> RobotConfig:
    """Parse a key = value robot config file."""
    values: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"{path}:{lineno}: expected 'key = value'")
            key, _, rhs = line.partition("=")
            key = key.strip()
            rhs = rhs.strip()
            if not key or not rhs:
                raise ParseError(f"{path}:{lineno}: expected 'key = value'")
            if key in values:
                raise ParseError(f"{path}:{lineno}: duplicate key {key!r}")
            if key in _TRANSFORM_KEYS:
                parts = rhs.split()
                if len(parts) != 12:
                    raise ParseError(
                        f"{path}:{lineno}: {key} needs 12 numbers (row-major 3x4)"
                    )
                try:
                    values[key] = np.array([float(p) for p in parts]).reshape(3, 4)
                except ValueError as e:
                    raise ParseError(f"{path}:{lineno}: {e}") from e
            elif key in _REQUIRED_KEYS + ("n",):
                try:
                    values[key] = int(rhs) if key == "n" else float(rhs)
                except ValueError as e:
                    raise ParseError(f"{path}:{lineno}: {e}") from e
            else:
                raise ParseError(f"{path}:{lineno}: unknown key {key!r}")

    missing = [k for k in _REQUIRED_KEYS if k not in values]
    if missing:
        raise ValidationError(f"config missing required field(s): {', '.join(missing)}")
    params = RobotParams(
        L=values["L"], r=values["r"],
        E_p=values["E_p"], E_i=values["E_i"], E_s=values["E_s"],
        I_p=values["I_p"], I_i=values["I_i"], I_s=values["I_s"],
        n=values.get("n", 3),
    )
    transforms = {}
    for key in _TRANSFORM_KEYS:
        T = np.eye(4)
        if key in values:
            T[:3, :] = values[key]
            _check_rigid(T, key)
        transforms[key] = T
    return RobotConfig(params=params, **transforms)


def write_robot_config(path, config: RobotConfig) -> None:
    p = config.params
    lines = [f"{k} = {_FMT % getattr(p, k)}" for k in _REQUIRED_KEYS]
    lines.append(f"n = {p.n}")
    for key in _TRANSFORM_KEYS:
        T = getattr(config, key)
        if not np.array_equal(T, np.eye(4)):
            lines.append(f"{key} = " + " ".join(_FMT % v for v in T[:3, :].ravel()))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trajectory(path):
    """Returns (records, pragmas dict); records carry radians internally."""
    pragmas: dict = {}
    records: list[TrajectoryRecord] = []
    header: list[str] | None = None
    has_z = False
    prev_t = -math.inf
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    k, _, v = body.partition("=")
                    pragmas[k.strip()] = v.strip()
                continue
            parts = [p.strip() for p in line.split(",")]
            if header is None:
                if parts[:6] != ["t", "q_s", "theta", "delta", "x", "y"] or \
                        parts[6:] not in ([], ["z"]):
                    raise ParseError(
                        f"{path}:{lineno}: header must be t,q_s,theta,delta,x,y[,z]"
                    )
                header = parts
                has_z = len(parts) == 7
                continue
            if len(parts) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                nums = [float(p) for p in parts]
            except ValueError as e:
                raise ParseError(f"{path}:{lineno}: {e}") from e
            if nums[0] <= prev_t:
                raise ParseError(f"{path}:{lineno}: t must increase monotonically")
            prev_t = nums[0]
            records.append(TrajectoryRecord(
                t=nums[0], q_s=nums[1],
                theta=math.radians(nums[2]), delta=math.radians(nums[3]),
                x=nums[4], y=nums[5], z=nums[6] if has_z else None,
            ))
    if header is None:
        raise ParseError(f"{path}: no header row")
    return records, pragmas


def write_trajectory(path, records, frame: str = "base") -> None:
    """Write records to CSV; angles are converted to degrees for the file."""
    if frame not in ("base", "image"):
        raise ValidationError(f"frame must be 'base' or 'image', got {frame!r}")
    has_z = records[0].z is not None if records else True
    cols = ["t", "q_s", "theta", "delta", "x", "y"] + (["z"] if has_z else [])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# frame={frame}\n")
        fh.write(",".join(cols) + "\n")
        for rec in records:
            row = [rec.t, rec.q_s, math.degrees(rec.theta), math.degrees(rec.delta),
                   rec.x, rec.y] + ([rec.z] if has_z else [])
            if (rec.z is None) == has_z:
                raise ValidationError("records mix 2-D and 3-D samples")
            fh.write(",".join(_FMT % v for v in row) + "\n")


def load_dataset(path, config: RobotConfig | None = None):
    """Read a trajectory file into Measurement objects in the base frame.

    Positions in an image-frame file are mapped through T_BI; the marker
    offset (translation of T_GM) is then removed.  2-D files observe only
    the first two position components.  Records are kept in file order.
    """
    records, pragmas = read_trajectory(path)
    frame = pragmas.get("frame", "base")
    if frame not in ("base", "image"):
        raise ParseError(f"{path}: unknown frame {frame!r}")
    if frame == "image" and config is None:
        raise FrameError(f"{path}: image-frame data needs a config with T_BI")
    L = config.params.L if config is not None else None

    measurements = []
    for row, rec in enumerate(records, start=1):
        if L is not None and not (0.0 <= rec.q_s <= L):
            raise ValidationError(f"{path}: row {row}: q_s={rec.q_s} outside [0, {L}]")
        try:
            psi = ConfigState(rec.theta, rec.delta)
        except ValidationError as e:
            raise ValidationError(f"{path}: row {row}: {e}") from e
        p = np.array([rec.x, rec.y, rec.z if rec.z is not None else 0.0])
        if config is not None:
            if frame == "image":
                p = config.T_BI[:3, :3] @ p + config.T_BI[:3, 3]
            p = p - config.T_GM[:3, 3]
        mask = np.array([True, True, rec.z is not None, False, False, False])
        measurements.append(Measurement(psi=psi, q_s=rec.q_s, x_bar=p, obs_mask=mask))
    return measurements


def smooth_trajectory(records, cutoff_hz: float, sample_hz: float | None = None):
    """Zero-phase second-order Butterworth low-pass on the position columns.

    sample_hz defaults to the median sampling rate of the t column.  The
    cutoff must stay below the Nyquist frequency.  Only x, y, z change;
    commanded columns pass through untouched.
    """
    if len(records) < 2:
        return list(records)
    if sample_hz is None:
        dt = np.median(np.diff([r.t for r in records]))
        if not dt > 0.0:
            raise ValidationError("cannot infer sample rate from t column")
        sample_hz = 1.0 / float(dt)
    if cutoff_hz <= 0.0 or cutoff_hz >= sample_hz / 2.0:
        raise InvalidCutoff(
            f"cutoff {cutoff_hz} Hz not inside (0, Nyquist={sample_hz / 2.0} Hz)"
        )
    b, a = butter(2, cutoff_hz, fs=sample_hz)
    has_z = records[0].z is not None
    cols = [np.array([r.x for r in records]), np.array([r.y for r in records])]
    if has_z:
        cols.append(np.array([r.z for r in records]))
    smoothed = [filtfilt(b, a, col) for col in cols]
    out = []
    for i, r in enumerate(records):
        out.append(TrajectoryRecord(
            t=r.t, q_s=r.q_s, theta=r.theta, delta=r.delta,
            x=float(smoothed[0][i]), y=float(smoothed[1][i]),
            z=float(smoothed[2][i]) if has_z else None,
        ))
    return out


def generate_synthetic(
    params: RobotParams,
    k_true: UncertaintyParams,
    theta: float,
    delta: float,
    qs_schedule,
    noise_sigma: float,
    seed: int,
    path=None,
    frame: str = "base",
    sample_hz: float = 30.0,
):
    """Model-generated insertion sweep with seeded isotropic position noise.

    Writes the standard CSV when path is given and returns the records.
    Identical arguments always produce identical data.
    """
    qs = np.asarray(qs_schedule, dtype=float)
    pos, _, _ = micro_trajectory(params, ConfigState(theta, delta), qs, k_true)
    rng = np.random.default_rng(seed)
    noisy = pos + noise_sigma * rng.standard_normal(pos.shape)
    records = [
        TrajectoryRecord(
            t=i / sample_hz, q_s=float(qs[i]), theta=theta, delta=delta,
            x=float(noisy[i, 0]), y=float(noisy[i, 1]), z=float(noisy[i, 2]),
        )
        for i in range(len(qs))
    ]
    if path is not None:
        write_trajectory(path, records, frame=frame)
    return records
