"""Constant-curvature pose maps for the modulated segment.

A subsegment of arc length L_x bending from theta0 = pi/2 down to angle
theta_x in plane delta has tip position

    p = L_x * [cos(delta) a, -sin(delta) a, b],
    a = (sin theta_x - 1) / (theta_x - pi/2),  b = -cos theta_x / (theta_x - pi/2)

and orientation R = Rz(-delta) Ry(pi/2 - theta_x) Rz(delta).  Near the
straight configuration both ratios are evaluated by series.  The full
segment is the inserted subsegment (length q_s, angle theta_s) composed
with the empty subsegment (length L - q_s, angle theta_eps) in the frame
of the separation plane.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import (
    ConfigState,
    EquilibriumConfig,
    RobotParams,
    UncertaintyParams,
    _solve_equilibrium_arrays,
    solve_equilibrium,
)
from .rotations import rot_y, rot_z

# |theta_x - pi/2| below which the arc ratios switch to their series forms
STRAIGHT_SERIES_THRESHOLD = 1e-4


@dataclass(frozen=True, eq=False)
class Pose:
    """Position (mm) and rotation of one frame in another."""

    p: np.ndarray
    R: np.ndarray

    def homogeneous(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.R
        T[:3, 3] = self.p
        return T

    def orthonormality_error(self) -> float:
        return float(np.max(np.abs(self.R.T @ self.R - np.eye(3))))

    def validate(self, tol: float = 1e-12) -> None:
        if self.p.shape != (3,) or self.R.shape != (3, 3):
            raise ValidationError("Pose needs p of shape (3,) and R of shape (3, 3)")
        if self.orthonormality_error() > tol or abs(np.linalg.det(self.R) - 1.0) > tol:
            raise ValidationError("R is not a rotation matrix within tolerance")


@dataclass(frozen=True, eq=False)
class SegmentedPose:
    """Tip pose with the intermediate frames of the two-subsegment chain.

    separation: separation-plane frame in the base frame
    distal: tip frame in the separation-plane frame
    tip: their composition, the tip frame in the base frame
    """

    tip: Pose
    separation: Pose
    distal: Pose
    equilibrium: EquilibriumConfig


def _arc_scalars(theta_x):
    """Ratios (a, b) above, series-evaluated within the straight window."""
    t = np.asarray(theta_x, dtype=float)
    u = t - np.pi / 2.0
    near = np.abs(u) < STRAIGHT_SERIES_THRESHOLD
    u_safe = np.where(near, 1.0, u)
    a = np.where(near, -u / 2.0 + u**3 / 24.0, (np.sin(t) - 1.0) / u_safe)
    b = np.where(near, 1.0 - u**2 / 6.0 + u**4 / 120.0, -np.cos(t) / u_safe)
    return a, b


def arc_direction(theta_x, delta_x):
    """Tip position per unit arc length, shape (..., 3)."""
    a, b = _arc_scalars(theta_x)
    d = np.asarray(delta_x, dtype=float)
    return np.stack([np.cos(d) * a, -np.sin(d) * a, b], axis=-1)


def segment_rotation(theta_x, delta_x):
    """R = Rz(-delta) Ry(pi/2 - theta_x) Rz(delta), shape (..., 3, 3)."""
    t = np.asarray(theta_x, dtype=float)
    d = np.asarray(delta_x, dtype=float)
    return rot_z(-d) @ rot_y(np.pi / 2.0 - t) @ rot_z(d)


def segment_position(L_x, theta_x, delta_x):
    """Tip position of a single arc, shape (..., 3)."""
    return np.asarray(L_x, dtype=float)[..., None] * arc_direction(theta_x, delta_x)


def segment_pose(L_x: float, theta_x: float, delta_x: float) -> Pose:
    """Pose of a single constant-curvature arc (scalar arguments)."""
    if L_x < 0.0:
        raise ValidationError(f"arc length must be >= 0, got {L_x}")
    p = segment_position(np.float64(L_x), np.float64(theta_x), np.float64(delta_x))
    R = segment_rotation(np.float64(theta_x), np.float64(delta_x))
    return Pose(p=np.asarray(p, dtype=float), R=np.asarray(R, dtype=float))


def compose(first: Pose, second: Pose) -> Pose:
    """Pose of frame c in a, given b in a (first) and c in b (second)."""
    return Pose(p=first.p + first.R @ second.p, R=first.R @ second.R)


def pose_from_phi(
    params: RobotParams, phi: EquilibriumConfig, delta: float, q_s: float
) -> SegmentedPose:
    """Two-subsegment pose for given equilibrium angles (no solve)."""
    if not (0.0 <= q_s <= params.L):
        raise ValidationError(f"q_s={q_s} outside [0, L]")
    separation = segment_pose(q_s, phi.theta_s, delta)
    distal = segment_pose(params.L - q_s, phi.theta_eps, delta)
    return SegmentedPose(
        tip=compose(separation, distal),
        separation=separation,
        distal=distal,
        equilibrium=phi,
    )


def crem_pose(
    params: RobotParams, psi: ConfigState, q_s: float, k: UncertaintyParams
) -> SegmentedPose:
    """Tip pose at configuration psi and insertion depth q_s.

    Solves the moment equilibrium for phi, then composes the inserted and
    empty subsegment arcs.
    """
    phi = solve_equilibrium(params, psi, q_s, k)
    return pose_from_phi(params, phi, psi.delta, q_s)


def _tip_position_arrays(params: RobotParams, theta, delta, q_s, k: UncertaintyParams):
    """Vectorized tip positions over broadcast (theta, delta, q_s).

    Returns (positions (..., 3), theta_s, theta_prime).
    """
    th_s, th_p = _solve_equilibrium_arrays(params, theta, delta, q_s, k)
    theta, delta, q_s = np.broadcast_arrays(
        np.asarray(theta, dtype=float),
        np.asarray(delta, dtype=float),
        np.asarray(q_s, dtype=float),
    )
    th_e = th_p + (np.pi / 2.0 - th_s)
    p_c = q_s[..., None] * arc_direction(th_s, delta)
    p_gc = (params.L - q_s)[..., None] * arc_direction(th_e, delta)
    R_c = segment_rotation(th_s, delta)
    p = p_c + (R_c @ p_gc[..., None])[..., 0]
    return p, th_s, th_p


def micro_trajectory(
    params: RobotParams,
    psi: ConfigState,
    qs_schedule,
    k: UncertaintyParams,
):
    """Tip positions along an insertion sweep at fixed psi.

    Returns (positions (N, 3), theta_s (N,), theta_prime (N,)).
    """
    qs = np.asarray(qs_schedule, dtype=float)
    return _tip_position_arrays(params, psi.theta, psi.delta, qs, k)
