"""Static equilibrium of a single continuum segment with an insertable
equilibrium-modulation wire.

The segment has a central backbone (length L), n push-pull secondary
backbones on a pitch circle of radius r, and a thin wire inserted a depth
q_s into the central backbone.  The wire splits the segment at a
separation plane into an inserted subsegment (base angle theta0 to
theta_s) and an empty subsegment (theta_s to theta_prime).  Bending
moments carried across the separation plane plus an empirical actuation
uncertainty moment lambda determine (theta_s, theta_prime).

Units: mm, N, rad; moduli in MPa so E*I is N*mm^2 and stiffnesses are
N*mm/rad.  Angles follow the convention that theta0 = pi/2 is straight
and smaller theta means more bending.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    NoConvergence,
    NonPhysicalLength,
    SingularInsertion,
    ValidationError,
)

THETA_BASE = math.pi / 2.0

# Insertion depths within this fraction of L from either end are treated as
# boundary cases: below q_min the analytic limit phi = (theta0, theta) is
# returned, above L - q_min the empty-side lengths are clamped at q_min.
Q_MIN_FRACTION = 1e-6

_SOLVER_TOL = 1e-12
_SOLVER_MAX_ITER = 200
_DAMP_FLOOR = 1.0 / 64.0


@dataclass(frozen=True)
class RobotParams:
    """Geometry and material constants of one segment.

    L: segment (central backbone) length, mm
    r: pitch-circle radius of the secondary backbones, mm
    E_p, I_p: modulus (MPa) and area moment (mm^4) of the central backbone
    E_i, I_i: same for each secondary backbone
    E_s, I_s: same for the insertable wire; zero allowed (wire absent)
    n: number of secondary backbones, evenly spaced
    theta0: base-disk angle, fixed at pi/2
    """

    L: float
    r: float
    E_p: float
    E_i: float
    E_s: float
    I_p: float
    I_i: float
    I_s: float
    n: int = 3
    theta0: float = THETA_BASE

    def __post_init__(self):
        if not (self.L > 0.0 and math.isfinite(self.L)):
            raise ValidationError(f"L must be positive, got {self.L}")
        if not (self.r > 0.0 and math.isfinite(self.r)):
            raise ValidationError(f"r must be positive, got {self.r}")
        if int(self.n) != self.n or self.n < 3:
            raise ValidationError(f"n must be an integer >= 3, got {self.n}")
        for name in ("E_p", "E_i", "I_p", "I_i"):
            v = getattr(self, name)
            if not (v > 0.0 and math.isfinite(v)):
                raise ValidationError(f"{name} must be positive, got {v}")
        for name in ("E_s", "I_s"):
            v = getattr(self, name)
            if not (v >= 0.0 and math.isfinite(v)):
                raise ValidationError(f"{name} must be >= 0, got {v}")
        if self.theta0 != THETA_BASE:
            raise ValidationError("theta0 is fixed at pi/2")

    @property
    def beta(self) -> float:
        """Angular pitch 2 pi / n between secondary backbones."""
        return 2.0 * math.pi / self.n

    @property
    def EI_p(self) -> float:
        return self.E_p * self.I_p

    @property
    def EI_i(self) -> float:
        return self.E_i * self.I_i

    @property
    def EI_s(self) -> float:
        return self.E_s * self.I_s

    @property
    def q_min(self) -> float:
        return Q_MIN_FRACTION * self.L


@dataclass(frozen=True)
class ConfigState:
    """Nominal bend angle theta and bending-plane angle delta, rad."""

    theta: float
    delta: float

    def __post_init__(self):
        if not (0.0 < self.theta < math.pi):
            raise ValidationError(f"theta must lie in (0, pi), got {self.theta}")
        if not (-math.pi < self.delta <= math.pi):
            raise ValidationError(f"delta must lie in (-pi, pi], got {self.delta}")


@dataclass(frozen=True)
class InsertionState:
    """Wire insertion depth q_s, mm; upper bound L is checked where L is known."""

    q_s: float

    def __post_init__(self):
        if not (self.q_s >= 0.0 and math.isfinite(self.q_s)):
            raise ValidationError(f"q_s must be >= 0, got {self.q_s}")


@dataclass(frozen=True)
class UncertaintyParams:
    """Affine actuation-uncertainty moment lambda = k0 + k_theta*theta + k_q*q_s."""

    k_lambda0: float = 0.0
    k_lambda_theta: float = 0.0
    k_lambda_q: float = 0.0

    def __post_init__(self):
        for name in ("k_lambda0", "k_lambda_theta", "k_lambda_q"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.k_lambda0, self.k_lambda_theta, self.k_lambda_q])

    @classmethod
    def from_array(cls, a) -> "UncertaintyParams":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0]), float(a[1]), float(a[2]))

    @classmethod
    def zero(cls) -> "UncertaintyParams":
        return cls(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class EquilibriumConfig:
    """Equilibrium angles phi = (theta_s, theta_eps).

    theta_s is the separation-plane angle, theta_eps the empty-subsegment
    equivalent bend angle; the end-disk angle is
    theta_prime = theta_eps - (pi/2 - theta_s) by construction.
    """

    theta_s: float
    theta_eps: float

    @property
    def theta_prime(self) -> float:
        return self.theta_eps - (math.pi / 2.0 - self.theta_s)

    @classmethod
    def from_tip_angle(cls, theta_s: float, theta_prime: float) -> "EquilibriumConfig":
        return cls(theta_s, theta_prime + (math.pi / 2.0 - theta_s))

    def phi(self) -> np.ndarray:
        return np.array([self.theta_s, self.theta_eps])


@dataclass(frozen=True)
class StiffnessBundle:
    """Angular stiffnesses (N*mm/rad) and the lengths they were built from."""

    k_theta0: float
    k_theta1: float
    k_theta2: float
    k_theta_s: float
    L_i: np.ndarray
    L_si: np.ndarray
    L_eps_i: np.ndarray
    Delta_i: np.ndarray


def _sigma(params: RobotParams, delta):
    """Angular positions sigma_i = delta + (i - 1) * beta, shape (..., n)."""
    d = np.asarray(delta, dtype=float)
    return d[..., None] + params.beta * np.arange(params.n)


def projected_offsets(params: RobotParams, delta):
    """Delta_i = r cos(sigma_i): moment-arm projections onto the bending plane."""
    return params.r * np.cos(_sigma(params, delta))


def backbone_lengths(params: RobotParams, theta, delta):
    """Secondary backbone lengths L_i = L + Delta_i (theta - theta0)."""
    D = projected_offsets(params, delta)
    L_i = params.L + D * (np.asarray(theta, dtype=float) - params.theta0)[..., None]
    if np.any(L_i <= 0.0):
        raise NonPhysicalLength(
            f"backbone length <= 0 (min {np.min(L_i):.6g} mm) at theta={theta}"
        )
    return L_i


def subsegment_lengths(params: RobotParams, delta, q_s, theta_s, theta_prime):
    """Per-backbone lengths of the inserted and empty subsegments.

    L_si = q_s + Delta_i (theta_s - theta0)
    L_eps_i = (L - q_s) + Delta_i (theta_prime - theta_s)

    A non-positive component only raises when the corresponding stiffness
    is actually needed: the inserted side requires q_s > 0, the empty side
    q_s < L.
    """
    D = projected_offsets(params, delta)
    q = np.asarray(q_s, dtype=float)
    L_si = q[..., None] + D * (np.asarray(theta_s, dtype=float) - params.theta0)[..., None]
    L_eps_i = (params.L - q)[..., None] + D * (
        np.asarray(theta_prime, dtype=float) - np.asarray(theta_s, dtype=float)
    )[..., None]
    if np.any((q[..., None] > 0.0) & (L_si <= 0.0)):
        raise NonPhysicalLength("inserted subsegment length <= 0")
    if np.any((q[..., None] < params.L) & (L_eps_i <= 0.0)):
        raise NonPhysicalLength("empty subsegment length <= 0")
    return L_si, L_eps_i


def uncertainty_lambda(k: UncertaintyParams, q_s, theta):
    """lambda = k_lambda0 + k_lambda_theta * theta + k_lambda_q * q_s.

    theta is the nominal configuration angle, not an equilibrium angle.
    """
    return k.k_lambda0 + k.k_lambda_theta * np.asarray(theta, dtype=float) \
        + k.k_lambda_q * np.asarray(q_s, dtype=float)


def stiffnesses(params: RobotParams, delta, q_s, theta, theta_s, theta_prime) -> StiffnessBundle:
    """Angular stiffnesses of the moment balance at one configuration.

    k_theta0: whole segment at nominal theta (proximal side of the base)
    k_theta1: empty subsegment at (theta_prime - theta_s)
    k_theta2: inserted subsegment at (theta_s - theta0)
    k_theta_s: wire over the inserted depth

    Scalar evaluation with q_s strictly inside (q_min, L - q_min); the
    equilibrium solver handles the boundary regimes itself.
    """
    q_s = float(q_s)
    if not (params.q_min < q_s < params.L - params.q_min):
        raise SingularInsertion(
            f"q_s={q_s:.6g} outside ({params.q_min:.3g}, {params.L - params.q_min:.6g})"
        )
    D = projected_offsets(params, delta)
    L_i = backbone_lengths(params, theta, delta)
    L_si, L_eps_i = subsegment_lengths(params, delta, q_s, theta_s, theta_prime)
    k0 = params.EI_p / params.L + np.sum(params.EI_i / L_i, axis=-1)
    k1 = params.EI_p / (params.L - q_s) + np.sum(params.EI_i / L_eps_i, axis=-1)
    k2 = params.EI_p / q_s + np.sum(params.EI_i / L_si, axis=-1)
    ks = params.EI_s / q_s
    return StiffnessBundle(
        k_theta0=float(k0),
        k_theta1=float(k1),
        k_theta2=float(k2),
        k_theta_s=float(ks),
        L_i=L_i,
        L_si=L_si,
        L_eps_i=L_eps_i,
        Delta_i=D,
    )


def _solve_equilibrium_arrays(
    params: RobotParams,
    theta,
    delta,
    q_s,
    k: UncertaintyParams,
    tol: float = _SOLVER_TOL,
    max_iter: int = _SOLVER_MAX_ITER,
):
    """Vectorized fixed-point solve of the two moment equations.

    Each sweep freezes the length-dependent stiffnesses at the current
    iterate and solves the frozen system exactly:

        theta_s = theta0 + (k0 (theta - theta0) - lambda) / (k2 + ks)
        theta_prime = theta_s + (k0 / k1) (theta - theta0)

    then re-evaluates the stiffnesses.  Converges when the proposed update
    falls below tol in both components.  Returns (theta_s, theta_prime)
    broadcast over the inputs.
    """
    theta, delta, q_s = np.broadcast_arrays(
        np.asarray(theta, dtype=float),
        np.asarray(delta, dtype=float),
        np.asarray(q_s, dtype=float),
    )
    if np.any(q_s < 0.0) or np.any(q_s > params.L):
        raise ValidationError("q_s must lie in [0, L]")
    th0 = params.theta0
    lam = np.asarray(uncertainty_lambda(k, q_s, theta), dtype=float)

    small = q_s < params.q_min
    qs_eff = np.maximum(q_s, params.q_min)
    # near full insertion the empty side vanishes; clamp its lengths
    Lq_eff = np.maximum(params.L - q_s, params.q_min)

    D = projected_offsets(params, delta)
    L_i = backbone_lengths(params, theta, delta)
    k0 = params.EI_p / params.L + np.sum(params.EI_i / L_i, axis=-1)
    m_base = k0 * (theta - th0)

    # constant-curvature initialization
    th_s = th0 + (theta - th0) * q_s / params.L
    th_p = theta.copy()

    damp = 1.0
    prev_step = np.inf
    for iteration in range(max_iter):
        L_si = qs_eff[..., None] + D * (th_s - th0)[..., None]
        L_eps_i = Lq_eff[..., None] + D * (th_p - th_s)[..., None]
        if np.any(L_si <= 0.0) or np.any(L_eps_i <= 0.0):
            raise NonPhysicalLength(
                f"subsegment length <= 0 during equilibrium iteration {iteration}"
            )
        k1 = params.EI_p / Lq_eff + np.sum(params.EI_i / L_eps_i, axis=-1)
        k2 = params.EI_p / qs_eff + np.sum(params.EI_i / L_si, axis=-1)
        ks = params.EI_s / qs_eff
        th_s_new = th0 + (m_base - lam) / (k2 + ks)
        th_p_new = th_s_new + m_base / k1
        ds = th_s_new - th_s
        dp = th_p_new - th_p
        step = max(float(np.max(np.abs(ds))), float(np.max(np.abs(dp))))
        th_s = th_s + damp * ds
        th_p = th_p + damp * dp
        if step < tol:
            break
        if step > prev_step:
            damp = max(damp * 0.5, _DAMP_FLOOR)
        prev_step = step
    else:
        raise NoConvergence(
            f"equilibrium fixed point not converged after {max_iter} iterations "
            f"(last step {step:.3g} rad)"
        )

    # analytic limit for vanishing insertion: the inserted side stiffens
    # without bound, so theta_s -> theta0 and theta_prime -> theta
    th_s = np.where(small, th0, th_s)
    th_p = np.where(small, theta, th_p)
    return th_s, th_p


def solve_equilibrium(
    params: RobotParams,
    psi: ConfigState,
    q_s: float,
    k: UncertaintyParams,
    tol: float = _SOLVER_TOL,
    max_iter: int = _SOLVER_MAX_ITER,
) -> EquilibriumConfig:
    """Equilibrium angles of the segment at configuration psi, depth q_s."""
    th_s, th_p = _solve_equilibrium_arrays(
        params, psi.theta, psi.delta, float(q_s), k, tol=tol, max_iter=max_iter
    )
    return EquilibriumConfig.from_tip_angle(float(th_s), float(th_p))


def equilibrium_moments(
    params: RobotParams,
    psi: ConfigState,
    q_s: float,
    k: UncertaintyParams,
    phi: EquilibriumConfig,
):
    """Moments (m1, m1p, m2, ms, lambda) at a candidate equilibrium.

    m1 = k_theta0 (theta - theta0) is carried across the base by the whole
    segment, m1p = k_theta1 (theta_prime - theta_s) by the empty
    subsegment, m2 = -k_theta2 (theta_s - theta0) and
    ms = -k_theta_s (theta_s - theta0) resist bending of the inserted
    subsegment.  At equilibrium m1 = m1p and m1p + m2 + ms = lambda.
    """
    b = stiffnesses(params, psi.delta, q_s, psi.theta, phi.theta_s, phi.theta_prime)
    m1 = b.k_theta0 * (psi.theta - params.theta0)
    m1p = b.k_theta1 * (phi.theta_prime - phi.theta_s)
    m2 = -b.k_theta2 * (phi.theta_s - params.theta0)
    ms = -b.k_theta_s * (phi.theta_s - params.theta0)
    lam = float(uncertainty_lambda(k, q_s, psi.theta))
    return m1, m1p, m2, ms, lam
