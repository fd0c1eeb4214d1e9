"""Identification of the actuation-uncertainty parameters from tip data.

Each measurement pairs a commanded configuration (theta, delta, q_s) with
an observed tip position (and optionally orientation).  The residual per
measurement is the 6-vector [x_bar - x; alpha_e m_e] of position error
and axis-angle orientation error; a damped Gauss-Newton loop on the
weighted cost M_lambda = c~^T W c~ / 2N updates the free components of
(k_lambda0, k_lambda_theta, k_lambda_q) until the relative change of
M_lambda falls below a threshold.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    NoConvergence,
    SingularNormalEquations,
    ValidationError,
)
from .kinematics import Pose, _tip_position_arrays, crem_pose
from .model import ConfigState, RobotParams, UncertaintyParams
from .differential import _motion_jacobian_arrays
from .rotations import axis_angle

PARAM_NAMES = ("k_lambda0", "k_lambda_theta", "k_lambda_q")

_ZERO_ROT_ANGLE = 1e-7
_COND_LIMIT = 1e12
_MAX_STEP_RETRIES = 30
# cost at sub-nanometer residual scale; below this M_lambda is float noise
_M_FLOOR = 1e-18


@dataclass(frozen=True, eq=False)
class Measurement:
    """One observed configuration.

    x_bar is the tip position in the base frame (mm); R_bar the observed
    orientation or None.  obs_mask marks which of the six residual
    components (three position, three orientation) are observed; by
    default all positions and, when R_bar is present, all orientations.
    """

    psi: ConfigState
    q_s: float
    x_bar: np.ndarray
    R_bar: np.ndarray | None = None
    obs_mask: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x_bar, dtype=float)
        if x.shape != (3,) or not np.all(np.isfinite(x)):
            raise ValidationError("x_bar must be a finite 3-vector")
        object.__setattr__(self, "x_bar", x)
        if self.obs_mask is None:
            mask = np.array([True] * 3 + [self.R_bar is not None] * 3)
        else:
            mask = np.asarray(self.obs_mask, dtype=bool)
            if mask.shape != (6,):
                raise ValidationError("obs_mask must have shape (6,)")
        if not mask.any():
            raise ValidationError("obs_mask must observe at least one component")
        object.__setattr__(self, "obs_mask", mask)


@dataclass
class CalibrationConfig:
    """Settings of the identification loop.

    weight_blocks: per-measurement 6x6 weights, or None for the default
    diagonal (1 on observed positions, w_rot on observed orientations,
    0 on masked components).  H scales the parameter step.
    free_params names the components of k actually updated.
    """

    eta: float = 0.1
    beta_conv: float = 1e-3
    max_iter: int = 500
    w_rot: float = 10.0
    free_params: tuple = ("k_lambda0", "k_lambda_q")
    H: np.ndarray | None = None
    weight_blocks: np.ndarray | None = None

    def __post_init__(self):
        if not (0.0 < self.eta <= 1.0):
            raise ValidationError(f"eta must lie in (0, 1], got {self.eta}")
        if not (self.beta_conv > 0.0):
            raise ValidationError("beta_conv must be positive")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")
        for name in self.free_params:
            if name not in PARAM_NAMES:
                raise ValidationError(f"unknown free parameter {name!r}")
        if len(set(self.free_params)) != len(self.free_params) or not self.free_params:
            raise ValidationError("free_params must be a nonempty set of distinct names")
        if self.H is not None and np.asarray(self.H).shape != (3, 3):
            raise ValidationError("H must be a 3x3 matrix")

    @property
    def free_indices(self) -> np.ndarray:
        return np.array([PARAM_NAMES.index(n) for n in self.free_params], dtype=int)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    k: UncertaintyParams
    rmse_um: float
    M_lambda: float


@dataclass(frozen=True)
class CalibrationResult:
    k_star: UncertaintyParams
    trace: list
    converged: bool
    eta_final: float
    eta_flagged: bool


def pose_error(measured: Measurement, modeled: Pose) -> np.ndarray:
    """Residual 6-vector [x_bar - x; alpha_e m_e].

    The orientation error rotation R_e = R_bar R^T is reduced to its
    axis-angle vector; below 1e-7 rad the rotational residual is exactly
    zero, and near pi the axis comes from the symmetric part of R_e.
    Unobserved components are zero (and masked by the weights downstream).
    """
    c = np.zeros(6)
    c[:3] = measured.x_bar - modeled.p
    if measured.R_bar is not None:
        alpha, axis = axis_angle(np.asarray(measured.R_bar, dtype=float) @ modeled.R.T)
        if alpha >= _ZERO_ROT_ANGLE:
            c[3:] = alpha * axis
    return c


def default_weight_blocks(measurements, w_rot: float = 10.0) -> np.ndarray:
    """Diagonal per-measurement weights from the observation masks, (N, 6, 6)."""
    N = len(measurements)
    W = np.zeros((N, 6, 6))
    for j, m in enumerate(measurements):
        d = np.where(m.obs_mask, np.concatenate([np.ones(3), w_rot * np.ones(3)]), 0.0)
        W[j] = np.diag(d)
    return W


def aggregate(residuals, weight_blocks) -> tuple[np.ndarray, float]:
    """Stack per-measurement residuals and evaluate M_lambda = c~^T W c~ / 2N."""
    c = np.asarray(residuals, dtype=float)
    N = c.shape[0]
    Wc = (np.asarray(weight_blocks) @ c[..., None])[..., 0]
    M = float(np.sum(c * Wc) / (2.0 * N))
    return c.reshape(-1), M


def _residual_matrix(measurements, params: RobotParams, k: UncertaintyParams) -> np.ndarray:
    """(N, 6) residuals; batched when no orientations are observed."""
    if any(m.R_bar is not None for m in measurements):
        rows = []
        for j, m in enumerate(measurements):
            try:
                pose = crem_pose(params, m.psi, m.q_s, k).tip
            except NoConvergence as e:
                raise NoConvergence(f"measurement {j}: {e}") from e
            rows.append(pose_error(m, pose))
        return np.asarray(rows)
    theta = np.array([m.psi.theta for m in measurements])
    delta = np.array([m.psi.delta for m in measurements])
    qs = np.array([m.q_s for m in measurements])
    x_bar = np.stack([m.x_bar for m in measurements])
    try:
        p, _, _ = _tip_position_arrays(params, theta, delta, qs, k)
    except NoConvergence as e:
        raise NoConvergence(f"while evaluating dataset residuals: {e}") from e
    c = np.zeros((len(measurements), 6))
    c[:, :3] = x_bar - p
    return c


def position_rmse_um(residuals, measurements) -> float:
    """RMSE over the observed position components, micrometres."""
    c = np.asarray(residuals, dtype=float)[:, :3]
    mask = np.stack([m.obs_mask[:3] for m in measurements])
    sq = np.sum(np.where(mask, c, 0.0) ** 2, axis=1)
    return 1000.0 * float(np.sqrt(np.mean(sq)))


def identification_jacobian(
    measurements, params: RobotParams, k: UncertaintyParams,
    free_params=("k_lambda0", "k_lambda_q"),
) -> np.ndarray:
    """Stacked residual Jacobian d c~ / d k_free, shape (6N, n_free).

    The residual is measured-minus-modeled, so each block is the negated
    tip Jacobian -J_k restricted to the free columns.
    """
    idx = np.array([PARAM_NAMES.index(n) for n in free_params], dtype=int)
    theta = np.array([m.psi.theta for m in measurements])
    delta = np.array([m.psi.delta for m in measurements])
    qs = np.array([m.q_s for m in measurements])
    try:
        _, _, J_k = _motion_jacobian_arrays(params, theta, delta, qs, k)
    except NoConvergence as e:
        raise NoConvergence(f"while building the identification Jacobian: {e}") from e
    return (-J_k[:, :, idx]).reshape(len(measurements) * 6, len(idx))


def nls_estimate(
    measurements,
    params: RobotParams,
    config: CalibrationConfig,
    k0: UncertaintyParams,
) -> CalibrationResult:
    """Damped Gauss-Newton identification of the free uncertainty parameters.

    Update per iteration: k <- k - H (eta (J^T W J)^{-1} J^T W c~) on the
    free components.  Stops when |M_i - M_{i-1}| / M_{i-1} < beta_conv or
    when M_i falls below the absolute floor (sub-nanometer residuals are
    float noise and the relative test would churn on them).  A step that
    would increase M_lambda is retried with eta halved (and the result
    flagged); NoConvergence after max_iter accepted updates.
    """
    if not measurements:
        raise ValidationError("empty dataset")
    W = config.weight_blocks
    if W is None:
        W = default_weight_blocks(measurements, config.w_rot)
    W = np.asarray(W, dtype=float)
    if W.shape != (len(measurements), 6, 6):
        raise ValidationError("weight_blocks must have shape (N, 6, 6)")
    H = np.eye(3) if config.H is None else np.asarray(config.H, dtype=float)
    idx = config.free_indices

    k_vec = k0.as_array().astype(float)

    def evaluate(kv):
        k = UncertaintyParams.from_array(kv)
        c = _residual_matrix(measurements, params, k)
        c_tilde, M = aggregate(c, W)
        return c, c_tilde, M

    c, c_tilde, M = evaluate(k_vec)
    trace = [IterationRecord(0, UncertaintyParams.from_array(k_vec),
                             position_rmse_um(c, measurements), M)]
    eta = config.eta
    flagged = False
    converged = False

    for iteration in range(1, config.max_iter + 1):
        J = identification_jacobian(
            measurements, params, UncertaintyParams.from_array(k_vec), config.free_params
        )
        Jb = J.reshape(len(measurements), 6, len(idx))
        JtW = np.einsum("nij,nik->jk", Jb, W @ Jb)
        JtWc = np.einsum("nij,ni->j", Jb, (W @ c[..., None])[..., 0])
        cond = np.linalg.cond(JtW)
        if not np.isfinite(cond) or cond > _COND_LIMIT:
            raise SingularNormalEquations(
                f"normal equations condition {cond:.3g} exceeds {_COND_LIMIT:.0e} "
                f"at iteration {iteration}"
            )
        delta_free = np.linalg.solve(JtW, JtWc)

        accepted = False
        for _ in range(_MAX_STEP_RETRIES):
            k_cand = k_vec.copy()
            k_cand[idx] -= (H[np.ix_(idx, idx)] @ (eta * delta_free))
            c_cand, c_tilde_cand, M_cand = evaluate(k_cand)
            if M_cand <= M * (1.0 + 1e-12):
                accepted = True
                break
            eta *= 0.5
            flagged = True
        if not accepted:
            # cost cannot be reduced further along this direction
            k_cand, c_cand, M_cand = k_vec, c, M

        rel = abs(M_cand - M) / max(M, np.finfo(float).tiny)
        k_vec, c, M = k_cand, c_cand, M_cand
        trace.append(IterationRecord(iteration, UncertaintyParams.from_array(k_vec),
                                     position_rmse_um(c, measurements), M))
        if rel < config.beta_conv or M < _M_FLOOR:
            converged = True
            break

    if not converged:
        raise NoConvergence(
            f"identification not converged after {config.max_iter} iterations "
            f"(M_lambda {M:.6g})"
        )
    return CalibrationResult(
        k_star=UncertaintyParams.from_array(k_vec),
        trace=trace,
        converged=converged,
        eta_final=eta,
        eta_flagged=flagged,
    )


# ---------------------------------------------------------------------------
# turning-point utilities


def principal_direction(positions) -> np.ndarray:
    """Unit vector of largest positional spread (leading SVD direction).

    The micro-motion path is an out-and-back hairpin: close to the
    vertex the step vectors rotate smoothly through the transverse
    component, so local step-to-step tests miss the reversal.  Progress
    along this global axis is the quantity whose sign flips at the
    turning point.
    """
    p = np.asarray(positions, dtype=float)
    centered = p - p.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    e = vt[0]
    # orient so the farthest-progress sample lies on the positive side
    c = (p - p[0]) @ e
    if c[np.argmax(np.abs(c))] < 0.0:
        e = -e
    return e


def direction_reversals(positions) -> np.ndarray:
    """Sample indices where progress along the principal axis reverses.

    For each step the displacement is projected onto the principal
    direction of the whole path; a sign change between consecutive
    projections marks the vertex sample.  Intended for clean
    trajectories where every sign change is structural.
    """
    p = np.asarray(positions, dtype=float)
    if p.ndim != 2 or p.shape[0] < 3:
        return np.array([], dtype=int)
    e = principal_direction(p)
    s = np.diff(p, axis=0) @ e
    sgn = np.sign(s)
    for i in range(1, sgn.size):
        if sgn[i] == 0.0:
            sgn[i] = sgn[i - 1]
    return np.nonzero(sgn[1:] * sgn[:-1] < 0.0)[0] + 1


def turning_point_index(
    positions, end_margin: int = 2, prominence: float = 0.1
) -> int | None:
    """Robust turning-point sample of a noisy out-and-back trajectory.

    Accumulated progress along the principal direction rises to a
    single interior extremum at the vertex and recedes after it; the
    extremum survives measurement noise because it aggregates the whole
    path.  A candidate counts only when the progress swings by at least
    ``prominence`` of the total progress span on both sides, which
    rejects the near-end argmax wobble that noise produces on monotone
    trajectories.  Returns None when no candidate qualifies.
    """
    p = np.asarray(positions, dtype=float)
    if p.ndim != 2 or p.shape[0] < 3:
        return None
    c = (p - p[0]) @ principal_direction(p)
    span = float(np.max(c) - np.min(c))
    if span <= 0.0:
        return None
    lo, hi = end_margin, p.shape[0] - 1 - end_margin
    hits = []
    for i, opp in ((int(np.argmax(c)), np.min), (int(np.argmin(c)), np.max)):
        if not lo <= i <= hi:
            continue
        before = abs(c[i] - opp(c[: i + 1]))
        after = abs(c[i] - opp(c[i:]))
        if min(before, after) >= prominence * span:
            hits.append(i)
    if not hits:
        return None
    return min(hits)


def split_at_turning_point(measurements):
    """(pre, post) subsets around the detected turning point.

    The turning sample itself closes the pre subset.  With no detected
    turning point the pre subset is the whole dataset and post is empty.
    """
    pos = np.stack([m.x_bar for m in measurements])
    idx = turning_point_index(pos)
    if idx is None:
        return list(measurements), []
    return list(measurements[: idx + 1]), list(measurements[idx + 1 :])
