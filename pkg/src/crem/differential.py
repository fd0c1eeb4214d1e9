"""Analytic differential kinematics of the modulated segment.

Two layers:

* equilibrium sensitivities d phi / d(theta, delta, q_s, k_lambda) from
  implicit differentiation of the moment balance A(x) C_phi = B(x),
  where x collects the length-dependent stiffnesses;
* pose Jacobians of the two-subsegment chain: per-subsegment partitions
  (J_v_theta, J_omega_theta, J_v_delta, J_omega_delta), their composition
  J_xi_phi / J_xi_delta / J_xi_qs, and the assembled macro / micro /
  identification Jacobians J_M, J_mu, J_k.

Angular velocity follows the space-frame convention dR R^T = [omega]^.
A generic central-difference oracle over pose-valued maps is included so
every analytic block can be checked against finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularGradient
from .kinematics import (
    Pose,
    arc_direction,
    crem_pose,
    segment_rotation,
)
from .model import (
    ConfigState,
    EquilibriumConfig,
    RobotParams,
    UncertaintyParams,
    _solve_equilibrium_arrays,
    projected_offsets,
    solve_equilibrium,
    uncertainty_lambda,
)
from .rotations import axis_angle_vector

# |theta - theta0| below which the chi ratios switch to series forms
_CHI_SERIES_THRESHOLD = 1e-4
_COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class SolverMatrices:
    """Matrix form A C_phi = B of the converged moment balance."""

    A: np.ndarray
    B: np.ndarray
    S0: np.ndarray
    C0: np.ndarray
    S1: np.ndarray
    C_phi: np.ndarray


@dataclass(frozen=True, eq=False)
class PhiGradients:
    """Sensitivities of phi = (theta_s, theta_eps) to the model inputs."""

    d_phi_d_theta: np.ndarray
    d_phi_d_delta: np.ndarray
    d_phi_d_qs: np.ndarray
    d_phi_d_k: np.ndarray  # (2, 3) columns ordered (k_lambda0, k_lambda_theta, k_lambda_q)


@dataclass(frozen=True, eq=False)
class XiJacobians:
    """Body twist of the tip per unit change of (phi, delta, q_s)."""

    J_xi_phi: np.ndarray  # (6, 2)
    J_xi_delta: np.ndarray  # (6,)
    J_xi_qs: np.ndarray  # (6,)


@dataclass(frozen=True, eq=False)
class JacobianSet:
    """Assembled Jacobians at one configuration with their constituents."""

    J_M: np.ndarray  # (6, n) tip twist per secondary-backbone displacement
    J_mu: np.ndarray  # (6,) tip twist per insertion depth
    J_k: np.ndarray  # (6, 3) tip twist per uncertainty parameter
    J_xi_phi: np.ndarray
    J_xi_delta: np.ndarray
    J_xi_qs: np.ndarray
    J_q_psi: np.ndarray  # (n, 2)
    phi: EquilibriumConfig
    gradients: PhiGradients


# ---------------------------------------------------------------------------
# equilibrium sensitivities


def _stiffness_terms(params: RobotParams, theta, delta, q_s, th_s, th_p):
    """Stiffnesses and their partials w.r.t. (theta, delta, q_s, th_s, th_p).

    All arrays broadcast over the leading shape of the inputs.  Lengths are
    evaluated exactly as in the solver (no boundary clamping: callers stay
    inside (q_min, L - q_min)).
    """
    th0 = params.theta0
    D = projected_offsets(params, delta)
    sig = np.asarray(delta, dtype=float)[..., None] + params.beta * np.arange(params.n)
    dD = -params.r * np.sin(sig)  # d Delta_i / d delta

    L_i = params.L + D * (np.asarray(theta) - th0)[..., None]
    Lq = params.L - np.asarray(q_s, dtype=float)
    L_si = np.asarray(q_s, dtype=float)[..., None] + D * (np.asarray(th_s) - th0)[..., None]
    L_ei = Lq[..., None] + D * (np.asarray(th_p) - np.asarray(th_s))[..., None]

    EIi, EIp, EIs = params.EI_i, params.EI_p, params.EI_s
    inv_Li2 = EIi / L_i**2
    inv_si2 = EIi / L_si**2
    inv_ei2 = EIi / L_ei**2

    k0 = EIp / params.L + np.sum(EIi / L_i, axis=-1)
    k1 = EIp / Lq + np.sum(EIi / L_ei, axis=-1)
    k2 = EIp / np.asarray(q_s, dtype=float) + np.sum(EIi / L_si, axis=-1)
    ks = EIs / np.asarray(q_s, dtype=float)

    d = {
        "k0": k0, "k1": k1, "k2": k2, "ks": ks,
        "k0_theta": -np.sum(D * inv_Li2, axis=-1),
        "k0_delta": -(np.asarray(theta) - th0) * np.sum(dD * inv_Li2, axis=-1),
        "k1_qs": EIp / Lq**2 + np.sum(inv_ei2, axis=-1),
        "k1_ths": np.sum(D * inv_ei2, axis=-1),
        "k1_thp": -np.sum(D * inv_ei2, axis=-1),
        "k1_delta": -(np.asarray(th_p) - np.asarray(th_s)) * np.sum(dD * inv_ei2, axis=-1),
        "k2_qs": -EIp / np.asarray(q_s, dtype=float) ** 2 - np.sum(inv_si2, axis=-1),
        "k2_ths": -np.sum(D * inv_si2, axis=-1),
        "k2_delta": -(np.asarray(th_s) - th0) * np.sum(dD * inv_si2, axis=-1),
        "ks_qs": -EIs / np.asarray(q_s, dtype=float) ** 2,
    }
    return d


def _phi_gradient_arrays(params: RobotParams, theta, delta, q_s, k: UncertaintyParams,
                         th_s, th_p):
    """Vectorized d phi / d(theta, delta, q_s, k), stacked as (..., 2, 6).

    Implicit differentiation of A(x) C_phi - B(x) = 0 with
    C_phi = S0 phi - C0 = [theta_s, theta_prime].  The balance matrix
    depends on phi both through theta_s (inserted-side lengths) and
    through theta_prime (empty-side lengths), so the system matrix is

        M = A S0 - Gamma_ths [1 0] - Gamma_thp [1 1]

    with Gamma_a = B'_a - A'_a C_phi, and d phi / d a = M^{-1} Gamma_a.
    """
    theta = np.asarray(theta, dtype=float)
    q_s = np.asarray(q_s, dtype=float)
    th0 = params.theta0
    # same boundary clamp as the solver: stiffness lengths saturate at q_min
    # while lambda keeps the raw depth, so boundary samples get their finite
    # limit sensitivities instead of a division by zero
    qs_eff = np.clip(q_s, params.q_min, params.L - params.q_min)
    t = _stiffness_terms(params, theta, delta, qs_eff, th_s, th_p)
    k0, k1, k2, ks = t["k0"], t["k1"], t["k2"], t["ks"]
    C1, C2 = np.asarray(th_s, dtype=float), np.asarray(th_p, dtype=float)

    def gamma(k1_a, k2_a, ks_a, b1_a, b2_a):
        # Gamma_a = B'_a - A'_a C_phi for A'_a built from the stiffness partials
        g1 = b1_a - ((k1_a + k2_a + ks_a) * C1 - k1_a * C2)
        g2 = b2_a - k1_a * (C1 - C2)
        return g1, g2

    zero = np.zeros_like(k0)
    g_th = gamma(zero, zero, zero,
                 -k.k_lambda_theta + zero,
                 t["k0_theta"] * (th0 - theta) - k0)
    g_de = gamma(t["k1_delta"], t["k2_delta"], zero,
                 t["k2_delta"] * th0,
                 t["k0_delta"] * (th0 - theta))
    g_qs = gamma(t["k1_qs"], t["k2_qs"], t["ks_qs"],
                 (t["k2_qs"] + t["ks_qs"]) * th0 - k.k_lambda_q,
                 zero)
    g_ths = gamma(t["k1_ths"], t["k2_ths"], zero, t["k2_ths"] * th0, zero)
    g_thp = gamma(t["k1_thp"], zero, zero, zero, zero)

    # A S0 = [[k2 + ks, -k1], [0, -k1]]
    M = np.empty(np.shape(k0) + (2, 2))
    M[..., 0, 0] = (k2 + ks) - g_ths[0] - g_thp[0]
    M[..., 0, 1] = -k1 - g_thp[0]
    M[..., 1, 0] = -g_ths[1] - g_thp[1]
    M[..., 1, 1] = -k1 - g_thp[1]

    cond = np.linalg.cond(M)
    if np.any(~np.isfinite(cond)) or np.any(cond > _COND_LIMIT):
        raise SingularGradient(
            f"equilibrium sensitivity matrix condition {np.max(cond):.3g} exceeds {_COND_LIMIT:.0e}"
        )

    rhs = np.stack([
        np.stack([g_th[0], g_de[0], g_qs[0],
                  -np.ones_like(k0), -theta, -q_s + zero], axis=-1),
        np.stack([g_th[1], g_de[1], g_qs[1],
                  zero, zero, zero], axis=-1),
    ], axis=-2)  # (..., 2, 6)

    det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    sol = np.empty_like(rhs)
    sol[..., 0, :] = (M[..., 1, 1, None] * rhs[..., 0, :]
                      - M[..., 0, 1, None] * rhs[..., 1, :]) / det[..., None]
    sol[..., 1, :] = (-M[..., 1, 0, None] * rhs[..., 0, :]
                      + M[..., 0, 0, None] * rhs[..., 1, :]) / det[..., None]
    return sol


def solver_matrices(
    params: RobotParams,
    psi: ConfigState,
    q_s: float,
    k: UncertaintyParams,
    phi: EquilibriumConfig,
) -> SolverMatrices:
    """Matrix form of the converged balance: A C_phi = B.

    C_phi = S0 phi - C0 maps phi = (theta_s, theta_eps) to
    (theta_s, theta_prime); the residual A C_phi - B vanishes at the
    solved equilibrium.
    """
    t = _stiffness_terms(params, psi.theta, psi.delta, q_s, phi.theta_s, phi.theta_prime)
    k1, k2, ks, k0 = t["k1"], t["k2"], t["ks"], t["k0"]
    lam = float(uncertainty_lambda(k, q_s, psi.theta))
    A = np.array([[k1 + k2 + ks, -k1], [k1, -k1]])
    B = np.array([
        (k2 + ks) * params.theta0 - lam,
        k0 * (params.theta0 - psi.theta),
    ])
    S0 = np.array([[1.0, 0.0], [1.0, 1.0]])
    C0 = np.array([0.0, params.theta0])
    S1 = np.array([1.0, 0.0])
    C_phi = S0 @ phi.phi() - C0
    return SolverMatrices(A=A, B=B, S0=S0, C0=C0, S1=S1, C_phi=C_phi)


def phi_gradients(
    params: RobotParams,
    psi: ConfigState,
    q_s: float,
    k: UncertaintyParams,
    phi: EquilibriumConfig | None = None,
) -> PhiGradients:
    """Analytic sensitivities of phi at one configuration."""
    if phi is None:
        phi = solve_equilibrium(params, psi, q_s, k)
    sol = _phi_gradient_arrays(
        params, psi.theta, psi.delta, float(q_s), k, phi.theta_s, phi.theta_prime
    )
    return PhiGradients(
        d_phi_d_theta=sol[:, 0].copy(),
        d_phi_d_delta=sol[:, 1].copy(),
        d_phi_d_qs=sol[:, 2].copy(),
        d_phi_d_k=sol[:, 3:6].copy(),
    )


# ---------------------------------------------------------------------------
# pose Jacobians


def _chi_abc(theta):
    """Ratios chi_a, chi_b, chi_c of the per-subsegment partitions.

    chi_a = (u cos t - sin t + 1) / u^2
    chi_b = (u sin t + cos t) / u^2
    chi_c = (sin t - 1) / (-u)          with u = t - pi/2

    evaluated by series within the straight window.
    """
    t = np.asarray(theta, dtype=float)
    u = t - np.pi / 2.0
    near = np.abs(u) < _CHI_SERIES_THRESHOLD
    u_safe = np.where(near, 1.0, u)
    st, ct = np.sin(t), np.cos(t)
    chi_a = np.where(near, -0.5 + u**2 / 8.0 - u**4 / 144.0,
                     (u * ct - st + 1.0) / u_safe**2)
    chi_b = np.where(near, -u / 3.0 + u**3 / 30.0,
                     (u * st + ct) / u_safe**2)
    chi_c = np.where(near, u / 2.0 - u**3 / 24.0,
                     (st - 1.0) / (-u_safe))
    return chi_a, chi_b, chi_c


def jacobian_partitions(theta_i: float, delta_i: float, D_i: float):
    """Velocity partitions of one constant-curvature subsegment.

    Returns (J_v_theta, J_omega_theta, J_v_delta, J_omega_delta), each
    shape (..., 3), for a subsegment of arc length D_i bent to angle
    theta_i in plane delta_i.  Space-frame angular velocity.
    """
    chi_a, chi_b, chi_c = _chi_abc(theta_i)
    t = np.asarray(theta_i, dtype=float)
    d = np.asarray(delta_i, dtype=float)
    Di = np.asarray(D_i, dtype=float)
    st, ct = np.sin(t), np.cos(t)
    sd, cd = np.sin(d), np.cos(d)
    J_v_theta = Di[..., None] * np.stack([cd * chi_a, -sd * chi_a, chi_b], axis=-1)
    J_omega_theta = np.stack([-sd, -cd, np.zeros_like(sd)], axis=-1)
    J_v_delta = Di[..., None] * np.stack([sd * chi_c, cd * chi_c, np.zeros_like(sd)], axis=-1)
    J_omega_delta = np.stack([cd * ct, -sd * ct, st - 1.0], axis=-1)
    return J_v_theta, J_omega_theta, J_v_delta, J_omega_delta


def _xi_jacobian_arrays(params: RobotParams, th_s, th_e, delta, q_s):
    """Vectorized (J_xi_phi (..., 6, 2), J_xi_delta (..., 6), J_xi_qs (..., 6)).

    Chain rule over the two-subsegment composition: a perturbation of the
    separation-plane frame carries the distal subsegment with it, so the
    distal lever arm w = R_c p_g/c couples the inserted-side angular
    partition into the tip translation.
    """
    th_s = np.asarray(th_s, dtype=float)
    th_e = np.asarray(th_e, dtype=float)
    delta = np.asarray(delta, dtype=float)
    q_s = np.asarray(q_s, dtype=float)

    Jvt_s, Jwt_s, Jvd_s, Jwd_s = jacobian_partitions(th_s, delta, q_s)
    L_emp = params.L - q_s
    Jvt_e, Jwt_e, Jvd_e, Jwd_e = jacobian_partitions(th_e, delta, L_emp)

    R_c = segment_rotation(th_s, delta)
    dir_e = arc_direction(th_e, delta)
    p_gc = L_emp[..., None] * dir_e
    w = (R_c @ p_gc[..., None])[..., 0]

    def rotate(v):
        return (R_c @ v[..., None])[..., 0]

    col_s_top = Jvt_s - np.cross(w, Jwt_s)
    col_e_top = rotate(Jvt_e)
    col_e_bot = rotate(Jwt_e)
    J_xi_phi = np.stack([
        np.concatenate([col_s_top, Jwt_s], axis=-1),
        np.concatenate([col_e_top, col_e_bot], axis=-1),
    ], axis=-1)  # (..., 6, 2)

    d_top = Jvd_s - np.cross(w, Jwd_s) + rotate(Jvd_e)
    d_bot = Jwd_s + rotate(Jwd_e)
    J_xi_delta = np.concatenate([d_top, d_bot], axis=-1)

    q_top = arc_direction(th_s, delta) - rotate(dir_e)
    J_xi_qs = np.concatenate([q_top, np.zeros_like(q_top)], axis=-1)
    return J_xi_phi, J_xi_delta, J_xi_qs


def assemble_xi_jacobians(
    params: RobotParams, phi: EquilibriumConfig, delta: float, q_s: float
) -> XiJacobians:
    """Tip-twist Jacobians w.r.t. (phi, delta, q_s) at fixed equilibrium."""
    J_xi_phi, J_xi_delta, J_xi_qs = _xi_jacobian_arrays(
        params, phi.theta_s, phi.theta_eps, float(delta), float(q_s)
    )
    return XiJacobians(J_xi_phi=J_xi_phi, J_xi_delta=J_xi_delta, J_xi_qs=J_xi_qs)


def j_q_psi(params: RobotParams, psi: ConfigState) -> np.ndarray:
    """Secondary-backbone displacement per unit (theta, delta), shape (n, 2).

    Row i differentiates q_i = Delta_i (theta - theta0) = r cos(sigma_i)
    (theta - theta0).
    """
    sig = psi.delta + params.beta * np.arange(params.n)
    return params.r * np.stack([
        np.cos(sig),
        (params.theta0 - psi.theta) * np.sin(sig),
    ], axis=-1)


def _motion_jacobian_arrays(params: RobotParams, theta, delta, q_s, k: UncertaintyParams):
    """Vectorized (J_M (..., 6, n), J_mu (..., 6), J_k (..., 6, 3))."""
    th_s, th_p = _solve_equilibrium_arrays(params, theta, delta, q_s, k)
    theta_b, delta_b, qs_b = np.broadcast_arrays(
        np.asarray(theta, dtype=float),
        np.asarray(delta, dtype=float),
        np.asarray(q_s, dtype=float),
    )
    th_e = th_p + (np.pi / 2.0 - th_s)
    grads = _phi_gradient_arrays(params, theta_b, delta_b, qs_b, k, th_s, th_p)
    J_xi_phi, J_xi_delta, J_xi_qs = _xi_jacobian_arrays(params, th_s, th_e, delta_b, qs_b)

    col_theta = (J_xi_phi @ grads[..., 0:1])[..., 0]
    col_delta = (J_xi_phi @ grads[..., 1:2])[..., 0] + J_xi_delta
    J_psi = np.stack([col_theta, col_delta], axis=-1)  # (..., 6, 2)

    sig = delta_b[..., None] + params.beta * np.arange(params.n)
    Jq = params.r * np.stack([
        np.cos(sig),
        (params.theta0 - theta_b)[..., None] * np.sin(sig),
    ], axis=-1)  # (..., n, 2)
    J_M = J_psi @ np.linalg.pinv(Jq)
    J_mu = (J_xi_phi @ grads[..., 2:3])[..., 0] + J_xi_qs
    J_k = J_xi_phi @ grads[..., 3:6]
    return J_M, J_mu, J_k


def assemble_motion_jacobians(
    params: RobotParams, psi: ConfigState, q_s: float, k: UncertaintyParams
) -> JacobianSet:
    """All tip Jacobians at one configuration.

    J_M: tip twist per secondary-backbone displacement (macro motion),
    through the minimum-norm pseudo-inverse of J_q_psi.
    J_mu: tip twist per insertion depth (micro motion).
    J_k: tip twist per uncertainty parameter, columns ordered
    (k_lambda0, k_lambda_theta, k_lambda_q).
    """
    phi = solve_equilibrium(params, psi, q_s, k)
    grads = phi_gradients(params, psi, q_s, k, phi)
    xi = assemble_xi_jacobians(params, phi, psi.delta, q_s)
    Jq = j_q_psi(params, psi)
    col_theta = xi.J_xi_phi @ grads.d_phi_d_theta
    col_delta = xi.J_xi_phi @ grads.d_phi_d_delta + xi.J_xi_delta
    J_M = np.column_stack([col_theta, col_delta]) @ np.linalg.pinv(Jq)
    J_mu = xi.J_xi_phi @ grads.d_phi_d_qs + xi.J_xi_qs
    J_k = xi.J_xi_phi @ grads.d_phi_d_k
    return JacobianSet(
        J_M=J_M,
        J_mu=J_mu,
        J_k=J_k,
        J_xi_phi=xi.J_xi_phi,
        J_xi_delta=xi.J_xi_delta,
        J_xi_qs=xi.J_xi_qs,
        J_q_psi=Jq,
        phi=phi,
        gradients=grads,
    )


# ---------------------------------------------------------------------------
# finite-difference oracle


def finite_difference_jacobian(f, x, h: float = 1e-6) -> np.ndarray:
    """Central-difference twist Jacobian of a pose-valued map.

    f maps a parameter vector to a Pose; the rotational rows are the
    axis-angle vector of R(x + h e_j) R(x - h e_j)^T over 2h, matching the
    space-frame convention of the analytic Jacobians.
    """
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        pose_p = f(x + e)
        pose_m = f(x - e)
        dv = (pose_p.p - pose_m.p) / (2.0 * h)
        dw = axis_angle_vector(pose_p.R @ pose_m.R.T) / (2.0 * h)
        cols.append(np.concatenate([dv, dw]))
    return np.stack(cols, axis=-1)


def _rel_err(analytic, fd) -> float:
    a = np.asarray(analytic, dtype=float)
    f = np.asarray(fd, dtype=float)
    return float(np.max(np.abs(a - f)) / max(1.0, np.max(np.abs(a))))


def fd_discrepancies(
    params: RobotParams,
    psi: ConfigState,
    q_s: float,
    k: UncertaintyParams,
    h: float = 1e-6,
) -> dict:
    """Max mismatch of every analytic Jacobian against central differences.

    Keys: J_M, J_mu, J_k, J_xi_phi, J_xi_delta, J_xi_qs, d_phi.  Errors
    are absolute for magnitudes below one and relative above, per block.
    """
    js = assemble_motion_jacobians(params, psi, q_s, k)
    phi = js.phi

    def full_pose(x):
        kk = UncertaintyParams(float(x[3]), float(x[4]), float(x[5]))
        return crem_pose(params, ConfigState(float(x[0]), float(x[1])), float(x[2]), kk).tip

    x0 = np.array([psi.theta, psi.delta, q_s, k.k_lambda0, k.k_lambda_theta, k.k_lambda_q])
    fd_full = finite_difference_jacobian(full_pose, x0, h)

    def phi_vec(x):
        kk = UncertaintyParams(float(x[3]), float(x[4]), float(x[5]))
        e = solve_equilibrium(params, ConfigState(float(x[0]), float(x[1])), float(x[2]), kk)
        return e.phi()

    fd_phi = np.stack([
        (phi_vec(x0 + dh) - phi_vec(x0 - dh)) / (2.0 * h)
        for dh in (h * np.eye(6))
    ], axis=-1)

    g = js.gradients
    d_phi_analytic = np.column_stack([
        g.d_phi_d_theta, g.d_phi_d_delta, g.d_phi_d_qs, g.d_phi_d_k
    ])

    from .kinematics import pose_from_phi

    def kin_only(x):
        e = EquilibriumConfig(theta_s=float(x[0]), theta_eps=float(x[1]))
        return pose_from_phi(params, e, float(x[2]), float(x[3])).tip

    y0 = np.array([phi.theta_s, phi.theta_eps, psi.delta, q_s])
    fd_kin = finite_difference_jacobian(kin_only, y0, h)

    return {
        "J_M": max(
            _rel_err(js.J_M @ js.J_q_psi[:, 0], fd_full[:, 0]),
            _rel_err(js.J_M @ js.J_q_psi[:, 1], fd_full[:, 1]),
        ),
        "J_mu": _rel_err(js.J_mu, fd_full[:, 2]),
        "J_k": _rel_err(js.J_k, fd_full[:, 3:6]),
        "J_xi_phi": _rel_err(js.J_xi_phi, fd_kin[:, 0:2]),
        "J_xi_delta": _rel_err(js.J_xi_delta, fd_kin[:, 2]),
        "J_xi_qs": _rel_err(js.J_xi_qs, fd_kin[:, 3]),
        "d_phi": _rel_err(d_phi_analytic, fd_phi),
    }
