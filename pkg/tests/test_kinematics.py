import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from crem import (
    ConfigState,
    EquilibriumConfig,
    RobotParams,
    UncertaintyParams,
    ValidationError,
    compose,
    crem_pose,
    micro_trajectory,
    pose_from_phi,
    segment_pose,
    solve_equilibrium,
)
from crem.kinematics import Pose, arc_direction, segment_rotation

TH0 = np.pi / 2

THETAS = st.floats(0.05, np.pi - 0.05)
DELTAS = st.floats(-np.pi, np.pi, exclude_min=True)


def arc_oracle(L_x, theta_x, delta_x):
    """Tip position from the explicit arc construction.

    The bending plane makes angle delta with x_b.  In that plane the arc
    has radius rho = L_x / (pi/2 - theta_x), starts tangent to z_b, and
    subtends angle (pi/2 - theta_x).
    """
    ang = TH0 - theta_x
    rho = L_x / ang
    in_plane = np.array([rho * (1 - np.cos(ang)), rho * np.sin(ang)])
    return np.array(
        [np.cos(delta_x) * in_plane[0], -np.sin(delta_x) * in_plane[0], in_plane[1]]
    )


# ---------------------------------------------------------------------------
# single segment


def test_straight_segment():
    pose = segment_pose(44.3, TH0, 1.234)
    assert_allclose(pose.p, [0.0, 0.0, 44.3], atol=0)
    # Rz(-d) Ry(0) Rz(d) collapses to identity only to rounding
    assert_allclose(pose.R, np.eye(3), atol=1e-15)


def test_quarter_turn_segment():
    pose = segment_pose(44.3, 0.0, 0.0)
    assert_allclose(pose.p, [2 * 44.3 / np.pi, 0.0, 2 * 44.3 / np.pi], rtol=1e-12)


def test_bent_segment_matches_arc_geometry():
    for theta in np.radians([10, 30, 60, 120, 170]):
        for delta in np.radians([0, 40, -75, 180]):
            pose = segment_pose(44.3, theta, delta)
            assert_allclose(pose.p, arc_oracle(44.3, theta, delta), atol=1e-9)


@given(L_x=st.floats(0.0, 100.0), theta=THETAS, delta=DELTAS)
@settings(max_examples=150, deadline=None)
def test_segment_rotation_is_orthonormal(L_x, theta, delta):
    pose = segment_pose(L_x, theta, delta)
    pose.validate(tol=1e-12)


def test_series_window_continuity():
    # the series branch (just inside the window) and the closed form (just
    # outside) must both match the arc construction at their own angles,
    # so the seam introduces no jump
    for sign in (+1.0, -1.0):
        for off in (0.99e-4, 1.01e-4):
            theta = TH0 + sign * off
            pose = segment_pose(44.3, theta, 0.3)
            assert np.linalg.norm(pose.p - arc_oracle(44.3, theta, 0.3)) < 1e-9


def test_zero_length_segment():
    pose = segment_pose(0.0, 1.0, 0.5)
    assert_allclose(pose.p, 0.0, atol=0)
    pose.validate()


def test_negative_length_rejected():
    with pytest.raises(ValidationError):
        segment_pose(-1.0, 1.0, 0.0)


def test_rotation_fixes_delta_axis():
    # the composed rotation leaves the bending-plane normal's projection
    # consistent: R = Rz(-d) Ry(pi/2 - t) Rz(d)
    theta, delta = 0.9, 0.7
    R = segment_rotation(theta, delta)
    ez = np.array([0.0, 0.0, 1.0])
    tip_dir = R @ ez
    # tip tangent lies in the bending plane spanned by (cos d, -sin d, 0) and z
    normal = np.array([np.sin(delta), np.cos(delta), 0.0])
    assert abs(tip_dir @ normal) < 1e-12


def test_arc_direction_matches_position():
    p = segment_pose(7.0, 0.8, -0.4).p
    assert_allclose(7.0 * arc_direction(0.8, -0.4), p, atol=1e-14)


# ---------------------------------------------------------------------------
# two-subsegment composition


def test_compose_identity():
    a = segment_pose(11.0, 0.9, 0.2)
    ident = Pose(p=np.zeros(3), R=np.eye(3))
    assert_allclose(compose(a, ident).p, a.p, atol=0)
    assert_allclose(compose(ident, a).p, a.p, atol=0)


@given(theta=st.floats(np.radians(15), np.radians(160)), fq=st.floats(0, 1),
       delta=DELTAS)
@settings(max_examples=100, deadline=None)
def test_subdivision_identity(theta, fq, delta):
    # splitting a constant-curvature arc at any point reproduces the whole
    L, q_s = 44.3, 44.3 * fq
    th_s = TH0 + (theta - TH0) * q_s / L
    th_eps = theta - th_s + TH0
    first = segment_pose(q_s, th_s, delta)
    second = segment_pose(L - q_s, th_eps, delta)
    whole = segment_pose(L, theta, delta)
    got = compose(first, second)
    assert np.linalg.norm(got.p - whole.p) < 1e-9
    assert np.max(np.abs(got.R - whole.R)) < 1e-9


def test_crem_pose_straight(bench, k_zero):
    for q_s in (0.0, 10.0, 44.3):
        sp = crem_pose(bench, ConfigState(TH0, 0.8), q_s, k_zero)
        assert_allclose(sp.tip.p, [0.0, 0.0, 44.3], atol=1e-12)
        assert_allclose(sp.tip.R, np.eye(3), atol=1e-12)


def test_crem_pose_zero_wire_neutrality(k_zero):
    p = RobotParams(L=44.3, r=3.0, E_p=41000.0, E_i=41000.0, E_s=0.0,
                    I_p=0.0312, I_i=0.0312, I_s=0.0)
    ref = segment_pose(44.3, np.radians(30), 0.0)
    sp = crem_pose(p, ConfigState(np.radians(30), 0.0), 20.0, k_zero)
    assert np.linalg.norm(sp.tip.p - ref.p) < 1e-9


def test_crem_pose_composition_consistency(bench, k_cal):
    psi = ConfigState(np.radians(40), 0.5)
    sp = crem_pose(bench, psi, 17.0, k_cal)
    again = compose(sp.separation, sp.distal)
    assert_allclose(sp.tip.p, again.p, atol=0)
    assert_allclose(sp.tip.homogeneous()[:3, :3], sp.tip.R, atol=0)
    sp.tip.validate(tol=1e-12)


def test_planarity_of_micro_trajectory(bench, k_cal):
    # fixed delta keeps all tip positions in the bending plane
    delta = np.radians(40)
    qs = np.linspace(0.0, 40.0, 50)
    pos, _, _ = micro_trajectory(bench, ConfigState(np.radians(30), delta), qs, k_cal)
    normal = np.array([np.sin(delta), np.cos(delta), 0.0])
    assert np.max(np.abs(pos @ normal)) < 1e-9


def test_pose_from_phi_validates_range(bench):
    phi = EquilibriumConfig(theta_s=1.2, theta_eps=1.3)
    with pytest.raises(ValidationError):
        pose_from_phi(bench, phi, 0.0, -0.1)
    with pytest.raises(ValidationError):
        pose_from_phi(bench, phi, 0.0, bench.L + 0.1)


def test_pose_from_phi_matches_crem_pose(bench, k_cal):
    psi = ConfigState(np.radians(35), 0.2)
    phi = solve_equilibrium(bench, psi, 12.0, k_cal)
    a = pose_from_phi(bench, phi, psi.delta, 12.0)
    b = crem_pose(bench, psi, 12.0, k_cal)
    assert_allclose(a.tip.p, b.tip.p, atol=0)


def test_micro_trajectory_shapes(bench, k_zero):
    qs = np.linspace(0.0, 40.0, 7)
    pos, th_s, th_p = micro_trajectory(bench, ConfigState(1.0, 0.0), qs, k_zero)
    assert pos.shape == (7, 3)
    assert th_s.shape == (7,)
    assert th_p.shape == (7,)
    # batch output agrees with scalar solves
    sp = crem_pose(bench, ConfigState(1.0, 0.0), qs[3], k_zero)
    assert_allclose(pos[3], sp.tip.p, atol=1e-12)
