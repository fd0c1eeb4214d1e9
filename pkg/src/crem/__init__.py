"""Equilibrium-modulation continuum robot: model, kinematics, Jacobians,
and calibration."""

__version__ = "0.1.0"

from .errors import (
    CremError,
    FrameError,
    InvalidCutoff,
    NoConvergence,
    NonPhysicalLength,
    ParseError,
    SingularGradient,
    SingularInsertion,
    SingularNormalEquations,
    ValidationError,
)
from .model import (
    ConfigState,
    EquilibriumConfig,
    InsertionState,
    RobotParams,
    StiffnessBundle,
    UncertaintyParams,
    backbone_lengths,
    equilibrium_moments,
    projected_offsets,
    solve_equilibrium,
    stiffnesses,
    subsegment_lengths,
    uncertainty_lambda,
)
from .kinematics import (
    Pose,
    SegmentedPose,
    compose,
    crem_pose,
    micro_trajectory,
    pose_from_phi,
    segment_pose,
)
from .differential import (
    JacobianSet,
    PhiGradients,
    SolverMatrices,
    XiJacobians,
    assemble_motion_jacobians,
    assemble_xi_jacobians,
    fd_discrepancies,
    finite_difference_jacobian,
    j_q_psi,
    jacobian_partitions,
    phi_gradients,
    solver_matrices,
)
from .calibration import (
    CalibrationConfig,
    CalibrationResult,
    IterationRecord,
    Measurement,
    aggregate,
    default_weight_blocks,
    direction_reversals,
    identification_jacobian,
    nls_estimate,
    pose_error,
    position_rmse_um,
    principal_direction,
    split_at_turning_point,
    turning_point_index,
)
from .dataio import (
    RobotConfig,
    TrajectoryRecord,
    default_params,
    generate_synthetic,
    load_dataset,
    load_robot_config,
    read_trajectory,
    smooth_trajectory,
    write_robot_config,
    write_trajectory,
)
