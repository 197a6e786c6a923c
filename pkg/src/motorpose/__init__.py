"""Camera poses as motors of the 1D-Up conformal model G(4,0).

Converts pose labels (translation + quaternion, or a 4x4 camera matrix) to
8-coefficient motors and back, and scores motor predictions with positional
and rotational error metrics.
"""

from .codec import (
    Motor,
    Pose,
    Quaternion,
    Rotor3,
    canonicalize_motor,
    decode_motor,
    encode_pose,
    make_pose,
    quat_to_rotor,
    rotmat_to_quat,
)
from .dataio import lambda_for_area, read_motor_file, write_motor_file
from .embed import apply_motor, down_project, trace_deviation, translation_rotor, up_project
from .errors import (
    DegeneratePointError,
    InputError,
    InvalidMotorError,
    MotorPoseError,
    ParseError,
    ValidationError,
)
from .ga import Multivector, geometric_product, grade_project, norm, reverse
from .metrics import evaluate_run, motor_mse, pointcloud_mse, positional_error, rotational_error

__version__ = "0.1.0"
