"""Conversion between pose labels ([t, q] or [t, R]) and 1D-Up motors.

Quaternions are (w, x, y, z) with the Hamilton convention and act on
vectors as ``q v q*``.  They map onto G(3,0) rotors by

    i -> -e23,  j -> +e13,  k -> -e12,  i.e.  R = w - x e23 + y e13 - z e12

so that ``R v R~`` reproduces the quaternion rotation.
"""

import logging
import math
from typing import NamedTuple

import numpy as np

from . import embed, ga
from .errors import InvalidMotorError, MotorPoseError, ValidationError

log = logging.getLogger(__name__)

QUAT_UNIT_TOL = 1e-6
ROTMAT_TOL = 1e-5
# decode rejects motors with |<M M~>_0 - 1| at or beyond this
DECODE_DEFECT_LIMIT = 0.5
DECODE_RESIDUAL_TOL = 1e-6

MOTOR_BLADES = ("1", "e12", "e13", "e14", "e23", "e24", "e34", "e1234")
MOTOR_SLOTS = np.array([ga.blade_index(b) for b in MOTOR_BLADES])
_ROTOR_SLOTS = np.array([0, 5, 6, 8])


class Quaternion(NamedTuple):
    w: float
    x: float
    y: float
    z: float

    def normalized(self, tol=QUAT_UNIT_TOL):
        q = np.array(self, dtype=float)
        if not np.all(np.isfinite(q)):
            raise ValidationError("quaternion components must be finite")
        n = float(np.linalg.norm(q))
        if abs(n - 1.0) > tol:
            raise ValidationError(f"quaternion is not unit (norm {n!r})")
        return Quaternion(*(q / n))


IDENTITY_QUAT = Quaternion(1.0, 0.0, 0.0, 0.0)


class Rotor3(NamedTuple):
    """Rotor ``scalar + b12 e12 + b13 e13 + b23 e23`` of 3D space."""

    scalar: float
    b12: float
    b13: float
    b23: float

    def to_multivector(self):
        c = np.zeros(16)
        c[_ROTOR_SLOTS] = self
        return ga.Multivector(c)


class Motor(NamedTuple):
    """The 8 motor coefficients, ordered 1, e12, e13, e14, e23, e24, e34, e1234."""

    alpha: float
    b12: float
    b13: float
    b14: float
    b23: float
    b24: float
    b34: float
    gamma: float

    @classmethod
    def from_multivector(cls, m):
        c = ga.as_multivector(m).coeffs
        return cls(*(float(v) for v in c[MOTOR_SLOTS]))

    def to_multivector(self):
        c = np.zeros(16)
        c[MOTOR_SLOTS] = self
        return ga.Multivector(c)

    def __neg__(self):
        return Motor(*(-v for v in self))


IDENTITY_MOTOR = Motor(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


class Pose(NamedTuple):
    t: np.ndarray
    q: Quaternion


class DecodedMotor(NamedTuple):
    pose: Pose
    rotor: Rotor3
    residual: float  # size of T~_d M outside {1, e12, e13, e23}
    unit_defect: float  # |<M M~>_0 - 1| before renormalization


def make_pose(t, q):
    """Validated :class:`Pose` with a unit, sign-canonical quaternion."""
    t = np.array(t, dtype=float).reshape(-1)
    if t.shape != (3,) or not np.all(np.isfinite(t)):
        raise ValidationError("translation must be a finite 3-vector")
    t.setflags(write=False)
    return Pose(t, canonicalize_quat(Quaternion(*q).normalized()))


def canonicalize_quat(q):
    """Pick the representative with w > 0 (w == 0: first nonzero of x, y, z > 0)."""
    # "+ 0.0" folds negative zeros so written files never show "-0"
    q = Quaternion(*(float(v) + 0.0 for v in q))
    for v in q:
        if v != 0.0:
            return q if v > 0.0 else Quaternion(*(-c + 0.0 for c in q))
    raise ValidationError("zero quaternion")


def quat_multiply(p, q):
    pw, px, py, pz = p
    qw, qx, qy, qz = q
    return Quaternion(
        pw * qw - px * qx - py * qy - pz * qz,
        pw * qx + px * qw + py * qz - pz * qy,
        pw * qy - px * qz + py * qw + pz * qx,
        pw * qz + px * qy - py * qx + pz * qw,
    )


def quat_rotate(q, v):
    """Rotate vector ``v`` by ``q v q*``."""
    w, x, y, z = q
    conj = Quaternion(w, -x, -y, -z)
    out = quat_multiply(quat_multiply(q, Quaternion(0.0, *v)), conj)
    return np.array(out[1:])


def quat_to_rotor(q):
    w, x, y, z = (float(v) for v in Quaternion(*q).normalized())
    return Rotor3(w, -z + 0.0, y, -x + 0.0)


def rotor_to_quat(r):
    s, b12, b13, b23 = r
    return Quaternion(s, -b23, b13, -b12)


def rotor_rotate(r, v):
    """``R v R~`` computed in G(4,0); returns the e1, e2, e3 coefficients."""
    m = ga.as_multivector(Rotor3(*r))
    x = np.zeros(16)
    x[1:4] = v
    out = ga.geometric_product(ga.geometric_product(m.coeffs, x), ga.reverse(m.coeffs))
    return out[1:4]


def quat_to_rotmat(q):
    w, x, y, z = Quaternion(*q).normalized()
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def check_rotmat(m, tol=ROTMAT_TOL):
    m = np.asarray(m, dtype=float)
    if m.shape == (9,):
        m = m.reshape(3, 3)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        raise ValidationError("rotation matrix must be a finite 3x3 array")
    ortho = float(np.abs(m.T @ m - np.eye(3)).max())
    if ortho > tol:
        raise ValidationError(f"rotation matrix is not orthonormal (max |M^T M - I| = {ortho:.3g})")
    det = float(np.linalg.det(m))
    if abs(det - 1.0) > tol:
        raise ValidationError(f"rotation matrix determinant is {det!r}, expected +1")
    return m


def rotmat_to_quat(m):
    """Unit quaternion of a rotation matrix (row-major 3x3 or 9 values).

    Four-branch extraction keyed on the largest of trace, m00, m11, m22 so
    the square root never sees a small argument.  Result is sign-canonical.
    """
    m = check_rotmat(m)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    k = int(np.argmax([tr, m[0, 0], m[1, 1], m[2, 2]]))
    if k == 0:
        s = 2.0 * math.sqrt(1.0 + tr)
        q = (0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s)
    elif k == 1:
        s = 2.0 * math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
        q = ((m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s)
    elif k == 2:
        s = 2.0 * math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
        q = ((m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s)
    else:
        s = 2.0 * math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
        q = ((m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s)
    q = np.array(q)
    return canonicalize_quat(q / np.linalg.norm(q))


def canonicalize_motor(M):
    """Return whichever of M, -M has alpha > 0.

    With alpha == 0 the first nonzero coefficient (in storage order) decides.
    """
    M = Motor(*(float(v) + 0.0 for v in M))
    for v in M:
        if v != 0.0:
            return M if v > 0.0 else Motor(*(-c + 0.0 for c in M))
    raise ValidationError("cannot canonicalize the zero motor")


def encode_pose(pose, lam, canonical=True):
    """Motor ``M = T_t R`` for a pose; sign-canonical unless ``canonical=False``."""
    if not isinstance(pose, Pose):
        pose = make_pose(*pose)
    t, q = pose
    T = embed.translation_rotor(t, lam).to_multivector()
    R = quat_to_rotor(q).to_multivector()
    M = Motor.from_multivector(T * R)
    return canonicalize_motor(M) if canonical else M


def unit_defect(M):
    """|<M M~>_0 - 1|."""
    m = ga.as_multivector(M)
    return abs(ga.scalar_part(m * ~m) - 1.0)


def normalize_motor(M):
    """Project an even multivector onto the unit motors (M M~ = 1 exactly).

    For an even element, M M~ = a P+ + b P- with the central idempotents
    P+- = (1 +- e1234)/2, so rescaling each half by 1/sqrt(a), 1/sqrt(b)
    removes both the scalar and the e1234 defect.  With no e1234 defect this
    is plain division by sqrt(<M M~>_0).
    """
    m = ga.as_multivector(M)
    mm = (m * ~m).coeffs
    s, p = mm[0], mm[15]
    a, b = s + p, s - p
    if a <= 0.0 or b <= 0.0:
        raise InvalidMotorError("motor has a null half; it cannot be normalized")
    fa, fb = 1.0 / math.sqrt(a), 1.0 / math.sqrt(b)
    scale = ga.Multivector.from_blades(s=0.5 * (fa + fb), e1234=0.5 * (fa - fb))
    return Motor.from_multivector(m * scale)


def decode_motor(M, lam):
    """Recover the pose encoded by a motor.

    1. D = M e4 M~           (the origin carried by the motor)
    2. d = h^-1(D)           (back to Euclidean space)
    3. T_d = g(d)            (translation rotor of d)
    4. R = T~_d M            (what is left is the rotation)

    Motors with 0 < |<M M~>_0 - 1| < 0.5 are normalized first and the defect
    is reported; anything further from unit is rejected.
    """
    lam = embed.check_curvature(lam)
    M = Motor(*(float(v) for v in M))
    if not all(math.isfinite(v) for v in M):
        raise ValidationError("motor coefficients must be finite")
    m = M.to_multivector()
    mm = ga.scalar_part(m * ~m)
    defect = abs(mm - 1.0)
    if not defect < DECODE_DEFECT_LIMIT:
        raise InvalidMotorError(f"motor is too far from unit (<M M~>_0 = {mm!r})")
    unit = normalize_motor(M).to_multivector()

    D = embed.apply_motor(unit, ga.E4.coeffs[1:5])
    d = embed.down_project(D, lam)
    T_d = embed.translation_rotor(d, lam).to_multivector()
    R = (~T_d * unit).coeffs

    rest = R.copy()
    rest[_ROTOR_SLOTS] = 0.0
    residual = float(np.linalg.norm(rest))
    if residual > DECODE_RESIDUAL_TOL:
        raise MotorPoseError(f"decode left a non-rotor residual of {residual:.3g}")
    rotor = Rotor3(*(float(v) for v in R[_ROTOR_SLOTS]))
    q = canonicalize_quat(Quaternion(*rotor_to_quat(rotor)).normalized(tol=1e-6))
    d = d.copy()
    d.setflags(write=False)
    return DecodedMotor(Pose(d, q), rotor, residual, defect)


def rotation_angle_deg(q1, q2):
    """Angle of the relative rotation between two quaternions, in degrees.

    Uses atan2 on the relative quaternion so angles near zero keep full
    precision (arccos of a dot product would lose half the digits).
    """
    rel = quat_multiply(Quaternion(q1[0], -q1[1], -q1[2], -q1[3]), q2)
    return math.degrees(2.0 * math.atan2(math.hypot(*rel[1:]), abs(rel[0])))
