"""1D-Up embedding of Euclidean 3D space onto the unit sphere in G(4,0).

Points are plain float arrays: a Euclidean point has shape (3,), a sphere
point has shape (4,) holding its e1, e2, e3, e4 coefficients.  ``lam`` is
the curvature length scale (same units as the points, meters for the pose
datasets).
"""

import logging
import math
from typing import NamedTuple

import numpy as np

from . import ga
from .errors import DegeneratePointError, InvalidMotorError, ValidationError

log = logging.getLogger(__name__)

# 1 + v4 below this is treated as the point at infinity
ANTIPODE_EPS = 1e-12
# motors closer than this to M~M = 1 are silently rescaled before use
RENORM_TOL = 1e-6
# largest non-vector residue tolerated in a sandwich result
SANDWICH_TOL = 1e-6

_VECTOR_SLOTS = np.array([1, 2, 3, 4])


def check_curvature(lam):
    """Return ``lam`` as a float, or raise if it is not a positive finite length."""
    try:
        value = float(lam)
    except (TypeError, ValueError):
        raise ValidationError(f"curvature must be a number, got {lam!r}") from None
    if not math.isfinite(value) or value <= 0.0:
        raise ValidationError(f"curvature must be positive and finite, got {lam!r}")
    return value


def _point3(x):
    p = np.asarray(x, dtype=float)
    if p.shape[-1:] != (3,):
        raise ValidationError(f"expected a 3-vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValidationError("point coordinates must be finite")
    return p


class TranslationRotor(NamedTuple):
    """Rotor ``scalar + b14 e14 + b24 e24 + b34 e34`` effecting a translation."""

    scalar: float
    b14: float
    b24: float
    b34: float

    def to_multivector(self):
        c = np.zeros(16)
        c[[0, 7, 9, 10]] = self
        return ga.Multivector(c)


def up_project(x, lam):
    """Embed Euclidean point(s) ``x`` on the unit 4-sphere.

    h(x) = 2 lam x / (lam^2 + |x|^2) + (lam^2 - |x|^2) / (lam^2 + |x|^2) e4

    Works on a single point (3,) or a batch (N, 3).
    """
    lam = check_curvature(lam)
    x = _point3(x)
    # scale by lam first so huge lam / tiny x does not lose the ratio
    u = x / lam
    r2 = np.sum(u * u, axis=-1, keepdims=True)
    den = 1.0 + r2
    return np.concatenate([2.0 * u / den, (1.0 - r2) / den], axis=-1)


def down_project(X, lam):
    """Inverse of :func:`up_project`: ``x = lam (v1, v2, v3) / (1 + v4)``."""
    lam = check_curvature(lam)
    X = np.asarray(X, dtype=float)
    if X.shape[-1:] != (4,):
        raise ValidationError(f"expected a 4-vector, got shape {X.shape}")
    den = 1.0 + X[..., 3:]
    if np.any(den < ANTIPODE_EPS):
        raise DegeneratePointError("point maps to the antipode of the origin (point at infinity)")
    return lam * X[..., :3] / den


def translation_rotor(a, lam):
    """T_a = (lam + a e4) / sqrt(lam^2 + |a|^2)."""
    lam = check_curvature(lam)
    u = _point3(a) / lam
    if u.ndim != 1:
        raise ValidationError("translation_rotor takes a single 3-vector")
    s = 1.0 / math.sqrt(1.0 + float(u @ u))
    return TranslationRotor(s, float(u[0] * s), float(u[1] * s), float(u[2] * s))


def _prepared_motor(M):
    m = ga.as_multivector(M)
    mm = ga.scalar_part(ga.geometric_product(m, ga.reverse(m)))
    if abs(mm - 1.0) < RENORM_TOL and mm != 1.0:
        m = m / math.sqrt(mm)
    return m


def sandwich(M, X):
    """``M X M~`` for a single sphere point, returning (vector part, residual).

    ``residual`` is the norm of everything the sandwich left outside grade 1.
    """
    m = _prepared_motor(M)
    v = np.zeros(16)
    v[_VECTOR_SLOTS] = np.asarray(X, dtype=float)
    out = ga.geometric_product(ga.geometric_product(m.coeffs, v), ga.reverse(m.coeffs))
    vec = out[_VECTOR_SLOTS].copy()
    out[_VECTOR_SLOTS] = 0.0
    return vec, float(np.linalg.norm(out))


def apply_motor(M, X):
    """Move sphere point ``X`` rigidly: ``X' = M X M~``.

    Near-unit motors (|<M M~>_0 - 1| < 1e-6) are rescaled first.  Raises
    :class:`InvalidMotorError` if the result is not a pure vector.
    """
    X = np.asarray(X, dtype=float)
    if X.shape != (4,) or not np.all(np.isfinite(X)):
        raise ValidationError("X must be a finite 4-vector")
    if abs(float(X @ X) - 1.0) > 1e-9:
        raise ValidationError(f"X must lie on the unit sphere (|X|^2 = {float(X @ X)!r})")
    vec, residual = sandwich(M, X)
    if residual > SANDWICH_TOL:
        raise InvalidMotorError(f"sandwich product has a non-vector part of size {residual:.3g}")
    if residual > 1e-10:
        log.debug("sandwich residual %.3g outside grade 1", residual)
    return vec


def motor_matrix(M):
    """4x4 matrix of the linear map ``X -> M X M~`` on grade-1 coefficients.

    Used to push whole point clouds through a motor in one matmul.  Column k
    is the sandwich of basis vector e_(k+1).
    """
    m = _prepared_motor(M)
    basis = np.zeros((4, 16))
    basis[np.arange(4), _VECTOR_SLOTS] = 1.0
    out = ga.geometric_product(ga.geometric_product(m.coeffs, basis), ga.reverse(m.coeffs))
    cols = out[:, _VECTOR_SLOTS]
    out[:, _VECTOR_SLOTS] = 0.0
    residual = float(np.abs(out).max())
    if residual > SANDWICH_TOL:
        raise InvalidMotorError(f"sandwich product has a non-vector part of size {residual:.3g}")
    return cols.T


def spherical_trace(t, lam):
    """Sphere-side camera position rescaled by lam/2 so it is comparable to ``t``.

    Equals ``t * lam^2 / (lam^2 + |t|^2)``, which tends to ``t`` as lam grows.
    """
    X = up_project(t, lam)
    return 0.5 * check_curvature(lam) * X[..., :3]


def trace_deviation(t, lam):
    """Relative shrinkage |t|^2 / (lam^2 + |t|^2) of the spherical trace."""
    lam = check_curvature(lam)
    u = _point3(t) / lam
    r2 = np.sum(u * u, axis=-1)
    out = r2 / (1.0 + r2)
    return float(out) if np.ndim(out) == 0 else out
