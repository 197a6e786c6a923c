"""Pose-error metrics, the motor MSE loss, and run-level aggregation."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import codec, embed
from .errors import InputError, MotorPoseError, ValidationError

log = logging.getLogger(__name__)

ROTOR_UNIT_TOL = 1e-6
HIST_BINS = 50
HIST_PERCENTILE = 99.0
DEFAULT_THRESHOLDS = (10.0, 10.0)


def positional_error(d_hat, d):
    """L1 distance ``||d_hat - d||_1`` between two positions, in meters."""
    d_hat = np.asarray(d_hat, dtype=float)
    d = np.asarray(d, dtype=float)
    if d_hat.shape != (3,) or d.shape != (3,):
        raise ValidationError("positions must be 3-vectors")
    return float(np.abs(d_hat - d).sum())


def rotational_error(R, R_hat):
    """``arccos <R R_hat~>_0`` in degrees, always in [0, 180].

    This is half of the relative rotation angle (a 90 degree offset scores
    45).  For rotors ``<R R_hat~>_0`` is the dot product of the coefficient
    4-vectors, so the angle is evaluated as the angle between them with
    Kahan's formula ``2 atan2(|u|v| - v|u||, |u|v| + v|u||)``.  That equals
    the clamped arccos for unit rotors, keeps full precision near 0 and 180,
    and is exactly 0 for identical inputs.
    """
    R = np.array(codec.Rotor3(*R), dtype=float)
    R_hat = np.array(codec.Rotor3(*R_hat), dtype=float)
    norms = []
    for name, r in (("R", R), ("R_hat", R_hat)):
        n = float(np.linalg.norm(r))
        if not math.isfinite(n) or abs(n - 1.0) > ROTOR_UNIT_TOL:
            raise ValidationError(f"{name} is not a unit rotor (norm {n!r})")
        norms.append(n)
    u, v = R * norms[1], R_hat * norms[0]
    return math.degrees(2.0 * math.atan2(np.linalg.norm(u - v), np.linalg.norm(u + v)))


def motor_mse(M_hat, M):
    """Mean squared difference over the 8 motor coefficients."""
    a = np.asarray(tuple(M_hat), dtype=float)
    b = np.asarray(tuple(M), dtype=float)
    if a.shape != (8,) or b.shape != (8,):
        raise ValidationError("motors have 8 coefficients")
    return float(np.mean((a - b) ** 2))


def median(values):
    """Order-statistic median; mean of the middle two for even counts."""
    x = np.sort(np.asarray(values, dtype=float))
    n = x.size
    if n == 0:
        return math.nan
    mid = n // 2
    return float(x[mid]) if n % 2 else float(0.5 * (x[mid - 1] + x[mid]))


def histogram(values, bins=HIST_BINS, percentile=HIST_PERCENTILE):
    """Uniform bins from 0 to the given percentile; larger values land in the last bin.

    Returns (edges, fractions) with fractions summing to 1.
    """
    x = np.asarray(values, dtype=float)
    top = float(np.percentile(x, percentile)) if x.size else 0.0
    if not top > 0.0:
        top = 1.0
    edges = np.linspace(0.0, top, bins + 1)
    counts, _ = np.histogram(np.clip(x, 0.0, top), bins=edges)
    total = counts.sum()
    frac = counts / total if total else counts.astype(float)
    return edges, frac


def pearson(x, y):
    """Pearson correlation, or None when either sample has zero variance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        return None
    dx = x - x.mean()
    dy = y - y.mean()
    den = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if den == 0.0:
        return None
    return float(np.clip((dx @ dy) / den, -1.0, 1.0))


@dataclass(frozen=True)
class FrameErrors:
    frame_id: str
    err_pos: float
    err_rot: float
    motor_mse: float
    unit_defect: float


@dataclass
class EvalReport:
    lam: float
    thresholds: tuple
    median_pos: float
    median_rot: float
    pct_within: float
    histogram_pos: tuple
    histogram_rot: tuple
    cdf_pos: np.ndarray
    cdf_rot: np.ndarray
    pearson_pos_rot: float | None
    per_frame: list
    excluded: list = field(default_factory=list)  # (frame_id, reason)

    def within(self, pos_thresh, rot_thresh):
        """Percentage of evaluated frames with err_pos < pos_thresh and err_rot < rot_thresh."""
        return pct_within(self.per_frame, pos_thresh, rot_thresh)

    def to_dict(self):
        def hist(h):
            edges, frac = h
            return {"edges": [float(e) for e in edges], "fractions": [float(f) for f in frac]}

        return {
            "lambda": self.lam,
            "n_frames": len(self.per_frame),
            "n_excluded": len(self.excluded),
            "thresholds": {"meters": self.thresholds[0], "degrees": self.thresholds[1]},
            "median_pos": _finite_or_none(self.median_pos),
            "median_rot": _finite_or_none(self.median_rot),
            "pct_within": _finite_or_none(self.pct_within),
            "pearson_pos_rot": self.pearson_pos_rot,
            "histogram_pos": hist(self.histogram_pos),
            "histogram_rot": hist(self.histogram_rot),
            "cdf_pos": [float(v) for v in self.cdf_pos],
            "cdf_rot": [float(v) for v in self.cdf_rot],
            "per_frame": [
                {
                    "frame_id": f.frame_id,
                    "err_pos": f.err_pos,
                    "err_rot": f.err_rot,
                    "motor_mse": f.motor_mse,
                    "unit_defect": f.unit_defect,
                }
                for f in self.per_frame
            ],
            "excluded": [{"frame_id": fid, "reason": why} for fid, why in self.excluded],
        }


def _finite_or_none(x):
    return float(x) if math.isfinite(x) else None


def pct_within(frames, pos_thresh, rot_thresh):
    if not frames:
        return math.nan
    hits = sum(1 for f in frames if f.err_pos < pos_thresh and f.err_rot < rot_thresh)
    return 100.0 * hits / len(frames)


def _as_pairs(records):
    out = []
    for r in records:
        if hasattr(r, "frame_id"):
            out.append((r.frame_id, codec.Motor(*r.motor)))
        else:
            fid, m = r
            out.append((fid, codec.Motor(*m)))
    return out


def _duplicates(ids):
    seen, dup = set(), []
    for i in ids:
        if i in seen and i not in dup:
            dup.append(i)
        seen.add(i)
    return dup


def frame_errors(frame_id, M_hat, M, lam):
    """Decode both motors and compute every per-frame error."""
    dec_hat = codec.decode_motor(M_hat, lam)
    dec = codec.decode_motor(M, lam)
    return FrameErrors(
        frame_id=frame_id,
        err_pos=positional_error(dec_hat.pose.t, dec.pose.t),
        err_rot=rotational_error(dec.rotor, dec_hat.rotor),
        motor_mse=motor_mse(M_hat, M),
        unit_defect=dec_hat.unit_defect,
    )


def evaluate_run(pred, gt, lam, thresholds=DEFAULT_THRESHOLDS):
    """Score predicted motors against ground truth.

    ``pred`` and ``gt`` are sequences of (frame_id, Motor) pairs or motor
    records.  Frames that fail to decode are listed in ``excluded`` and left
    out of every aggregate.
    """
    lam = embed.check_curvature(lam)
    pred = _as_pairs(pred)
    gt = _as_pairs(gt)
    for label, rows in (("prediction", pred), ("ground truth", gt)):
        dup = _duplicates(fid for fid, _ in rows)
        if dup:
            raise InputError(f"duplicate frame ids in {label}: {dup[:10]}", dup)
    truth = dict(gt)
    missing = [fid for fid, _ in pred if fid not in truth]
    if missing:
        raise InputError(f"{len(missing)} predicted frames have no ground truth: {missing[:10]}", missing)

    frames, excluded = [], []
    for fid, m_hat in sorted(pred, key=lambda r: r[0]):
        try:
            frames.append(frame_errors(fid, m_hat, truth[fid], lam))
        except MotorPoseError as exc:
            log.warning("frame %s excluded: %s", fid, exc)
            excluded.append((fid, str(exc)))
    if excluded:
        log.warning("%d of %d frames excluded from aggregates", len(excluded), len(pred))

    pos = np.array([f.err_pos for f in frames])
    rot = np.array([f.err_rot for f in frames])
    return EvalReport(
        lam=lam,
        thresholds=tuple(float(v) for v in thresholds),
        median_pos=median(pos),
        median_rot=median(rot),
        pct_within=pct_within(frames, *thresholds),
        histogram_pos=histogram(pos),
        histogram_rot=histogram(rot),
        cdf_pos=np.sort(pos),
        cdf_rot=np.sort(rot),
        pearson_pos_rot=pearson(pos, rot),
        per_frame=frames,
        excluded=excluded,
    )


def transform_cloud(cloud, M, lam):
    """Up-project, move by ``M``, and down-project every point of a cloud.

    Points that land on the antipode come back as NaN rows.
    """
    lam = embed.check_curvature(lam)
    pts = np.asarray(cloud, dtype=float).reshape(-1, 3)
    X = embed.up_project(pts, lam)
    moved = X @ embed.motor_matrix(codec.normalize_motor(M).to_multivector()).T
    den = 1.0 + moved[:, 3:]
    out = lam * moved[:, :3] / np.where(den < embed.ANTIPODE_EPS, np.nan, den)
    return out


def pointcloud_errors(cloud, M, M_hat, lam):
    """Per-point squared distance between the cloud moved by ``M`` and by ``M_hat``.

    NaN marks points that hit the antipode under either motor.
    """
    cloud = np.asarray(cloud, dtype=float).reshape(-1, 3)
    if cloud.shape[0] == 0:
        raise ValidationError("point cloud is empty")
    a = transform_cloud(cloud, M, lam)
    b = transform_cloud(cloud, M_hat, lam)
    return np.sum((a - b) ** 2, axis=1)


def pointcloud_mse(cloud, M, M_hat, lam):
    """Mean squared distance (m^2) between the two transformed clouds."""
    sq = pointcloud_errors(cloud, M, M_hat, lam)
    bad = int(np.isnan(sq).sum())
    if bad:
        log.warning("%d cloud points hit the antipode and were excluded", bad)
    if bad == sq.size:
        return math.nan
    return float(np.nanmean(sq))
