"""Invariant families run by ``motorpose check``.

Each family measures its worst-case defect on seeded random inputs or on the
motors of a label file and compares it with a fixed tolerance.
"""

import math
from typing import NamedTuple

import numpy as np

from . import codec, embed, ga
from .errors import MotorPoseError

LAMBDAS = (1.0, 10.0, 200.0, 1000.0)


class CheckResult(NamedTuple):
    family: str
    passed: bool
    worst: float
    tol: float
    detail: str = ""

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        out = f"{tag} {self.family:<18} worst={self.worst:.3e} tol={self.tol:.0e}"
        return out + (f"  {self.detail}" if self.detail else "")


def _result(family, defects, tol, names=None):
    defects = np.asarray(defects, dtype=float)
    defects = np.where(np.isnan(defects), np.inf, defects)
    worst = float(defects.max()) if defects.size else 0.0
    bad = np.flatnonzero(defects > tol)
    detail = ""
    if bad.size and names is not None:
        shown = [names[i] for i in bad[:10]]
        detail = f"{bad.size} offending: " + ", ".join(shown)
    return CheckResult(family, bad.size == 0, worst, tol, detail)


def algebra_law_defects(a, b, c):
    """Per-sample relative defects of the four algebra laws on (N, 16) batches."""
    gp, rev = ga.geometric_product, ga.reverse
    scale = ga.norm(a) * ga.norm(b) * ga.norm(c)
    assoc = np.abs(gp(gp(a, b), c) - gp(a, gp(b, c))).max(axis=-1) / scale
    scale2 = ga.norm(a) * ga.norm(b)
    anti = np.abs(rev(gp(a, b)) - gp(rev(b), rev(a))).max(axis=-1) / scale2
    cyc = np.abs(gp(a, b)[..., 0] - gp(b, a)[..., 0]) / scale2
    total = sum(ga.grade_project(a, k) for k in range(5))
    complete = np.abs(total - a).max(axis=-1) / ga.norm(a)
    return {"associativity": assoc, "anti_automorphism": anti, "cyclicity": cyc,
            "grade_completeness": complete}


def random_unit_quats(rng, n):
    q = rng.normal(size=(n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def check_algebra(rng, n):
    a, b, c = (rng.uniform(-1.0, 1.0, size=(n, 16)) for _ in range(3))
    defects = algebra_law_defects(a, b, c)
    worst = np.max(np.stack(list(defects.values())), axis=0)
    return _result("algebra_laws", worst, ga.LAW_RTOL)


def check_embedding(rng, n):
    out = []
    for lam in LAMBDAS:
        x = rng.uniform(-1.0, 1.0, size=(n, 3)) * lam * rng.uniform(0.0, 10.0, size=(n, 1))
        X = embed.up_project(x, lam)
        unit = np.abs(np.linalg.norm(X, axis=1) - 1.0)
        back = np.linalg.norm(embed.down_project(X, lam) - x, axis=1) / (1.0 + np.linalg.norm(x, axis=1))
        out.append(np.maximum(unit, back))
    return _result("embedding", np.concatenate(out), 1e-12)


def check_origin_transport(rng, n, lam):
    defects = []
    for a in rng.uniform(-1.0, 1.0, size=(n, 3)) * lam:
        got = embed.apply_motor(embed.translation_rotor(a, lam), ga.E4.coeffs[1:5])
        defects.append(np.abs(got - embed.up_project(a, lam)).max())
    return _result("origin_transport", defects, 1e-12)


def check_codec_random(rng, n, lam):
    defects = []
    for q in random_unit_quats(rng, n):
        t = rng.uniform(-0.5, 0.5, size=3) * lam
        pose = codec.make_pose(t, q)
        dec = codec.decode_motor(codec.encode_pose(pose, lam), lam)
        defects.append(max(np.abs(dec.pose.t - pose.t).max(),
                           codec.rotation_angle_deg(dec.pose.q, pose.q)))
    return _result("codec_roundtrip", defects, 1e-9)


def _motor_unit_defect(m):
    mm = (m.to_multivector() * ~m.to_multivector()).coeffs
    rest = mm.copy()
    rest[0] = 0.0
    return max(abs(mm[0] - 1.0), float(np.abs(rest).max()))


def check_file(records, lam):
    """File-driven families: unit constraint, canonical sign, decode residual, re-encode."""
    names = [r.frame_id for r in records]
    unit, sign, resid, reenc = [], [], [], []
    for r in records:
        m = codec.Motor(*r.motor)
        unit.append(_motor_unit_defect(m))
        try:
            sign.append(0.0 if codec.canonicalize_motor(m) == m else 1.0)
        except MotorPoseError:
            sign.append(math.inf)
        try:
            dec = codec.decode_motor(m, lam)
            resid.append(dec.residual)
            again = codec.encode_pose(dec.pose, lam)
            reenc.append(float(np.abs(np.subtract(again, m)).max()))
        except MotorPoseError:
            resid.append(math.inf)
            reenc.append(math.inf)
    return [
        _result("unit_constraint", unit, 1e-6, names),
        _result("canonical_sign", sign, 0.0, names),
        _result("decode_residual", resid, 1e-10, names),
        _result("reencode", reenc, 1e-9, names),
    ]


def run_all(records=None, lam=None, seed=0, n_random=1000):
    """Every family; file families only when ``records`` is given."""
    rng = np.random.default_rng(seed)
    lam_rand = lam if lam is not None else 10.0
    results = [
        check_algebra(rng, n_random),
        check_embedding(rng, n_random),
        check_origin_transport(rng, max(1, n_random // 5), lam_rand),
        check_codec_random(rng, max(1, n_random // 5), lam_rand),
    ]
    if records is not None:
        results.extend(check_file(records, lam))
    return results
