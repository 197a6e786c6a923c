"""Reading and writing pose labels, motor files and point clouds.

File formats
------------
Cambridge Landmarks pose file
    three header lines, then ``frame_path X Y Z qW qX qY qZ`` per line.
7-Scenes pose file
    one file per frame holding a 4x4 homogeneous camera-to-world matrix.
Motor CSV
    header ``frame_id,alpha,b12,b13,b14,b23,b24,b34,gamma,lambda``; reals
    written with 17 significant digits so a write/read cycle is bit-exact.
Prediction CSV
    the same without the ``lambda`` column.
Point cloud
    ASCII ``x y z`` per line, or an ASCII PLY vertex list.
"""

import csv
import io
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import codec, embed
from .errors import ParseError, ValidationError

log = logging.getLogger(__name__)

CAMBRIDGE_HEADER = (
    "Visual Landmark Dataset V1\n"
    "ImageFile, Camera Position [X Y Z], Camera Orientation [W P Q R]\n"
    "\n"
)
CAMBRIDGE_QUAT_TOL = 1e-3
LABEL_UNIT_TOL = 1e-6
BOTTOM_ROW_TOL = 1e-6

MOTOR_FIELDS = ("alpha", "b12", "b13", "b14", "b23", "b24", "b34", "gamma")
MOTOR_HEADER = ("frame_id",) + MOTOR_FIELDS + ("lambda",)
PREDICTION_HEADER = ("frame_id",) + MOTOR_FIELDS


class PoseRecord(NamedTuple):
    frame_id: str
    pose: codec.Pose


class MotorRecord(NamedTuple):
    frame_id: str
    motor: codec.Motor
    lam: float | None = None  # None for prediction files


class DatasetArea(NamedTuple):
    area: float  # m^2 outdoors, m^3 indoors
    kind: str = "outdoor"


class ParseResult(NamedTuple):
    records: list
    rejected: list  # (where, reason)


def fmt_real(x):
    """17 significant digits: enough for an exact float64 round trip."""
    return "%.17g" % x


def format_rows(header, rows):
    """CSV text with LF line endings; frame ids are quoted only when needed."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` via a temp file and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


# -- curvature -----------------------------------------------------------------

def lambda_for_area(area, kind=None, override=None):
    """Curvature for a dataset of the given extent.

    Rule distilled from the published per-dataset choices:
    indoor volumes up to 18 m^3 and outdoor areas up to 1000 m^2 get 10,
    outdoor areas up to 10000 m^2 get 200, anything larger gets 1000.
    An explicit ``override`` always wins.
    """
    if override is not None:
        return embed.check_curvature(override)
    if isinstance(area, DatasetArea):
        area, kind = area.area, area.kind if kind is None else kind
    kind = kind or "outdoor"
    if kind not in ("indoor", "outdoor"):
        raise ValidationError(f"kind must be 'indoor' or 'outdoor', got {kind!r}")
    try:
        a = float(area)
    except (TypeError, ValueError):
        raise ValidationError(f"area must be a number, got {area!r}") from None
    if not math.isfinite(a) or a <= 0.0:
        raise ValidationError(f"area/volume must be positive, got {area!r}")
    if kind == "indoor" and a <= 18.0:
        return 10.0
    if a <= 1000.0:
        return 10.0
    if a <= 10000.0:
        return 200.0
    return 1000.0


# -- Cambridge Landmarks -------------------------------------------------------

def parse_cambridge(text, quat_order="wxyz", source=None):
    """Parse a Cambridge Landmarks pose file.

    Quaternions within 1e-3 of unit norm are renormalized; others are
    rejected and listed in the result.  A line without exactly 8 fields, or
    with a non-numeric value, raises :class:`ParseError`.
    """
    if quat_order not in ("wxyz", "xyzw"):
        raise ValidationError(f"quat_order must be 'wxyz' or 'xyzw', got {quat_order!r}")
    records, rejected = [], []
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if lineno <= 3 or not line.strip():
            continue
        fields = line.split()
        if len(fields) != 8:
            raise ParseError(f"expected 8 fields, found {len(fields)}", source=source, line=lineno)
        frame_id = fields[0]
        try:
            vals = [float(v) for v in fields[1:]]
        except ValueError:
            raise ParseError("non-numeric pose value", source=source, line=lineno) from None
        if not all(math.isfinite(v) for v in vals):
            raise ParseError("non-finite pose value", source=source, line=lineno)
        if frame_id in seen:
            raise ParseError(f"duplicate frame id {frame_id!r}", source=source, line=lineno)
        seen.add(frame_id)
        q = vals[3:] if quat_order == "wxyz" else [vals[6], *vals[3:6]]
        try:
            pose = codec.make_pose(vals[:3], codec.Quaternion(*q).normalized(tol=CAMBRIDGE_QUAT_TOL))
        except ValidationError as exc:
            rejected.append((f"line {lineno} ({frame_id})", str(exc)))
            continue
        records.append(PoseRecord(frame_id, pose))
    for where, why in rejected:
        log.warning("rejected %s: %s", where, why)
    return ParseResult(records, rejected)


def format_cambridge(records):
    """Render pose records as a Cambridge pose file (lossless reals)."""
    out = [CAMBRIDGE_HEADER]
    for rec in records:
        t, q = rec.pose
        out.append(" ".join([rec.frame_id, *(fmt_real(v) for v in (*t, *q))]) + "\n")
    return "".join(out)


# -- 7-Scenes ------------------------------------------------------------------

def parse_sevenscenes_matrix(text, source=None):
    """4x4 float matrix from one 7-Scenes pose file."""
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if len(rows) != 4 or any(len(r) != 4 for r in rows):
        raise ParseError("expected 4 rows of 4 numbers", source=source)
    try:
        return np.array([[float(v) for v in r] for r in rows])
    except ValueError:
        raise ParseError("non-numeric matrix entry", source=source) from None


def parse_sevenscenes(files, world_to_camera=False):
    """Parse per-frame 7-Scenes pose files.

    ``files`` maps frame id to file content (or is an iterable of such
    pairs).  Matrices are taken as camera-to-world; pass
    ``world_to_camera=True`` to invert them first.  Frames with a bad bottom
    row or a non-orthonormal rotation block are rejected.
    """
    items = files.items() if hasattr(files, "items") else files
    records, rejected = [], []
    for frame_id, text in items:
        m = parse_sevenscenes_matrix(text, source=frame_id)
        if not np.all(np.isfinite(m)):
            rejected.append((frame_id, "non-finite matrix entry"))
            continue
        if np.abs(m[3] - (0.0, 0.0, 0.0, 1.0)).max() > BOTTOM_ROW_TOL:
            rejected.append((frame_id, f"bottom row {m[3].tolist()} is not (0, 0, 0, 1)"))
            continue
        rot, t = m[:3, :3], m[:3, 3]
        try:
            q = codec.rotmat_to_quat(rot)
        except ValidationError as exc:
            rejected.append((frame_id, str(exc)))
            continue
        if world_to_camera:
            q = codec.Quaternion(q.w, -q.x, -q.y, -q.z)
            t = -codec.quat_rotate(q, t)
        records.append(PoseRecord(frame_id, codec.make_pose(t, q)))
    for where, why in rejected:
        log.warning("rejected %s: %s", where, why)
    return ParseResult(records, rejected)


def sevenscenes_frame_id(rel_path):
    """``seq-01/frame-000000.pose.txt`` -> ``seq-01/frame-000000.color.png``."""
    p = str(rel_path).replace(os.sep, "/")
    return p[: -len(".pose.txt")] + ".color.png" if p.endswith(".pose.txt") else p


def load_sevenscenes(path, world_to_camera=False):
    """Parse a single pose file or every ``*.pose.txt`` under a directory."""
    path = Path(path)
    if path.is_dir():
        paths = sorted(path.rglob("*.pose.txt"))
        base = path
    else:
        paths, base = [path], path.parent
    files = [(sevenscenes_frame_id(p.relative_to(base)), p.read_text()) for p in paths]
    return parse_sevenscenes(files, world_to_camera=world_to_camera)


# -- motor CSV -----------------------------------------------------------------

def format_motor_file(records):
    records = list(records)
    with_lambda = bool(records) and records[0].lam is not None
    if any((r.lam is not None) != with_lambda for r in records):
        raise ValidationError("either every record carries lambda or none does")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MOTOR_HEADER if with_lambda or not records else PREDICTION_HEADER)
    seen = set()
    for r in records:
        if not r.frame_id:
            raise ValidationError("empty frame id")
        if r.frame_id in seen:
            raise ValidationError(f"duplicate frame id {r.frame_id!r}")
        seen.add(r.frame_id)
        vals = [float(v) for v in r.motor]
        if len(vals) != 8 or not all(math.isfinite(v) for v in vals):
            raise ValidationError(f"{r.frame_id}: motor needs 8 finite coefficients")
        row = [r.frame_id, *map(fmt_real, vals)]
        if with_lambda:
            if codec.unit_defect(r.motor) > LABEL_UNIT_TOL:
                raise ValidationError(f"{r.frame_id}: label motor is not unit")
            row.append(fmt_real(embed.check_curvature(r.lam)))
        w.writerow(row)
    return buf.getvalue()


def write_motor_file(records, destination):
    """Write motor records as CSV.  Label records (with lambda) must be unit motors."""
    atomic_write_text(destination, format_motor_file(records))


def parse_motor_file(text, source=None, require_unit=None):
    """Parse motor CSV text.  Label files are detected by their lambda column.

    ``require_unit`` defaults to True for label files and False for
    prediction files.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = tuple(h.strip() for h in next(reader))
    except StopIteration:
        raise ParseError("empty file", source=source, line=1) from None
    if header == MOTOR_HEADER:
        with_lambda = True
    elif header == PREDICTION_HEADER:
        with_lambda = False
    else:
        raise ParseError(f"unexpected header {','.join(header)!r}", source=source, line=1)
    if require_unit is None:
        require_unit = with_lambda
    width = len(header)
    records, seen = [], set()
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != width:
            raise ParseError(
                f"expected {width} columns (frame id + 8 coefficients"
                f"{' + lambda' if with_lambda else ''}), found {len(row)}",
                source=source, line=lineno,
            )
        frame_id = row[0]
        if not frame_id:
            raise ParseError("empty frame id", source=source, line=lineno)
        if frame_id in seen:
            raise ParseError(f"duplicate frame id {frame_id!r}", source=source, line=lineno)
        seen.add(frame_id)
        try:
            vals = [float(v) for v in row[1:]]
        except ValueError:
            raise ParseError("non-numeric coefficient", source=source, line=lineno) from None
        if not all(math.isfinite(v) for v in vals):
            raise ParseError("non-finite coefficient", source=source, line=lineno)
        motor = codec.Motor(*vals[:8])
        lam = None
        if with_lambda:
            try:
                lam = embed.check_curvature(vals[8])
            except ValidationError as exc:
                raise ParseError(str(exc), source=source, line=lineno) from None
        if require_unit and codec.unit_defect(motor) > LABEL_UNIT_TOL:
            raise ParseError(f"motor for {frame_id!r} is not unit", source=source, line=lineno)
        records.append(MotorRecord(frame_id, motor, lam))
    return records


def read_motor_file(source, require_unit=None):
    """Read a motor or prediction CSV from a path."""
    return parse_motor_file(Path(source).read_text(encoding="utf-8"), source=str(source),
                            require_unit=require_unit)


def file_lambda(records):
    """The single curvature shared by every record of a label file."""
    lams = {r.lam for r in records}
    if len(lams) != 1 or None in lams:
        raise ValidationError(f"motor file must carry one lambda, found {sorted(map(str, lams))}")
    return lams.pop()


# -- point clouds ----------------------------------------------------------------

def parse_point_cloud(text, source=None):
    """Points from ASCII XYZ text or an ASCII PLY vertex list, as an (N, 3) array."""
    lines = text.splitlines()
    if lines and lines[0].strip() == "ply":
        return _parse_ply(lines, source)
    pts = []
    for lineno, line in enumerate(lines, start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        fields = s.split()
        if len(fields) < 3:
            raise ParseError("expected 'x y z'", source=source, line=lineno)
        try:
            pts.append([float(v) for v in fields[:3]])
        except ValueError:
            raise ParseError("non-numeric coordinate", source=source, line=lineno) from None
    return np.array(pts, dtype=float).reshape(-1, 3)


def _parse_ply(lines, source):
    n_vertex = None
    props = []
    in_vertex = False
    end = None
    for i, line in enumerate(lines):
        f = line.split()
        if not f:
            continue
        if f[0] == "format" and f[1] != "ascii":
            raise ParseError("only ASCII PLY is supported", source=source, line=i + 1)
        if f[0] == "element":
            in_vertex = f[1] == "vertex"
            if in_vertex:
                n_vertex = int(f[2])
        elif f[0] == "property" and in_vertex:
            props.append(f[-1])
        elif f[0] == "end_header":
            end = i
            break
    if end is None or n_vertex is None:
        raise ParseError("PLY header without a vertex element", source=source)
    try:
        cols = [props.index(c) for c in ("x", "y", "z")]
    except ValueError:
        raise ParseError("PLY vertices lack x/y/z properties", source=source) from None
    pts = []
    for j in range(n_vertex):
        lineno = end + 2 + j
        if lineno - 1 >= len(lines):
            raise ParseError(f"PLY declares {n_vertex} vertices, file ends early", source=source,
                             line=lineno)
        f = lines[lineno - 1].split()
        try:
            pts.append([float(f[c]) for c in cols])
        except (ValueError, IndexError):
            raise ParseError("bad vertex row", source=source, line=lineno) from None
    return np.array(pts, dtype=float).reshape(-1, 3)


def read_point_cloud(path):
    return parse_point_cloud(Path(path).read_text(encoding="utf-8"), source=str(path))
