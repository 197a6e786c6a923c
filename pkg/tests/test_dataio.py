import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motorpose import codec, dataio
from motorpose.codec import Motor
from motorpose.dataio import DatasetArea, MotorRecord
from motorpose.errors import ParseError, ValidationError

DATA = Path(__file__).parent / "data"
HEADER = "h1\nh2\nh3\n"
R2 = math.sqrt(0.5)

# (dataset, area or volume, kind, published lambda)
TABLE1 = [
    ("Street", 50000.0, "outdoor", 1000.0),
    ("Great Court", 8000.0, "outdoor", 200.0),
    ("King's", 5600.0, "outdoor", 200.0),
    ("St. Mary's", 4800.0, "outdoor", 200.0),
    ("Old Hospital", 2000.0, "outdoor", 200.0),
    ("Shop", 875.0, "outdoor", 10.0),
    ("RedKitchen", 18.0, "indoor", 10.0),
    ("Office", 7.5, "indoor", 10.0),
    ("7 Scenes", 7.5, "indoor", 10.0),
]


def assert_pose(rec, frame_id, t, q, tol=1e-12):
    assert rec.frame_id == frame_id
    np.testing.assert_allclose(rec.pose.t, t, atol=tol)
    np.testing.assert_allclose(rec.pose.q, q, atol=tol)


def test_cambridge_identity_line():
    res = dataio.parse_cambridge(HEADER + "seq1/frame00001.png 0 0 0 1 0 0 0\n")
    assert res.rejected == []
    (rec,) = res.records
    assert rec.frame_id == "seq1/frame00001.png"
    np.testing.assert_array_equal(rec.pose.t, [0, 0, 0])
    assert rec.pose.q == (1.0, 0.0, 0.0, 0.0)


def test_cambridge_header_ignored():
    # header lines that would otherwise be malformed
    text = "a b\nc\nd e f\nx.png 1 2 3 1 0 0 0\n"
    assert len(dataio.parse_cambridge(text).records) == 1


def test_cambridge_malformed_line_names_line():
    text = HEADER + "ok.png 0 0 0 1 0 0 0\nbad.png 0 0 0 1 0 0\n"
    with pytest.raises(ParseError) as exc:
        dataio.parse_cambridge(text, source="poses.txt")
    assert exc.value.line == 5
    assert "poses.txt:5" in str(exc.value)


def test_cambridge_non_numeric():
    with pytest.raises(ParseError):
        dataio.parse_cambridge(HEADER + "a.png 0 0 zero 1 0 0 0\n")


def test_cambridge_rejects_non_unit_quaternion():
    text = HEADER + "a.png 0 0 0 1 0 0 0\nb.png 0 0 0 1.01 0 0 0\nc.png 0 0 0 1.0005 0 0 0\n"
    res = dataio.parse_cambridge(text)
    assert [r.frame_id for r in res.records] == ["a.png", "c.png"]
    assert len(res.rejected) == 1 and "b.png" in res.rejected[0][0]
    assert res.records[1].pose.q == (1.0, 0.0, 0.0, 0.0)


def test_cambridge_xyzw_order():
    res = dataio.parse_cambridge(HEADER + "a.png 0 0 0 0 0 1 0\n", quat_order="xyzw")
    assert res.records[0].pose.q == (0.0, 0.0, 0.0, 1.0)


def test_cambridge_golden_file():
    res = dataio.parse_cambridge((DATA / "cambridge_golden.txt").read_text())
    assert res.rejected == []
    recs = res.records
    assert len(recs) == 4
    assert_pose(recs[0], "seq1/frame00001.png", [0, 0, 0], [1, 0, 0, 0])
    assert_pose(recs[1], "seq1/frame00002.png", [1.5, -2.25, 10], [0, 0, 0, 1])
    assert_pose(recs[2], "seq2/frame00010.png", [3, 4, 5], [R2, 0, R2, 0], tol=1e-15)
    assert_pose(recs[3], "seq2/frame00011.png", [-1, 0, 0], [1, 0, 0, 0])


def test_format_cambridge_round_trip():
    recs = dataio.parse_cambridge((DATA / "cambridge_golden.txt").read_text()).records
    again = dataio.parse_cambridge(dataio.format_cambridge(recs)).records
    for a, b in zip(recs, again):
        assert a.frame_id == b.frame_id
        np.testing.assert_array_equal(a.pose.t, b.pose.t)
        assert a.pose.q == b.pose.q


def test_sevenscenes_golden_directory():
    res = dataio.load_sevenscenes(DATA / "sevenscenes")
    ids = [r.frame_id for r in res.records]
    assert ids == ["seq-01/frame-000000.color.png", "seq-01/frame-000001.color.png",
                   "seq-01/frame-000002.color.png"]
    assert_pose(res.records[0], ids[0], [0, 0, 0], [1, 0, 0, 0])
    assert_pose(res.records[1], ids[1], [1, 0, 2], [0, 0, 0, 1])
    assert_pose(res.records[2], ids[2], [0.5, 0.25, -1], [R2, R2, 0, 0], tol=1e-15)
    assert len(res.rejected) == 1
    assert res.rejected[0][0] == "seq-01/frame-000003.color.png"


def test_sevenscenes_rejects_non_orthonormal():
    res = dataio.parse_sevenscenes({"x": "1 0 0 0\n0 2 0 0\n0 0 1 0\n0 0 0 1\n"})
    assert res.records == [] and len(res.rejected) == 1


def test_sevenscenes_malformed():
    with pytest.raises(ParseError):
        dataio.parse_sevenscenes({"x": "1 0 0\n0 1 0\n0 0 1\n"})


def test_sevenscenes_world_to_camera_inverts():
    rng = np.random.default_rng(0)
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    R = codec.quat_to_rotmat(q)
    t = rng.uniform(-2, 2, 3)
    c2w = np.eye(4)
    c2w[:3, :3], c2w[:3, 3] = R, t
    w2c = np.linalg.inv(c2w)
    text = "\n".join(" ".join("%.17g" % v for v in row) for row in w2c)
    rec = dataio.parse_sevenscenes({"f": text}, world_to_camera=True).records[0]
    np.testing.assert_allclose(rec.pose.t, t, atol=1e-12)
    assert codec.rotation_angle_deg(rec.pose.q, q) < 1e-9


def test_motor_row_for_identity():
    text = dataio.format_motor_file([MotorRecord("a.png", codec.IDENTITY_MOTOR, 10.0)])
    assert text == "frame_id,alpha,b12,b13,b14,b23,b24,b34,gamma,lambda\na.png,1,0,0,0,0,0,0,0,10\n"


def test_prediction_file_has_no_lambda_column():
    text = dataio.format_motor_file([MotorRecord("a", Motor(*[0.5] * 8))])
    assert text.splitlines()[0] == "frame_id,alpha,b12,b13,b14,b23,b24,b34,gamma"
    (rec,) = dataio.parse_motor_file(text)
    assert rec.lam is None and rec.motor == Motor(*[0.5] * 8)


finite = st.floats(allow_nan=False, allow_infinity=False)


@settings(max_examples=50)
@given(st.lists(st.tuples(*[finite] * 8), min_size=1, max_size=30))
def test_prediction_csv_bit_exact(rows):
    recs = [MotorRecord(f"f,{k}", Motor(*r)) for k, r in enumerate(rows)]
    back = dataio.parse_motor_file(dataio.format_motor_file(recs))
    assert [r.frame_id for r in back] == [r.frame_id for r in recs]
    for a, b in zip(recs, back):
        assert np.array(a.motor).tobytes() == np.array(b.motor).tobytes()


def test_label_file_round_trip_on_disk(tmp_path):
    rng = np.random.default_rng(1)
    recs = []
    for k in range(200):
        q = rng.normal(size=4)
        pose = codec.make_pose(rng.uniform(-100, 100, 3), q / np.linalg.norm(q))
        recs.append(MotorRecord(f"seq/{k:05d}.png", codec.encode_pose(pose, 200.0), 200.0))
    path = tmp_path / "labels.csv"
    dataio.write_motor_file(recs, path)
    assert b"\r" not in path.read_bytes()
    assert dataio.read_motor_file(path) == recs
    assert list(tmp_path.iterdir()) == [path]


def test_motor_file_errors():
    head = ",".join(dataio.MOTOR_HEADER) + "\n"
    with pytest.raises(ParseError) as exc:
        dataio.parse_motor_file(head + "a,1,0,0,0,0,0,0,10\n")  # gamma missing
    assert exc.value.line == 2
    with pytest.raises(ParseError) as exc:
        dataio.parse_motor_file(head + "a,1,0,0,0,0,0,0,0,10\na,1,0,0,0,0,0,0,0,10\n")
    assert exc.value.line == 3
    with pytest.raises(ParseError):
        dataio.parse_motor_file("frame,a,b\n")
    with pytest.raises(ParseError):
        dataio.parse_motor_file(head + "a,1.5,0,0,0,0,0,0,0,10\n")
    recs = dataio.parse_motor_file(head + "a,1.5,0,0,0,0,0,0,0,10\n", require_unit=False)
    assert recs[0].motor.alpha == 1.5


def test_write_rejects_non_unit_labels():
    with pytest.raises(ValidationError):
        dataio.format_motor_file([MotorRecord("a", Motor(2, 0, 0, 0, 0, 0, 0, 0), 10.0)])


@pytest.mark.parametrize("name, area, kind, lam", TABLE1)
def test_lambda_for_area_reproduces_table(name, area, kind, lam):
    assert dataio.lambda_for_area(DatasetArea(area, kind)) == lam
    assert dataio.lambda_for_area(area, kind) == lam


def test_lambda_override_and_errors():
    assert dataio.lambda_for_area(5600.0, "outdoor", override=50.0) == 50.0
    for bad in (0.0, -5.0, math.nan):
        with pytest.raises(ValidationError):
            dataio.lambda_for_area(bad, "outdoor")
    with pytest.raises(ValidationError):
        dataio.lambda_for_area(10.0, "underwater")


@pytest.mark.parametrize("name", ["cloud.xyz", "cloud.ply"])
def test_point_cloud_formats(name):
    pts = dataio.read_point_cloud(DATA / name)
    np.testing.assert_array_equal(pts, [[0, 0, 0], [1, 2, 3], [-1.5, 0.5, 2]])


def test_point_cloud_empty_and_bad():
    assert dataio.parse_point_cloud("").shape == (0, 3)
    with pytest.raises(ParseError):
        dataio.parse_point_cloud("1 2\n")
    with pytest.raises(ParseError):
        dataio.parse_point_cloud("ply\nformat binary_little_endian 1.0\nend_header\n")


@pytest.mark.parametrize("lam", [10.0, 200.0, 1000.0])
def test_corpus_parse_encode_write_read_decode(tmp_path, lam):
    parsed = dataio.parse_cambridge((DATA / "cambridge_golden.txt").read_text()).records
    parsed += dataio.load_sevenscenes(DATA / "sevenscenes").records
    recs = [MotorRecord(r.frame_id, codec.encode_pose(r.pose, lam), lam) for r in parsed]
    dataio.write_motor_file(recs, tmp_path / "m.csv")
    back = dataio.read_motor_file(tmp_path / "m.csv")
    assert [r.frame_id for r in back] == [r.frame_id for r in parsed]
    for orig, rec in zip(parsed, back):
        dec = codec.decode_motor(rec.motor, rec.lam)
        assert np.abs(dec.pose.t - orig.pose.t).max() < 1e-9
        assert codec.rotation_angle_deg(dec.pose.q, orig.pose.q) < 1e-9
