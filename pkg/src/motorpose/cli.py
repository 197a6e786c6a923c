"""Command-line front end.

Exit codes: 0 success, 1 invariant check failed, 2 bad input or usage.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import checks, codec, dataio, embed, metrics
from .errors import InputError, MotorPoseError

log = logging.getLogger("motorpose")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INPUT = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    input: str | None = None
    out: str | None = None
    dataset_format: str = "cambridge"
    lam: float | None = None
    area: float | None = None
    kind: str | None = None
    gt: str | None = None
    pred: str | None = None
    thresholds: tuple = metrics.DEFAULT_THRESHOLDS
    seed: int = 0
    strict: bool = False
    quat_order: str = "wxyz"
    world_to_camera: bool = False
    curves: str | None = None


def parse_thresholds(text):
    try:
        m, deg = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected '<meters>,<degrees>', got {text!r}") from None
    if m <= 0 or deg <= 0:
        raise argparse.ArgumentTypeError("thresholds must be positive")
    return (m, deg)


def _positive(text):
    v = float(text)
    if not v > 0 or v == float("inf"):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--lambda", dest="lam", type=_positive, help="curvature override")
    common.add_argument("--out", help="output path")

    pose_in = argparse.ArgumentParser(add_help=False)
    pose_in.add_argument("--format", dest="dataset_format", choices=("cambridge", "sevenscenes"),
                         default="cambridge")
    pose_in.add_argument("--area", type=_positive, help="dataset area (m^2) or volume (m^3)")
    pose_in.add_argument("--kind", choices=("indoor", "outdoor"))
    pose_in.add_argument("--quat-order", choices=("wxyz", "xyzw"), default="wxyz",
                         help="quaternion component order in Cambridge files")
    pose_in.add_argument("--world-to-camera", action="store_true",
                         help="7-Scenes matrices are world-to-camera; invert them")
    pose_in.add_argument("--strict", action="store_true",
                         help="fail (exit 2) if any record is rejected")

    pair = argparse.ArgumentParser(add_help=False)
    pair.add_argument("--gt", required=True, help="ground-truth motor CSV")
    pair.add_argument("--pred", required=True, help="predicted motor CSV")

    p = argparse.ArgumentParser(prog="motorpose", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("encode", parents=[common, pose_in], help="pose labels -> motor CSV")
    s.add_argument("input", help="pose file (7-Scenes: a file or a directory)")

    s = sub.add_parser("decode", parents=[common], help="motor CSV -> Cambridge-format pose file")
    s.add_argument("input")

    s = sub.add_parser("eval", parents=[common, pair], help="score predictions")
    s.add_argument("--thresholds", type=parse_thresholds, default=metrics.DEFAULT_THRESHOLDS,
                   metavar="M,DEG")
    s.add_argument("--curves", help="directory for histogram/CDF CSV files")

    s = sub.add_parser("check", parents=[common], help="run invariant checks")
    s.add_argument("input", nargs="?", help="motor label CSV to check")
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("trace", parents=[common, pose_in], help="Euclidean vs spherical camera trace")
    s.add_argument("input")

    s = sub.add_parser("cloudcheck", parents=[common, pair], help="point-cloud MSE per frame")
    s.add_argument("input", help="point cloud (ASCII XYZ or PLY)")
    return p


def config_from_args(ns):
    fields = RunConfig.__dataclass_fields__
    return RunConfig(**{k: v for k, v in vars(ns).items() if k in fields and v is not None})


def _setup_logging():
    level = os.environ.get("MOTORPOSE_LOG", "warn").lower()
    level = {"warn": "warning"}.get(level, level)
    logging.basicConfig(level=getattr(logging, level.upper(), logging.WARNING),
                        format="%(levelname)s: %(message)s", stream=sys.stderr)


def _load_poses(cfg):
    if cfg.dataset_format == "sevenscenes":
        return dataio.load_sevenscenes(cfg.input, world_to_camera=cfg.world_to_camera)
    text = Path(cfg.input).read_text(encoding="utf-8")
    return dataio.parse_cambridge(text, quat_order=cfg.quat_order, source=cfg.input)


def _resolve_lambda(cfg):
    if cfg.lam is not None:
        return cfg.lam
    if cfg.area is None:
        raise UsageError("give --lambda or --area (with --kind)")
    kind = cfg.kind or ("indoor" if cfg.dataset_format == "sevenscenes" else "outdoor")
    return dataio.lambda_for_area(cfg.area, kind)


def _require_out(cfg):
    if not cfg.out:
        raise UsageError(f"{cfg.command} needs --out")
    return cfg.out


def _rejections(result, cfg):
    if result.rejected:
        print(f"warning: {len(result.rejected)} records rejected", file=sys.stderr)
        if cfg.strict:
            return EXIT_INPUT
    return EXIT_OK


def run_encode(cfg):
    out = _require_out(cfg)
    lam = _resolve_lambda(cfg)
    parsed = _load_poses(cfg)
    status = _rejections(parsed, cfg)
    if status:
        return status
    records, defects, devs = [], [], []
    for rec in parsed.records:
        m = codec.encode_pose(rec.pose, lam)
        records.append(dataio.MotorRecord(rec.frame_id, m, lam))
        defects.append(codec.unit_defect(m))
        devs.append(embed.trace_deviation(rec.pose.t, lam))
    dataio.write_motor_file(records, out)
    print(f"encoded {len(records)} frames  lambda={lam:g}  "
          f"max_unit_defect={max(defects, default=0.0):.3e}  "
          f"max_trace_deviation={max(devs, default=0.0):.3e}")
    return EXIT_OK


def run_decode(cfg):
    out = _require_out(cfg)
    records = dataio.read_motor_file(cfg.input, require_unit=False)
    poses = []
    for r in records:
        lam = cfg.lam if cfg.lam is not None else r.lam
        if lam is None:
            raise UsageError("prediction files carry no lambda; give --lambda")
        poses.append(dataio.PoseRecord(r.frame_id, codec.decode_motor(r.motor, lam).pose))
    dataio.atomic_write_text(out, dataio.format_cambridge(poses))
    print(f"decoded {len(poses)} frames")
    return EXIT_OK


def _paired_files(cfg):
    gt = dataio.read_motor_file(cfg.gt)
    pred = dataio.read_motor_file(cfg.pred, require_unit=False)
    lam = cfg.lam if cfg.lam is not None else dataio.file_lambda(gt)
    gt_ids = {r.frame_id for r in gt}
    pred_ids = {r.frame_id for r in pred}
    offenders = sorted(gt_ids ^ pred_ids)
    if offenders:
        raise InputError(f"{len(offenders)} frame ids are not shared by --gt and --pred: "
                         + ", ".join(offenders[:10]), offenders)
    return gt, pred, lam


def _write_csv(path, header, rows):
    dataio.atomic_write_text(path, dataio.format_rows(header, rows))


def run_eval(cfg):
    gt, pred, lam = _paired_files(cfg)
    report = metrics.evaluate_run(pred, gt, lam, cfg.thresholds)
    if cfg.out:
        dataio.atomic_write_text(cfg.out, json.dumps(report.to_dict(), indent=2, allow_nan=False,
                                                     default=_json_default) + "\n")
    if cfg.curves:
        d = Path(cfg.curves)
        d.mkdir(parents=True, exist_ok=True)
        for name, (edges, frac) in (("pos", report.histogram_pos), ("rot", report.histogram_rot)):
            rows = [(dataio.fmt_real(lo), dataio.fmt_real(hi), dataio.fmt_real(f))
                    for lo, hi, f in zip(edges[:-1], edges[1:], frac)]
            _write_csv(d / f"histogram_{name}.csv", ("bin_lo", "bin_hi", "fraction"), rows)
        for name, arr in (("pos", report.cdf_pos), ("rot", report.cdf_rot)):
            n = len(arr)
            rows = [(dataio.fmt_real(v), dataio.fmt_real((i + 1) / n)) for i, v in enumerate(arr)]
            _write_csv(d / f"cdf_{name}.csv", ("error", "cumulative"), rows)
    if report.excluded:
        print(f"warning: {len(report.excluded)} frames excluded (decode failure)", file=sys.stderr)
    print(f"{report.median_pos:.3f}m {report.median_rot:.3f}° {report.pct_within:.1f}%")
    return EXIT_OK


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def run_check(cfg):
    records = lam = None
    if cfg.input:
        records = dataio.read_motor_file(cfg.input, require_unit=False)
        lam = cfg.lam if cfg.lam is not None else dataio.file_lambda(records)
    elif cfg.lam is not None:
        lam = cfg.lam
    results = checks.run_all(records, lam, seed=cfg.seed)
    text = "".join(r.line() + "\n" for r in results)
    failed = sum(not r.passed for r in results)
    text += f"{len(results) - failed}/{len(results)} families passed\n"
    if cfg.out:
        dataio.atomic_write_text(cfg.out, text)
    sys.stdout.write(text)
    return EXIT_OK if failed == 0 else EXIT_CHECK_FAILED


def run_trace(cfg):
    out = _require_out(cfg)
    lam = _resolve_lambda(cfg)
    parsed = _load_poses(cfg)
    status = _rejections(parsed, cfg)
    if status:
        return status
    rows, devs = [], []
    for rec in parsed.records:
        t = rec.pose.t
        s = embed.spherical_trace(t, lam)
        dev = embed.trace_deviation(t, lam)
        devs.append(dev)
        rows.append((rec.frame_id, *map(dataio.fmt_real, (*t, *s, dev))))
    header = ("frame_id", "tx", "ty", "tz", "sx", "sy", "sz", "deviation")
    dataio.atomic_write_text(out, dataio.format_rows(header, rows))
    print(f"traced {len(rows)} frames  lambda={lam:g}  max_deviation={max(devs, default=0.0):.3e}")
    return EXIT_OK


def run_cloudcheck(cfg):
    cloud = dataio.read_point_cloud(cfg.input)
    if cloud.shape[0] == 0:
        raise InputError(f"point cloud {cfg.input} is empty")
    gt, pred, lam = _paired_files(cfg)
    truth = {r.frame_id: r.motor for r in gt}
    rows, mses, skipped = [], [], 0
    for r in sorted(pred, key=lambda r: r.frame_id):
        try:
            sq = metrics.pointcloud_errors(cloud, truth[r.frame_id], r.motor, lam)
        except MotorPoseError as exc:
            log.warning("frame %s skipped: %s", r.frame_id, exc)
            skipped += 1
            continue
        bad = int(np.isnan(sq).sum())
        mse = float(np.nanmean(sq)) if bad < sq.size else float("nan")
        if bad < sq.size:
            mses.append(mse)
        rows.append((r.frame_id, dataio.fmt_real(mse), bad))
    if cfg.out:
        dataio.atomic_write_text(cfg.out, dataio.format_rows(("frame_id", "mse", "excluded_points"), rows))
    if skipped:
        print(f"warning: {skipped} frames skipped", file=sys.stderr)
    print(f"median MSE {metrics.median(mses):.6g} m^2 over {len(mses)} frames")
    return EXIT_OK


COMMANDS = {
    "encode": run_encode,
    "decode": run_decode,
    "eval": run_eval,
    "check": run_check,
    "trace": run_trace,
    "cloudcheck": run_cloudcheck,
}


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    cfg = config_from_args(ns)
    try:
        return COMMANDS[cfg.command](cfg)
    except (UsageError, MotorPoseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
