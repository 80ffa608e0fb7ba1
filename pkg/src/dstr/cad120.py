"""Convert CAD-120 style skeleton/object annotation text files into canonical video records.

Expected layout (any nesting; every directory holding an ``activityLabel.txt``
is processed)::

    activityLabel.txt      video_id,activity,subject[,...]
    <video_id>.txt         one skeleton line per frame, terminated by END
    <video_id>_obj<k>.txt  frame,object_id,x1,y1,x2,y2[,...]

Skeleton lines hold the frame number, eleven joints with orientation
(9 rotation values, confidence, x, y, z, confidence) and four joints with
position only (x, y, z, confidence). World coordinates in millimetres are
projected to pixels with a pinhole camera (``Camera``).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

log = logging.getLogger(__name__)

ORIENTED_JOINTS = (
    "head",
    "neck",
    "torso",
    "left_shoulder",
    "left_elbow",
    "right_shoulder",
    "right_elbow",
    "left_hip",
    "left_knee",
    "right_hip",
    "right_knee",
)
POSITION_JOINTS = ("left_hand", "right_hand", "left_foot", "right_foot")
LINE_FIELDS = 1 + 14 * len(ORIENTED_JOINTS) + 4 * len(POSITION_JOINTS)


class ConversionError(ValueError):
    pass


@dataclass(frozen=True)
class Camera:
    fx: float = 525.0
    fy: float = 525.0
    cx: float = 319.5
    cy: float = 239.5

    def project(self, x: float, y: float, z: float) -> tuple[float, float]:
        if z <= 0:
            raise ConversionError(f"point behind camera (z={z})")
        return self.cx + self.fx * x / z, self.cy - self.fy * y / z


def parse_skeleton_line(line: str, camera: Camera) -> tuple[int, dict[str, list[float]]]:
    parts = [p for p in line.strip().split(",") if p.strip() and p.strip() != "END"]
    if len(parts) != LINE_FIELDS:
        raise ConversionError(f"expected {LINE_FIELDS} values, got {len(parts)}")
    vals = [float(p) for p in parts]
    frame = int(vals[0])
    joints = {}
    k = 1
    for name in ORIENTED_JOINTS:
        x, y, z, conf = vals[k + 10 : k + 14]
        k += 14
        if conf > 0 and z > 0:
            joints[name] = list(camera.project(x, y, z))
    for name in POSITION_JOINTS:
        x, y, z, conf = vals[k : k + 4]
        k += 4
        if conf > 0 and z > 0:
            joints[name] = list(camera.project(x, y, z))
    return frame, joints


def parse_object_file(path: Path) -> dict[int, list[float]]:
    """frame -> [cx, cy, w, h]; empty or zero-area boxes are treated as missing."""
    boxes = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        parts = [p for p in line.strip().split(",") if p.strip()]
        if len(parts) < 6:
            continue
        frame = int(float(parts[0]))
        x1, y1, x2, y2 = (float(p) for p in parts[2:6])
        w, h = x2 - x1, y2 - y1
        if w > 0 and h > 0:
            boxes[frame] = [(x1 + x2) / 2, (y1 + y2) / 2, w, h]
    return boxes


def convert_video(directory: Path, video_id: str, activity: str, subject: str, camera: Camera) -> dict:
    skel = directory / f"{video_id}.txt"
    if not skel.exists():
        raise ConversionError(f"missing skeleton file {skel}")
    objects = {}
    for p in sorted(directory.glob(f"{video_id}_obj*.txt")):
        oid = p.stem.split("_obj")[-1]
        objects[oid] = parse_object_file(p)
    frames = []
    for n, line in enumerate(skel.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.strip() == "END":
            continue
        try:
            frame, joints = parse_skeleton_line(line, camera)
        except (ConversionError, ValueError) as exc:
            raise ConversionError(f"{skel}:{n}: {exc}") from None
        objs = {oid: boxes[frame] for oid, boxes in objects.items() if frame in boxes}
        frames.append({"frame": frame, "joints": joints, "objects": objs})
    return {"video_id": video_id, "subject_id": subject, "label": activity, "frames": frames}


def convert_tree(root: str | Path, out_dir: str | Path, camera: Camera = Camera()) -> list[Path]:
    root, out_dir = Path(root), Path(out_dir)
    label_files = sorted(root.rglob("activityLabel.txt"))
    if not label_files:
        raise ConversionError(f"no activityLabel.txt under {root}")
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for lf in label_files:
        for line in lf.read_text(encoding="utf-8").splitlines():
            parts = [p.strip() for p in line.split(",")]
            if len(parts) < 3 or not parts[0]:
                continue
            video_id, activity, subject = parts[:3]
            record = convert_video(lf.parent, video_id, activity, subject, camera)
            p = out_dir / f"{video_id}.json"
            p.write_text(json.dumps(record), encoding="utf-8")
            written.append(p)
            log.info("converted %s (%d frames)", video_id, len(record["frames"]))
    return written
