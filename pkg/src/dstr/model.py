"""Tracked-video data model, dataset I/O and body-relative entity rectangles."""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

log = logging.getLogger(__name__)

JOINT_NAMES: tuple[str, ...] = (
    "head",
    "neck",
    "torso",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_hand",
    "right_hand",
    "left_foot",
    "right_foot",
)
# Derived entity: midpoint of the two hips.
HIP = "hip"

CAD120_ACTIVITIES: tuple[str, ...] = (
    "making_cereal",
    "taking_medicine",
    "stacking_objects",
    "unstacking_objects",
    "microwaving_food",
    "picking_objects",
    "cleaning_objects",
    "taking_food",
    "arranging_objects",
    "having_meal",
)

MAX_INTERPOLATION_GAP = 5


class DatasetError(ValueError):
    """Raised when a dataset cannot be loaded or fails validation."""


class ValidationWarning(UserWarning):
    """Emitted when frames are dropped or repaired during validation."""


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")


@dataclass(frozen=True)
class Rect:
    center: Point2D
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"rect sides must be positive, got {self.width}x{self.height}")

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """(x0, y0, x1, y1)"""
        hw, hh = self.width / 2, self.height / 2
        return (self.center.x - hw, self.center.y - hh, self.center.x + hw, self.center.y + hh)

    @classmethod
    def from_box(cls, box: Iterable[float]) -> Rect:
        cx, cy, w, h = (float(v) for v in box)
        return cls(Point2D(cx, cy), w, h)

    def to_box(self) -> list[float]:
        return [self.center.x, self.center.y, self.width, self.height]


@dataclass(frozen=True, order=True)
class EntityRef:
    """A tracked entity. Ordering puts joints before objects, then sorts by id."""

    kind: str  # "joint" | "object"
    id: str

    def __post_init__(self):
        if self.kind == "joint":
            if self.id not in JOINT_NAMES and self.id != HIP:
                raise ValueError(f"unknown joint {self.id!r}")
        elif self.kind != "object":
            raise ValueError(f"unknown entity kind {self.kind!r}")

    @classmethod
    def joint(cls, name: str) -> EntityRef:
        return cls("joint", name)

    @classmethod
    def object(cls, oid: str) -> EntityRef:
        return cls("object", str(oid))

    def __str__(self) -> str:
        return self.id if self.kind == "joint" else f"obj:{self.id}"


@dataclass(frozen=True)
class FrameSnapshot:
    frame_index: int
    joint_positions: Mapping[EntityRef, Point2D]
    object_boxes: Mapping[EntityRef, Rect] = field(default_factory=dict)

    def joint(self, name: str) -> Point2D:
        return self.joint_positions[EntityRef.joint(name)]

    @property
    def complete(self) -> bool:
        return all(EntityRef.joint(n) in self.joint_positions for n in JOINT_NAMES)


@dataclass(frozen=True)
class ActivityLabel:
    class_index: int
    name: str


@dataclass(frozen=True)
class TrackedVideo:
    video_id: str
    subject_id: str
    label: ActivityLabel
    frames: tuple[FrameSnapshot, ...]

    def __post_init__(self):
        if len(self.frames) < 2:
            raise DatasetError(f"video {self.video_id}: needs at least 2 frames, got {len(self.frames)}")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def object_ids(self) -> tuple[EntityRef, ...]:
        return tuple(sorted(self.frames[0].object_boxes))

    def with_label(self, label: ActivityLabel) -> TrackedVideo:
        return TrackedVideo(self.video_id, self.subject_id, label, self.frames)


@dataclass(frozen=True)
class Dataset:
    videos: tuple[TrackedVideo, ...]
    labels: tuple[ActivityLabel, ...]

    def __post_init__(self):
        if not self.videos:
            raise DatasetError("empty dataset")
        for i, lab in enumerate(self.labels):
            if lab.class_index != i:
                raise DatasetError(f"label table is not indexed 0..C-1 at {lab}")
        if len({lab.name for lab in self.labels}) != len(self.labels):
            raise DatasetError("duplicate label names")

    def __len__(self) -> int:
        return len(self.videos)

    @property
    def subjects(self) -> tuple[str, ...]:
        return tuple(sorted({v.subject_id for v in self.videos}))

    def by_subject(self) -> dict[str, list[TrackedVideo]]:
        out: dict[str, list[TrackedVideo]] = {s: [] for s in self.subjects}
        for v in self.videos:
            out[v.subject_id].append(v)
        return out

    def label(self, name: str) -> ActivityLabel:
        for lab in self.labels:
            if lab.name == name:
                return lab
        raise KeyError(name)


@dataclass(frozen=True)
class BodyMetrics:
    l_b: float
    w_b: float

    def __post_init__(self):
        if not (self.l_b > 0 and self.w_b > 0):
            raise ValueError(f"degenerate body metrics l_b={self.l_b}, w_b={self.w_b}")


@dataclass(frozen=True)
class BodyPartSet:
    name: str
    members: frozenset[EntityRef]

    def sorted_members(self) -> list[EntityRef]:
        return sorted(self.members)


WHOLE = BodyPartSet("Whole", frozenset(EntityRef.joint(n) for n in JOINT_NAMES))
UPPER = BodyPartSet(
    "Upper", frozenset(EntityRef.joint(n) for n in ("head", "neck", "left_hand", "right_hand"))
)
LOWER = BodyPartSet(
    "Lower", frozenset(EntityRef.joint(n) for n in (HIP, "torso", "left_foot", "right_foot"))
)
BODY_PARTS = {p.name: p for p in (WHOLE, UPPER, LOWER)}

# (length multiple of l_b, width multiple of w_b)
DEFAULT_PART_SCALES: dict[str, tuple[float, float]] = {
    name: (0.75, 0.75) for name in JOINT_NAMES
} | {
    "head": (1.0, 1.0),
    "torso": (1.0, 1.0),
    HIP: (1.0, 1.0),
    "left_hand": (0.5, 0.5),
    "right_hand": (0.5, 0.5),
    "left_foot": (0.5, 0.5),
    "right_foot": (0.5, 0.5),
}


class DegeneratePoseError(ValueError):
    """The frame's skeleton cannot size entity rectangles."""


def body_metrics(frame: FrameSnapshot) -> BodyMetrics:
    """Basic rectangle length (hip span along x) and width (neck to torso along y)."""
    try:
        lh, rh = frame.joint("left_hip"), frame.joint("right_hip")
        neck, torso = frame.joint("neck"), frame.joint("torso")
    except KeyError as exc:
        raise DegeneratePoseError(f"frame {frame.frame_index}: missing joint {exc}") from None
    l_b = abs(lh.x - rh.x)
    w_b = abs(neck.y - torso.y)
    if l_b == 0 or w_b == 0:
        raise DegeneratePoseError(f"frame {frame.frame_index}: degenerate pose (l_b={l_b}, w_b={w_b})")
    return BodyMetrics(l_b, w_b)


def video_body_metrics(video: TrackedVideo) -> BodyMetrics:
    """Per-frame metrics reduced to one value per video by the median."""
    ls, ws = [], []
    for frame in video.frames:
        try:
            m = body_metrics(frame)
        except DegeneratePoseError:
            continue
        ls.append(m.l_b)
        ws.append(m.w_b)
    if not ls:
        raise DegeneratePoseError(f"video {video.video_id}: no frame yields valid body metrics")
    return BodyMetrics(float(np.median(ls)), float(np.median(ws)))


def hip_midpoint(frame: FrameSnapshot) -> Point2D:
    lh, rh = frame.joint("left_hip"), frame.joint("right_hip")
    return Point2D((lh.x + rh.x) / 2, (lh.y + rh.y) / 2)


def entity_rectangles(
    frame: FrameSnapshot,
    scales: Mapping[str, tuple[float, float]],
    metrics: BodyMetrics,
) -> dict[EntityRef, Rect]:
    out: dict[EntityRef, Rect] = {}
    for ref, pos in frame.joint_positions.items():
        if ref.id not in scales:
            raise KeyError(f"no part scale for joint {ref.id!r}")
        lm, wm = scales[ref.id]
        out[ref] = Rect(pos, lm * metrics.l_b, wm * metrics.w_b)
    out.update(frame.object_boxes)
    return out


# ---------------------------------------------------------------------------
# canonical JSON format


def video_to_record(video: TrackedVideo) -> dict:
    return {
        "video_id": video.video_id,
        "subject_id": video.subject_id,
        "label": video.label.name,
        "frames": [
            {
                "frame": f.frame_index,
                "joints": {r.id: [p.x, p.y] for r, p in sorted(f.joint_positions.items())},
                "objects": {r.id: b.to_box() for r, b in sorted(f.object_boxes.items())},
            }
            for f in video.frames
        ],
    }


def save_video(video: TrackedVideo, path: str | Path) -> None:
    Path(path).write_text(json.dumps(video_to_record(video), indent=1), encoding="utf-8")


def save_dataset(dataset: Dataset, directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for video in dataset.videos:
        p = directory / f"{video.video_id}.json"
        save_video(video, p)
        paths.append(p)
    return paths


def _warn(msg: str) -> None:
    warnings.warn(msg, ValidationWarning, stacklevel=3)


def _parse_frames(record: dict, source: str) -> list[tuple[int, dict, dict]]:
    vid = record.get("video_id", "?")
    raw = []
    prev = None
    for i, fr in enumerate(record["frames"]):
        try:
            idx = int(fr["frame"])
            joints = {str(k): [float(v[0]), float(v[1])] for k, v in fr.get("joints", {}).items()}
            objects = {str(k): [float(c) for c in v] for k, v in (fr.get("objects") or {}).items()}
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise DatasetError(f"{source}: video {vid} frame #{i}: malformed frame ({exc})") from None
        if prev is not None and idx <= prev:
            raise DatasetError(f"{source}: video {vid} frame {idx}: frame indices not increasing")
        for oid, box in objects.items():
            if len(box) != 4 or box[2] <= 0 or box[3] <= 0:
                raise DatasetError(f"{source}: video {vid} frame {idx}: bad box for object {oid}")
        for name, (x, y) in joints.items():
            if name not in JOINT_NAMES:
                raise DatasetError(f"{source}: video {vid} frame {idx}: unknown joint {name!r}")
            if not (math.isfinite(x) and math.isfinite(y)):
                joints[name] = None
        joints = {k: v for k, v in joints.items() if v is not None}
        raw.append((idx, joints, objects))
        prev = idx
    return raw


def _repair_objects(vid: str, raw: list[tuple[int, dict, dict]]) -> list[tuple[int, dict, dict]]:
    """Interpolate short interior object gaps; frames inside longer or edge gaps are dropped."""
    object_ids = sorted({oid for _, _, objs in raw for oid in objs})
    drop: set[int] = set()
    for oid in object_ids:
        present = [oid in objs for _, _, objs in raw]
        i = 0
        n = len(raw)
        while i < n:
            if present[i]:
                i += 1
                continue
            j = i
            while j < n and not present[j]:
                j += 1
            interior = i > 0 and j < n
            if interior and j - i <= MAX_INTERPOLATION_GAP:
                f0, b0 = raw[i - 1][0], np.asarray(raw[i - 1][2][oid])
                f1, b1 = raw[j][0], np.asarray(raw[j][2][oid])
                for k in range(i, j):
                    t = (raw[k][0] - f0) / (f1 - f0)
                    raw[k][2][oid] = [float(v) for v in (1 - t) * b0 + t * b1]
                _warn(f"video {vid}: interpolated object {oid} over frames {raw[i][0]}..{raw[j - 1][0]}")
            else:
                drop.update(range(i, j))
                _warn(f"video {vid}: dropped frames {raw[i][0]}..{raw[j - 1][0]} (object {oid} missing)")
            i = j
    return [r for k, r in enumerate(raw) if k not in drop]


def video_from_record(record: dict, labels: Mapping[str, ActivityLabel], source: str = "<record>") -> TrackedVideo:
    try:
        vid = str(record["video_id"])
        subject = str(record["subject_id"])
        label_name = str(record["label"])
        record["frames"]
    except (KeyError, TypeError) as exc:
        raise DatasetError(f"{source}: missing field {exc}") from None
    if label_name not in labels:
        raise DatasetError(f"{source}: video {vid}: unknown label {label_name!r}")

    raw = _parse_frames(record, source)
    kept = []
    for idx, joints, objects in raw:
        missing = [n for n in JOINT_NAMES if n not in joints]
        if missing:
            _warn(f"video {vid}: dropped frame {idx} (missing joints {', '.join(missing)})")
            continue
        kept.append((idx, joints, objects))
    kept = _repair_objects(vid, kept)

    frames = tuple(
        FrameSnapshot(
            frame_index=new_idx,
            joint_positions={EntityRef.joint(n): Point2D(*joints[n]) for n in JOINT_NAMES},
            object_boxes={EntityRef.object(o): Rect.from_box(b) for o, b in sorted(objects.items())},
        )
        for new_idx, (_, joints, objects) in enumerate(kept)
    )
    if len(frames) < 2:
        raise DatasetError(f"{source}: video {vid}: fewer than 2 valid frames after validation")
    return TrackedVideo(vid, subject, labels[label_name], frames)


def load_dataset(path: str | Path, format: str = "canonical") -> Dataset:
    """Load and validate every ``*.json`` video record under ``path``.

    ``format="cad120-converted"`` fixes the label table to the CAD-120 activity
    order (restricted to the activities present); ``"canonical"`` sorts label
    names alphabetically.
    """
    if format not in ("canonical", "cad120-converted"):
        raise DatasetError(f"unknown dataset format {format!r}")
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"no such file or directory: {path}")
    files = [path] if path.is_file() else sorted(path.glob("*.json"))
    if not files:
        raise DatasetError("empty dataset")

    records = []
    for f in files:
        try:
            records.append((f, json.loads(f.read_text(encoding="utf-8"))))
        except (OSError, json.JSONDecodeError) as exc:
            raise DatasetError(f"{f}: cannot read video record ({exc})") from None

    names = {str(r.get("label")) for _, r in records}
    if format == "cad120-converted":
        unknown = names - set(CAD120_ACTIVITIES)
        if unknown:
            raise DatasetError(f"labels outside the CAD-120 activity set: {sorted(unknown)}")
        ordered = [n for n in CAD120_ACTIVITIES if n in names]
    else:
        ordered = sorted(names)
    labels = {n: ActivityLabel(i, n) for i, n in enumerate(ordered)}

    videos = []
    seen = set()
    for f, rec in records:
        v = video_from_record(rec, labels, source=str(f))
        if v.video_id in seen:
            raise DatasetError(f"{f}: duplicate video id {v.video_id}")
        seen.add(v.video_id)
        videos.append(v)
    log.info("loaded %d videos from %s", len(videos), path)
    return Dataset(tuple(videos), tuple(labels.values()))


def make_dataset(videos: Iterable[TrackedVideo]) -> Dataset:
    """Build a dataset whose label table is the labels carried by ``videos``."""
    videos = tuple(videos)
    if not videos:
        raise DatasetError("empty dataset")
    labels = sorted({v.label for v in videos}, key=lambda lab: lab.class_index)
    return Dataset(videos, tuple(labels))


def entity_tracks(
    video: TrackedVideo,
    entities: list[EntityRef],
    scales: Mapping[str, tuple[float, float]],
    metrics: BodyMetrics,
) -> tuple[np.ndarray, np.ndarray]:
    """Centers (T, E, 2) and sizes (T, E, 2) for ``entities`` across the video."""
    T, E = len(video.frames), len(entities)
    centers = np.empty((T, E, 2))
    sizes = np.empty((T, E, 2))
    for e, ref in enumerate(entities):
        if ref.kind == "joint":
            if ref.id not in scales:
                raise KeyError(f"no part scale for joint {ref.id!r}")
            lm, wm = scales[ref.id]
            sizes[:, e] = (lm * metrics.l_b, wm * metrics.w_b)
    for t, frame in enumerate(video.frames):
        for e, ref in enumerate(entities):
            if ref.kind == "joint":
                p = hip_midpoint(frame) if ref.id == HIP else frame.joint_positions[ref]
                centers[t, e] = (p.x, p.y)
            else:
                b = frame.object_boxes[ref]
                centers[t, e] = (b.center.x, b.center.y)
                sizes[t, e] = (b.width, b.height)
    return centers, sizes
