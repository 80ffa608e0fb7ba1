"""Deterministic scripted activity generator for desk-scale experiments.

A script is a plain mapping (JSON/YAML friendly)::

    {
      "subjects": 4, "repetitions": 3,
      "jitter": 1.0,          # per-frame Gaussian noise on every coordinate (px)
      "timing_jitter": 0.15,  # relative change of each segment's duration per repetition
      "subject_scale": 0.08,  # per-subject body/scene scale spread
      "subject_offset": 15.0, # per-subject translation spread (px)
      "pose": {...},          # optional base pose overrides, joint -> [x, y]
      "objects": {"cup": [cx, cy, w, h], ...},
      "classes": [
        {"name": "drink", "segments": [
            {"frames": 8},                                       # hold
            {"frames": 10, "move": {"right_hand": [118, 175]}},  # linear move to target
        ]},
      ],
    }

Coordinates are image pixels with y pointing down.
"""

from __future__ import annotations

import copy
from typing import Mapping

import numpy as np

from .model import (
    JOINT_NAMES,
    ActivityLabel,
    Dataset,
    EntityRef,
    FrameSnapshot,
    Point2D,
    Rect,
    TrackedVideo,
)

BASE_POSE: dict[str, tuple[float, float]] = {
    "head": (200, 60),
    "neck": (200, 95),
    "torso": (200, 150),
    "left_shoulder": (225, 100),
    "right_shoulder": (175, 100),
    "left_elbow": (232, 140),
    "right_elbow": (168, 140),
    "left_hand": (235, 180),
    "right_hand": (165, 180),
    "left_hip": (215, 200),
    "right_hip": (185, 200),
    "left_knee": (217, 260),
    "right_knee": (183, 260),
    "left_foot": (218, 320),
    "right_foot": (182, 320),
}
# subject transforms scale about this point
ANCHOR = np.array([200.0, 200.0])


class ScriptError(ValueError):
    pass


def benchmark_script() -> dict:
    """Four object-interaction activities used by the synthetic benchmark."""
    rest = [165, 180]
    return {
        "subjects": 4,
        "repetitions": 3,
        "jitter": 1.0,
        "timing_jitter": 0.15,
        "subject_scale": 0.08,
        "subject_offset": 15.0,
        "objects": {"cup": [110, 178, 24, 30], "box": [120, 318, 40, 40]},
        "classes": [
            {
                "name": "drink",
                "segments": [
                    {"frames": 8},
                    {"frames": 10, "move": {"right_hand": [116, 176]}},
                    {"frames": 5},
                    {"frames": 12, "move": {"right_hand": [182, 82], "cup": [176, 84]}},
                    {"frames": 8},
                    {"frames": 12, "move": {"right_hand": [116, 176], "cup": [110, 178]}},
                    {"frames": 10, "move": {"right_hand": rest}},
                    {"frames": 6},
                ],
            },
            {
                "name": "raise_hand",
                "segments": [
                    {"frames": 8},
                    {"frames": 14, "move": {"right_hand": [172, 15], "right_elbow": [178, 55]}},
                    {"frames": 10},
                    {"frames": 14, "move": {"right_hand": rest, "right_elbow": [168, 140]}},
                    {"frames": 8},
                ],
            },
            {
                "name": "extend_hand",
                "segments": [
                    {"frames": 8},
                    {"frames": 14, "move": {"right_hand": [70, 110], "right_elbow": [125, 105]}},
                    {"frames": 10},
                    {"frames": 14, "move": {"right_hand": rest, "right_elbow": [168, 140]}},
                    {"frames": 8},
                ],
            },
            {
                "name": "push_box",
                "segments": [
                    {"frames": 8},
                    {"frames": 8, "move": {"right_foot": [136, 316], "right_knee": [170, 258]}},
                    {"frames": 10, "move": {"right_foot": [96, 316], "right_knee": [150, 258], "box": [80, 318]}},
                    {"frames": 5},
                    {"frames": 10, "move": {"right_foot": [182, 320], "right_knee": [183, 260]}},
                    {"frames": 8},
                ],
            },
        ],
    }


def hands_up_script() -> dict:
    """Single-purpose script: both hands go from beside the hips to above the head."""
    return {
        "subjects": 1,
        "repetitions": 1,
        "jitter": 0.0,
        "timing_jitter": 0.0,
        "subject_scale": 0.0,
        "subject_offset": 0.0,
        "objects": {},
        "classes": [
            {"name": "idle", "segments": [{"frames": 10}, {"frames": 10}]},
            {
                "name": "hands_up",
                "segments": [
                    {"frames": 6},
                    {"frames": 12, "move": {"left_hand": [210, 5], "right_hand": [190, 5]}},
                    {"frames": 6},
                ],
            },
        ],
    }


def _validate(script: Mapping) -> None:
    classes = script.get("classes") or []
    if len(classes) < 2:
        raise ScriptError("script needs at least 2 activity classes")
    names = [c.get("name") for c in classes]
    if len(set(names)) != len(names) or not all(names):
        raise ScriptError("class names must be present and unique")
    known = set(JOINT_NAMES) | set(script.get("objects", {}))
    for c in classes:
        segs = c.get("segments") or []
        if sum(int(s.get("frames", 0)) for s in segs) < 2:
            raise ScriptError(f"class {c['name']!r}: fewer than 2 frames")
        for s in segs:
            if int(s.get("frames", 0)) < 1:
                raise ScriptError(f"class {c['name']!r}: every segment needs frames >= 1")
            unknown = set(s.get("move", {})) - known
            if unknown:
                raise ScriptError(f"class {c['name']!r}: unknown entities {sorted(unknown)}")
    for k in ("subjects", "repetitions"):
        if int(script.get(k, 1)) < 1:
            raise ScriptError(f"{k} must be >= 1")


def script_trajectory(script: Mapping, class_index: int, durations: list[int] | None = None) -> dict[str, np.ndarray]:
    """Noise-free scene coordinates (T, 2) per entity for one class."""
    cls = script["classes"][class_index]
    pose = {**BASE_POSE, **{k: tuple(v) for k, v in script.get("pose", {}).items()}}
    state = {k: np.asarray(v, dtype=float) for k, v in pose.items()}
    state.update({k: np.asarray(v[:2], dtype=float) for k, v in script.get("objects", {}).items()})
    tracks: dict[str, list[np.ndarray]] = {k: [] for k in state}
    segs = cls["segments"]
    if durations is None:
        durations = [int(s["frames"]) for s in segs]
    for seg, n in zip(segs, durations):
        start = {k: v.copy() for k, v in state.items()}
        for k, target in seg.get("move", {}).items():
            state[k] = np.asarray(target, dtype=float)
        for f in range(1, n + 1):
            t = f / n
            for k in tracks:
                tracks[k].append(start[k] + t * (state[k] - start[k]))
    return {k: np.array(v) for k, v in tracks.items()}


def synth_generate(script: Mapping, seed: int = 0) -> Dataset:
    script = copy.deepcopy(dict(script))
    _validate(script)
    rng = np.random.default_rng(seed)
    n_subj = int(script.get("subjects", 4))
    n_rep = int(script.get("repetitions", 3))
    jitter = float(script.get("jitter", 0.0))
    timing = float(script.get("timing_jitter", 0.0))
    sizes = {k: (float(v[2]), float(v[3])) for k, v in script.get("objects", {}).items()}

    subjects = []
    for _ in range(n_subj):
        scale = 1.0 + float(script.get("subject_scale", 0.0)) * rng.uniform(-1, 1)
        offset = float(script.get("subject_offset", 0.0)) * rng.uniform(-1, 1, size=2)
        subjects.append((scale, offset))

    labels = tuple(ActivityLabel(i, c["name"]) for i, c in enumerate(script["classes"]))
    videos = []
    for ci, cls in enumerate(script["classes"]):
        for si, (scale, offset) in enumerate(subjects):
            for rep in range(n_rep):
                durations = [
                    max(1, int(round(int(s["frames"]) * (1 + timing * rng.uniform(-1, 1))))) for s in cls["segments"]
                ]
                traj = script_trajectory(script, ci, durations)
                T = len(next(iter(traj.values())))
                frames = []
                for t in range(T):
                    joints, objects = {}, {}
                    for name, path in traj.items():
                        xy = (path[t] - ANCHOR) * scale + ANCHOR + offset
                        if jitter > 0:
                            xy = xy + rng.normal(0.0, jitter, size=2)
                        if name in sizes:
                            w, h = sizes[name]
                            objects[EntityRef.object(name)] = Rect(Point2D(float(xy[0]), float(xy[1])), w * scale, h * scale)
                        else:
                            joints[EntityRef.joint(name)] = Point2D(float(xy[0]), float(xy[1]))
                    frames.append(FrameSnapshot(t, joints, objects))
                vid = f"{cls['name']}_s{si + 1}_r{rep + 1}"
                videos.append(TrackedVideo(vid, f"subject{si + 1}", labels[ci], tuple(frames)))
    return Dataset(tuple(videos), labels)
