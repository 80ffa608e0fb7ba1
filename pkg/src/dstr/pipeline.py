"""End-to-end training, prediction and leave-one-subject-out evaluation."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import yaml

from . import graph
from .graph import CellGraphDictionary, EpisodeTable, Window, build_dictionary
from .hmm import ClassModels, DiscreteHMM, baum_welch_fit, classify
from .model import (
    BODY_PARTS,
    DEFAULT_PART_SCALES,
    ActivityLabel,
    Dataset,
    DegeneratePoseError,
    TrackedVideo,
    video_body_metrics,
)
from .qualrel import (
    SPATIAL_RELATIONS,
    SPATIAL_RELATIONS_NO_DIRECTION,
    QualConfig,
    UndefinedDirectionError,
    scope_episodes,
)
from .temporal import Interval
from .vocab import Codebook, CodebookError, assign_many, collect_distinct, kmeans_fit

log = logging.getLogger(__name__)

BUNDLE_VERSION = 1
REPORT_VERSION = 1

DECOMPOSITIONS: dict[str, tuple[str, ...]] = {
    "full": ("Whole", "Upper", "Lower"),
    "whole-only": ("Whole",),
    "upper-only": ("Upper",),
    "lower-only": ("Lower",),
}


class PipelineError(RuntimeError):
    """Failure tagged with the pipeline stage that raised it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class PipelineConfig:
    # relation layer
    tau_D: float = 0.0
    tau_P: float = 0.9
    d_min: int = 3
    up_is_negative_y: bool = True
    part_scales: Mapping[str, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_PART_SCALES))
    # windows
    l_w: int = 4
    l_s: int = 1
    # vocabulary
    K: int = 38
    norm_mode: str = "counts"
    kmeans_max_iter: int = 300
    kmeans_tol: float = 1e-8
    # HMMs
    N: int = 7
    hmm_max_iter: int = 100
    hmm_tol: float = 1e-4
    epsilon: float = 1e-6
    restarts: int = 3
    # experiment
    seed: int = 0
    repeats: int = 30
    # ablation switches
    use_direction: bool = True
    use_dynamics: bool = True
    decomposition: str = "full"

    def __post_init__(self):
        self.qual  # validates thresholds
        if self.decomposition not in DECOMPOSITIONS:
            raise PipelineError("config", f"unknown decomposition {self.decomposition!r}")
        if self.l_w < 2 or self.l_s < 1:
            raise PipelineError("config", "need l_w >= 2 and l_s >= 1")
        if self.K < 1 or self.N < 1 or self.repeats < 1 or self.restarts < 1:
            raise PipelineError("config", "K, N, repeats and restarts must be >= 1")
        if self.norm_mode not in ("counts", "l1"):
            raise PipelineError("config", f"unknown norm_mode {self.norm_mode!r}")

    @property
    def qual(self) -> QualConfig:
        try:
            return QualConfig(self.tau_D, self.tau_P, self.d_min, self.up_is_negative_y)
        except ValueError as exc:
            raise PipelineError("config", str(exc)) from None

    @property
    def scopes(self) -> tuple[str, ...]:
        return DECOMPOSITIONS[self.decomposition]

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["part_scales"] = {k: list(v) for k, v in sorted(self.part_scales.items())}
        return d

    @classmethod
    def from_dict(cls, doc: Mapping) -> PipelineConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise PipelineError("config", f"unknown config fields {sorted(unknown)}")
        doc = dict(doc)
        if "part_scales" in doc:
            scales = dict(DEFAULT_PART_SCALES)
            scales.update({k: (float(v[0]), float(v[1])) for k, v in doc["part_scales"].items()})
            doc["part_scales"] = scales
        return cls(**doc)

    def replace(self, **changes) -> PipelineConfig:
        return dataclasses.replace(self, **changes)


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise PipelineError("config", f"cannot read {path}: {exc}") from None
    return PipelineConfig.from_dict(doc)


ABLATIONS: dict[str, dict] = {
    "DSTR": {},
    "NDT": {"use_dynamics": False},
    "NDR": {"use_direction": False},
    "NHD": {"decomposition": "whole-only"},
    "UB": {"decomposition": "upper-only"},
    "LB": {"decomposition": "lower-only"},
}


def ablation(config: PipelineConfig, name: str) -> PipelineConfig:
    return config.replace(**ABLATIONS[name])


def config_dictionary(config: PipelineConfig) -> CellGraphDictionary:
    return build_dictionary(SPATIAL_RELATIONS if config.use_direction else SPATIAL_RELATIONS_NO_DIRECTION)


# ---------------------------------------------------------------------------
# featurisation


@dataclass(frozen=True, eq=False)
class VideoFeatures:
    video_id: str
    label: ActivityLabel
    subject_id: str
    windows: tuple[Window, ...]
    matrix: np.ndarray  # (windows, len(scopes) * |dictionary|)


def extract_features(video: TrackedVideo, config: PipelineConfig, dictionary: CellGraphDictionary | None = None) -> VideoFeatures:
    dictionary = dictionary or config_dictionary(config)
    try:
        metrics = video_body_metrics(video)
        scoped = {
            name: scope_episodes(video, BODY_PARTS[name], config.qual, config.part_scales, metrics, config.use_direction)
            for name in dict.fromkeys(("Whole",) + config.scopes)
        }
    except (DegeneratePoseError, UndefinedDirectionError, KeyError) as exc:
        raise PipelineError("relations", f"video {video.video_id}: {exc}") from None
    try:
        fragments = graph.segment_fragments(scoped["Whole"])
        if config.use_dynamics:
            windows = graph.sliding_windows(fragments, config.l_w, config.l_s)
        else:
            windows = [Window((0, len(fragments) - 1), Interval(0, len(video) - 1))]
    except ValueError as exc:
        raise PipelineError("segmentation", f"video {video.video_id}: {exc}") from None
    if not windows:
        raise PipelineError("segmentation", f"video {video.video_id}: no windows")
    tables = {name: EpisodeTable.from_episodes(scoped[name]) for name in config.scopes}
    matrix = np.stack([graph.hierarchical_features(tables, w, dictionary, config.scopes) for w in windows])
    return VideoFeatures(video.video_id, video.label, video.subject_id, tuple(windows), matrix)


def extract_all(videos: Sequence[TrackedVideo], config: PipelineConfig) -> list[VideoFeatures]:
    dictionary = config_dictionary(config)
    return [extract_features(v, config, dictionary) for v in videos]


def feature_columns(config: PipelineConfig) -> list[str]:
    names = config_dictionary(config).column_names()
    return [f"{scope}:{n}" for scope in config.scopes for n in names]


def dump_features(config: PipelineConfig, dataset: Dataset, out_dir: str | Path) -> list[Path]:
    """One CSV per video, one row per window."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    header = ["window", "first_fragment", "last_fragment", "frame_start", "frame_end"] + feature_columns(config)
    paths = []
    for feats in extract_all(dataset.videos, config):
        p = out_dir / f"{feats.video_id}.csv"
        with p.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for k, (win, row) in enumerate(zip(feats.windows, feats.matrix)):
                w.writerow([k, *win.fragment_span, win.frame_range.s, win.frame_range.e, *row.tolist()])
        paths.append(p)
    return paths


# ---------------------------------------------------------------------------
# training / prediction


@dataclass(frozen=True, eq=False)
class ModelBundle:
    config: PipelineConfig
    labels: tuple[str, ...]
    dictionary_size: int
    codebook: Codebook | None = None
    models: ClassModels | None = None
    # whole-video nearest-neighbour references (no-dynamics variant)
    references: tuple[tuple[int, np.ndarray], ...] = ()

    def to_dict(self) -> dict:
        doc = {
            "version": BUNDLE_VERSION,
            "config": self.config.to_dict(),
            "labels": list(self.labels),
            "dictionary": {
                "spatial": [s.name for s in config_dictionary(self.config).spatial],
                "size": self.dictionary_size,
                "scopes": list(self.config.scopes),
            },
        }
        if self.codebook is not None:
            cb = self.codebook.to_dict()
            doc["codebook"] = cb
            doc["codebook_ref"] = hashlib.sha256(json.dumps(cb, sort_keys=True).encode()).hexdigest()
            doc["models"] = [{"label": lab, **m.to_dict()} for lab, m in zip(self.models.labels, self.models.models)]
        else:
            doc["references"] = [{"label": self.labels[c], "features": v.tolist()} for c, v in self.references]
        return doc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def from_dict(cls, doc: Mapping) -> ModelBundle:
        if doc.get("version") != BUNDLE_VERSION:
            raise PipelineError("predict", f"unsupported bundle version {doc.get('version')!r}")
        config = PipelineConfig.from_dict(doc["config"])
        labels = tuple(doc["labels"])
        size = int(doc["dictionary"]["size"])
        if "codebook" in doc:
            cb = Codebook.from_dict(doc["codebook"])
            if cb.feature_length != size * len(config.scopes):
                raise PipelineError("predict", "codebook feature length disagrees with dictionary and decomposition")
            models = ClassModels(
                tuple(m["label"] for m in doc["models"]),
                tuple(DiscreteHMM.from_dict(m) for m in doc["models"]),
            )
            return cls(config, labels, size, cb, models)
        refs = tuple((labels.index(r["label"]), np.asarray(r["features"], dtype=np.int64)) for r in doc["references"])
        return cls(config, labels, size, references=refs)

    @classmethod
    def load(cls, path: str | Path) -> ModelBundle:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise PipelineError("predict", f"cannot read bundle {path}: {exc}") from None
        return cls.from_dict(doc)


def _class_seed(seed: int, c: int) -> int:
    return int(np.random.SeedSequence([seed, c]).generate_state(1)[0])


def train_from_features(
    features: Sequence[VideoFeatures],
    labels: Sequence[ActivityLabel],
    config: PipelineConfig,
    seed: int | None = None,
) -> ModelBundle:
    seed = config.seed if seed is None else seed
    names = tuple(lab.name for lab in labels)
    size = len(config_dictionary(config))
    if not features:
        raise PipelineError("train", "no training videos")
    for lab in labels:
        if not any(f.label.class_index == lab.class_index for f in features):
            raise PipelineError("train", f"class {lab.name!r} has zero usable windows")

    if not config.use_dynamics:
        refs = tuple((f.label.class_index, f.matrix[0]) for f in features)
        return ModelBundle(config, names, size, references=refs)

    all_windows = np.concatenate([f.matrix for f in features])
    distinct = collect_distinct(list(all_windows))
    try:
        codebook = kmeans_fit(distinct, config.K, seed, config.kmeans_max_iter, config.kmeans_tol, config.norm_mode)
    except CodebookError as exc:
        raise PipelineError("vocab", f"{exc} (distinct window vectors: {len(distinct)}; set K <= that count)") from None
    models = []
    for lab in labels:
        seqs = [assign_many(f.matrix, codebook) for f in features if f.label.class_index == lab.class_index]
        models.append(
            baum_welch_fit(
                seqs,
                N=config.N,
                M=codebook.K,
                seed=_class_seed(seed, lab.class_index),
                max_iter=config.hmm_max_iter,
                tol=config.hmm_tol,
                epsilon=config.epsilon,
                restarts=config.restarts,
            )
        )
    return ModelBundle(config, names, size, codebook, ClassModels(names, tuple(models)))


def train_pipeline(config: PipelineConfig, dataset: Dataset, seed: int | None = None) -> ModelBundle:
    return train_from_features(extract_all(dataset.videos, config), dataset.labels, config, seed)


@dataclass(frozen=True, eq=False)
class Prediction:
    class_index: int
    label: str
    scores: np.ndarray
    words: np.ndarray


def predict_features(bundle: ModelBundle, feats: VideoFeatures) -> Prediction:
    if len(feats.matrix) == 0:
        raise PipelineError("segmentation", f"video {feats.video_id}: zero windows")
    if bundle.codebook is None:
        x = feats.matrix[0].astype(float)
        scores = np.full(len(bundle.labels), -np.inf)
        for c, ref in bundle.references:
            scores[c] = max(scores[c], -graph.kernel_distance(x, ref))
        best = int(np.argmax(scores))
        return Prediction(best, bundle.labels[best], scores, np.zeros(0, dtype=np.int64))
    words = assign_many(feats.matrix, bundle.codebook)
    best, scores = classify(bundle.models, words)
    return Prediction(best, bundle.labels[best], scores, words)


def predict(bundle: ModelBundle, video: TrackedVideo) -> Prediction:
    return predict_features(bundle, extract_features(video, bundle.config))


# ---------------------------------------------------------------------------
# evaluation


def compute_metrics(confusion) -> tuple[float, float, float]:
    """Accuracy, macro precision and macro recall of a confusion matrix (rows = truth).

    A class never predicted scores precision 0; classes absent from the truth
    rows are left out of the recall average.
    """
    C = np.asarray(confusion, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1] or np.any(C < 0):
        raise ValueError("confusion must be a square non-negative matrix")
    total = C.sum()
    if total == 0:
        raise ValueError("empty confusion matrix")
    diag = np.diag(C)
    col, row = C.sum(0), C.sum(1)
    precision = np.divide(diag, col, out=np.zeros_like(diag), where=col > 0)
    recall = diag[row > 0] / row[row > 0]
    return float(diag.sum() / total), float(precision.mean()), float(recall.mean())


def format_confusion(confusion, labels: Sequence[str]) -> str:
    C = np.asarray(confusion, dtype=int)
    width = max(max(len(lab) for lab in labels), len(str(C.max())), 5)
    lines = ["truth \\ predicted".ljust(width) + " " + " ".join(lab.rjust(width) for lab in labels)]
    for lab, row in zip(labels, C):
        lines.append(lab.ljust(width) + " " + " ".join(str(v).rjust(width) for v in row))
    return "\n".join(lines) + "\n"


def shuffle_labels(dataset: Dataset, seed: int) -> Dataset:
    """Permute labels among each subject's videos (a chance-level control)."""
    rng = np.random.default_rng(seed)
    videos = []
    for subject, vids in dataset.by_subject().items():
        perm = rng.permutation(len(vids))
        videos.extend(v.with_label(vids[p].label) for v, p in zip(vids, perm))
    return Dataset(tuple(videos), dataset.labels)


@dataclass(frozen=True)
class EvaluationReport:
    labels: tuple[str, ...]
    subjects: tuple[str, ...]
    config: PipelineConfig
    runs: tuple[dict, ...]

    def _stat(self, key: str) -> tuple[float, float]:
        vals = np.array([r[key] for r in self.runs])
        return float(vals.mean()), float(vals.std())

    @property
    def accuracy(self) -> tuple[float, float]:
        return self._stat("accuracy")

    @property
    def precision(self) -> tuple[float, float]:
        return self._stat("precision")

    @property
    def recall(self) -> tuple[float, float]:
        return self._stat("recall")

    @property
    def confusion(self) -> np.ndarray:
        """Confusion summed over repeats."""
        return np.sum([np.asarray(r["confusion"]) for r in self.runs], axis=0)

    def to_dict(self) -> dict:
        summary = {}
        for key in ("accuracy", "precision", "recall"):
            m, s = self._stat(key)
            summary[key] = {"mean": m, "std": s}
        return {
            "version": REPORT_VERSION,
            "labels": list(self.labels),
            "subjects": list(self.subjects),
            "config": self.config.to_dict(),
            "summary": summary,
            "confusion": self.confusion.tolist(),
            "runs": list(self.runs),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def confusion_text(self) -> str:
        return format_confusion(self.confusion, self.labels)


def evaluate_loso(
    config: PipelineConfig,
    dataset: Dataset,
    repeats: int | None = None,
    features: Sequence[VideoFeatures] | None = None,
) -> EvaluationReport:
    """Leave-one-subject-out evaluation, repeated with seeds ``seed, seed+1, ...``."""
    repeats = config.repeats if repeats is None else repeats
    by_subject = dataset.by_subject()
    if len(by_subject) < 2:
        raise PipelineError("evaluate", "leave-one-subject-out needs at least 2 subjects")
    if features is None:
        features = extract_all(dataset.videos, config)
    cached = {f.video_id: f for f in features}
    # labels come from the dataset so relabelled controls can reuse cached features
    feats = {v.video_id: dataclasses.replace(cached[v.video_id], label=v.label) for v in dataset.videos}
    C = len(dataset.labels)
    runs = []
    for r in range(repeats):
        seed = config.seed + r
        confusion = np.zeros((C, C), dtype=np.int64)
        folds = []
        for subject, test_videos in by_subject.items():
            train = [feats[v.video_id] for v in dataset.videos if v.subject_id != subject]
            bundle = train_from_features(train, dataset.labels, config, seed)
            preds = []
            for v in test_videos:
                p = predict_features(bundle, feats[v.video_id])
                confusion[v.label.class_index, p.class_index] += 1
                preds.append({"video_id": v.video_id, "truth": v.label.name, "predicted": p.label})
            correct = sum(p["truth"] == p["predicted"] for p in preds)
            folds.append({"subject": subject, "n_test": len(preds), "correct": correct, "predictions": preds})
            log.info("repeat %d fold %s: %d/%d", r, subject, correct, len(preds))
        acc, prec, rec = compute_metrics(confusion)
        runs.append(
            {"seed": seed, "accuracy": acc, "precision": prec, "recall": rec, "confusion": confusion.tolist(), "folds": folds}
        )
    return EvaluationReport(tuple(lab.name for lab in dataset.labels), dataset.subjects, config, tuple(runs))
