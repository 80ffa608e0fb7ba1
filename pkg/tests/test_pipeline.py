import json

import numpy as np
import pytest

import dstr.pipeline as pl
from dstr.model import ActivityLabel, Dataset, EntityRef, FrameSnapshot, Point2D, TrackedVideo
from dstr.pipeline import (
    ABLATIONS,
    ModelBundle,
    PipelineConfig,
    PipelineError,
    ablation,
    compute_metrics,
    evaluate_loso,
    extract_features,
    load_config,
    predict,
    predict_features,
    shuffle_labels,
    train_from_features,
)
from dstr.synth import BASE_POSE

FAST = PipelineConfig(K=12, N=3, restarts=1, hmm_max_iter=30)


class TestMetrics:
    def test_perfect(self):
        assert compute_metrics(np.diag([3, 3, 3])) == (1.0, 1.0, 1.0)

    def test_hand_example(self):
        acc, prec, rec = compute_metrics([[2, 1], [0, 3]])
        assert acc == pytest.approx(5 / 6)
        assert prec == pytest.approx(0.875)
        assert rec == pytest.approx(5 / 6)

    def test_never_predicted_class(self):
        _, prec, _ = compute_metrics([[2, 0], [2, 0]])
        assert prec == pytest.approx(0.25)

    def test_zero_matrix(self):
        with pytest.raises(ValueError):
            compute_metrics(np.zeros((2, 2)))


class TestConfig:
    def test_yaml_round_trip(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("K: 20\nN: 5\ntau_P: 0.8\npart_scales:\n  head: [2, 2]\n")
        cfg = load_config(p)
        assert (cfg.K, cfg.N, cfg.tau_P) == (20, 5, 0.8)
        assert cfg.part_scales["head"] == (2.0, 2.0) and cfg.part_scales["neck"] == (0.75, 0.75)
        assert PipelineConfig.from_dict(cfg.to_dict()) == cfg

    def test_defaults(self):
        assert load_config(None) == PipelineConfig()
        cfg = PipelineConfig()
        assert (cfg.K, cfg.N, cfg.l_w, cfg.l_s) == (38, 7, 4, 1)

    @pytest.mark.parametrize("text", ["bogus: 1\n", "decomposition: sideways\n", "tau_D: 0.95\n", "l_w: 1\n"])
    def test_rejects_bad_config(self, tmp_path, text):
        p = tmp_path / "c.yaml"
        p.write_text(text)
        with pytest.raises(PipelineError, match=r"\[config\]"):
            load_config(p)

    def test_ablation_table(self):
        assert set(ABLATIONS) == {"DSTR", "NDT", "NDR", "NHD", "UB", "LB"}
        assert ablation(FAST, "UB").scopes == ("Upper",)
        assert ablation(FAST, "NHD").scopes == ("Whole",)
        assert FAST.scopes == ("Whole", "Upper", "Lower")


@pytest.fixture(scope="module")
def bundle(benchmark, benchmark_features):
    return train_from_features(benchmark_features, benchmark.labels, FAST)


class TestTraining:
    def test_bundle_contents(self, bundle, benchmark_features):
        assert bundle.codebook.K == FAST.K
        assert bundle.codebook.feature_length == 3 * bundle.dictionary_size == benchmark_features[0].matrix.shape[1]
        assert len(bundle.models) == 4

    def test_serialisation(self, bundle, benchmark, benchmark_features, tmp_path):
        again = train_from_features(benchmark_features, benchmark.labels, FAST)
        assert bundle.dumps() == again.dumps()
        bundle.save(tmp_path / "b.json")
        doc = json.loads((tmp_path / "b.json").read_text())
        assert {"version", "labels", "codebook_ref", "models"} <= set(doc)
        assert set(doc["models"][0]) == {"label", "N", "M", "pi", "A", "B"}
        back = ModelBundle.load(tmp_path / "b.json")
        assert back.dumps() == bundle.dumps()
        vf = benchmark_features[5]
        assert np.allclose(predict_features(back, vf).scores, predict_features(bundle, vf).scores)

    def test_self_consistency(self, bundle, benchmark_features):
        hits = [predict_features(bundle, vf).class_index == vf.label.class_index for vf in benchmark_features]
        assert np.mean(hits) >= 0.9

    def test_words_in_range(self, bundle, benchmark, benchmark_features):
        p = predict(bundle, benchmark.videos[0])
        assert len(p.words) == len(benchmark_features[0].windows)
        assert p.words.max() < bundle.codebook.K
        assert len(p.scores) == 4

    def test_constant_video_gives_single_word(self, bundle):
        frames = tuple(
            FrameSnapshot(t, {EntityRef.joint(n): Point2D(*xy) for n, xy in BASE_POSE.items()}) for t in range(12)
        )
        video = TrackedVideo("still", "subject1", ActivityLabel(0, "drink"), frames)
        vf = extract_features(video, FAST)
        assert len(vf.windows) == 1
        p = predict_features(bundle, vf)
        assert len(p.words) == 1 and np.isfinite(p.scores).all()

    def test_class_without_windows(self, benchmark, benchmark_features):
        feats = [f for f in benchmark_features if f.label.class_index != 2]
        with pytest.raises(PipelineError, match="zero usable windows"):
            train_from_features(feats, benchmark.labels, FAST)

    def test_k_too_large_has_hint(self, benchmark, benchmark_features):
        with pytest.raises(PipelineError, match=r"\[vocab\].*K <="):
            train_from_features(benchmark_features, benchmark.labels, FAST.replace(K=100_000))

    def test_ndt_uses_whole_video_graph(self, benchmark, benchmark_features):
        cfg = ablation(FAST, "NDT")
        feats = [extract_features(v, cfg) for v in benchmark.videos[::6]]
        assert all(len(f.windows) == 1 for f in feats)
        assert all(f.windows[0].frame_range.e == len(v) - 1 for f, v in zip(feats, benchmark.videos[::6]))
        b = train_from_features(feats, benchmark.labels, cfg)
        assert b.codebook is None and b.models is None
        # a training video is its own nearest neighbour
        assert all(predict_features(b, f).class_index == f.label.class_index for f in feats)
        assert ModelBundle.from_dict(json.loads(b.dumps())).dumps() == b.dumps()


class TestEvaluation:
    def test_folds_are_subject_disjoint(self, benchmark, benchmark_features, monkeypatch):
        seen = []
        real = pl.train_from_features

        def spy(features, labels, config, seed=None):
            seen.append({f.subject_id for f in features})
            return real(features, labels, config, seed)

        monkeypatch.setattr(pl, "train_from_features", spy)
        report = evaluate_loso(FAST, benchmark, repeats=1, features=benchmark_features)
        folds = report.runs[0]["folds"]
        assert len(folds) == 4
        for fold, subjects in zip(folds, seen):
            assert fold["subject"] not in subjects and len(subjects) == 3
        assert report.confusion.sum(1).tolist() == [12, 12, 12, 12]

    def test_deterministic_report(self, benchmark, benchmark_features):
        a = evaluate_loso(FAST, benchmark, repeats=2, features=benchmark_features)
        b = evaluate_loso(FAST, benchmark, repeats=2, features=benchmark_features)
        assert a.dumps() == b.dumps()
        assert [r["seed"] for r in a.runs] == [0, 1]
        assert 0 <= a.accuracy[0] <= 1 and 0 <= a.precision[0] <= 1 and 0 <= a.recall[0] <= 1
        assert a.confusion_text().splitlines()[1].startswith("drink")

    def test_single_class_dataset(self, benchmark, benchmark_features):
        lab = ActivityLabel(0, "drink")
        vids = tuple(v for v in benchmark.videos if v.label.name == "drink")
        ds = Dataset(vids, (lab,))
        feats = [f for f in benchmark_features if f.label.name == "drink"]
        report = evaluate_loso(FAST.replace(K=4), ds, repeats=2, features=feats)
        assert report.accuracy == (1.0, 0.0)

    def test_needs_two_subjects(self, benchmark):
        ds = Dataset(tuple(v for v in benchmark.videos if v.subject_id == "subject1"), benchmark.labels)
        with pytest.raises(PipelineError, match="at least 2 subjects"):
            evaluate_loso(FAST, ds, repeats=1)

    def test_shuffle_keeps_subject_label_counts(self, benchmark):
        sh = shuffle_labels(benchmark, 0)
        for s, vids in benchmark.by_subject().items():
            before = sorted(v.label.class_index for v in vids)
            after = sorted(v.label.class_index for v in sh.by_subject()[s])
            assert before == after
        assert any(a.label != b.label for a, b in zip(benchmark.videos, sh.videos))
