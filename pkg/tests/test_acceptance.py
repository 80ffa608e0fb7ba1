"""Acceptance criteria, one test each.

Every test prints a single ``[AC-n] PASS|FAIL`` line before asserting; the
lines are also collected and repeated in an "acceptance criteria" section of
the pytest terminal summary, so a plain run doubles as an acceptance report.
"""

import itertools
import math
import os
import time

import numpy as np
import pytest

from dstr.cli import main as cli_main
from dstr.graph import build_dictionary, gram_matrix, nominal_cell_graph_count
from dstr.hmm import DiscreteHMM, baum_welch_step, floor_emissions, forward_loglik, random_hmm, total_loglik
from dstr.model import EntityRef, Point2D, Rect, load_dataset, save_dataset
from dstr.pipeline import ABLATIONS, PipelineConfig, ablation, evaluate_loso, extract_all, shuffle_labels
from dstr.qualrel import (
    SPATIAL_RELATIONS,
    PairKey,
    QualConfig,
    RelationSeries,
    compress_episodes,
    direction_relation,
    dwell_filter,
    expand_episodes,
    overlap_ratio,
)
from dstr.temporal import Interval, TemporalRelation, interval_relation

from oracles import MERGED, allen_relation, hmm_loglik_by_paths, runs

SEEDS = 5
RESULTS: list[str] = []


def report(n, ok, detail):
    line = f"[AC-{n}] {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print("\n" + line)
    assert ok, detail


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.s = time.perf_counter() - self.t0


def test_ac1_forward_oracle():
    rng = np.random.default_rng(20_001)
    worst = 0.0
    with Timer() as t:
        for _ in range(100):
            N, M, T = int(rng.integers(1, 4)), int(rng.integers(1, 5)), int(rng.integers(1, 7))
            h = DiscreteHMM(rng.dirichlet(np.ones(N), N), rng.dirichlet(np.ones(M), N), rng.dirichlet(np.ones(N)))
            o = rng.integers(0, M, size=T)
            worst = max(worst, abs(forward_loglik(h, o) - hmm_loglik_by_paths(h.A, h.B, h.pi, o)))
    report(1, worst <= 1e-9 and t.s < 5, f"100 HMMs, max |forward - path sum| = {worst:.2e} (tol 1e-9), {t.s:.2f}s (< 5s)")


def test_ac2_baum_welch_monotone():
    rng = np.random.default_rng(20_002)
    worst = 0.0
    steps = 0
    with Timer() as t:
        for _ in range(20):
            N, M = int(rng.integers(2, 6)), int(rng.integers(2, 9))
            seqs = [rng.integers(0, M, size=int(rng.integers(1, 30))) for _ in range(int(rng.integers(1, 8)))]
            h = random_hmm(N, M, rng)
            for _ in range(50):
                new, ll_before = baum_welch_step(h, seqs)
                # EM guarantee: the unfloored re-estimate never lowers the likelihood
                worst = max(worst, ll_before - total_loglik(new, seqs))
                h = floor_emissions(new, 1e-6)
                steps += 1
    report(2, worst <= 1e-8 and t.s < 30, f"20 runs / {steps} EM steps, max decrease {worst:.2e} (tol 1e-8), {t.s:.2f}s (< 30s)")


def test_ac3_allen_exhaustive():
    intervals = [Interval(s, e) for s in range(12) for e in range(s, 12)]
    bad = 0
    with Timer() as t:
        for x, y in itertools.product(intervals, repeat=2):
            a, b = (x, y) if (x.s, x.e) <= (y.s, y.e) else (y, x)
            holds = [r for r in TemporalRelation if r.name == MERGED[allen_relation(a.s, a.e, b.s, b.e)]]
            bad += len(holds) != 1 or interval_relation(a, b) is not holds[0]
        tiling = all(interval_relation(Interval(0, k), Interval(k + 1, k + 1 + j)) is TemporalRelation.MEETS for k in range(11) for j in range(11))
    n = len(intervals) ** 2
    report(3, bad == 0 and tiling and t.s < 1, f"{n} interval pairs, {bad} mismatches, tiling->Meets {tiling}, {t.s:.2f}s (< 1s)")


def test_ac4_dictionary():
    with Timer() as t:
        size = len(build_dictionary(7))
        nominal = nominal_cell_graph_count(7, 4, 1)
    ok = size == 224 == 7**2 * 4 + 28 and nominal == 203 and size != nominal and t.s < 1
    report(4, ok, f"enumerated {size} (expect 224), closed form {nominal} (expect 203), gap {size - nominal}, {t.s:.3f}s")


def test_ac5_kernel_psd():
    rng = np.random.default_rng(20_005)
    with Timer() as t:
        X = rng.integers(0, 30, size=(50, 3 * 224))
        lam = float(np.linalg.eigvalsh(gram_matrix(X)).min())
    report(5, lam >= -1e-8 and t.s < 1, f"min eigenvalue {lam:.3e} (>= -1e-8), {t.s:.3f}s")


def test_ac6_relation_properties():
    rng = np.random.default_rng(20_006)
    n = 1000
    pair = PairKey(EntityRef.joint("head"), EntityRef.joint("neck"))
    fails = dict.fromkeys(["symmetry", "mirror", "fold", "dwell", "tiling"], 0)
    with Timer() as t:
        for _ in range(n):
            a = Rect(Point2D(*rng.uniform(-50, 50, 2)), *rng.uniform(0.5, 40, 2))
            b = Rect(Point2D(*rng.uniform(-50, 50, 2)), *rng.uniform(0.5, 40, 2))
            fails["symmetry"] += int(overlap_ratio(a, b) != overlap_ratio(b, a))

            p, q = Point2D(*rng.uniform(-50, 50, 2)), Point2D(*rng.uniform(-50, 50, 2))
            fails["mirror"] += int(direction_relation(p, q) != 6 - direction_relation(q, p))
            dx, dy = rng.uniform(-50, 50, 2)
            o = Point2D(0.0, 0.0)
            fails["fold"] += int(direction_relation(o, Point2D(dx, dy)) != direction_relation(o, Point2D(-dx, dy)))

            rels = tuple(SPATIAL_RELATIONS[i] for i in rng.integers(0, 3, size=int(rng.integers(1, 50))))
            d_min = int(rng.integers(1, 6))
            out = dwell_filter(RelationSeries(pair, rels), QualConfig(d_min=d_min)).relations
            lengths = [k for _, k in runs(out)]
            fails["dwell"] += int(len(out) != len(rels) or (min(lengths) < d_min and len(lengths) > 1))

            s = RelationSeries(pair, rels)
            eps = compress_episodes(s)
            tiles = eps[0].s_t == 0 and eps[-1].e_t == len(rels) - 1 and all(x.e_t + 1 == y.s_t for x, y in zip(eps, eps[1:]))
            fails["tiling"] += int(expand_episodes(eps) != s or not tiles)
    ok = not any(fails.values()) and t.s < 10
    report(6, ok, f"{n} cases per property, failures {fails}, {t.s:.2f}s (< 10s)")


@pytest.fixture(scope="module")
def benchmark_run(benchmark):
    cfg = PipelineConfig()
    with Timer() as t:
        feats = extract_all(benchmark.videos, cfg)
        real = evaluate_loso(cfg, benchmark, repeats=SEEDS, features=feats)
        control = evaluate_loso(cfg, shuffle_labels(benchmark, 0), repeats=SEEDS, features=feats)
    return feats, real, control, t.s


@pytest.mark.slow
def test_ac7_synthetic_benchmark(benchmark, benchmark_run):
    _, real, control, secs = benchmark_run
    C = len(benchmark.labels)
    n = len(benchmark)
    half = 1.96 * math.sqrt((1 / C) * (1 - 1 / C) / n)
    lo, hi = 1 / C - half, 1 / C + half
    acc, chance = real.accuracy[0], control.accuracy[0]
    ok = acc >= 0.90 and lo <= chance <= hi and secs < 60
    report(
        7,
        ok,
        f"{C} classes x {len(benchmark.subjects)} subjects x 3 reps, {SEEDS} seeds: accuracy {acc:.3f} (>= 0.90); "
        f"shuffled {chance:.3f} in [{lo:.3f}, {hi:.3f}]; {secs:.1f}s (< 60s)",
    )


@pytest.mark.slow
def test_ac8_ablation_order(benchmark, benchmark_run):
    _, real, _, _ = benchmark_run
    full = real.accuracy[0]
    scores = {}
    for name in ABLATIONS:
        if name == "DSTR":
            continue
        cfg = ablation(PipelineConfig(), name)
        scores[name] = evaluate_loso(cfg, benchmark, repeats=SEEDS).accuracy[0]
    ok = all(full >= s for s in scores.values())
    detail = ", ".join(f"{k} {v:.3f}" for k, v in scores.items())
    report(8, ok, f"DSTR {full:.3f} >= {{{detail}}}")


@pytest.mark.slow
def test_ac9_cli_determinism(benchmark, tmp_path):
    save_dataset(benchmark, tmp_path / "ds")
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("seed: 11\n")
    outs = []
    for k in range(2):
        b, r = tmp_path / f"bundle{k}.json", tmp_path / f"report{k}.json"
        assert cli_main(["train", "--config", str(cfg), "--dataset", str(tmp_path / "ds"), "--out", str(b)]) == 0
        assert cli_main(["evaluate", "--config", str(cfg), "--dataset", str(tmp_path / "ds"), "--repeats", "2", "--report", str(r)]) == 0
        outs.append((b.read_bytes(), r.read_bytes(), r.with_suffix(".txt").read_bytes()))
    same = outs[0] == outs[1]
    report(9, same, f"train bundle and evaluate report byte-identical across two CLI runs: {same}")


@pytest.mark.skipif(not os.environ.get("CAD120_DIR"), reason="set CAD120_DIR to the raw CAD-120 annotation tree")
def test_ac10_cad120(tmp_path):
    assert cli_main(["convert", "--input", os.environ["CAD120_DIR"], "--out", str(tmp_path / "cad")]) == 0
    ds = load_dataset(tmp_path / "cad", "cad120-converted")
    rep = evaluate_loso(PipelineConfig(K=38, N=7), ds, repeats=30)
    acc = rep.accuracy[0]
    report(10, abs(acc - 0.933) <= 0.05, f"CAD-120 ground-truth tracks, 30 repeats: accuracy {acc:.3f} (target 0.933 +/- 0.050)")
