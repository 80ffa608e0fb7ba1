"""K-means codebook over window feature vectors."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

CODEBOOK_VERSION = 1
NORM_MODES = ("counts", "l1")


class CodebookError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Codebook:
    centroids: np.ndarray  # (K, feature_length), in normalised space
    norm_mode: str = "counts"
    seed: int = 0
    inertia: float = field(default=float("nan"), compare=False)
    inertia_trace: tuple[float, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if self.centroids.ndim != 2 or len(self.centroids) < 1:
            raise CodebookError("codebook needs at least one centroid")
        if not np.all(np.isfinite(self.centroids)):
            raise CodebookError("non-finite centroid")
        if self.norm_mode not in NORM_MODES:
            raise CodebookError(f"unknown norm_mode {self.norm_mode!r}")

    @property
    def K(self) -> int:
        return len(self.centroids)

    @property
    def feature_length(self) -> int:
        return self.centroids.shape[1]

    def to_dict(self) -> dict:
        return {
            "version": CODEBOOK_VERSION,
            "K": self.K,
            "seed": self.seed,
            "norm_mode": self.norm_mode,
            "feature_length": self.feature_length,
            "centroids": self.centroids.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> Codebook:
        if doc.get("version") != CODEBOOK_VERSION:
            raise CodebookError(f"unsupported codebook version {doc.get('version')!r}")
        c = np.asarray(doc["centroids"], dtype=float).reshape(int(doc["K"]), int(doc["feature_length"]))
        return cls(c, doc["norm_mode"], int(doc["seed"]))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def normalize(X, norm_mode: str = "counts") -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if norm_mode == "counts":
        return X
    if norm_mode == "l1":
        s = np.abs(X).sum(axis=-1, keepdims=True)
        return np.divide(X, s, out=np.zeros_like(X), where=s > 0)
    raise CodebookError(f"unknown norm_mode {norm_mode!r}")


def collect_distinct(vectors: Sequence) -> list[np.ndarray]:
    """Drop exact duplicates, keeping first occurrences in order."""
    if len(vectors) == 0:
        raise CodebookError("no vectors to deduplicate")
    seen = set()
    out = []
    for v in vectors:
        v = np.asarray(v)
        key = (v.shape, v.tobytes())
        if key not in seen:
            seen.add(key)
            out.append(v)
    return out


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    # explicit differences, column by column: exact ties stay exact
    d = np.empty((len(X), len(C)))
    for k in range(len(C)):
        diff = X - C[k]
        d[:, k] = np.einsum("ij,ij->i", diff, diff)
    return d


def _sq_dists_fast(X: np.ndarray, C: np.ndarray, x2: np.ndarray) -> np.ndarray:
    d = x2[:, None] - 2 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _kmeans_pp(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    idx = [int(rng.integers(n))]
    d2 = _sq_dists(X, X[idx])[:, 0]
    for _ in range(1, K):
        total = d2.sum()
        if total <= 0:
            # remaining points coincide with chosen centres; take unused ones in order
            nxt = next(i for i in range(n) if i not in idx)
        else:
            nxt = int(rng.choice(n, p=d2 / total))
        idx.append(nxt)
        d2 = np.minimum(d2, _sq_dists(X, X[[nxt]])[:, 0])
    return X[idx].copy()


def kmeans_fit(
    vectors: Sequence,
    K: int,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-8,
    norm_mode: str = "counts",
) -> Codebook:
    """k-means++ seeding followed by Lloyd iterations.

    Empty clusters are re-seeded with the point farthest from its centre.
    """
    X = normalize(np.asarray(vectors, dtype=float), norm_mode)
    if X.ndim != 2 or len(X) == 0:
        raise CodebookError("kmeans_fit needs a non-empty 2-D set of vectors")
    n_distinct = len(np.unique(X, axis=0))
    if K < 1 or K > n_distinct:
        raise CodebookError(f"K={K} exceeds the {n_distinct} distinct feature vectors; lower K or add data")
    rng = np.random.default_rng(seed)
    C = _kmeans_pp(X, K, rng)
    x2 = (X * X).sum(1)
    trace = []
    for _ in range(max_iter):
        d = _sq_dists_fast(X, C, x2)
        labels = d.argmin(1)
        trace.append(float(d[np.arange(len(X)), labels].sum()))
        new = np.empty_like(C)
        counts = np.bincount(labels, minlength=K)
        for k in range(K):
            if counts[k]:
                new[k] = X[labels == k].mean(0)
        empty = np.flatnonzero(counts == 0)
        if len(empty):
            point_d = d[np.arange(len(X)), labels]
            for k in empty:
                far = int(point_d.argmax())
                new[k] = X[far]
                point_d[far] = -1.0
        shift = float(np.sqrt(((new - C) ** 2).sum(1)).max())
        C = new
        if shift < tol:
            break
    d = _sq_dists(X, C)
    inertia = float(d[np.arange(len(X)), d.argmin(1)].sum())
    trace.append(inertia)
    return Codebook(C, norm_mode, seed, inertia, tuple(trace))


def assign_many(X, cb: Codebook) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != cb.feature_length:
        raise CodebookError(f"feature length {X.shape[1]} does not match codebook ({cb.feature_length})")
    # argmin returns the first minimum, so ties go to the lowest index
    return _sq_dists(normalize(X, cb.norm_mode), cb.centroids).argmin(1)


def assign(v, cb: Codebook) -> int:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise CodebookError("assign takes a single feature vector")
    return int(assign_many(v[None, :], cb)[0])
