"""Fragments, sliding windows, qualitative spatio-temporal graphs and bag-of-cell-graph features."""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .qualrel import SPATIAL_RELATIONS, Episode, SpatialRelation
from .temporal import (
    ASYMMETRIC,
    SYMMETRIC,
    TEMPORAL_RELATIONS,
    Interval,
    TemporalRelation,
    canonical_pair,
    interval_relation_arrays,
)

SCOPE_ORDER = ("Whole", "Upper", "Lower")


class UnknownCellGraphError(KeyError):
    """A cell graph is missing from the dictionary."""


@dataclass(frozen=True)
class Fragment:
    index: int
    frame_range: Interval


@dataclass(frozen=True)
class Window:
    fragment_span: tuple[int, int]
    frame_range: Interval

    @property
    def n_fragments(self) -> int:
        return self.fragment_span[1] - self.fragment_span[0] + 1


@dataclass(frozen=True, order=True)
class CellGraph:
    temporal: TemporalRelation
    spatial_first: SpatialRelation
    spatial_second: SpatialRelation

    def __post_init__(self):
        if self.temporal.symmetric and self.spatial_first > self.spatial_second:
            raise ValueError(f"non-canonical Equals cell graph {self}")

    def __str__(self) -> str:
        return f"{self.spatial_first}-{self.temporal}-{self.spatial_second}"


@dataclass(frozen=True)
class QSTGraph:
    window: Window
    scope: str
    cells: tuple[CellGraph, ...]

    def counts(self) -> Counter:
        return Counter(self.cells)


@dataclass(frozen=True)
class CellGraphDictionary:
    spatial: tuple[SpatialRelation, ...]
    temporal: tuple[TemporalRelation, ...]
    entries: tuple[CellGraph, ...]
    index: Mapping[CellGraph, int] = field(repr=False, compare=False)
    # lookup[temporal, first, second] -> entry position, -1 when absent
    lookup: np.ndarray = field(repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.entries)

    def position(self, cell: CellGraph) -> int:
        try:
            return self.index[cell]
        except KeyError:
            raise UnknownCellGraphError(str(cell)) from None

    def column_names(self) -> list[str]:
        return [str(c) for c in self.entries]


def build_dictionary(
    spatial: Sequence[SpatialRelation] | int = SPATIAL_RELATIONS,
    temporal: Sequence[TemporalRelation] = TEMPORAL_RELATIONS,
) -> CellGraphDictionary:
    """Enumerate every canonical cell graph, temporal-major then by spatial labels.

    An integer ``spatial`` takes that many labels from the front of the full set.
    """
    if isinstance(spatial, int):
        if not 1 <= spatial <= len(SPATIAL_RELATIONS):
            raise ValueError(f"N_s must be in [1, {len(SPATIAL_RELATIONS)}], got {spatial}")
        spatial = SPATIAL_RELATIONS[:spatial]
    spatial = tuple(sorted(spatial))
    temporal = tuple(sorted(temporal))
    entries = []
    for t in temporal:
        if t.symmetric:
            pairs = itertools.combinations_with_replacement(spatial, 2)
        else:
            pairs = itertools.product(spatial, repeat=2)
        entries.extend(CellGraph(t, a, b) for a, b in pairs)
    index = {c: i for i, c in enumerate(entries)}
    lookup = np.full((len(TemporalRelation), len(SpatialRelation), len(SpatialRelation)), -1, dtype=np.int64)
    for c, i in index.items():
        lookup[c.temporal, c.spatial_first, c.spatial_second] = i
    return CellGraphDictionary(spatial, temporal, tuple(entries), index, lookup)


def enumerated_cell_graph_count(n_s: int, n_at: int = len(ASYMMETRIC), n_st: int = len(SYMMETRIC)) -> int:
    """Ordered label pairs per asymmetric relation plus unordered pairs per symmetric one."""
    return n_s * n_s * n_at + n_s * (n_s + 1) // 2 * n_st


def nominal_cell_graph_count(n_s: int, n_at: int = len(ASYMMETRIC), n_st: int = len(SYMMETRIC)) -> int:
    """Closed-form count ``N_s^2 N_at + N_s N_st``.

    Kept as a reference figure: it counts only ``N_s`` label pairs per
    symmetric relation, so it falls short of the enumerated dictionary
    (203 against 224 for seven spatial labels).
    """
    return n_s * n_s * n_at + n_s * n_st


def segment_fragments(episodes: Sequence[Episode]) -> list[Fragment]:
    """Split the video wherever any pair's relation changes."""
    if not episodes:
        raise ValueError("no episodes to segment")
    n_frames = max(ep.e_t for ep in episodes) + 1
    cuts = sorted({ep.s_t for ep in episodes if ep.s_t > 0})
    starts = [0] + cuts
    ends = [c - 1 for c in cuts] + [n_frames - 1]
    return [Fragment(i, Interval(s, e)) for i, (s, e) in enumerate(zip(starts, ends))]


def _window(fragments: Sequence[Fragment], first: int, last: int) -> Window:
    return Window((first, last), Interval(fragments[first].frame_range.s, fragments[last].frame_range.e))


def sliding_windows(fragments: Sequence[Fragment], l_w: int = 4, l_s: int = 1) -> list[Window]:
    """Windows of ``l_w`` fragments every ``l_s`` fragments.

    Short videos get one window over everything. When the last full window
    stops short of the final fragment, one trailing partial window is added if
    it spans at least two fragments.
    """
    if l_w < 2 or l_s < 1:
        raise ValueError(f"need l_w >= 2 and l_s >= 1, got l_w={l_w}, l_s={l_s}")
    n = len(fragments)
    if n == 0:
        raise ValueError("no fragments")
    if n < l_w:
        return [_window(fragments, 0, n - 1)]
    n_full = (n - l_w) // l_s + 1
    windows = [_window(fragments, k * l_s, k * l_s + l_w - 1) for k in range(n_full)]
    start = n_full * l_s
    if windows[-1].fragment_span[1] < n - 1 and n - start >= 2:
        windows.append(_window(fragments, start, n - 1))
    return windows


def clip_episodes(episodes: Sequence[Episode], frame_range: Interval) -> list[Episode]:
    out = []
    for ep in episodes:
        s, e = max(ep.s_t, frame_range.s), min(ep.e_t, frame_range.e)
        if s <= e:
            out.append(Episode(ep.pair, ep.relation, s, e))
    return out


def build_qst_graph(window: Window, episodes: Sequence[Episode], scope: str = "Whole") -> QSTGraph:
    clipped = clip_episodes(episodes, window.frame_range)
    cells = []
    for p, q in itertools.combinations(clipped, 2):
        first, second, rel = canonical_pair(p, q)
        cells.append(CellGraph(rel, first.relation, second.relation))
    return QSTGraph(window, scope, tuple(cells))


def featurize(graph: QSTGraph, dictionary: CellGraphDictionary) -> np.ndarray:
    counts = np.zeros(len(dictionary), dtype=np.int64)
    for cell, n in graph.counts().items():
        counts[dictionary.position(cell)] += n
    return counts


@dataclass(frozen=True)
class EpisodeTable:
    """Column view of one scope's episodes for fast window histograms."""

    s: np.ndarray
    e: np.ndarray
    label: np.ndarray
    pair_rank: np.ndarray

    @classmethod
    def from_episodes(cls, episodes: Sequence[Episode]) -> EpisodeTable:
        ranks = {p: i for i, p in enumerate(sorted({ep.pair for ep in episodes}))}
        return cls(
            np.array([ep.s_t for ep in episodes], dtype=np.int64),
            np.array([ep.e_t for ep in episodes], dtype=np.int64),
            np.array([int(ep.relation) for ep in episodes], dtype=np.int64),
            np.array([ranks[ep.pair] for ep in episodes], dtype=np.int64),
        )

    def __len__(self) -> int:
        return len(self.s)


def window_histogram(table: EpisodeTable, frame_range: Interval, dictionary: CellGraphDictionary) -> np.ndarray:
    """Vectorised ``featurize(build_qst_graph(...))`` for one scope."""
    s = np.maximum(table.s, frame_range.s)
    e = np.minimum(table.e, frame_range.e)
    keep = s <= e
    s, e = s[keep], e[keep]
    lab, rank = table.label[keep], table.pair_rank[keep]
    counts = np.zeros(len(dictionary), dtype=np.int64)
    if len(s) < 2:
        return counts
    i, j = np.triu_indices(len(s), k=1)
    # lexicographic (s, e, pair) comparison decides which episode comes first
    swap = (s[i] > s[j]) | ((s[i] == s[j]) & ((e[i] > e[j]) | ((e[i] == e[j]) & (rank[i] > rank[j]))))
    a = np.where(swap, j, i)
    b = np.where(swap, i, j)
    rel = interval_relation_arrays(s[a], e[a], s[b], e[b])
    la, lb = lab[a], lab[b]
    eq = rel == TemporalRelation.EQUALS
    first = np.where(eq, np.minimum(la, lb), la)
    second = np.where(eq, np.maximum(la, lb), lb)
    pos = dictionary.lookup[rel, first, second]
    if np.any(pos < 0):
        k = int(np.flatnonzero(pos < 0)[0])
        bad = CellGraph(TemporalRelation(rel[k]), SpatialRelation(first[k]), SpatialRelation(second[k]))
        raise UnknownCellGraphError(str(bad))
    return np.bincount(pos, minlength=len(dictionary)).astype(np.int64)


def hierarchical_features(
    tables: Mapping[str, EpisodeTable],
    window: Window,
    dictionary: CellGraphDictionary,
    scopes: Sequence[str] = SCOPE_ORDER,
) -> np.ndarray:
    """Concatenate per-scope histograms in ``scopes`` order."""
    return np.concatenate([window_histogram(tables[name], window.frame_range, dictionary) for name in scopes])


def bocg_kernel(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"feature length mismatch: {u.shape} vs {v.shape}")
    return float(u @ v)


def kernel_distance(u, v) -> float:
    """Distance induced by the linear kernel."""
    return float(np.sqrt(max(bocg_kernel(u, u) + bocg_kernel(v, v) - 2 * bocg_kernel(u, v), 0.0)))


def gram_matrix(vectors) -> np.ndarray:
    X = np.asarray(vectors, dtype=float)
    return X @ X.T

