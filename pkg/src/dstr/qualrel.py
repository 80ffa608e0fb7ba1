"""Per-frame qualitative distance/direction relations, jitter filtering and episodes."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .model import (
    BodyMetrics,
    BodyPartSet,
    EntityRef,
    Point2D,
    Rect,
    TrackedVideo,
    entity_tracks,
)


class DistanceRelation(enum.Enum):
    D = "D"
    PO = "PO"
    P = "P"


class SpatialRelation(enum.IntEnum):
    """Combined distance/direction relation, coded in alphabetical name order.

    ``D`` is the direction-free disjoint relation, used only when direction
    relations are switched off; ``D<k>`` has code ``k``.
    """

    D = 0
    D1 = 1
    D2 = 2
    D3 = 3
    D4 = 4
    D5 = 5
    P = 6
    PO = 7

    def __str__(self) -> str:
        return self.name


_BY_CODE = tuple(SpatialRelation)
SPATIAL_RELATIONS: tuple[SpatialRelation, ...] = _BY_CODE[1:]
SPATIAL_RELATIONS_NO_DIRECTION: tuple[SpatialRelation, ...] = (
    SpatialRelation.D,
    SpatialRelation.P,
    SpatialRelation.PO,
)


@dataclass(frozen=True)
class QualConfig:
    tau_D: float = 0.0
    tau_P: float = 0.9
    d_min: int = 3
    up_is_negative_y: bool = True

    def __post_init__(self):
        if not (0 <= self.tau_D < self.tau_P <= 1):
            raise ValueError(f"need 0 <= tau_D < tau_P <= 1, got {self.tau_D}, {self.tau_P}")
        if self.d_min < 1:
            raise ValueError(f"d_min must be >= 1, got {self.d_min}")


@dataclass(frozen=True, order=True)
class PairKey:
    a: EntityRef
    b: EntityRef

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"pair key requires a < b, got {self.a}, {self.b}")

    @classmethod
    def of(cls, x: EntityRef, y: EntityRef) -> PairKey:
        return cls(x, y) if x < y else cls(y, x)

    def __str__(self) -> str:
        return f"{self.a}|{self.b}"


@dataclass(frozen=True)
class RelationSeries:
    pair: PairKey
    relations: tuple[SpatialRelation, ...]

    def __len__(self) -> int:
        return len(self.relations)


@dataclass(frozen=True)
class Episode:
    pair: PairKey
    relation: SpatialRelation
    s_t: int
    e_t: int

    def __post_init__(self):
        if self.s_t > self.e_t:
            raise ValueError(f"episode start {self.s_t} after end {self.e_t}")

    @property
    def length(self) -> int:
        return self.e_t - self.s_t + 1


class UndefinedDirectionError(ValueError):
    """Direction between coincident points."""


def overlap_ratio(a: Rect, b: Rect) -> float:
    """Intersection area over the smaller rectangle's area."""
    ax0, ay0, ax1, ay1 = a.bounds
    bx0, by0, bx1, by1 = b.bounds
    w = min(ax1, bx1) - max(ax0, bx0)
    h = min(ay1, by1) - max(ay0, by0)
    if w <= 0 or h <= 0:
        return 0.0
    return min(1.0, (w * h) / min(a.area, b.area))


def overlap_ratio_arrays(ca, sa, cb, sb) -> np.ndarray:
    """Vectorised ``overlap_ratio`` over arrays of centers and (width, height) sizes."""
    lo = np.maximum(ca - sa / 2, cb - sb / 2)
    hi = np.minimum(ca + sa / 2, cb + sb / 2)
    side = np.clip(hi - lo, 0.0, None)
    inter = side[..., 0] * side[..., 1]
    smaller = np.minimum(sa[..., 0] * sa[..., 1], sb[..., 0] * sb[..., 1])
    return np.minimum(inter / smaller, 1.0)


def distance_relation(ratio: float, cfg: QualConfig = QualConfig()) -> DistanceRelation:
    if ratio <= cfg.tau_D:
        return DistanceRelation.D
    if ratio >= cfg.tau_P:
        return DistanceRelation.P
    return DistanceRelation.PO


# Upper-hemisphere bin edges (degrees from zenith). The lower hemisphere is
# the mirror image, so boundary angles round toward the nearer pole.
_UPPER_EDGES = (22.5, 67.5)


def _bins(dx, dy_up) -> np.ndarray:
    dx = np.abs(np.asarray(dx, dtype=float))
    dy_up = np.asarray(dy_up, dtype=float)
    theta = np.degrees(np.arctan2(dx, np.abs(dy_up)))
    half = np.where(theta <= _UPPER_EDGES[0], 1, np.where(theta <= _UPPER_EDGES[1], 2, 3))
    return np.where(dy_up >= 0, half, 6 - half)


def direction_relation(frm: Point2D, to: Point2D, cfg: QualConfig = QualConfig()) -> int:
    """Direction bin 1..5 of ``to`` seen from ``frm`` (1 above, 5 below).

    Left and right are folded together.
    """
    dx, dy = to.x - frm.x, to.y - frm.y
    if dx == 0 and dy == 0:
        raise UndefinedDirectionError(f"coincident points ({frm.x}, {frm.y})")
    dy_up = -dy if cfg.up_is_negative_y else dy
    return int(_bins(dx, dy_up))


def direction_bins(frm: np.ndarray, to: np.ndarray, cfg: QualConfig = QualConfig()) -> np.ndarray:
    """Vectorised direction bins; coincident points give 0."""
    d = np.asarray(to, dtype=float) - np.asarray(frm, dtype=float)
    dy_up = -d[..., 1] if cfg.up_is_negative_y else d[..., 1]
    out = _bins(d[..., 0], dy_up)
    return np.where((d[..., 0] == 0) & (d[..., 1] == 0), 0, out)


def spatial_relation(dist: DistanceRelation, direction: int | None) -> SpatialRelation:
    if dist is DistanceRelation.PO:
        return SpatialRelation.PO
    if dist is DistanceRelation.P:
        return SpatialRelation.P
    if direction is None:
        return SpatialRelation.D
    if not 1 <= direction <= 5:
        raise ValueError(f"direction bin out of range: {direction}")
    return SpatialRelation(direction)


def _forward_fill_bins(bins: np.ndarray, pair: PairKey, needed: np.ndarray) -> np.ndarray:
    out = bins.copy()
    last = 0
    for t in range(len(out)):
        if out[t] == 0:
            if last == 0 and needed[t]:
                raise UndefinedDirectionError(f"pair {pair}: coincident centers at frame {t} with no earlier direction")
            out[t] = last
        else:
            last = out[t]
    return out


def scope_entities(video: TrackedVideo, scope: BodyPartSet) -> list[EntityRef]:
    return sorted(scope.members) + list(video.object_ids)


def relation_series(
    video: TrackedVideo,
    scope: BodyPartSet,
    cfg: QualConfig,
    scales: Mapping[str, tuple[float, float]],
    metrics: BodyMetrics,
    use_direction: bool = True,
) -> list[RelationSeries]:
    """Unfiltered per-frame spatial relations for every pair in ``scope`` plus objects."""
    entities = scope_entities(video, scope)
    centers, sizes = entity_tracks(video, entities, scales, metrics)
    out = []
    for i, j in itertools.combinations(range(len(entities)), 2):
        pair = PairKey(entities[i], entities[j])
        ratio = overlap_ratio_arrays(centers[:, i], sizes[:, i], centers[:, j], sizes[:, j])
        disjoint = ratio <= cfg.tau_D
        contained = ratio >= cfg.tau_P
        codes = np.where(contained, SpatialRelation.P, SpatialRelation.PO).astype(int)
        if use_direction:
            bins = direction_bins(centers[:, i], centers[:, j], cfg)
            if np.any(bins == 0):
                bins = _forward_fill_bins(bins, pair, disjoint)
            codes = np.where(disjoint, bins, codes)
        else:
            codes = np.where(disjoint, SpatialRelation.D, codes)
        out.append(RelationSeries(pair, tuple(_BY_CODE[c] for c in codes.tolist())))
    return out


def _runs(values: Sequence) -> list[list]:
    runs: list[list] = []
    for v in values:
        if runs and runs[-1][0] == v:
            runs[-1][1] += 1
        else:
            runs.append([v, 1])
    return runs


def dwell_filter(series: RelationSeries, cfg: QualConfig = QualConfig()) -> RelationSeries:
    """Absorb runs shorter than ``d_min`` frames into their neighbours until none remain."""
    runs = _runs(series.relations)
    while len(runs) > 1:
        short = [k for k, (_, n) in enumerate(runs) if n < cfg.d_min]
        if not short:
            break
        k = short[0]
        target = runs[k - 1][0] if k > 0 else runs[1][0]
        runs[k][0] = target
        merged: list[list] = []
        for v, n in runs:
            if merged and merged[-1][0] == v:
                merged[-1][1] += n
            else:
                merged.append([v, n])
        runs = merged
    relations = tuple(v for v, n in runs for _ in range(n))
    return RelationSeries(series.pair, relations)


def compress_episodes(series: RelationSeries) -> list[Episode]:
    if not series.relations:
        raise ValueError(f"pair {series.pair}: empty relation series")
    episodes = []
    start = 0
    for v, n in _runs(series.relations):
        episodes.append(Episode(series.pair, v, start, start + n - 1))
        start += n
    return episodes


def expand_episodes(episodes: Sequence[Episode]) -> RelationSeries:
    """Inverse of ``compress_episodes``."""
    relations: list[SpatialRelation] = []
    for ep in episodes:
        if ep.s_t != len(relations):
            raise ValueError(f"episodes do not tile: expected start {len(relations)}, got {ep.s_t}")
        relations.extend([ep.relation] * ep.length)
    return RelationSeries(episodes[0].pair, tuple(relations))


def scope_episodes(
    video: TrackedVideo,
    scope: BodyPartSet,
    cfg: QualConfig,
    scales: Mapping[str, tuple[float, float]],
    metrics: BodyMetrics,
    use_direction: bool = True,
) -> list[Episode]:
    """Filtered episodes of every pair in the scope, ordered by pair then time."""
    episodes: list[Episode] = []
    for s in relation_series(video, scope, cfg, scales, metrics, use_direction):
        episodes.extend(compress_episodes(dwell_filter(s, cfg)))
    return episodes

