"""Discrete Allen interval relations with starts/during/finishes merged into one."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .qualrel import Episode


class TemporalRelation(enum.IntEnum):
    BEFORE = 0
    MEETS = 1
    OVERLAPS = 2
    SDF = 3  # starts / during / finishes
    EQUALS = 4

    def __str__(self) -> str:
        return self.name

    @property
    def symmetric(self) -> bool:
        return self is TemporalRelation.EQUALS


TEMPORAL_RELATIONS: tuple[TemporalRelation, ...] = tuple(TemporalRelation)
ASYMMETRIC = tuple(r for r in TEMPORAL_RELATIONS if not r.symmetric)
SYMMETRIC = (TemporalRelation.EQUALS,)


@dataclass(frozen=True, order=True)
class Interval:
    s: int
    e: int

    def __post_init__(self):
        if not 0 <= self.s <= self.e:
            raise ValueError(f"invalid interval [{self.s}, {self.e}]")


class OrientationError(ValueError):
    """Interval pair is not in canonical (start, end) order."""


def interval_relation(x: Interval, y: Interval) -> TemporalRelation:
    """Relation of ``x`` to ``y``; requires ``(x.s, x.e) <= (y.s, y.e)``."""
    if (x.s, x.e) > (y.s, y.e):
        raise OrientationError(f"[{x.s},{x.e}] precedes [{y.s},{y.e}] in canonical order")
    if x == y:
        return TemporalRelation.EQUALS
    if x.e + 1 < y.s:
        return TemporalRelation.BEFORE
    if x.e + 1 == y.s:
        return TemporalRelation.MEETS
    if x.s < y.s <= x.e < y.e:
        return TemporalRelation.OVERLAPS
    return TemporalRelation.SDF


def interval_relation_arrays(xs, xe, ys, ye) -> np.ndarray:
    """Vectorised ``interval_relation`` for canonically ordered interval arrays."""
    rel = np.full(np.shape(xs), TemporalRelation.SDF, dtype=np.int64)
    rel[(xs < ys) & (ys <= xe) & (xe < ye)] = TemporalRelation.OVERLAPS
    rel[xe + 1 == ys] = TemporalRelation.MEETS
    rel[xe + 1 < ys] = TemporalRelation.BEFORE
    rel[(xs == ys) & (xe == ye)] = TemporalRelation.EQUALS
    return rel


def _order_key(ep: Episode):
    return (ep.s_t, ep.e_t, ep.pair)


def canonical_pair(p: Episode, q: Episode) -> tuple[Episode, Episode, TemporalRelation]:
    """Orient two distinct episodes so their relation is read forwards in time.

    Episodes are ordered by (start, end, pair key). For Equals the pair is
    instead ordered by spatial label, so the unordered pair has one form.
    """
    first, second = (p, q) if _order_key(p) <= _order_key(q) else (q, p)
    rel = interval_relation(Interval(first.s_t, first.e_t), Interval(second.s_t, second.e_t))
    if rel is TemporalRelation.EQUALS and (second.relation, second.pair) < (first.relation, first.pair):
        first, second = second, first
    return first, second, rel
