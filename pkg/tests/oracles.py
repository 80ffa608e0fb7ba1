"""Brute-force reference computations, deliberately independent of the package code paths."""

import itertools

import numpy as np
from shapely.geometry import box


def hmm_loglik_by_paths(A, B, pi, obs):
    """log P(O) by summing over every state path."""
    N = len(pi)
    total = 0.0
    for path in itertools.product(range(N), repeat=len(obs)):
        p = pi[path[0]] * B[path[0], obs[0]]
        for t in range(1, len(obs)):
            p *= A[path[t - 1], path[t]] * B[path[t], obs[t]]
        total += p
    return np.log(total)


def rect_overlap_ratio(cx1, cy1, w1, h1, cx2, cy2, w2, h2):
    a = box(cx1 - w1 / 2, cy1 - h1 / 2, cx1 + w1 / 2, cy1 + h1 / 2)
    b = box(cx2 - w2 / 2, cy2 - h2 / 2, cx2 + w2 / 2, cy2 + h2 / 2)
    return a.intersection(b).area / min(a.area, b.area)


def allen_relation(xs, xe, ys, ye):
    """Allen's 13 relations on frame intervals read as half-open real intervals [s, e+1)."""
    a0, a1, b0, b1 = xs, xe + 1, ys, ye + 1
    if a1 < b0:
        return "<"
    if b1 < a0:
        return ">"
    if a1 == b0:
        return "m"
    if b1 == a0:
        return "mi"
    if a0 == b0 and a1 == b1:
        return "="
    if a0 == b0:
        return "s" if a1 < b1 else "si"
    if a1 == b1:
        return "f" if a0 > b0 else "fi"
    if b0 < a0 and a1 < b1:
        return "d"
    if a0 < b0 and b1 < a1:
        return "di"
    return "o" if a0 < b0 else "oi"


MERGED = {"<": "BEFORE", "m": "MEETS", "o": "OVERLAPS", "=": "EQUALS",
          "s": "SDF", "si": "SDF", "d": "SDF", "di": "SDF", "f": "SDF", "fi": "SDF"}


def runs(seq):
    out = []
    for v in seq:
        if out and out[-1][0] == v:
            out[-1][1] += 1
        else:
            out.append([v, 1])
    return out


def direction_bin(dx, dy_down):
    """Five folded inclination bins in image coordinates (y down), poles taking boundary angles."""
    import math

    theta = math.degrees(math.atan2(abs(dx), -dy_down))  # 0 = straight up, 180 = straight down
    if theta <= 22.5:
        return 1
    if theta <= 67.5:
        return 2
    if theta < 112.5:
        return 3
    if theta < 157.5:
        return 4
    return 5
