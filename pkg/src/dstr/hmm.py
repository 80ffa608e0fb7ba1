"""Discrete hidden Markov models: scaled forward-backward, Baum-Welch and classification."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class HMMError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DiscreteHMM:
    A: np.ndarray  # (N, N) transitions a_ij
    B: np.ndarray  # (N, M) emissions b_ik
    pi: np.ndarray  # (N,) initial distribution
    loglik_trace: tuple[float, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        N = len(self.pi)
        if self.A.shape != (N, N) or self.B.ndim != 2 or self.B.shape[0] != N:
            raise HMMError(f"inconsistent shapes A{self.A.shape} B{self.B.shape} pi{self.pi.shape}")
        for name, rows in (("A", self.A), ("B", self.B), ("pi", self.pi[None, :])):
            if np.any(rows < 0) or not np.allclose(rows.sum(-1), 1.0, rtol=0, atol=1e-9):
                raise HMMError(f"{name} is not row-stochastic")

    @property
    def N(self) -> int:
        return len(self.pi)

    @property
    def M(self) -> int:
        return self.B.shape[1]

    def to_dict(self) -> dict:
        return {"N": self.N, "M": self.M, "pi": self.pi.tolist(), "A": self.A.tolist(), "B": self.B.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> DiscreteHMM:
        return cls(np.asarray(doc["A"], float), np.asarray(doc["B"], float), np.asarray(doc["pi"], float))


def _check_symbols(o, M: int) -> np.ndarray:
    o = np.asarray(o, dtype=np.int64)
    if o.ndim != 1 or len(o) == 0:
        raise HMMError("observation sequence must be a non-empty 1-D sequence")
    if o.min() < 0 or o.max() >= M:
        raise HMMError(f"symbol out of range [0, {M})")
    return o


def forward_loglik(h: DiscreteHMM, o) -> float:
    """log P(O | h) by the scaled forward recursion, O(N^2 T)."""
    o = _check_symbols(o, h.M)
    alpha = h.pi * h.B[:, o[0]]
    c = alpha.sum()
    if c == 0:
        return float("-inf")
    ll = np.log(c)
    alpha /= c
    for sym in o[1:]:
        alpha = (alpha @ h.A) * h.B[:, sym]
        c = alpha.sum()
        if c == 0:
            return float("-inf")
        ll += np.log(c)
        alpha /= c
    return float(ll)


def _pad(sequences: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    T = max(len(s) for s in sequences)
    obs = np.zeros((len(sequences), T), dtype=np.int64)
    mask = np.zeros((len(sequences), T), dtype=bool)
    for k, s in enumerate(sequences):
        obs[k, : len(s)] = s
        mask[k, : len(s)] = True
    return obs, mask


def _expectations(h: DiscreteHMM, obs: np.ndarray, mask: np.ndarray):
    """Batched scaled forward-backward over padded sequences.

    Returns total log-likelihood, expected initial counts, transition counts
    and emission counts.
    """
    S, T = obs.shape
    N = h.N
    emis = h.B[:, obs].transpose(1, 2, 0)  # (S, T, N)
    alpha = np.empty((S, T, N))
    scale = np.ones((S, T))
    a = h.pi[None, :] * emis[:, 0]
    scale[:, 0] = a.sum(1)
    alpha[:, 0] = a / scale[:, [0]]
    for t in range(1, T):
        a = (alpha[:, t - 1] @ h.A) * emis[:, t]
        c = a.sum(1)
        live = mask[:, t]
        scale[live, t] = c[live]
        alpha[:, t] = np.where(live[:, None], a / np.where(live, c, 1.0)[:, None], alpha[:, t - 1])
    if np.any(scale[mask] <= 0):
        raise HMMError("zero-probability observation under current parameters")
    beta = np.ones((S, T, N))
    for t in range(T - 2, -1, -1):
        nxt = mask[:, t + 1]
        b = (emis[:, t + 1] * beta[:, t + 1]) @ h.A.T / scale[:, [t + 1]]
        beta[:, t] = np.where(nxt[:, None], b, 1.0)
    loglik = float(np.log(scale[mask]).sum())

    gamma = alpha * beta * mask[..., None]
    xi_w = (emis[:, 1:] * beta[:, 1:]) / scale[:, 1:, None] * mask[:, 1:, None]  # (S, T-1, N)
    trans = h.A * (alpha[:, :-1].reshape(-1, N).T @ xi_w.reshape(-1, N))
    emit = np.zeros((N, h.M))
    np.add.at(emit.T, obs[mask], gamma[mask])
    return loglik, gamma[:, 0].sum(0), trans, emit


def total_loglik(h: DiscreteHMM, sequences: Sequence) -> float:
    seqs = [_check_symbols(s, h.M) for s in sequences]
    return float(sum(forward_loglik(h, s) for s in seqs))


def _normalise_rows(X: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    s = X.sum(-1, keepdims=True)
    return np.where(s > 0, X / np.where(s > 0, s, 1.0), fallback)


def _step(h: DiscreteHMM, obs: np.ndarray, mask: np.ndarray) -> tuple[DiscreteHMM, float]:
    ll, g0, trans, emit = _expectations(h, obs, mask)
    pi = g0 / g0.sum()
    A = _normalise_rows(trans, h.A)
    B = _normalise_rows(emit, h.B)
    return DiscreteHMM(A, B, pi), ll


def baum_welch_step(h: DiscreteHMM, sequences: Sequence) -> tuple[DiscreteHMM, float]:
    """One unsmoothed EM update; returns the re-estimated model and log P(O | h)."""
    obs, mask = _pad([_check_symbols(s, h.M) for s in sequences])
    return _step(h, obs, mask)


def floor_emissions(h: DiscreteHMM, epsilon: float) -> DiscreteHMM:
    if epsilon <= 0:
        return h
    B = np.maximum(h.B, epsilon)
    return DiscreteHMM(h.A, B / B.sum(1, keepdims=True), h.pi)


def random_hmm(N: int, M: int, rng: np.random.Generator, concentration: float = 1.0) -> DiscreteHMM:
    """Uniform initial distribution; A and B rows from a symmetric Dirichlet."""
    A = rng.dirichlet(np.full(N, concentration), size=N)
    B = rng.dirichlet(np.full(M, concentration), size=N)
    return DiscreteHMM(A, B, np.full(N, 1.0 / N))


def _fit_once(seqs, N, M, rng, max_iter, tol, epsilon) -> DiscreteHMM:
    h = random_hmm(N, M, rng)
    obs, mask = _pad(seqs)
    trace = []
    prev = None
    for _ in range(max_iter):
        new, ll = _step(h, obs, mask)
        trace.append(ll)
        h = floor_emissions(new, epsilon)
        if prev is not None and (ll - prev) < tol * abs(prev):
            break
        prev = ll
    trace.append(_expectations(h, obs, mask)[0])
    return DiscreteHMM(h.A, h.B, h.pi, tuple(trace))


def baum_welch_fit(
    sequences: Sequence,
    N: int = 7,
    M: int | None = None,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-4,
    epsilon: float = 1e-6,
    restarts: int = 3,
) -> DiscreteHMM:
    """Multi-sequence Baum-Welch from ``restarts`` seeded random starts.

    Stops when the relative gain in total log-likelihood drops below ``tol``.
    Emissions are floored at ``epsilon`` after every update; the restart with
    the best final likelihood wins.
    """
    if not sequences:
        raise HMMError("empty training set")
    if N < 1 or restarts < 1:
        raise HMMError("N and restarts must be >= 1")
    top = max(int(np.max(s)) for s in sequences)
    if M is None:
        M = top + 1
    if top >= M:
        raise HMMError(f"symbol {top} inconsistent with M={M}")
    seqs = [_check_symbols(s, M) for s in sequences]
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(restarts)]
    best = None
    for rng in rngs:
        h = _fit_once(seqs, N, M, rng, max_iter, tol, epsilon)
        if best is None or h.loglik_trace[-1] > best.loglik_trace[-1]:
            best = h
    return best


@dataclass(frozen=True)
class ClassModels:
    labels: tuple[str, ...]
    models: tuple[DiscreteHMM, ...]

    def __post_init__(self):
        if len(self.labels) != len(self.models):
            raise HMMError("one model per label required")
        if len({m.M for m in self.models}) > 1:
            raise HMMError("models disagree on symbol count M")

    def __len__(self) -> int:
        return len(self.models)


def classify(models: ClassModels, o) -> tuple[int, np.ndarray]:
    """Index of the most likely class (lowest index on ties) and all log-likelihoods."""
    if len(models) == 0:
        raise HMMError("no class models")
    scores = np.array([forward_loglik(h, o) for h in models.models])
    return int(np.argmax(scores)), scores
