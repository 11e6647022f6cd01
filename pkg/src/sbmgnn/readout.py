"""Unsupervised readout: k-means++ on the final states, scored by overlap."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .sbm import PlantedPartition


@dataclass(frozen=True)
class KmeansConfig:
    k: int = 2
    restarts: int = 10
    max_iter: int = 300
    seed: int = 0
    input_transform: str = "raw"  # "raw" (X) or "activation" (tanh X)

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.input_transform not in ("raw", "activation"):
            raise ValueError(f"unknown input transform {self.input_transform!r}")


@dataclass(frozen=True, eq=False)
class KmeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    restart: int
    inertias: np.ndarray  # per restart


def _sq_dist(x: np.ndarray, centers: np.ndarray, x_sq: np.ndarray) -> np.ndarray:
    d = x_sq[:, None] - 2.0 * x @ centers.T + np.sum(centers**2, axis=1)[None, :]
    return np.maximum(d, 0.0)


def _plusplus(x: np.ndarray, k: int, gen: np.random.Generator, x_sq: np.ndarray) -> np.ndarray:
    """Greedy k-means++: each new center is the best of ``2 + floor(ln k)``
    D^2-weighted candidates."""
    n = x.shape[0]
    trials = 2 + int(np.log(k))
    idx = [int(gen.integers(n))]
    closest = _sq_dist(x, x[idx], x_sq)[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # all points coincide with chosen centers
            cand = gen.integers(n, size=trials)
        else:
            cand = np.searchsorted(np.cumsum(closest), gen.random(trials) * total, side="right")
            cand = np.minimum(cand, n - 1)
        pots = np.minimum(closest[:, None], _sq_dist(x, x[cand], x_sq))
        pick = int(np.argmin(pots.sum(axis=0)))
        idx.append(int(cand[pick]))
        closest = pots[:, pick]
    return x[idx].copy()


def _lloyd(x: np.ndarray, centers: np.ndarray, max_iter: int, x_sq: np.ndarray):
    k = centers.shape[0]
    labels = None
    for _ in range(max_iter):
        dist = _sq_dist(x, centers, x_sq)
        new = np.argmin(dist, axis=1)  # ties go to the lower index
        counts = np.bincount(new, minlength=k)
        for empty in np.flatnonzero(counts == 0):
            # reseed at the point farthest from its own centroid
            own = dist[np.arange(x.shape[0]), new]
            far = int(np.argmax(own))
            centers[empty] = x[far]
            new[far] = empty
            dist = _sq_dist(x, centers, x_sq)
            counts = np.bincount(new, minlength=k)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            centers[j] = x[labels == j].mean(axis=0)
    labels, centers = _transfer(x, labels, centers, x_sq)
    inertia = float(np.sum((x - centers[labels]) ** 2))
    return labels, centers, inertia


def _transfer(x: np.ndarray, labels: np.ndarray, centers: np.ndarray, x_sq: np.ndarray,
              max_moves: int = 10_000):
    """Single-point moves (Hartigan): move the point whose transfer lowers the
    inertia most, update both means, repeat until no move helps. Any result
    is still a fixed point of the Lloyd assignment."""
    k = centers.shape[0]
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    labels = labels.copy()
    rows = np.arange(x.shape[0])
    for _ in range(max_moves):
        dist = _sq_dist(x, centers, x_sq)
        own = counts[labels]
        leave = np.where(own > 1, own / np.maximum(own - 1, 1) * dist[rows, labels], -np.inf)
        join = counts[None, :] / (counts[None, :] + 1) * dist
        join[rows, labels] = np.inf
        gain = join - leave[:, None]
        i, j = np.unravel_index(np.argmin(gain), gain.shape)
        if not gain[i, j] < -1e-12 * max(float(dist[i].max()), 1.0):
            break
        a = labels[i]
        centers[a] = (centers[a] * counts[a] - x[i]) / (counts[a] - 1)
        centers[j] = (centers[j] * counts[j] + x[i]) / (counts[j] + 1)
        counts[a] -= 1
        counts[j] += 1
        labels[i] = j
    return labels, centers


def kmeans(x: np.ndarray, cfg: KmeansConfig = KmeansConfig()) -> KmeansResult:
    x = np.asarray(x, dtype=np.float64)
    if cfg.input_transform == "activation":
        x = np.tanh(x)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < cfg.k:
        raise ValueError(f"need at least k = {cfg.k} points")
    x_sq = np.sum(x**2, axis=1)
    best = None
    inertias = np.empty(cfg.restarts)
    for r in range(cfg.restarts):
        gen = _rng.generator(cfg.seed, _rng.KMEANS, r)
        centers = _plusplus(x, cfg.k, gen, x_sq)
        labels, centers, inertia = _lloyd(x, centers, cfg.max_iter, x_sq)
        inertias[r] = inertia
        if best is None or inertia < best[2]:
            best = (labels, centers, inertia, r)
    labels, centers, inertia, r = best
    return KmeansResult(labels, centers, inertia, r, inertias)


def kmeans_partition(x: np.ndarray, cfg: KmeansConfig = KmeansConfig()) -> np.ndarray:
    return kmeans(x, cfg).labels


def overlap(pred: np.ndarray, planted: PlantedPartition | np.ndarray) -> float:
    """Fraction of matching labels, maximized over the two label swaps."""
    truth = planted.labels if isinstance(planted, PlantedPartition) else np.asarray(planted)
    pred = np.asarray(pred)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    # integer counts keep the two swaps bit-identical
    hits = int(np.count_nonzero(pred == truth))
    return max(hits, truth.size - hits) / truth.size
