"""Symmetric two-group stochastic block model.

Vertices ``0 .. N/2-1`` form group 0 and ``N/2 .. N-1`` form group 1
(labels are 0-based internally; the text formats write them as 1/2).
Edges are sampled independently per unordered pair with geometric
skipping, so the cost is proportional to the number of edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import rng as _rng


@dataclass(frozen=True)
class SbmParams:
    n_vertices: int
    avg_degree: float
    eps: float
    rho_in: float
    rho_out: float
    n_groups: int = 2

    @property
    def group_fractions(self) -> tuple[float, float]:
        return (0.5, 0.5)

    @property
    def c_in(self) -> float:
        return self.n_vertices * self.rho_in

    @property
    def c_out(self) -> float:
        return self.n_vertices * self.rho_out


def params_from_degree_eps(n: int, c: float, eps: float) -> SbmParams:
    """Edge probabilities of the symmetric SBM with mean degree ``c`` and
    ``eps = rho_out / rho_in``."""
    if n < 4 or n % 2:
        raise ValueError(f"n must be even and >= 4, got {n}")
    if not c > 0:
        raise ValueError(f"average degree must be positive, got {c}")
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    rho_in = 2.0 * c / (n * (1.0 + eps))
    if rho_in > 1.0:
        raise ValueError(f"rho_in = {rho_in:.4g} > 1: degree {c} too large for n = {n}")
    return SbmParams(n_vertices=n, avg_degree=c, eps=eps, rho_in=rho_in, rho_out=eps * rho_in)


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph in CSR form; every edge appears in both rows."""

    n_vertices: int
    indptr: np.ndarray
    indices: np.ndarray

    @classmethod
    def from_edges(cls, n: int, i: np.ndarray, j: np.ndarray) -> "Graph":
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        if np.any(i == j):
            raise ValueError("self-loops are not allowed")
        rows = np.concatenate([i, j])
        cols = np.concatenate([j, i])
        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]
        if rows.size and np.any((rows[1:] == rows[:-1]) & (cols[1:] == cols[:-1])):
            raise ValueError("duplicate edges")
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
        indptr.flags.writeable = False
        cols.flags.writeable = False
        return cls(n, indptr, cols)

    @property
    def n_edges(self) -> int:
        return int(self.indices.size // 2)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(self.indices.size, dtype=np.float64)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n_vertices,) * 2)

    def edge_list(self) -> tuple[np.ndarray, np.ndarray]:
        """Endpoints with ``i < j``, sorted lexicographically."""
        rows = np.repeat(np.arange(self.n_vertices), self.degrees)
        keep = rows < self.indices
        return rows[keep], self.indices[keep]

    def is_symmetric(self) -> bool:
        a = self.adjacency
        return (a != a.T).nnz == 0

    def permuted(self, perm: np.ndarray) -> "Graph":
        """Relabel vertex ``v`` as ``perm[v]``."""
        i, j = self.edge_list()
        return Graph.from_edges(self.n_vertices, perm[i], perm[j])


@dataclass(frozen=True, eq=False)
class PlantedPartition:
    labels: np.ndarray  # 0-based group index per vertex

    @property
    def n_vertices(self) -> int:
        return int(self.labels.size)

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=2)

    @classmethod
    def balanced(cls, n: int) -> "PlantedPartition":
        labels = np.zeros(n, dtype=np.int64)
        labels[n // 2:] = 1
        labels.flags.writeable = False
        return cls(labels)


def _skip_sample(rng: np.random.Generator, n_pairs: int, p: float) -> np.ndarray:
    """Sorted indices in ``[0, n_pairs)``, each kept independently with prob ``p``."""
    if p <= 0.0 or n_pairs == 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(n_pairs, dtype=np.int64)
    chunks = []
    pos = -1
    while True:
        mean = (n_pairs - pos) * p
        batch = int(mean + 6.0 * math.sqrt(mean) + 16)
        # clamp so tiny p cannot overflow the running sum
        gaps = np.minimum(rng.geometric(p, size=batch), n_pairs + 1)
        hits = pos + np.cumsum(gaps)
        inside = hits[hits < n_pairs]
        chunks.append(inside)
        if inside.size < batch:
            break
        pos = int(hits[-1])
    return np.concatenate(chunks)


def _triangle_pairs(k: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    # row-major enumeration of {(a, b): 0 <= a < b < m}; row a holds m-1-a pairs
    starts = np.concatenate([[0], np.cumsum(np.arange(m - 1, 0, -1))])
    a = np.searchsorted(starts, k, side="right") - 1
    b = k - starts[a] + a + 1
    return a, b


def sample_graph(params: SbmParams, seed: int) -> tuple[Graph, PlantedPartition]:
    n = params.n_vertices
    half = n // 2
    gen = _rng.generator(seed, _rng.GRAPH)
    n_tri = half * (half - 1) // 2
    rows, cols = [], []
    for offset in (0, half):
        k = _skip_sample(gen, n_tri, params.rho_in)
        a, b = _triangle_pairs(k, half)
        rows.append(a + offset)
        cols.append(b + offset)
    k = _skip_sample(gen, half * half, params.rho_out)
    rows.append(k // half)
    cols.append(k % half + half)
    graph = Graph.from_edges(n, np.concatenate(rows), np.concatenate(cols))
    return graph, PlantedPartition.balanced(n)


def it_detectability_limit(c: float) -> float:
    """Information-theoretic threshold on ``eps`` for the symmetric two-group SBM."""
    if not c >= 1.0:  # c = 1 is the degenerate endpoint, value 0
        raise ValueError(f"threshold defined for c >= 1, got {c}")
    r = math.sqrt(c)
    return (r - 1.0) / (r + 1.0)


# text formats

def write_graph(graph: Graph, path: str | Path) -> None:
    i, j = graph.edge_list()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{graph.n_vertices} {i.size}\n")
        for a, b in zip(i.tolist(), j.tolist()):
            fh.write(f"{a} {b}\n")


def read_graph(path: str | Path) -> Graph:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: first line must be 'N M'")
        n, m = int(header[0]), int(header[1])
        data = np.loadtxt(fh, dtype=np.int64, ndmin=2) if m else np.empty((0, 2), np.int64)
    if data.shape != (m, 2):
        raise ValueError(f"{path}: expected {m} edge lines, found {data.shape[0]}")
    i, j = data[:, 0], data[:, 1]
    if np.any(i >= j) or np.any(i < 0) or np.any(j >= n):
        raise ValueError(f"{path}: endpoints must satisfy 0 <= i < j < N")
    return Graph.from_edges(n, i, j)


def write_labels(labels: np.ndarray, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(f"{int(v) + 1}\n" for v in labels)


def read_labels(path: str | Path) -> np.ndarray:
    raw = np.loadtxt(path, dtype=np.int64, ndmin=1)
    if raw.size and raw.min() < 1:
        raise ValueError(f"{path}: group indices start at 1")
    return raw - 1
