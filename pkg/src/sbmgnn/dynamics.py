"""Forward dynamics of the untrained GNN and the power-iteration baseline.

The untrained network updates the N x D state as ``X <- A tanh(X) W_t``
with fresh Gaussian ``W_t`` at every layer and no bias. The general form
``X <- M f_out(f_in(X) W_t)`` covers the normalized-adjacency and
Laplacian variants, and its linear limit with QR re-orthonormalization is
simultaneous power iteration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import rng as _rng
from .meanfield import Covariance2
from .sbm import Graph, PlantedPartition

ACTIVATIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "tanh": np.tanh,
    "identity": lambda x: x,
}
MATRIX_KINDS = ("adjacency", "normalized-adjacency", "normalized-laplacian")


class DivergenceError(FloatingPointError):
    def __init__(self, layer: int):
        super().__init__(f"non-finite state after layer {layer}")
        self.layer = layer


@dataclass(frozen=True)
class PropagationConfig:
    """``matrix_kind``: ``adjacency`` (A), ``normalized-adjacency``
    (I - L = D^-1/2 A D^-1/2) or ``normalized-laplacian`` (L)."""

    matrix_kind: str = "adjacency"
    activation: str = "tanh"
    outer_activation: str = "identity"

    def __post_init__(self):
        if self.matrix_kind not in MATRIX_KINDS:
            raise ValueError(f"unknown matrix kind {self.matrix_kind!r}")
        for name in (self.activation, self.outer_activation):
            if name not in ACTIVATIONS:
                raise ValueError(f"unknown activation {name!r}")


@dataclass(frozen=True, eq=False)
class WeightStack:
    weights: np.ndarray  # (layers, D, D)
    seed: int | None = None

    @property
    def depth(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True, eq=False)
class GroupState:
    means: np.ndarray  # (2, D)


def init_state(n: int, d: int, seed: int) -> np.ndarray:
    """Initial features, i.i.d. uniform on [-1, 1)."""
    gen = _rng.generator(seed, _rng.STATE)
    return gen.uniform(-1.0, 1.0, size=(n, d))


def sample_weights(d: int, layers: int, seed: int) -> WeightStack:
    gen = _rng.generator(seed, _rng.WEIGHTS)
    w = gen.standard_normal(size=(layers, d, d)) / np.sqrt(d)
    return WeightStack(w, seed)


def build_propagation(g: Graph, kind: str) -> sp.csr_matrix:
    """Sparse propagation matrix. Zero-degree vertices get a zero
    ``D^-1/2`` entry, so their rows stay zero under the normalized variants
    (and equal the identity row under the Laplacian)."""
    a = g.adjacency
    if kind == "adjacency":
        return a
    deg = g.degrees.astype(np.float64)
    inv_sqrt = np.zeros_like(deg)
    np.divide(1.0, np.sqrt(deg), out=inv_sqrt, where=deg > 0)
    scale = sp.diags(inv_sqrt)
    norm_adj = (scale @ a @ scale).tocsr()
    if kind == "normalized-adjacency":
        return norm_adj
    if kind == "normalized-laplacian":
        return (sp.identity(g.n_vertices, format="csr") - norm_adj).tocsr()
    raise ValueError(f"unknown matrix kind {kind!r}")


def _check(x: np.ndarray, layer: int) -> None:
    if not np.isfinite(x).all():
        raise DivergenceError(layer)


def forward_untrained(g: Graph, x0: np.ndarray, w: WeightStack, layers: int,
                      trace: Callable[[int, np.ndarray], None] | None = None) -> np.ndarray:
    """Run ``x^{t+1} = A tanh(x^t) W^t`` for ``layers`` steps.

    ``trace(t, x)`` is called after every layer (and once with t = 0).
    """
    if layers > w.depth:
        raise ValueError(f"{layers} layers requested, weight stack has {w.depth}")
    if x0.shape != (g.n_vertices, w.dim):
        raise ValueError(f"state shape {x0.shape} does not match ({g.n_vertices}, {w.dim})")
    a = g.adjacency
    x = x0
    if trace is not None:
        trace(0, x)
    for t in range(layers):
        x = a @ (np.tanh(x) @ w.weights[t])
        _check(x, t + 1)
        if trace is not None:
            trace(t + 1, x)
    return x


def forward_general(g: Graph, x0: np.ndarray, cfg: PropagationConfig, w: WeightStack, layers: int,
                    trace: Callable[[int, np.ndarray], None] | None = None) -> np.ndarray:
    if layers > w.depth:
        raise ValueError(f"{layers} layers requested, weight stack has {w.depth}")
    if x0.shape != (g.n_vertices, w.dim):
        raise ValueError(f"state shape {x0.shape} does not match ({g.n_vertices}, {w.dim})")
    m = build_propagation(g, cfg.matrix_kind)
    inner = ACTIVATIONS[cfg.activation]
    outer = ACTIVATIONS[cfg.outer_activation]
    x = x0
    if trace is not None:
        trace(0, x)
    for t in range(layers):
        x = m @ outer(inner(x) @ w.weights[t])
        _check(x, t + 1)
        if trace is not None:
            trace(t + 1, x)
    return x


def _orthonormalize(z: np.ndarray, gen: np.random.Generator, tol: float = 1e-10) -> np.ndarray:
    """Thin Householder QR; columns whose R diagonal collapses are replaced
    by random vectors and the factorization is redone."""
    for _ in range(10):
        q, r = np.linalg.qr(z)
        diag = np.abs(np.diag(r))
        scale = max(float(diag.max(initial=0.0)), 1.0)
        bad = diag <= tol * scale
        if not bad.any():
            # fix column signs so iterates do not flip between steps
            return q * np.where(np.diag(r) < 0, -1.0, 1.0)
        z = z.copy()
        z[:, bad] = gen.standard_normal((z.shape[0], int(bad.sum())))
    raise np.linalg.LinAlgError("QR stayed rank deficient after reseeding")


def power_iteration(g: Graph, k: int, iters: int, seed: int,
                    callback: Callable[[int, np.ndarray], None] | None = None) -> np.ndarray:
    """Simultaneous power iteration on ``I - L``; returns the N x k iterate.

    The first column starts at the trivial eigenvector ``sqrt(d)`` and the
    rest are random, which keeps the informative direction in column 2.
    """
    n = g.n_vertices
    gen = _rng.generator(seed, _rng.SPECTRAL)
    m = build_propagation(g, "normalized-adjacency")
    x = gen.standard_normal((n, k))
    x[:, 0] = np.sqrt(g.degrees)
    x = _orthonormalize(x, gen)
    for t in range(iters):
        x = _orthonormalize(m @ x, gen)
        if callback is not None:
            callback(t + 1, x)
    return x


def spectral_partition(g: Graph, k: int = 2, iters: int = 500, seed: int = 0) -> np.ndarray:
    if k != 2:
        raise ValueError("only k = 2 is supported")
    x = power_iteration(g, k, iters, seed)
    return (x[:, 1] < 0).astype(np.int64)


def group_mean_state(x: np.ndarray, p: PlantedPartition) -> GroupState:
    if x.shape[0] != p.n_vertices:
        raise ValueError("state and partition sizes differ")
    sums = np.zeros((2, x.shape[1]))
    np.add.at(sums, p.labels, x)
    return GroupState(sums / p.sizes[:, None])


def empirical_covariance(gs: GroupState) -> Covariance2:
    """Uncentered 2x2 second moment over the feature axis, reduced to
    (mean of diagonal, off-diagonal)."""
    m = gs.means
    if m.shape[1] < 2:
        raise ValueError("need at least two feature dimensions")
    c = m @ m.T / m.shape[1]
    return Covariance2(float(0.5 * (c[0, 0] + c[1, 1])), float(c[0, 1]))
