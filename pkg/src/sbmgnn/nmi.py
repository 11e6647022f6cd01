"""Normalized mutual information between planted and estimated groups.

The estimated assignment may be soft: ``P[s, h] = (1/N) sum_{i in V_s} p[i, h]``.
Two evaluation paths are kept apart. :func:`nmi_value` is exact and uses
``0 log 0 = 0``; :func:`nmi_closed_form` with ``floor > 0`` clips
probabilities inside the logarithms so gradients stay finite during
training.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .sbm import PlantedPartition

LOG_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class JointDistribution:
    table: np.ndarray  # rows: planted group, columns: estimated group

    @property
    def planted_marginal(self) -> np.ndarray:
        return self.table.sum(axis=1)

    @property
    def estimated_marginal(self) -> np.ndarray:
        return self.table.sum(axis=0)

    @property
    def planted_entropy(self) -> float:
        return _entropy(self.planted_marginal)

    @property
    def estimated_entropy(self) -> float:
        return _entropy(self.estimated_marginal)

    @property
    def mutual_information(self) -> float:
        p = self.table
        outer = np.outer(self.planted_marginal, self.estimated_marginal)
        mask = p > 0
        return float(np.sum(p[mask] * np.log(p[mask] / outer[mask])))


def _xlogx(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p, dtype=np.float64)
    mask = p > 0
    out[mask] = p[mask] * np.log(p[mask])
    return out


def _entropy(p: np.ndarray) -> float:
    return float(-_xlogx(np.asarray(p)).sum())


def softmax(a: np.ndarray) -> np.ndarray:
    z = a - a.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def readout_probs(x: np.ndarray, w_out: np.ndarray) -> np.ndarray:
    """Row-wise softmax of ``x @ w_out``."""
    if x.shape[1] != w_out.shape[0]:
        raise ValueError(f"shapes {x.shape} and {w_out.shape} do not align")
    return softmax(x @ w_out)


def joint_from_soft(p: np.ndarray, planted: PlantedPartition) -> JointDistribution:
    if p.shape[0] != planted.n_vertices:
        raise ValueError("soft assignment and partition sizes differ")
    k = max(p.shape[1], int(planted.labels.max()) + 1)
    table = np.zeros((k, p.shape[1]))
    np.add.at(table, planted.labels, p)
    return JointDistribution(table / p.shape[0])


def joint_from_labels(pred: np.ndarray, planted: PlantedPartition, k: int = 2) -> JointDistribution:
    pred = np.asarray(pred, dtype=np.int64)
    onehot = np.zeros((pred.size, k))
    onehot[np.arange(pred.size), pred] = 1.0
    return joint_from_soft(onehot, planted)


def nmi_definitional(j: JointDistribution) -> float:
    """``2 I / (H(planted) + H(estimated))``."""
    denom = j.planted_entropy + j.estimated_entropy
    if denom == 0.0:
        warnings.warn("both partitions are degenerate; NMI set to 0", RuntimeWarning, stacklevel=2)
        return 0.0
    return 2.0 * j.mutual_information / denom


def nmi_closed_form(table: np.ndarray, floor: float = 0.0) -> float:
    """``2 (1 - sum P log P / (sum P_s log P_s + sum P_h log P_h))``.

    With ``floor > 0`` every logarithm argument is clipped at ``floor``.
    """
    table = np.asarray(table, dtype=np.float64)
    p_s = table.sum(axis=1)
    p_h = table.sum(axis=0)
    if floor > 0.0:
        num = np.sum(table * np.log(np.maximum(table, floor)))
        den = np.sum(p_s * np.log(np.maximum(p_s, floor))) + np.sum(p_h * np.log(np.maximum(p_h, floor)))
    else:
        num = _xlogx(table).sum()
        den = _xlogx(p_s).sum() + _xlogx(p_h).sum()
    if den == 0.0:
        warnings.warn("both partitions are degenerate; NMI set to 0", RuntimeWarning, stacklevel=2)
        return 0.0
    return float(2.0 * (1.0 - num / den))


def nmi_value(j: JointDistribution) -> float:
    return nmi_closed_form(j.table)


def nmi_labels(pred: np.ndarray, truth: np.ndarray) -> float:
    """Hard-label NMI; label values may be arbitrary non-negative integers."""
    pred = np.unique(np.asarray(pred), return_inverse=True)[1]
    truth = np.unique(np.asarray(truth), return_inverse=True)[1]
    if pred.size != truth.size:
        raise ValueError("label vectors differ in length")
    k = int(max(pred.max(initial=0), truth.max(initial=0))) + 1
    table = np.zeros((k, k))
    np.add.at(table, (truth, pred), 1.0)
    return nmi_closed_form(table / pred.size)
