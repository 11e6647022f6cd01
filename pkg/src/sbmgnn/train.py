"""Trainable GNN with skip connections and batch normalization, trained
by minimizing ``1 - NMI`` with Adam.

Layer ``t`` (``t = 0 .. T-1``) computes

    pre    = A tanh(h_t) W_t  (+ h_{t-s}  if t >= s)
    h_{t+1} = BN_t(pre)          normalized over vertices, per feature

and the readout is ``softmax(h_T W_out)``. ``h_0`` is the random input
state, and skips tap the post-BN state. Gradients are derived by hand.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nmi as _nmi
from . import rng as _rng
from .dynamics import DivergenceError, init_state
from .readout import overlap
from .sbm import Graph, PlantedPartition, params_from_degree_eps, sample_graph

log = logging.getLogger(__name__)

BN_EPS = 1e-5
PARAM_NAMES = ("weights", "w_out", "bn_scale", "bn_shift")


@dataclass(eq=False)
class TrainableModel:
    weights: np.ndarray   # (T, D, D)
    w_out: np.ndarray     # (D, K)
    bn_scale: np.ndarray  # (T, D)
    bn_shift: np.ndarray  # (T, D)
    skip: int = 5

    def __post_init__(self):
        if self.skip < 1:
            raise ValueError("skip stride must be >= 1")
        t, d, d2 = self.weights.shape
        if d != d2 or self.w_out.shape[0] != d or self.bn_scale.shape != (t, d) \
                or self.bn_shift.shape != (t, d):
            raise ValueError("inconsistent parameter shapes")

    @classmethod
    def initialize(cls, d: int, layers: int, k: int = 2, skip: int = 5, seed: int = 0) -> "TrainableModel":
        gen = _rng.generator(seed, _rng.TRAIN, 0)
        w = gen.standard_normal((layers, d, d)) / math.sqrt(d)
        w_out = gen.standard_normal((d, k)) / math.sqrt(d)
        return cls(w, w_out, np.ones((layers, d)), np.zeros((layers, d)), skip)

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @property
    def depth(self) -> int:
        return self.weights.shape[0]

    @property
    def n_classes(self) -> int:
        return self.w_out.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "TrainableModel":
        return TrainableModel(*(p.copy() for p in self.params().values()), skip=self.skip)


@dataclass(eq=False)
class Cache:
    adjacency: object
    states: list        # h_0 .. h_T
    activations: list   # tanh(h_0) .. tanh(h_{T-1})
    normalized: list    # BN xhat per layer
    inv_std: list       # per layer, shape (D,)
    probs: np.ndarray


def forward_cached(m: TrainableModel, g: Graph, x0: np.ndarray) -> tuple[np.ndarray, Cache]:
    if x0.shape != (g.n_vertices, m.dim):
        raise ValueError(f"input shape {x0.shape} does not match ({g.n_vertices}, {m.dim})")
    a = g.adjacency
    states = [x0]
    acts, xhats, inv_stds = [], [], []
    for t in range(m.depth):
        u = np.tanh(states[t])
        pre = a @ (u @ m.weights[t])
        if t >= m.skip:
            pre = pre + states[t - m.skip]
        mean = pre.mean(axis=0)
        var = pre.var(axis=0)
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (pre - mean) * inv_std
        h = xhat * m.bn_scale[t] + m.bn_shift[t]
        if not np.isfinite(h).all():
            raise DivergenceError(t + 1)
        acts.append(u)
        xhats.append(xhat)
        inv_stds.append(inv_std)
        states.append(h)
    probs = _nmi.readout_probs(states[-1], m.w_out)
    return probs, Cache(a, states, acts, xhats, inv_stds, probs)


def _joint(p: np.ndarray, planted: PlantedPartition) -> np.ndarray:
    return _nmi.joint_from_soft(p, planted).table


def loss_nmi(p: np.ndarray, planted: PlantedPartition, floor: float = _nmi.LOG_FLOOR) -> float:
    return 1.0 - _nmi.nmi_closed_form(_joint(p, planted), floor=floor)


def _dlog_term(x: np.ndarray, floor: float) -> np.ndarray:
    # derivative of x * log(max(x, floor))
    return np.where(x > floor, np.log(np.maximum(x, floor)) + 1.0, math.log(floor))


def _loss_grad_table(table: np.ndarray, floor: float) -> np.ndarray:
    p_s = table.sum(axis=1)
    p_h = table.sum(axis=0)
    num = np.sum(table * np.log(np.maximum(table, floor)))
    den = np.sum(p_s * np.log(np.maximum(p_s, floor))) + np.sum(p_h * np.log(np.maximum(p_h, floor)))
    dnum = _dlog_term(table, floor)
    dden = _dlog_term(p_s, floor)[:, None] + _dlog_term(p_h, floor)[None, :]
    # loss = 2 num/den - 1
    return 2.0 * (dnum * den - num * dden) / den**2


def backward(m: TrainableModel, cache: Cache, planted: PlantedPartition,
             floor: float = _nmi.LOG_FLOOR) -> dict[str, np.ndarray]:
    p = cache.probs
    n = p.shape[0]
    d_table = _loss_grad_table(_joint(p, planted), floor)
    dp = d_table[planted.labels] / n
    da = p * (dp - np.sum(p * dp, axis=1, keepdims=True))
    h_last = cache.states[-1]
    grads = {
        "w_out": h_last.T @ da,
        "weights": np.zeros_like(m.weights),
        "bn_scale": np.zeros_like(m.bn_scale),
        "bn_shift": np.zeros_like(m.bn_shift),
    }
    dh = [np.zeros_like(h) for h in cache.states]
    dh[-1] = da @ m.w_out.T
    a = cache.adjacency
    for t in range(m.depth - 1, -1, -1):
        dy = dh[t + 1]
        xhat = cache.normalized[t]
        grads["bn_scale"][t] = np.sum(dy * xhat, axis=0)
        grads["bn_shift"][t] = np.sum(dy, axis=0)
        dxhat = dy * m.bn_scale[t]
        dpre = cache.inv_std[t] * (dxhat - dxhat.mean(axis=0) - xhat * np.mean(dxhat * xhat, axis=0))
        if t >= m.skip:
            dh[t - m.skip] += dpre
        back = a @ dpre  # A is symmetric
        u = cache.activations[t]
        grads["weights"][t] = u.T @ back
        dh[t] += (back @ m.weights[t].T) * (1.0 - u * u)
    return grads


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(model: TrainableModel, grads: dict[str, np.ndarray], st: AdamState) -> tuple[TrainableModel, AdamState]:
    """Bias-corrected Adam update, applied in place."""
    st.step += 1
    c1 = 1.0 - st.beta1**st.step
    c2 = 1.0 - st.beta2**st.step
    for name, g in grads.items():
        param = getattr(model, name)
        if g.shape != param.shape:
            raise ValueError(f"gradient for {name} has shape {g.shape}, expected {param.shape}")
        m = st.m.setdefault(name, np.zeros_like(param))
        v = st.v.setdefault(name, np.zeros_like(param))
        m *= st.beta1
        m += (1.0 - st.beta1) * g
        v *= st.beta2
        v += (1.0 - st.beta2) * g * g
        param -= st.lr * (m / c1) / (np.sqrt(v / c2) + st.eps)
    return model, st


# training loop

@dataclass(frozen=True)
class TrainConfig:
    n: int = 1000
    d: int = 32
    layers: int = 20
    skip: int = 5
    c_values: tuple = (8.0,)
    eps_values: tuple = (0.1, 0.15, 0.2, 0.25, 0.3)
    train_graphs: int = 200
    val_graphs: int = 20
    epochs: int = 3
    val_every: int = 20
    patience: int = 10
    lr: float = 1e-3
    seed: int = 0


@dataclass(frozen=True, eq=False)
class Instance:
    graph: Graph
    planted: PlantedPartition
    x0: np.ndarray
    c: float
    eps: float


def make_dataset(cfg: TrainConfig, count: int, split: int) -> list[Instance]:
    cells = [(c, e) for c in cfg.c_values for e in cfg.eps_values]
    out = []
    for i in range(count):
        c, e = cells[i % len(cells)]
        seed = _rng.derive_seed(cfg.seed, _rng.TASK, split, i)
        g, planted = sample_graph(params_from_degree_eps(cfg.n, c, e), seed)
        out.append(Instance(g, planted, init_state(cfg.n, cfg.d, seed), c, e))
    return out


def evaluate(m: TrainableModel, data: list[Instance]) -> dict[str, float]:
    nmis, ovs, losses = [], [], []
    for inst in data:
        p, _ = forward_cached(m, inst.graph, inst.x0)
        pred = np.argmax(p, axis=1)
        nmis.append(_nmi.nmi_labels(pred, inst.planted.labels))
        ovs.append(overlap(pred, inst.planted))
        losses.append(loss_nmi(p, inst.planted))
    return {"val_nmi": float(np.mean(nmis)), "val_overlap": float(np.mean(ovs)),
            "val_loss": float(np.mean(losses)), "val_nmi_each": np.asarray(nmis)}


class TrainingDiverged(RuntimeError):
    def __init__(self, msg, log_rows):
        super().__init__(msg)
        self.log = log_rows


@dataclass(eq=False)
class TrainResult:
    model: TrainableModel
    log: list            # dicts with step, loss, val_nmi, val_overlap
    baseline: dict       # validation metrics of the initial model
    best: dict


def train(cfg: TrainConfig, seed: int | None = None, train_data=None, val_data=None) -> TrainResult:
    if seed is not None and seed != cfg.seed:
        cfg = TrainConfig(**{**cfg.__dict__, "seed": seed})
    if train_data is None:
        train_data = make_dataset(cfg, cfg.train_graphs, split=0)
    if val_data is None:
        val_data = make_dataset(cfg, cfg.val_graphs, split=1)
    model = TrainableModel.initialize(cfg.d, cfg.layers, 2, cfg.skip, cfg.seed)
    adam = AdamState(lr=cfg.lr)
    order_gen = _rng.generator(cfg.seed, _rng.TRAIN, 1)

    baseline = evaluate(model, val_data)
    rows = [{"step": 0, "loss": math.nan, "val_nmi": baseline["val_nmi"],
             "val_overlap": baseline["val_overlap"]}]
    best_model, best = model.copy(), rows[0]
    stale = 0
    step = 0
    pending = []
    for epoch in range(cfg.epochs):
        for idx in order_gen.permutation(len(train_data)):
            inst = train_data[idx]
            p, cache = forward_cached(model, inst.graph, inst.x0)
            loss = loss_nmi(p, inst.planted)
            if not math.isfinite(loss):
                raise TrainingDiverged(f"loss became {loss} at step {step + 1}", rows)
            adam_step(model, backward(model, cache, inst.planted), adam)
            step += 1
            pending.append(loss)
            if step % cfg.val_every == 0:
                metrics = evaluate(model, val_data)
                row = {"step": step, "loss": float(np.mean(pending)),
                       "val_nmi": metrics["val_nmi"], "val_overlap": metrics["val_overlap"]}
                rows.append(row)
                pending = []
                log.info("step %d loss %.4f val_nmi %.4f", step, row["loss"], row["val_nmi"])
                if row["val_nmi"] > best["val_nmi"]:
                    best_model, best, stale = model.copy(), row, 0
                else:
                    stale += 1
                    if stale >= cfg.patience:
                        return TrainResult(best_model, rows, baseline, best)
    return TrainResult(best_model, rows, baseline, best)


# serialization
#
# little-endian layout:
#   8 bytes   magic b"SBMGNN\x00M"
#   uint32    format version (1)
#   uint32    D, T, K, skip
#   float64   weights (T*D*D, C order), w_out (D*K), bn_scale (T*D), bn_shift (T*D)

MAGIC = b"SBMGNN\x00M"
VERSION = 1
_HEADER = struct.Struct("<8sIIIII")


def save_model(m: TrainableModel, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, m.dim, m.depth, m.n_classes, m.skip))
        for p in m.params().values():
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_model(path: str | Path) -> TrainableModel:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, d, t, k, skip = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a model file")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    shapes = [(t, d, d), (d, k), (t, d), (t, d)]
    sizes = [int(np.prod(s)) for s in shapes]
    expected = _HEADER.size + 8 * sum(sizes)
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    flat = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).astype(np.float64)
    arrays, pos = [], 0
    for shape, size in zip(shapes, sizes):
        arrays.append(flat[pos:pos + size].reshape(shape).copy())
        pos += size
    return TrainableModel(*arrays, skip=skip)
