"""Phase-diagram sweeps over (c, eps) grids.

Every (c, eps, rep) task derives its seeds from the master seed and the
cell coordinates themselves, so a cell's numbers do not depend on which
other cells are in the grid or on how many workers run the sweep.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import meanfield as mf
from . import rng as _rng
from .dynamics import (empirical_covariance, forward_untrained, group_mean_state, init_state,
                       sample_weights, spectral_partition)
from .readout import KmeansConfig, kmeans_partition, overlap
from .sbm import it_detectability_limit, params_from_degree_eps, sample_graph

log = logging.getLogger(__name__)

BASELINE_MARGIN = 0.02


@dataclass(frozen=True)
class SweepGrid:
    c_values: tuple = (8.0,)
    eps_values: tuple = (0.1, 0.2, 0.3, 0.4, 0.5)
    reps: int = 30
    n: int = 5000
    d: int = 100
    layers: int = 100
    seed: int = 0
    transform: str = "raw"
    spectral_iters: int = 300

    def __post_init__(self):
        if not self.c_values or not self.eps_values:
            raise ValueError("grid axes must be nonempty")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")

    def cells(self):
        return [(float(c), float(e)) for c in self.c_values for e in self.eps_values]


@dataclass(frozen=True)
class GapBaseline:
    mu: float
    sigma: float
    n_samples: int


def task_seed(master: int, c: float, eps: float, rep: int) -> int:
    return _rng.derive_seed(master, _rng.TASK, round(c * 1e6), round(eps * 1e6), rep)


def _instance(grid: SweepGrid, c: float, eps: float, rep: int, method: str, model_path=None) -> dict:
    seed = task_seed(grid.seed, c, eps, rep)
    g, planted = sample_graph(params_from_degree_eps(grid.n, c, eps), seed)
    rec = {"c": c, "eps": eps, "rep": rep}
    if method == "spectral":
        pred = spectral_partition(g, 2, grid.spectral_iters, seed)
        rec["overlap"] = overlap(pred, planted)
        return rec
    x0 = init_state(grid.n, grid.d, seed)
    if method == "trained-model":
        from .train import forward_cached, load_model

        model = load_model(model_path)
        p, _ = forward_cached(model, g, x0)
        rec["overlap"] = overlap(np.argmax(p, axis=1), planted)
        return rec
    x = forward_untrained(g, x0, sample_weights(grid.d, grid.layers, seed), grid.layers)
    cov = empirical_covariance(group_mean_state(x, planted))
    rec.update(c11=cov.c11, c12=cov.c12, gap=cov.gap)
    if method == "untrained-gnn":
        cfg = KmeansConfig(seed=seed, input_transform=grid.transform)
        rec["overlap"] = overlap(kmeans_partition(x, cfg), planted)
    return rec


def _run_one(args):
    grid, c, eps, rep, method, model_path = args
    try:
        return _instance(grid, c, eps, rep, method, model_path)
    except Exception as exc:  # keep the sweep going; the cell is reported short
        log.error("cell c=%g eps=%g rep=%d failed: %s", c, eps, rep, exc)
        return {"c": c, "eps": eps, "rep": rep, "error": str(exc)}


def run_instances(grid: SweepGrid, method: str = "covariance", threads: int = 1, model_path=None) -> list[dict]:
    """One record per (c, eps, rep), sorted by those keys.

    ``method``: ``covariance`` (gap only), ``untrained-gnn`` (gap and
    k-means overlap), ``spectral`` or ``trained-model``.
    """
    tasks = [(grid, c, e, r, method, model_path) for c, e in grid.cells() for r in range(grid.reps)]
    if threads <= 1:
        out = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(_run_one, tasks, chunksize=1))
    return sorted(out, key=lambda r: (r["c"], r["eps"], r["rep"]))


def _by_cell(records):
    cells: dict[tuple, list] = {}
    for r in records:
        if "error" not in r:
            cells.setdefault((r["c"], r["eps"]), []).append(r)
    return cells


def gap_baseline(records, margin: float = BASELINE_MARGIN) -> GapBaseline:
    """Pooled gap statistics over cells beyond the information-theoretic limit."""
    gaps = [r["gap"] for r in records
            if "error" not in r and r["eps"] > it_detectability_limit(r["c"]) + margin]
    if len(gaps) < 2:
        raise ValueError("grid has no information-theoretically undetectable cells for the baseline")
    gaps = np.asarray(gaps)
    return GapBaseline(float(gaps.mean()), float(gaps.std(ddof=1)), int(gaps.size))


def gap_rows(records, baseline: GapBaseline | None = None) -> list[dict]:
    if baseline is None:
        baseline = gap_baseline(records)
    rows = []
    for (c, eps), recs in sorted(_by_cell(records).items()):
        gaps = np.array([r["gap"] for r in recs])
        rows.append({
            "c": c, "eps": eps,
            "gap_mean": float(gaps.mean()), "gap_max": float(gaps.max()),
            "sig1": bool(gaps.max() > baseline.mu + baseline.sigma),
            "sig2": bool(gaps.max() > baseline.mu + 2 * baseline.sigma),
        })
    return rows


def run_gap_diagram(grid: SweepGrid, out=None, threads: int = 1):
    records = run_instances(grid, "covariance", threads)
    baseline = gap_baseline(records)
    rows = gap_rows(records, baseline)
    if out is not None:
        write_csv(out, rows, ["c", "eps", "gap_mean", "gap_max", "sig1", "sig2"])
    return rows, baseline


def significance_boundary(rows, c: float, column: str = "sig2") -> float:
    """Midpoint between the last flagged eps and the first unflagged eps
    above it, scanning upward from the smallest eps at this ``c``."""
    cells = sorted((r["eps"], bool(r[column])) for r in rows if r["c"] == c)
    if not cells:
        raise ValueError(f"no rows at c = {c}")
    if not cells[0][1]:
        return cells[0][0]
    for (e0, f0), (e1, f1) in zip(cells, cells[1:]):
        if f0 and not f1:
            return 0.5 * (e0 + e1)
    return cells[-1][0]


def overlap_rows(records) -> list[dict]:
    rows = []
    for (c, eps), recs in sorted(_by_cell(records).items()):
        ov = np.array([r["overlap"] for r in recs])
        rows.append({"c": c, "eps": eps, "n": None, "overlap_mean": float(ov.mean()),
                     "overlap_sd": float(ov.std(ddof=1)) if ov.size > 1 else 0.0, "reps": int(ov.size)})
    return rows


def run_overlap_sweep(grid: SweepGrid, method: str = "untrained-gnn", out=None, threads: int = 1,
                      model_path=None):
    if method not in ("untrained-gnn", "spectral", "trained-model"):
        raise ValueError(f"unknown method {method!r}")
    if method == "trained-model" and model_path is None:
        raise ValueError("trained-model sweeps need a model file")
    rows = overlap_rows(run_instances(grid, method, threads, model_path))
    for r in rows:
        r["n"] = grid.n
    if out is not None:
        write_csv(out, rows, ["c", "eps", "n", "overlap_mean", "overlap_sd", "reps"])
    return rows


def compare_theory_experiment(c: float, eps_values, grid: SweepGrid, out=None, threads: int = 1,
                              q: mf.QuadratureSpec = mf.QuadratureSpec()):
    sim = SweepGrid(**{**asdict(grid), "c_values": (c,), "eps_values": tuple(eps_values)})
    cells = _by_cell(run_instances(sim, "covariance", threads))
    rows = []
    for eps in eps_values:
        sol = mf.solve_fixed_point(c, float(eps), q)
        recs = cells.get((float(c), float(eps)), [])
        c11 = float(np.mean([r["c11"] for r in recs])) if recs else math.nan
        c12 = float(np.mean([r["c12"] for r in recs])) if recs else math.nan
        gaps = np.array([r["gap"] / r["c11"] for r in recs])
        rows.append({
            "eps": float(eps),
            "c11_mf": sol.cov.c11, "c12_mf": sol.cov.c12,
            "c11_emp": c11, "c12_emp": c12,
            "rel_gap_mf": sol.rel_gap,
            "rel_gap_emp": float(gaps.mean()) if recs else math.nan,
            "rel_gap_emp_sd": float(gaps.std(ddof=1)) if gaps.size > 1 else 0.0,
        })
    if out is not None:
        write_csv(out, rows, list(rows[0]))
    return rows


# CSV

def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, rows, columns) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in columns])


def read_csv(path) -> list[dict]:
    with open(Path(path), encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))
