"""Command-line entry point: ``sbmgnn <command> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as _config
from . import harness, meanfield as mf, nmi as _nmi, sbm, svg
from .dynamics import (PropagationConfig, empirical_covariance, forward_general, group_mean_state,
                       init_state, sample_weights, spectral_partition)
from .readout import KmeansConfig, kmeans_partition, overlap
from .train import TrainConfig, save_model, train


def _seed_of(args):
    return 0 if args.seed is None else args.seed


def cmd_generate(args):
    params = sbm.params_from_degree_eps(args.n, args.c, args.eps)
    g, planted = sbm.sample_graph(params, _seed_of(args))
    sbm.write_graph(g, args.out_graph)
    sbm.write_labels(planted.labels, args.out_labels)
    print(f"wrote {g.n_vertices} vertices, {g.n_edges} edges")


def _load_instance(args):
    g = sbm.read_graph(args.graph)
    labels = sbm.read_labels(args.labels)
    if labels.size != g.n_vertices:
        raise SystemExit(f"{args.labels}: {labels.size} labels for {g.n_vertices} vertices")
    return g, sbm.PlantedPartition(labels)


def cmd_forward(args):
    g, planted = _load_instance(args)
    seed = _seed_of(args)
    x0 = init_state(g.n_vertices, args.d, seed)
    w = sample_weights(args.d, args.layers, seed)
    cfg = PropagationConfig(args.matrix, args.activation)
    rows = []

    def trace(t, x):
        cov = empirical_covariance(group_mean_state(x, planted))
        rows.append({"layer": t, "c11": cov.c11, "c12": cov.c12})

    x = forward_general(g, x0, cfg, w, args.layers, trace=trace if args.emit_covariance else None)
    if args.emit_covariance:
        harness.write_csv(args.emit_covariance, rows, ["layer", "c11", "c12"])
    if args.out:
        np.save(args.out, x)
    cov = empirical_covariance(group_mean_state(x, planted))
    print(f"c11={cov.c11:.6g} c12={cov.c12:.6g} gap={cov.gap:.6g}")


def cmd_meanfield(args):
    q = mf.QuadratureSpec()
    if args.action == "boundary":
        cs = np.arange(args.c_min, args.c_max + 0.5 * args.c_step, args.c_step)
        rows = [dict(zip(("c", "eps_star", "eps_it"), r)) for r in mf.boundary_table(cs, q, args.tol_eps)]
        if args.out:
            harness.write_csv(args.out, rows, ["c", "eps_star", "eps_it"])
        for r in rows:
            print(f"c={r['c']:g} eps_star={r['eps_star']:.4f} eps_it={r['eps_it']:.4f}")
        return
    if args.eps is None:
        eps = mf.critical_eps(args.c, q, args.tol_eps)
        print(f"eps_star={eps:.4f} linear_stability={mf.linear_stability_eps(args.c, q):.4f}")
        return
    sol = mf.solve_fixed_point(args.c, args.eps, q)
    flag = "" if sol.converged else " (not converged)"
    print(f"c11={sol.cov.c11:.10g} c12={sol.cov.c12:.10g} gap={sol.gap:.6g} rel_gap={sol.rel_gap:.3g}"
          f" iterations={sol.iterations}{flag}")


def cmd_evaluate(args):
    g, planted = _load_instance(args)
    seed = _seed_of(args)
    if args.method == "spectral":
        pred = spectral_partition(g, 2, args.iters, seed)
    else:
        x0 = init_state(g.n_vertices, args.d, seed)
        x = forward_general(g, x0, PropagationConfig(), sample_weights(args.d, args.layers, seed), args.layers)
        pred = kmeans_partition(x, KmeansConfig(seed=seed, input_transform=args.transform))
    print(f"{overlap(pred, planted):.6f}")


def cmd_nmi(args):
    pred = np.loadtxt(args.pred_labels, dtype=np.int64, ndmin=1)
    truth = np.loadtxt(args.true_labels, dtype=np.int64, ndmin=1)
    print(f"{_nmi.nmi_labels(pred, truth):.10f}")


def cmd_train(args):
    text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
    cfg = _config.load_dataclass(TrainConfig, text, seed=args.seed)
    result = train(cfg)
    if args.out:
        save_model(result.model, args.out)
    if args.log:
        harness.write_csv(args.log, result.log, ["step", "loss", "val_nmi", "val_overlap"])
    print(f"untrained val_nmi={result.baseline['val_nmi']:.4f} "
          f"best val_nmi={result.best['val_nmi']:.4f} at step {result.best['step']}")


def cmd_sweep(args):
    text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
    grid = _config.load_dataclass(harness.SweepGrid, text, seed=args.seed)
    if args.kind == "gap":
        rows, base = harness.run_gap_diagram(grid, args.out, args.threads)
        print(f"baseline mu_g={base.mu:.6g} sigma_g={base.sigma:.6g} from {base.n_samples} samples")
        for c in grid.c_values:
            print(f"c={c:g} sig2 boundary eps={harness.significance_boundary(rows, float(c)):.3f}")
    elif args.kind == "overlap":
        rows = harness.run_overlap_sweep(grid, args.method, args.out, args.threads, args.model)
        for r in rows:
            print(f"c={r['c']:g} eps={r['eps']:g} overlap={r['overlap_mean']:.4f}±{r['overlap_sd']:.4f}")
    else:
        if len(grid.c_values) != 1:
            raise SystemExit("sweep compare needs exactly one c value")
        rows = harness.compare_theory_experiment(grid.c_values[0], grid.eps_values, grid, args.out, args.threads)
        for r in rows:
            print(f"eps={r['eps']:g} rel_gap_mf={r['rel_gap_mf']:.3g} rel_gap_emp={r['rel_gap_emp']:.3g}")


def cmd_plot(args):
    boundary = None
    if args.boundary:
        boundary = [(float(r["c"]), float(r["eps_star"])) for r in harness.read_csv(args.boundary)]
    svg.emit_svg_heatmap(args.csv, args.column, args.out, boundary)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    common.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--out", default=None, help="primary output file")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="sbmgnn", description="GNN detectability experiments on the symmetric SBM")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("generate", parents=[common], help="sample an SBM instance")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--c", type=float, required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--out-graph", required=True)
    s.add_argument("--out-labels", required=True)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("forward", parents=[common], help="run the untrained GNN (--out saves X^T as .npy)")
    s.add_argument("--graph", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--d", type=int, default=100)
    s.add_argument("--layers", type=int, default=100)
    s.add_argument("--matrix", default="adjacency", choices=["adjacency", "normalized-adjacency",
                                                              "normalized-laplacian"])
    s.add_argument("--activation", default="tanh", choices=["tanh", "identity"])
    s.add_argument("--emit-covariance", default=None, help="CSV with columns layer,c11,c12")
    s.set_defaults(func=cmd_forward)

    s = sub.add_parser("meanfield", parents=[common],
                       help="solve the covariance equation, or tabulate eps*(c) with 'boundary'")
    s.add_argument("action", nargs="?", default="solve", choices=["solve", "boundary"])
    s.add_argument("--c", type=float, default=8.0)
    s.add_argument("--eps", type=float, default=None, help="omit to print eps*(c)")
    s.add_argument("--c-min", type=float, default=3.0)
    s.add_argument("--c-max", type=float, default=10.0)
    s.add_argument("--c-step", type=float, default=0.5)
    s.add_argument("--tol-eps", type=float, default=1e-3)
    s.set_defaults(func=cmd_meanfield)

    s = sub.add_parser("evaluate", parents=[common], help="overlap of the untrained GNN + k-means")
    s.add_argument("--graph", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--d", type=int, default=100)
    s.add_argument("--layers", type=int, default=100)
    s.add_argument("--transform", default="raw", choices=["raw", "activation"])
    s.add_argument("--method", default="untrained-gnn", choices=["untrained-gnn", "spectral"])
    s.add_argument("--iters", type=int, default=300, help="power iterations for --method spectral")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("nmi", parents=[common], help="NMI between two label files")
    s.add_argument("--pred-labels", required=True)
    s.add_argument("--true-labels", required=True)
    s.set_defaults(func=cmd_nmi)

    s = sub.add_parser("train", parents=[common], formatter_class=argparse.RawDescriptionHelpFormatter,
                       help="train the GNN with the NMI loss",
                       epilog="config keys:\n" + _config.describe(TrainConfig))
    s.add_argument("--config", default=None)
    s.add_argument("--log", default=None, help="CSV with columns step,loss,val_nmi,val_overlap")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("sweep", parents=[common], formatter_class=argparse.RawDescriptionHelpFormatter,
                       help="phase-diagram sweeps",
                       epilog="config keys:\n" + _config.describe(harness.SweepGrid))
    s.add_argument("kind", choices=["gap", "overlap", "compare"])
    s.add_argument("--config", default=None)
    s.add_argument("--method", default="untrained-gnn", choices=["untrained-gnn", "spectral", "trained-model"])
    s.add_argument("--model", default=None, help="model file for --method trained-model")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("plot", parents=[common], help="SVG heatmap of a sweep CSV")
    s.add_argument("--csv", required=True)
    s.add_argument("--column", required=True)
    s.add_argument("--boundary", default=None, help="CSV from 'meanfield boundary'")
    s.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "plot" and not args.out:
        raise SystemExit("plot needs --out")
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
