"""Command-line interface: generate, cluster, evaluate, sweep, replay.

Exit codes: 0 success, 2 input or format error, 3 numerical failure,
4 non-convergence under ``--strict``.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .core import EPSILON_ENV_VAR, MultiplexNMFError, SolverConfig, default_epsilon
from .evaluation import AnnotationSet, average_redundancy, evaluate_partition, filter_annotations
from .factorize import NumericalFailure
from .fuse import METHOD_TAGS, run_method
from .io import (
    MissingNode,
    align_labels,
    fmt,
    read_annotations,
    read_labels,
    read_layers,
    read_node_list,
    write_csv,
    write_json,
    write_labels,
    write_layer,
    write_matrix,
    write_node_list,
)
from .synth import (
    SYNTH_C_GRID,
    SYNTH_N_GRID,
    PlantedSpec,
    generate_synth_c,
    generate_synth_n,
    layer_seed,
    planted_multiplex,
)

log = logging.getLogger("multiplex_nmf")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_NONCONVERGED = 0, 2, 3, 4
FAMILIES = ("synth-c", "synth-n", "planted")
SWEEP_GRIDS = {"synth-c": SYNTH_C_GRID, "synth-n": SYNTH_N_GRID}
SWEEP_DEFAULT_METHODS = "csnmf,cpnmf,csnmtf,cssnmtf,merged-snmf"


class NotConverged(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _grid(text: str) -> list[float]:
    """``a,b,c`` or ``start:stop:count`` (inclusive)."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError("grid range must be start:stop:count")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        return [float(x) for x in np.round(np.linspace(start, stop, count), 10)]
    return _floats(text)


def _methods(text: str) -> list[str]:
    tags = [t.strip().lower() for t in text.split(",") if t.strip()]
    bad = [t for t in tags if t not in METHOD_TAGS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown method(s) {bad}; choose from {METHOD_TAGS}")
    return tags


def _solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=2, help="number of communities")
    p.add_argument("--alpha", type=float, default=0.5, help="consensus weight")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--rel-tol", type=float, default=1e-6)
    p.add_argument("--freeze-centroids", action="store_true",
                   help="hold tri-factorization centroids at their per-layer values")


def _config(args) -> SolverConfig:
    return SolverConfig(
        k=args.k, alpha=args.alpha, max_iters=args.max_iters, rel_tol=args.rel_tol,
        seed=args.seed, update_centroids=not args.freeze_centroids,
    )


def _manifest(command: str, argv: list[str], **fields) -> dict:
    return {
        "command": command,
        "argv": [command] + argv,
        "epsilon": default_epsilon(),
        "version": __version__,
        **fields,
    }


# generate --------------------------------------------------------------------

def _family_network(args):
    if args.family == "synth-c":
        if args.p_var is None:
            raise MultiplexNMFError("synth-c needs --p-var")
        return generate_synth_c(args.p_var, args.seed), {"p_var": args.p_var}
    if args.family == "synth-n":
        if args.p_noise is None:
            raise MultiplexNMFError("synth-n needs --p-noise")
        return generate_synth_n(args.p_noise, args.seed), {"p_noise": args.p_noise}
    if args.sizes is None:
        raise MultiplexNMFError("planted needs --sizes")
    k = len(args.sizes)
    within = args.within if len(args.within) != 1 else args.within * k
    specs = [PlantedSpec(tuple(args.sizes), tuple(within), args.between, layer_seed(args.seed, i))
             for i in range(args.layers)]
    params = {"sizes": args.sizes, "within": within, "between": args.between,
              "layers": args.layers}
    return planted_multiplex(specs), params


def cmd_generate(args) -> int:
    network, params = _family_network(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = list(network.node_names)
    layer_files = []
    for i, layer in enumerate(network.layers):
        fname = f"layer_{i}.tsv"
        write_layer(out / fname, layer.values, names)
        layer_files.append(fname)
    write_node_list(out / "nodes.tsv", names)
    write_labels(out / "truth.tsv", names, network.ground_truth, "label")
    argv = [args.family, "--seed", str(args.seed)]
    if args.family == "synth-c":
        argv += ["--p-var", fmt(args.p_var)]
    elif args.family == "synth-n":
        argv += ["--p-noise", fmt(args.p_noise)]
    else:
        argv += ["--sizes", ",".join(map(str, args.sizes)),
                 "--within", ",".join(map(fmt, args.within)),
                 "--between", fmt(args.between), "--layers", str(args.layers)]
    write_json(out / "manifest.json", _manifest(
        "generate", argv, family=args.family, params=params, seed=args.seed,
        outputs=layer_files + ["nodes.tsv", "truth.tsv"],
    ))
    print(f"wrote {len(layer_files)} layers, {network.n} nodes to {out}")
    return EXIT_OK


# cluster ---------------------------------------------------------------------

def cmd_cluster(args) -> int:
    layer_paths = [str(Path(p).resolve()) for p in args.layers]
    nodes_path = str(Path(args.nodes).resolve()) if args.nodes else None
    nodes = read_node_list(nodes_path) if nodes_path else None
    network = read_layers(layer_paths, nodes)
    cfg = _config(args)
    result = run_method(network, args.method, cfg)
    names = list(network.node_names)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_labels(out / "assignment.tsv", names, result.assignment.labels, "cluster")
    write_matrix(out / "consensus_H.tsv", result.H, names)
    write_csv(out / "trace.csv", ["iteration", "objective"],
              [(i + 1, float(v)) for i, v in enumerate(result.collective_objective_trace)])
    write_json(out / "diagnostics.json", {
        "method": args.method,
        "converged": bool(result.converged),
        "iterations": int(result.iterations_run),
        "orthonormality_residual": float(result.orthonormality_residual),
        "per_layer_objective": [float(x) for x in result.per_layer_objective],
        "zero_rows": list(result.assignment.zero_rows),
    })
    argv = layer_paths + ["--method", args.method, "--k", str(cfg.k),
                          "--alpha", fmt(cfg.alpha), "--seed", str(cfg.seed),
                          "--max-iters", str(cfg.max_iters), "--rel-tol", fmt(cfg.rel_tol)]
    if nodes_path:
        argv += ["--nodes", nodes_path]
    if args.freeze_centroids:
        argv.append("--freeze-centroids")
    if args.strict:
        argv.append("--strict")
    write_json(out / "manifest.json", _manifest(
        "cluster", argv, method=args.method, k=cfg.k, alpha=cfg.alpha, seed=cfg.seed,
        rel_tol=cfg.rel_tol, max_iters=cfg.max_iters, update_centroids=cfg.update_centroids,
        layers=layer_paths, nodes=nodes_path,
        outputs=["assignment.tsv", "consensus_H.tsv", "trace.csv", "diagnostics.json"],
    ))
    print(f"{args.method}: {result.iterations_run} iterations, converged={result.converged}, "
          f"orthonormality residual {result.orthonormality_residual:.4g}")
    if args.strict and not result.converged:
        raise NotConverged(f"{args.method} did not converge within {cfg.max_iters} iterations")
    return EXIT_OK


# evaluate --------------------------------------------------------------------

def cmd_evaluate(args) -> int:
    assigned = read_labels(args.assignment, "cluster")
    if args.truth:
        names, clusters, classes = align_labels(assigned, read_labels(args.truth, "label"))
        report = evaluate_partition(clusters, classes)
    else:
        raw = read_annotations(args.annotations)
        unknown = [x for x in raw if x not in assigned]
        if unknown:
            raise MissingNode(f"annotated node {unknown[0]!r} is not in the assignment")
        vocab = sorted({t for ts in raw.values() for t in ts})
        term_id = {t: i for i, t in enumerate(vocab)}
        names = list(assigned)
        ann = AnnotationSet(tuple(frozenset(term_id[t] for t in raw.get(x, ())) for x in names),
                            len(vocab))
        if not args.no_filter:
            ann, _ = filter_annotations(ann, args.max_term_nodes, args.min_term_nodes)
        if args.vocabulary_size is not None:
            ann = AnnotationSet(ann.per_node_terms, args.vocabulary_size)
        report = {"average_redundancy": average_redundancy(
            np.array([assigned[x] for x in names]), ann)}
    for key, value in report.items():
        print(f"{key}\t{value:.6f}")
    if args.out:
        write_csv(args.out, list(report), [[float(v) for v in report.values()]])
    return EXIT_OK


# sweep -----------------------------------------------------------------------

def _sweep_task(task):
    family, param, method, seed, cfg_kwargs = task
    gen = generate_synth_c if family == "synth-c" else generate_synth_n
    network = gen(param, seed)
    cfg = SolverConfig(seed=seed, **cfg_kwargs)
    result = run_method(network, method, cfg)
    scores = evaluate_partition(result.assignment, network.ground_truth)
    return (param, method, seed, scores["purity"], scores["nmi"], scores["ari"])


def sweep_rows(family, grid, methods, seeds, cfg_kwargs, jobs=1):
    tasks = [(family, float(p), m, s, cfg_kwargs) for p in grid for m in methods for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_task, tasks))
    else:
        rows = [_sweep_task(t) for t in tasks]
    return sorted(rows, key=lambda r: (r[0], r[1], r[2]))


def summarize(rows):
    groups: dict = {}
    for param, method, _seed, *scores in rows:
        groups.setdefault((param, method), []).append(scores)
    return [(param, method, len(v), *[float(x) for x in np.mean(v, axis=0)])
            for (param, method), v in sorted(groups.items())]


def cmd_sweep(args) -> int:
    grid = args.grid if args.grid is not None else list(SWEEP_GRIDS[args.family])
    seeds = list(range(args.base_seed, args.base_seed + args.seeds))
    cfg_kwargs = dict(k=args.k, alpha=args.alpha, max_iters=args.max_iters,
                      rel_tol=args.rel_tol, update_centroids=not args.freeze_centroids)
    rows = sweep_rows(args.family, grid, args.methods, seeds, cfg_kwargs, args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "results.csv", ["param", "method", "seed", "purity", "nmi", "ari"], rows)
    summary = summarize(rows)
    write_csv(out / "summary.csv",
              ["param", "method", "n_seeds", "mean_purity", "mean_nmi", "mean_ari"], summary)
    argv = [args.family, "--grid", ",".join(fmt(p) for p in grid),
            "--methods", ",".join(args.methods), "--seeds", str(args.seeds),
            "--base-seed", str(args.base_seed), "--k", str(args.k), "--alpha", fmt(args.alpha),
            "--max-iters", str(args.max_iters), "--rel-tol", fmt(args.rel_tol)]
    if args.freeze_centroids:
        argv.append("--freeze-centroids")
    write_json(out / "manifest.json", _manifest(
        "sweep", argv, family=args.family, grid=[float(p) for p in grid], methods=args.methods,
        seeds=seeds, outputs=["results.csv", "summary.csv"], **cfg_kwargs,
    ))
    for param, method, n, _pur, nmi_mean, _ari in summary:
        print(f"{param:g}\t{method}\tNMI={nmi_mean:.3f} (n={n})")
    return EXIT_OK


# replay ----------------------------------------------------------------------

def cmd_replay(args) -> int:
    with open(args.manifest, encoding="utf-8") as fh:
        manifest = json.load(fh)
    out = args.out or str(Path(args.manifest).resolve().parent)
    old = os.environ.get(EPSILON_ENV_VAR)
    os.environ[EPSILON_ENV_VAR] = repr(float(manifest["epsilon"]))
    try:
        return main(list(manifest["argv"]) + ["--out", out])
    finally:
        if old is None:
            os.environ.pop(EPSILON_ENV_VAR, None)
        else:
            os.environ[EPSILON_ENV_VAR] = old


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multiplex-nmf", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic multiplex network")
    g.add_argument("family", choices=FAMILIES)
    g.add_argument("--p-var", type=float, help="SYNTH-C varying within-community probability")
    g.add_argument("--p-noise", type=float, help="SYNTH-N layer-1 between-community probability")
    g.add_argument("--sizes", type=_ints, help="planted: community sizes, e.g. 4,4")
    g.add_argument("--within", type=_floats, default=[0.3], help="planted: p_ii (one or per community)")
    g.add_argument("--between", type=float, default=0.05, help="planted: p_ij")
    g.add_argument("--layers", type=int, default=2, help="planted: number of layers")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("cluster", help="detect communities in layer edge lists")
    c.add_argument("layers", nargs="+", help="layer edge-list files (src, dst, weight)")
    c.add_argument("--method", default="csnmf", choices=METHOD_TAGS)
    c.add_argument("--nodes", help="node list fixing the id order (optional)")
    _solver_args(c)
    c.add_argument("--strict", action="store_true", help="exit 4 if the solver does not converge")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_cluster)

    e = sub.add_parser("evaluate", help="score an assignment against truth or annotations")
    e.add_argument("--assignment", required=True)
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("--truth")
    src.add_argument("--annotations", help="node<TAB>term file")
    e.add_argument("--max-term-nodes", type=int, default=100)
    e.add_argument("--min-term-nodes", type=int, default=2)
    e.add_argument("--no-filter", action="store_true", help="keep every annotation term")
    e.add_argument("--vocabulary-size", type=int, help="override the term count N_GO")
    e.add_argument("--out", help="CSV report path")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep", help="generate/cluster/evaluate over a parameter grid")
    s.add_argument("family", choices=tuple(SWEEP_GRIDS))
    s.add_argument("--grid", type=_grid, help="a,b,c or start:stop:count (default: the family's standard grid)")
    s.add_argument("--methods", type=_methods, default=_methods(SWEEP_DEFAULT_METHODS))
    s.add_argument("--seeds", type=int, default=5, help="number of seeds")
    s.add_argument("--base-seed", type=int, default=0)
    s.add_argument("--jobs", type=int, default=1)
    _solver_args(s)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("replay", help="rerun a generate/cluster/sweep from its manifest")
    r.add_argument("manifest")
    r.add_argument("--out", help="output directory (default: the manifest's directory)")
    r.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except NotConverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (MultiplexNMFError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
