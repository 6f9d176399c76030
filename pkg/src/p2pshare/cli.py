"""``p2pshare`` command line: gen-graph, simulate, optimize, sweep, fairness, order.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from ._version import __version__
from .analytics import (SweepConfig, fairness_exact, format_csv, parse_mechanism,
                        prepare_mechanism, resolve_gamma, run_sweep, simulate_graph)
from .config import ConfigError, load_config
from .lossmodel import ClaimSample, parse_severity
from .netgen import DegreeSpec, Graph, GraphError, generate_graph
from .optimize import LpProblem, solve_engagement_lp, solve_min_variance_qp, solve_sparse_mip
from .optimize import solve_two_stage
from .ordering import OrderError, apply_share, classify_matrix
from .sharing import CapacityError

log = logging.getLogger("p2pshare")


class UsageError(Exception):
    pass


def _setup_logging() -> None:
    level = os.environ.get("P2PSHARE_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        level = "error"
    logging.basicConfig(level=levels[level], format="%(levelname)s %(name)s: %(message)s")


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _degree_summary(g: Graph) -> str:
    d = g.degrees
    return (f"n={g.n} edges={g.m} degree min={int(d.min())} mean={d.mean():.4f} "
            f"sd={d.std():.4f} max={int(d.max())}")


# ------------------------------------------------------------------ commands

def cmd_gen_graph(args) -> int:
    spec = DegreeSpec(args.dbar, args.sigma, args.min_degree)
    g = generate_graph(spec, args.n, np.random.default_rng(args.seed),
                       swaps_per_edge=args.swaps_per_edge)
    g.save(args.out)
    print(_degree_summary(g))
    return 0


def _parse_claims(text: str, n: int) -> np.ndarray:
    Y = np.zeros(n)
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        node, _, val = item.partition(":")
        try:
            i, y = int(node), float(val)
        except ValueError:
            raise UsageError(f"bad claim {item!r}; expected node:severity") from None
        if not 0 <= i < n:
            raise ValueError(f"claim on node {i} outside 0..{n - 1}")
        Y[i] = y
    return Y


def _graph_from_args(args) -> tuple[Graph, float]:
    if args.graph:
        g = Graph.load(args.graph)
        sigma = args.sigma if args.sigma is not None else float(g.degrees.std())
        return g, sigma
    if args.n is None or args.dbar is None or args.sigma is None:
        raise UsageError("give --graph or all of --n, --dbar, --sigma")
    if args.seed is None:
        raise UsageError("--seed is required when generating a graph")
    spec = DegreeSpec(args.dbar, args.sigma, args.min_degree)
    g = generate_graph(spec, args.n, np.random.default_rng([args.seed, 0]))
    return g, args.sigma


def cmd_simulate(args) -> int:
    graph, sigma = _graph_from_args(args)
    dbar = args.dbar if args.dbar is not None else graph.mean_degree
    mech = parse_mechanism(args.mechanism, args.z)
    if args.claims is not None:
        cfg = SweepConfig(n=max(graph.n, 2), dbar=dbar, p=0.0, severity=parse_severity("point:0"),
                          s=args.s, gamma=args.gamma, mechanisms=(args.mechanism,), z=args.z)
        gamma = resolve_gamma(args.gamma, args.s, dbar)
        fn = prepare_mechanism(mech, graph, cfg, gamma)
        claims = ClaimSample.from_severities(_parse_claims(args.claims, graph.n), args.s)
        res = fn(np.asarray(claims.X, dtype=float))
        detail = {"mechanism": mech.label, "self_contribution": mech.z, "s": args.s,
                  "gamma": gamma, "X": claims.X.tolist(), **res.to_json()}
        text = json.dumps(detail, indent=1) + "\n"
        if args.detail:
            _write_text(args.detail, text)
        else:
            sys.stdout.write(text)
        return 0
    if args.seed is None:
        raise UsageError("--seed is required for simulated claims")
    if args.reps is not None and args.reps < 1:
        raise ValueError("--reps must be at least 1")
    cfg = SweepConfig(n=graph.n, dbar=dbar, sigmas=(sigma,), seeds=1, master_seed=args.seed,
                      p=args.p, severity=parse_severity(args.severity), s=args.s,
                      gamma=args.gamma, mechanisms=(args.mechanism,), z=args.z, reps=args.reps)
    rows = simulate_graph(graph, cfg, np.random.default_rng([args.seed, 1]), sigma, 0)
    _write_text(args.out, format_csv(rows, cfg))
    if args.detail:
        summary = {"rows": [r.__dict__ for r in rows], "graph": _degree_summary(graph)}
        _write_text(args.detail, json.dumps(summary, indent=1) + "\n")
    return 0


def _side_path(out: str, tag: str) -> str:
    p = Path(out)
    return str(p.with_name(f"{p.stem}.{tag}{p.suffix or '.json'}"))


def cmd_optimize(args) -> int:
    g = Graph.load(args.graph)
    if args.qp:
        q = solve_min_variance_qp(g, args.s, args.gamma)
        obj = {"n": g.n, "objective": q.objective, "cap": q.cap,
               "self_shares": q.self_share.tolist(),
               "edge_shares": [[int(u), int(v), float(w)]
                               for (u, v), w in zip(g.edges, q.edge_share)]}
        _write_text(args.out, json.dumps(obj, indent=1) + "\n")
        print(f"objective {q.objective!r}")
        return 0
    if args.fof:
        try:
            g1, g2 = (float(x) for x in args.fof.split(","))
        except ValueError:
            raise UsageError("--fof takes two numbers: gamma1,gamma2") from None
        eng1, fof, eng2 = solve_two_stage(g, args.s, g1, g2, args.z)
        eng1.save(args.out)
        fof.save(_side_path(args.out, "fof-graph"))
        eng2.save(_side_path(args.out, "stage2"))
        cover = eng1.coverage + eng2.coverage
        print(f"stage1 objective {float(eng1.total)!r} stage2 objective {float(eng2.total)!r} "
              f"fof edges {fof.m} min coverage {float(cover.min())!r}")
        return 0
    problem = LpProblem(g, args.gamma, args.s)
    if args.sparse is not None:
        eng = solve_sparse_mip(problem, args.sparse)
    else:
        eng = solve_engagement_lp(problem)
    eng.save(args.out)
    print(f"objective {eng.info['objective']!r} exact {eng.info['exact']}")
    return 0


def cmd_sweep(args) -> int:
    cfg, opts = load_config(args.config)
    out = args.out or opts["output"]
    workers = args.workers or opts["workers"] or (os.cpu_count() or 1)
    rows = run_sweep(cfg, workers)
    _write_text(out, format_csv(rows, cfg))
    return 0


def cmd_fairness(args) -> int:
    r = fairness_exact(args.dbar, args.p)
    print(f"p_zero {r.p_zero:.6f}")
    print(f"p_full {r.p_full:.6g}")
    print(f"p_strict {r.p_strict:.6f}")
    print(f"p_weak {r.p_weak:.6f}")
    return 0


def cmd_order(args) -> int:
    try:
        M = json.loads(Path(args.matrix).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"matrix file is not valid JSON: {exc}") from None
    print(classify_matrix(M, args.tol))
    if args.losses:
        X = [float(x) for x in args.losses.split(",")]
        print(",".join(repr(float(v)) for v in apply_share(M, X, args.tol)))
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="p2pshare", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"p2pshare {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-graph", help="sample a degree sequence and realize a graph")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dbar", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-degree", type=int, default=5)
    p.add_argument("--swaps-per-edge", type=float, default=10.0)
    p.set_defaults(func=cmd_gen_graph)

    p = sub.add_parser("simulate", help="settle simulated or explicit claims on one graph")
    p.add_argument("--graph")
    p.add_argument("--n", type=int)
    p.add_argument("--dbar", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--min-degree", type=int, default=5)
    p.add_argument("--seed", type=int)
    p.add_argument("--mechanism", default="uniform")
    p.add_argument("--p", type=float, default=0.1)
    p.add_argument("--severity", default="gamma:100,1000,2000")
    p.add_argument("--s", type=float, default=1000.0)
    p.add_argument("--z", type=float, default=0.0)
    p.add_argument("--gamma", default="s/dbar")
    p.add_argument("--reps", type=int)
    p.add_argument("--claims", help="explicit claims as node:severity,... (no sampling)")
    p.add_argument("--out", help="CSV output (default stdout)")
    p.add_argument("--detail", help="JSON detail output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize", help="solve for engagement magnitudes")
    p.add_argument("--graph", required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--z", type=float, default=0.0)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--sparse", type=int, metavar="M", help="at most M nonzero edges")
    g.add_argument("--fof", metavar="G1,G2", help="two-stage with friends of friends")
    g.add_argument("--qp", action="store_true", help="minimum-variance shares")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="run a configured dispersion sweep to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fairness", help="exact ex-post fairness probabilities")
    p.add_argument("--dbar", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.set_defaults(func=cmd_fairness)

    p = sub.add_parser("order", help="classify a share matrix")
    p.add_argument("--matrix", required=True)
    p.add_argument("--losses", help="comma separated loss vector to share")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_order)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))      # exits with status 2
    except (ConfigError, GraphError, CapacityError, OrderError, ValueError,
            ArithmeticError, OSError, KeyError) as exc:
        print(f"p2pshare: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
