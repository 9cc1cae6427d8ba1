"""Command-line entry point.

Exit codes: 0 success, 1 invalid input, 2 solver failure, 3 a checked
verdict failed under ``--strict``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import graph as G
from .adversaries import brownian_adversary, independent_set_adversary, scaled_bernoulli_adversary
from .errors import FeedbackGraphError, GraphFormatError, InvalidArgumentError, SolverError
from .harness import (
    brownian_certificate,
    compare_bounds,
    interval_ilb,
    load_config,
    square_batched_gap,
    run_matchup,
    solve_dual,
)
from .programs import solve_ilb, solve_lb, solve_ub_primal_enumerative
from .transitive import build_tight_subgraph, solve_flow, solve_ub_primal_transitive

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_VERDICT = 0, 1, 2, 3


def _ints(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _emit(obj, out):
    text = json.dumps(obj, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _read_graph(path):
    p = Path(path)
    if not p.is_file():
        raise GraphFormatError(f"graph file {path} does not exist", "path")
    return G.parse(p.read_text())


def cmd_gen(a):
    if a.batched:
        g = G.make_batched(a.batched)
    elif a.delayed:
        T, d = a.delayed
        g = G.make_delayed(T, d)
    elif a.bounded_recall:
        T, M = a.bounded_recall
        g = G.make_bounded_recall(T, M)
    elif a.full is not None:
        g = G.make_full_information(a.full)
    elif a.empty is not None:
        g = G.make_empty(a.empty)
    else:
        rng = np.random.default_rng(a.seed)
        T, dens = a.random
        g = G.random_acyclic_graph(int(T), float(dens), rng)
    _emit(G.to_dict(g), a.output)
    return EXIT_OK


def _method(g, m):
    return ("transitive" if G.is_transitive(g) else "enumerative") if m == "auto" else m


def cmd_solve(a):
    g = _read_graph(a.graph)
    method = _method(g, a.method)
    out: dict = {"program": a.program, "method": method}
    cert = None
    if a.program in ("ub-primal", "flow") or (a.emit_certificate and method == "transitive"):
        if method == "transitive":
            cert = solve_ub_primal_transitive(g, a.tol)
        elif a.program == "flow":
            raise InvalidArgumentError("the flow program needs a transitive graph")
    if a.program == "ub-dual":
        sol = cert.dual if cert else solve_dual(g, method, a.tol)
        out.update(sol.to_dict())
    elif a.program == "ub-primal":
        sol = cert.primal if cert else solve_ub_primal_enumerative(g, tol=a.tol)
        out.update(sol.to_dict())
    elif a.program == "flow":
        sub = build_tight_subgraph(g, cert.dual.mu, a.tol)
        flow = solve_flow(sub)
        out.update({"objective": cert.dual.objective, "tight_subgraph": sub.to_dict(), "flow": flow.to_dict()})
    elif a.program == "lb":
        out.update(solve_lb(g, a.tol).to_dict())
    elif a.program == "ilb":
        if method == "transitive" and not a.enumerate_sets:
            out.update(interval_ilb(g, solve_dual(g, "transitive", a.tol).mu).to_dict())
            out["route"] = "interval reduction"
        else:
            out.update(solve_ilb(g, G.enumerate_independent_sets(g), a.tol).to_dict())
    if a.emit_certificate and cert is not None:
        out["certificate"] = cert.to_dict()
        out["certificate"]["brownian"] = brownian_certificate(g, cert.dual.mu)
    _emit(out, a.output)
    failed = "certificate" in out and out["certificate"]["brownian"]["verdict"] != "PASS"
    return EXIT_VERDICT if a.strict and failed else EXIT_OK


def cmd_run(a):
    cfg = load_config(a.config)
    if a.csv:
        cfg.csv_path = str(Path(a.csv).resolve())
    if a.report:
        cfg.report_path = str(Path(a.report).resolve())
    rep = run_matchup(cfg)
    if not cfg.report_path:
        _emit(rep.to_dict(), None)
    else:
        print(f"mean regret {rep.mean:.6g} +- {1.96 * rep.stderr:.3g} over {len(rep.regrets)} trials", file=sys.stderr)
    return EXIT_VERDICT if a.strict and not rep.passed else EXIT_OK


def cmd_bounds(a):
    rep = compare_bounds(_read_graph(a.graph), a.method, ilb_cap=a.ilb_cap)
    _emit(rep.to_dict(), a.output)
    return EXIT_VERDICT if a.strict and not rep.passed else EXIT_OK


def cmd_gap(a):
    rep = square_batched_gap(a.T)
    _emit(rep.to_dict(), a.output)
    return EXIT_VERDICT if a.strict and not rep.passed else EXIT_OK


def cmd_draw(a):
    g = _read_graph(a.graph)
    if a.adversary == "bernoulli":
        d = scaled_bernoulli_adversary(solve_lb(g).eps, 0.1 if a.gamma is None else a.gamma, a.seed)
    else:
        mu = solve_dual(g, "transitive").mu
        gm = 0.25 if a.gamma is None else a.gamma
        if a.adversary == "brownian":
            d = brownian_adversary(g, mu, gm, a.seed)
        else:
            d = independent_set_adversary(interval_ilb(g, mu), gm, a.seed)
    text = d.to_csv(reveal=a.reveal)
    if a.output:
        Path(a.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tfg", description="Online learning with temporal feedback graphs.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen", help="emit a graph as JSON")
    kind = s.add_mutually_exclusive_group(required=True)
    kind.add_argument("--batched", type=_ints, metavar="B1,B2,...")
    kind.add_argument("--delayed", type=_ints, metavar="T,DELAY")
    kind.add_argument("--bounded-recall", type=_ints, metavar="T,M")
    kind.add_argument("--full", type=int, metavar="T")
    kind.add_argument("--empty", type=int, metavar="T")
    kind.add_argument("--random", nargs=2, metavar=("T", "DENSITY"))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve one program on a graph")
    s.add_argument("graph")
    s.add_argument("--program", choices=["ub-primal", "ub-dual", "lb", "ilb", "flow"], default="ub-dual")
    s.add_argument("--method", choices=["auto", "enumerative", "transitive"], default="auto")
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--emit-certificate", action="store_true")
    s.add_argument("--enumerate-sets", action="store_true", help="solve the ILB over enumerated sets even when transitive")
    s.add_argument("--strict", action="store_true")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("run", help="run a learner against an adversary from a TOML/JSON config")
    s.add_argument("config")
    s.add_argument("--csv")
    s.add_argument("--report")
    s.add_argument("--strict", action="store_true")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("bounds", help="compare UB, LB, ILB and the cover number")
    s.add_argument("graph")
    s.add_argument("--method", choices=["auto", "enumerative", "transitive"], default="auto")
    s.add_argument("--ilb-cap", type=int, default=2000)
    s.add_argument("--strict", action="store_true")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("gap", help="UB/LB gap on the square batched graph")
    s.add_argument("T", type=int)
    s.add_argument("--strict", action="store_true")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_gap)

    s = sub.add_parser("draw", help="sample one adversary draw as CSV")
    s.add_argument("graph")
    s.add_argument("--adversary", choices=["bernoulli", "independent-set", "brownian"], default="bernoulli")
    s.add_argument("--gamma", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--reveal", action="store_true", help="include the hidden sign")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_draw)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INVALID
    try:
        return a.func(a)
    except SolverError as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except (FeedbackGraphError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
