"""Exploratory report; nothing here is asserted.

1. ILB against UB on small graphs, to probe whether their ratio stays bounded.
2. Graphs where LB exceeds UB.
3. Regret of the naive visible-history Hedge next to the decomposition learner
   on a bounded-recall graph, each facing losses chosen against its own play.
"""

import argparse

import numpy as np

from temporal_feedback.graph import (
    enumerate_independent_sets,
    is_transitive,
    make_batched,
    make_bounded_recall,
    make_delayed,
    make_full_information,
    random_acyclic_graph,
)
from temporal_feedback.harness import solve_plan
from temporal_feedback.learners import DecompositionLearner, NaiveVisibleHedge, compute_regret, play
from temporal_feedback.programs import solve_ilb, solve_lb


def ilb_vs_ub(rng, n):
    print("== ILB vs UB ==")
    graphs = [make_full_information(6), make_batched([3, 3]), make_delayed(8, 2), make_bounded_recall(8, 2), make_bounded_recall(9, 3)]
    graphs += [random_acyclic_graph(int(rng.integers(3, 9)), float(rng.uniform(0.2, 0.7)), rng) for _ in range(n)]
    worst = 0.0
    for g in graphs:
        ub = solve_plan(g).objective
        ilb = solve_ilb(g, enumerate_independent_sets(g, limit=5000)).objective
        worst = max(worst, ub / ilb)
        print(f"T={g.horizon:2d} transitive={is_transitive(g)!s:5}  UB={ub:7.4f}  ILB={ilb:7.4f}  UB/ILB={ub / ilb:.3f}")
    print(f"largest UB/ILB seen: {worst:.3f}")


def lb_above_ub():
    print("== LB above UB ==")
    for T in (2, 3, 4, 9, 16):
        g = make_full_information(T)
        ub, lb = solve_plan(g).objective, solve_lb(g).objective
        print(f"chain T={T:2d}  UB={ub:.4f}  LB={lb:.4f}  flag={lb > ub + 1e-9}")


def adaptive_losses(lrn, g, K=2):
    """Charge each round's loss to the action the learner currently favours."""
    L = np.zeros((g.horizon, K))
    for t in range(g.horizon):
        x = lrn.act(t, {s: L[s] for s in g.feedback[t]})
        L[t, int(np.argmax(x))] = 1.0
    return L


def naive_baseline(M, T):
    print("== naive baseline vs decomposition (adaptive losses) ==")
    g = make_bounded_recall(T, M)
    plan = solve_plan(g)
    for eta in (np.sqrt(np.log(2) / T), 1.0, 5.0):
        naive = NaiveVisibleHedge(g, eta)
        L = adaptive_losses(naive, g)
        print(f"naive eta={eta:6.3f}  regret {compute_regret(play(naive, g, L), L)[0]:8.3f}")
    dec = DecompositionLearner(g, plan)
    L = adaptive_losses(dec, g)
    print(f"decomposition     regret {compute_regret(play(dec, g, L), L)[0]:8.3f}  (plan objective {plan.objective:.3f}, T={T})")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--random", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    rng = np.random.default_rng(a.seed)
    ilb_vs_ub(rng, a.random)
    lb_above_ub()
    naive_baseline(M=4, T=64)


if __name__ == "__main__":
    main()
