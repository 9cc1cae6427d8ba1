"""Grid-search oracle for the program values, independent of the conic solver.

Every program here has the shape: maximize a concave objective, increasing
in each variable, over ``{x >= 0 : sum_{j in C} x_j^2 <= 1 for C in family}``.
So for fixed values of all but one variable, the last one is pushed to its
largest feasible value in closed form, and only the rest are gridded.
Variables related by a symmetry of the constraint family are folded into one
(the optimum of a concave program over a symmetric convex set can be taken
symmetric), which keeps the grid small.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import InvalidArgumentError
from .graph import TemporalFeedbackGraph, enumerate_independent_sets, enumerate_maximal_orders


def _family_orbits(n, family, max_perm_n=7):
    """Orbits of the variables under permutations preserving ``family``."""
    fam = {frozenset(c) for c in family}
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    if n <= max_perm_n:
        for perm in itertools.permutations(range(n)):
            if {frozenset(perm[j] for j in c) for c in fam} == fam:
                for j in range(n):
                    parent[find(j)] = find(perm[j])
    groups = {}
    for j in range(n):
        groups.setdefault(find(j), []).append(j)
    return list(groups.values())


def _setup(kind, g, family):
    """Return (n_vars, constraint family, objective(x_squared) -> value, foldable)."""
    T = g.horizon
    if kind == "ub-dual":
        orders = enumerate_maximal_orders(g)
        return T, [tuple(o) for o in orders], lambda x2: np.sqrt(x2).sum(axis=-1), True
    if kind == "lb":
        cons = [tuple(sorted(S)) for S in set(g.feedback) if S] + [(t,) for t in range(T)]
        return T, cons, lambda x2: np.sqrt(x2).sum(axis=-1), True
    if kind == "ilb":
        fam = [frozenset(I) for I in (enumerate_independent_sets(g) if family is None else family)]
        member = np.zeros((len(fam), T))
        for j, I in enumerate(fam):
            member[j, list(I)] = 1.0
        cons = [tuple(j for j, I in enumerate(fam) if I & S) for S in g.feedback]
        cons += [tuple(j for j, I in enumerate(fam) if t in I) for t in range(T)]
        cons = [c for c in cons if c]

        def objective(x2):
            return np.sqrt(np.maximum(x2 @ member, 0.0)).sum(axis=-1)

        return len(fam), cons, objective, False
    raise InvalidArgumentError(f"unknown program kind {kind!r}")


def brute_force_program_value(
    kind: str,
    g: TemporalFeedbackGraph,
    grid_step: float = 1e-3,
    family=None,
    max_vars: int = 4,
    max_points: int = 4_000_000,
    allow_large: bool = False,
) -> float:
    """Optimal value of ``kind`` in {"ub-dual", "lb", "ilb"} by grid search.

    Accuracy is O(grid_step * T).  When the full grid would exceed
    ``max_points`` the search is refined coarse-to-fine around the incumbent,
    which is sound because the programs are concave.
    """
    n, cons, objective, foldable = _setup(kind, g, family)
    orbits = _family_orbits(n, cons) if foldable else [[j] for j in range(n)]
    d = len(orbits)
    if d > max_vars and not allow_large:
        raise InvalidArgumentError(f"{d} free variables after folding exceeds max_vars={max_vars}")
    # counts[c, k]: how many variables of orbit k sit in constraint c
    counts = np.zeros((len(cons), d))
    where = {j: k for k, orb in enumerate(orbits) for j in orb}
    for c, C in enumerate(cons):
        for j in C:
            counts[c, where[j]] += 1
    expand = np.zeros((d, n))
    for k, orb in enumerate(orbits):
        expand[k, orb] = 1.0
    last = d - 1
    rows_last = counts[:, last] > 0

    def evaluate(grid_pts):
        # grid_pts: (m, d-1) values of orbit variables 0..d-2
        sq = grid_pts**2
        used = sq @ counts[:, :last].T  # (m, n_cons)
        ok = np.all(used <= 1.0 + 1e-12, axis=1)
        room = np.clip(1.0 - used[:, rows_last], 0.0, None) / counts[rows_last, last]
        y_last2 = room.min(axis=1) if rows_last.any() else np.ones(len(grid_pts))
        y2 = np.column_stack([sq, y_last2])
        vals = objective(y2 @ expand)
        return np.where(ok, vals, -np.inf)

    if last == 0:
        return float(evaluate(np.zeros((1, 0)))[0])

    lo, hi = np.zeros(last), np.ones(last)
    per_axis = int(np.floor(max_points ** (1.0 / last)))
    step = max(grid_step, 1.0 / max(per_axis - 1, 1))
    best_val, best_pt = -np.inf, None
    while True:
        axes = [np.arange(lo[i], hi[i] + step / 2, step) for i in range(last)]
        axes = [a[(a >= 0) & (a <= 1)] for a in axes]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, last)
        vals = evaluate(pts)
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val, best_pt = float(vals[k]), pts[k]
        if step <= grid_step:
            return best_val
        new_step = max(grid_step, step / max(per_axis / 4.0, 2.0))
        lo, hi = best_pt - 2 * step, best_pt + 2 * step
        step = new_step
