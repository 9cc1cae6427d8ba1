"""Polynomial-time upper bound pipeline for transitive feedback graphs.

In a transitive graph every directed path is an order, so the dual's
exponentially many order constraints are separated by a longest-path DP.
The pipeline is

    dual (constraint generation)  ->  tight subgraph  ->  flow LP
        ->  path decomposition  ->  basis reduction  ->  sparse primal plan
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import (
    ContractViolationError,
    DegenerateOptimumError,
    InfeasibleError,
    InvalidArgumentError,
    NotTransitiveError,
    SolverError,
)
from .graph import TemporalFeedbackGraph, is_transitive, topological_order
from .programs import (
    FEAS_TOL,
    MU_FLOOR,
    UBDualSolution,
    UBPrimalSolution,
    normalize_plan,
    solve_ub_dual_over,
)


_HIGHS_TIGHT = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


def require_transitive(g):
    if not is_transitive(g):
        raise NotTransitiveError("graph is not transitive")


def _successors(g):
    succ = [[] for _ in range(g.horizon)]
    for t, S in enumerate(g.feedback):
        for s in sorted(S):
            succ[s].append(t)
    return succ


def _prefix_values(g, nu, topo):
    """``V[t]`` = heaviest path ending at ``t``; ``pred[t]`` its previous round."""
    V = np.zeros(g.horizon)
    pred = [-1] * g.horizon
    for t in topo:
        best, arg = 0.0, -1
        for s in sorted(g.feedback[t]):
            if V[s] > best:
                best, arg = V[s], s
        V[t] = nu[t] + best
        pred[t] = arg
    return V, pred


def _suffix_values(g, nu, topo, succ):
    W = np.zeros(g.horizon)
    nxt = [-1] * g.horizon
    for t in reversed(topo):
        best, arg = 0.0, -1
        for u in succ[t]:
            if W[u] > best:
                best, arg = W[u], u
        W[t] = nu[t] + best
        nxt[t] = arg
    return W, nxt


def _walk(start, links):
    out = []
    while start != -1:
        out.append(start)
        start = links[start]
    return out


def longest_path_oracle(g: TemporalFeedbackGraph, nu, topo=None):
    """Heaviest directed path under node weights ``nu``; O(T^2) DP.

    Returns ``(order, weight)``.  Ties go to the lowest end round.
    """
    require_transitive(g) if topo is None else None
    nu = np.asarray(nu, dtype=float)
    if np.any(nu < 0):
        raise InvalidArgumentError("node weights must be nonnegative")
    topo = topological_order(g) if topo is None else topo
    V, pred = _prefix_values(g, nu, topo)
    end = int(np.argmax(V))
    return tuple(reversed(_walk(end, pred))), float(V[end])


def heaviest_paths_through_each_round(g, nu, topo, succ):
    """For every round, the heaviest path passing through it (deduplicated)."""
    V, pred = _prefix_values(g, nu, topo)
    W, nxt = _suffix_values(g, nu, topo, succ)
    out = {}
    for t in range(g.horizon):
        path = tuple(reversed(_walk(t, pred))) + tuple(_walk(nxt[t], nxt))
        out[path] = float(V[t] + W[t] - nu[t])
    return out


def solve_ub_dual_transitive(g: TemporalFeedbackGraph, tol=FEAS_TOL, max_rounds=500) -> UBDualSolution:
    """Upper bound dual by constraint generation with the longest-path oracle.

    Each round adds, for every round ``t``, the heaviest path through ``t``
    when it violates its constraint by more than ``tol / 2``.  The returned
    ``tight_orders`` are the generated paths that are tight at the end; the
    full tight family is described by :func:`build_tight_subgraph`.
    """
    require_transitive(g)
    topo = topological_order(g)
    succ = _successors(g)
    active = set(heaviest_paths_through_each_round(g, np.ones(g.horizon), topo, succ))
    best = None
    for _ in range(max_rounds):
        sol = solve_ub_dual_over(g.horizon, sorted(active), tol)
        candidates = heaviest_paths_through_each_round(g, sol.mu**2, topo, succ)
        worst = max(candidates.values())
        feasible_mu = sol.mu / np.sqrt(max(worst, 1.0))
        if best is None or feasible_mu.sum() > best.sum():
            best = feasible_mu
        new = {p for p, w in candidates.items() if w > 1.0 + tol / 2 and p not in active}
        if not new:
            mu = feasible_mu
            tight = [p for p in sorted(active) if abs(float(mu[list(p)] @ mu[list(p)]) - 1.0) <= tol]
            return UBDualSolution(mu, float(mu.sum()), tight)
        active |= new
    raise SolverError(
        f"constraint generation did not converge in {max_rounds} rounds",
        UBDualSolution(best, float(best.sum()), []),
    )


# -- tight subgraph ---------------------------------------------------------------


@dataclass
class TightSubgraph:
    nodes: frozenset
    edges: tuple  # sorted (s, t) pairs with s in S_t
    src: frozenset
    dest: frozenset
    best_prefix: np.ndarray  # V_t for every round of the parent graph
    mu: np.ndarray

    def in_edges(self, t):
        return [e for e in self.edges if e[1] == t]

    def out_edges(self, s):
        return [e for e in self.edges if e[0] == s]

    def isolated(self):
        touched = {x for e in self.edges for x in e}
        return sorted(self.nodes - touched)

    def to_dict(self):
        return {
            "nodes": sorted(map(int, self.nodes)),
            "edges": [[int(s), int(t)] for s, t in self.edges],
            "src": sorted(map(int, self.src)),
            "dest": sorted(map(int, self.dest)),
            "V": [float(v) for v in self.best_prefix],
            "mu": [float(m) for m in self.mu],
        }


def _check_floor(mu):
    low = np.flatnonzero(mu < MU_FLOOR)
    if low.size:
        raise InvalidArgumentError(f"mu below floor {MU_FLOOR} at rounds {low.tolist()}")


def build_tight_subgraph(g: TemporalFeedbackGraph, mu, tol=FEAS_TOL) -> TightSubgraph:
    """Subgraph whose src-to-dest paths are exactly the tight orders of ``mu``.

    Seeds with rounds whose heaviest incoming path has weight one, then walks
    back along edges ``s -> t`` with ``V_t - V_s = mu_t^2``.
    """
    require_transitive(g)
    mu = np.asarray(mu, dtype=float)
    _check_floor(mu)
    nu = mu**2
    V, _ = _prefix_values(g, nu, topological_order(g))
    dest = {t for t in range(g.horizon) if abs(V[t] - 1.0) <= tol}
    nodes, edges = set(dest), set()
    stack = sorted(dest)
    while stack:
        t = stack.pop()
        for s in g.feedback[t]:
            if abs(V[t] - V[s] - nu[t]) <= tol:
                edges.add((s, t))
                if s not in nodes:
                    nodes.add(s)
                    stack.append(s)
    missing = sorted(set(range(g.horizon)) - nodes)
    if missing:
        raise DegenerateOptimumError(
            f"rounds {missing} lie on no tight path; re-solve the dual with a smaller tolerance"
        )
    src = {t for t in nodes if abs(V[t] - nu[t]) <= tol}
    return TightSubgraph(frozenset(nodes), tuple(sorted(edges)), frozenset(src), frozenset(dest), V, mu)


# -- flow ---------------------------------------------------------------------------


@dataclass
class FlowSolution:
    flow: dict  # (s, t) -> f

    def inflow(self, t):
        return sum(f for (s, u), f in self.flow.items() if u == t)

    def outflow(self, s):
        return sum(f for (u, t), f in self.flow.items() if u == s)

    def throughput(self, sub: TightSubgraph, t):
        if t in sub.src and t in sub.dest and not any(t in e for e in sub.edges):
            return 1.0 / sub.mu[t]  # zero-length path
        return self.outflow(t) if t in sub.src else self.inflow(t)

    def to_dict(self):
        return {"flow": [{"edge": [int(s), int(t)], "f": float(f)} for (s, t), f in sorted(self.flow.items())]}


def solve_flow(sub: TightSubgraph, mu=None, rel_tol=1e-6) -> FlowSolution:
    """Flow on the tight subgraph with node throughput ``1 / mu_t``.

    Throughput means outflow at source rounds and inflow everywhere else.
    Solved as an LP with explicit slacks so that a tolerance-level
    inconsistency in ``mu`` is absorbed and then reported, not hidden.
    """
    mu = sub.mu if mu is None else np.asarray(mu, dtype=float)
    _check_floor(mu[sorted(sub.nodes)])
    edges = list(sub.edges)
    if not edges:
        return FlowSolution({})
    idx = {e: i for i, e in enumerate(edges)}
    E = len(edges)
    rows, rhs = [], []
    throughput_rows = []
    for t in sorted(sub.nodes):
        ins = [idx[e] for e in sub.in_edges(t)]
        outs = [idx[e] for e in sub.out_edges(t)]
        if not ins and not outs:
            continue
        row = np.zeros(E)
        row[outs if t in sub.src else ins] = 1.0
        throughput_rows.append(len(rows))
        rows.append(row)
        rhs.append(1.0 / mu[t])
        if t not in sub.src and t not in sub.dest:
            row = np.zeros(E)
            row[ins] = 1.0
            row[outs] = -1.0
            rows.append(row)
            rhs.append(0.0)
    A = np.array(rows)
    n = len(throughput_rows)
    slack = np.zeros((len(rows), 2 * n))
    for k, r in enumerate(throughput_rows):
        slack[r, k], slack[r, n + k] = 1.0, -1.0
    c = np.concatenate([np.zeros(E), np.ones(2 * n)])
    res = linprog(
        c, A_eq=np.hstack([A, slack]), b_eq=rhs, bounds=(0, None), method="highs", options=_HIGHS_TIGHT
    )
    if res.status != 0:
        raise InfeasibleError(f"flow LP failed: {res.message}")
    f = np.clip(res.x[:E], 0.0, None)
    sol = FlowSolution({e: float(f[i]) for i, e in enumerate(edges) if f[i] > 0})
    for t in sub.nodes:
        target = 1.0 / mu[t]
        if abs(sol.throughput(sub, t) - target) > rel_tol * target:
            raise InfeasibleError(
                f"no flow meets throughput at round {t}: got {sol.throughput(sub, t)}, need {target}"
            )
    return sol


# -- decomposition ----------------------------------------------------------------------


@dataclass
class PathDecomposition:
    paths: list = field(default_factory=list)  # (order, rho)

    @property
    def objective(self) -> float:
        return float(sum(r for _, r in self.paths))

    def coverage(self, horizon) -> np.ndarray:
        cov = np.zeros(horizon)
        for p, r in self.paths:
            cov[list(p)] += r
        return cov

    def edge_flow(self) -> dict:
        out = {}
        for p, r in self.paths:
            for e in zip(p, p[1:]):
                out[e] = out.get(e, 0.0) + r
        return out

    def to_dict(self):
        return {"paths": [{"order": list(map(int, p)), "rho": float(r)} for p, r in self.paths]}


def decompose_flow(sub: TightSubgraph, flow: FlowSolution, atol=1e-9) -> PathDecomposition:
    """Strip src-to-dest paths off the flow, each time zeroing a bottleneck edge."""
    residual = dict(flow.flow)
    scale = max(residual.values(), default=1.0)
    zero = atol * scale
    succ = {}
    for s, t in sub.edges:
        succ.setdefault(s, []).append(t)
    paths = [((t,), float(1.0 / sub.mu[t])) for t in sub.isolated()]
    while True:
        starts = [(sum(residual.get((s, t), 0.0) for t in succ.get(s, [])), s) for s in sorted(sub.src)]
        amount, node = max(starts, default=(0.0, None))
        if node is None or amount <= zero:
            break
        path = [node]
        while node not in sub.dest:
            options = [(residual.get((node, t), 0.0), t) for t in succ.get(node, [])]
            r, nxt = max(options, default=(0.0, None))
            if nxt is None or r <= zero:
                raise ContractViolationError(f"flow is not conserved at round {node}")
            path.append(nxt)
            node = nxt
        steps = list(zip(path, path[1:]))
        bottleneck = min(residual[e] for e in steps)
        for e in steps:
            residual[e] -= bottleneck
        residual[min(steps, key=lambda e: residual[e])] = 0.0
        paths.append((tuple(path), float(bottleneck)))
    leftover = max(residual.values(), default=0.0)
    if leftover > atol * max(scale, 1.0):
        raise ContractViolationError(f"residual flow {leftover} left after decomposition")
    return PathDecomposition(paths)


def reduce_basis(decomp: PathDecomposition, mu, target=None, tol=1e-10) -> PathDecomposition:
    """Drive the path weights to a basic solution of the coverage system.

    While the supporting path-round incidence columns are dependent, move
    along a null-space direction until some weight hits zero.  Coverage
    ``sum_{c ni t} rho_c`` is unchanged by construction; so is ``sum(rho)``
    because every tight path has ``sum mu_t^2 = 1``.
    """
    mu = np.asarray(mu, dtype=float)
    T = len(mu)
    paths = [p for p, _ in decomp.paths]
    rho = np.array([r for _, r in decomp.paths], dtype=float)
    A = np.zeros((T, len(paths)))
    for j, p in enumerate(paths):
        A[list(p), j] = 1.0
    rank = np.linalg.matrix_rank(A) if paths else 0
    if target is not None and target < rank:
        raise InvalidArgumentError(f"target {target} is below the incidence rank {rank}")
    while True:
        support = np.flatnonzero(rho > 0)
        As = A[:, support]
        _, svals, vt = np.linalg.svd(As)
        r = int(np.sum(svals > tol * max(1.0, svals[0] if svals.size else 1.0)))
        if r == support.size:
            break
        d = vt[-1]
        if d.max() <= tol:
            d = -d
        pos = d > tol
        ratios = rho[support][pos] / d[pos]
        k = int(np.argmin(ratios))
        theta = ratios[k]
        rho[support] -= theta * d
        rho[support[np.flatnonzero(pos)[k]]] = 0.0
        rho[np.abs(rho) <= tol * rho.max()] = 0.0
    return PathDecomposition([(p, float(r)) for p, r in zip(paths, rho) if r > 0])


def assemble_primal(decomp: PathDecomposition, mu, max_dev=1e-6) -> UBPrimalSolution:
    """``lambda_{c,t} = rho_c mu_t``, renormalized to exact per-round feasibility."""
    mu = np.asarray(mu, dtype=float)
    plan = [(p, r * mu[list(p)]) for p, r in decomp.paths]
    return normalize_plan(UBPrimalSolution(plan, len(mu)), max_dev)


@dataclass
class TransitiveCertificate:
    dual: UBDualSolution
    subgraph: TightSubgraph
    flow: FlowSolution
    decomposition: PathDecomposition
    primal: UBPrimalSolution

    def to_dict(self):
        return {
            "dual": self.dual.to_dict(),
            "tight_subgraph": self.subgraph.to_dict(),
            "flow": self.flow.to_dict(),
            "paths": self.decomposition.to_dict()["paths"],
            "primal": self.primal.to_dict(),
        }


def solve_ub_primal_transitive(g: TemporalFeedbackGraph, tol=FEAS_TOL, retries=2) -> TransitiveCertificate:
    """Run the whole pipeline, tightening the dual tolerance on degenerate optima."""
    dual_tol = tol
    for attempt in range(retries + 1):
        dual = solve_ub_dual_transitive(g, dual_tol)
        try:
            sub = build_tight_subgraph(g, dual.mu, tol)
            break
        except DegenerateOptimumError:
            if attempt == retries:
                raise
            dual_tol /= 10
    flow = solve_flow(sub)
    decomp = reduce_basis(decompose_flow(sub, flow), dual.mu, target=g.horizon)
    return TransitiveCertificate(dual, sub, flow, decomp, assemble_primal(decomp, dual.mu))


def greedy_cover_ratio(g: TemporalFeedbackGraph) -> int:
    """Greedy count of orders needed to cover the largest neighborhood.

    Each step takes the path through the most still-uncovered rounds of S_t,
    found by the longest-path DP with 0/1 weights, so no enumeration is needed.
    """
    require_transitive(g)
    topo = topological_order(g)
    worst = 1
    for t in range(g.horizon):
        remaining, count = set(g.feedback[t]), 0
        while remaining:
            nu = np.zeros(g.horizon)
            nu[list(remaining)] = 1.0
            path, _ = longest_path_oracle(g, nu, topo)
            remaining -= set(path)
            count += 1
        worst = max(worst, count)
    return worst
