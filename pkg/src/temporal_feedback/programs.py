"""The convex programs that bracket the achievable regret, solved at desk scale.

All four programs are handed to a conic solver (Clarabel through cvxpy) after
explicit enumeration of their constraint families; the enumerations come from
:mod:`temporal_feedback.graph`.  Every solution type has a ``verify_*``
counterpart that re-checks feasibility from scratch, and
:mod:`temporal_feedback.oracle` certifies optimal values on tiny instances.

Program summary (rounds ``t``, maximal orders ``C``, neighborhoods ``S_t``):

* upper bound primal: min sum_C ||lambda_C||_2, sum_C lambda_{C,t} = 1
* upper bound dual:   max sum_t mu_t, sum_{t in C} mu_t^2 <= 1
* lower bound:        max sum_t eps_t, sum_{s in S_t} eps_s^2 <= 1, eps_t <= 1
* independent sets:   max sum_t sqrt(sum_{I ni t} v_I),
                      sum_{I meets S_t} v_I <= 1, sum_{I ni t} v_I <= 1
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import cvxpy as cp
import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import InfeasibleError, InvalidArgumentError, SolverError
from .graph import (
    Order,
    TemporalFeedbackGraph,
    enumerate_maximal_orders,
    is_transitive,
)

FEAS_TOL = 1e-6
OPT_TOL = 1e-4
MU_FLOOR = 1e-9

_CLARABEL_OPTS = dict(tol_gap_abs=1e-11, tol_gap_rel=1e-11, tol_feas=1e-11, max_iter=500)


# -- solution types -----------------------------------------------------------


@dataclass
class UBDualSolution:
    mu: np.ndarray
    objective: float
    tight_orders: list = field(default_factory=list)

    def to_dict(self):
        return {
            "mu": [float(m) for m in self.mu],
            "objective": float(self.objective),
            "tight_orders": [list(map(int, o)) for o in self.tight_orders],
        }


@dataclass
class UBPrimalSolution:
    """Loss shares: ``plan[i] = (order, lam)`` with ``lam[j]`` the share of ``order[j]``."""

    plan: list
    horizon: int

    @property
    def objective(self) -> float:
        return float(sum(np.linalg.norm(lam) for _, lam in self.plan))

    @property
    def basis(self) -> list:
        return [order for order, lam in self.plan if np.any(lam > 0)]

    @property
    def shares(self) -> dict:
        return {(i, t): float(x) for i, (order, lam) in enumerate(self.plan) for t, x in zip(order, lam)}

    def round_totals(self) -> np.ndarray:
        tot = np.zeros(self.horizon)
        for order, lam in self.plan:
            np.add.at(tot, list(order), lam)
        return tot

    def to_dict(self):
        return {
            "shares": [{"order": list(map(int, o)), "lambda": [float(x) for x in lam]} for o, lam in self.plan],
            "objective": self.objective,
        }


@dataclass
class LBSolution:
    eps: np.ndarray
    objective: float

    def to_dict(self):
        return {"eps": [float(e) for e in self.eps], "objective": float(self.objective)}


@dataclass
class ILBSolution:
    """Independent-set weights, stored squared (``v_I = w_I**2``)."""

    weights: dict
    horizon: int

    def variance(self) -> np.ndarray:
        """Per-round total ``sum_{I ni t} v_I``."""
        out = np.zeros(self.horizon)
        for I, v in self.weights.items():
            for t in I:
                out[t] += v
        return out

    @property
    def objective(self) -> float:
        return float(np.sqrt(np.maximum(self.variance(), 0.0)).sum())

    def to_dict(self):
        return {
            "weights": [{"set": sorted(I), "v": float(v)} for I, v in self.weights.items()],
            "objective": self.objective,
        }


@dataclass
class RhoSolution:
    orders: list
    rho: np.ndarray

    @property
    def objective(self) -> float:
        return float(self.rho.sum())

    def to_primal(self, mu, horizon) -> UBPrimalSolution:
        mu = np.asarray(mu, dtype=float)
        plan = [(o, r * mu[list(o)]) for o, r in zip(self.orders, self.rho) if r > 0]
        return UBPrimalSolution(plan, horizon)


@dataclass
class Violation:
    constraint: str
    value: float
    bound: float

    @property
    def slack(self) -> float:
        return self.bound - self.value


@dataclass
class VerificationReport:
    violations: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.feasible


# -- helpers ------------------------------------------------------------------


def _orders_for(g, orders):
    return enumerate_maximal_orders(g) if orders is None else [tuple(o) for o in orders]


def _solve(problem: cp.Problem, what: str, best=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            problem.solve(solver=cp.CLARABEL, **_CLARABEL_OPTS)
        except cp.error.SolverError as exc:
            raise SolverError(f"{what}: {exc}", best) from exc
    if problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        raise SolverError(f"{what}: solver status {problem.status}", best)


def order_weight(mu, order) -> float:
    m = np.asarray(mu)[list(order)]
    return float(m @ m)


def _scale_to_feasible(mu, orders):
    """Clip to nonnegative and shrink so every order constraint holds exactly."""
    mu = np.clip(np.asarray(mu, dtype=float), 0.0, None)
    worst = max((order_weight(mu, o) for o in orders), default=0.0)
    if worst > 1.0:
        mu = mu / np.sqrt(worst)
    return mu


def tight_orders_of(mu, orders, tol=FEAS_TOL) -> list:
    return [o for o in orders if abs(order_weight(mu, o) - 1.0) <= tol]


# -- upper bound ----------------------------------------------------------------


def solve_ub_dual_over(horizon: int, constraint_sets, tol=FEAS_TOL) -> UBDualSolution:
    """Maximize sum(mu) subject to ||mu_C|| <= 1 for each listed round set."""
    sets = [tuple(c) for c in constraint_sets]
    covered = set(itertools.chain.from_iterable(sets))
    if len(covered) != horizon:
        raise InvalidArgumentError(f"rounds {sorted(set(range(horizon)) - covered)} appear in no constraint")
    mu = cp.Variable(horizon)
    order_cons = [cp.norm(mu[list(c)]) <= 1 for c in sets]
    prob = cp.Problem(cp.Maximize(cp.sum(mu)), [mu >= 0] + order_cons)
    _solve(prob, "upper bound dual", best=UBDualSolution(np.zeros(horizon), 0.0, []))
    rho = np.array([float(np.atleast_1d(c.dual_value)[0]) for c in order_cons])
    m = _scale_to_feasible(mu.value, sets)
    m = _polish_dual(m, sets, rho)
    return UBDualSolution(m, float(m.sum()), tight_orders_of(m, sets, tol))


def _polish_dual(mu, sets, rho, iters=30):
    """Newton refinement of the dual's KKT system on the active constraints.

    The objective is flat to second order at the optimum, so an interior
    point gap of 1e-11 only pins ``mu`` to ~1e-6.  The tight-subgraph flow
    needs more, so solve ``mu_t * sum_{C ni t} rho_C = 1`` and
    ``||mu_C||^2 = 1`` (active C) by Gauss-Newton with min-norm steps.
    The refined point is kept only if it stays feasible and no worse.
    """
    active = [j for j in np.flatnonzero(rho > 1e-7 * max(rho.max(initial=0.0), 1e-300))]
    if not active:
        return mu
    T = len(mu)
    A = np.zeros((T, len(active)))
    for k, j in enumerate(active):
        A[list(sets[j]), k] = 1.0
    x, r = mu.copy(), rho[active].copy()

    def residual(x, r):
        return np.concatenate([x * (A @ r) - 1.0, (A.T @ x**2) - 1.0])

    for _ in range(iters):
        F = residual(x, r)
        if np.max(np.abs(F)) < 1e-14:
            break
        J = np.block([[np.diag(A @ r), x[:, None] * A], [2.0 * A.T * x[None, :], np.zeros((len(active), len(active)))]])
        step = np.linalg.lstsq(J, -F, rcond=None)[0]
        x, r = x + step[:T], r + step[T:]
    if not np.all(np.isfinite(x)) or np.max(np.abs(x - mu)) > 1e-4 or np.any(x < 0):
        return mu
    x = _scale_to_feasible(x, sets)
    return x if x.sum() >= mu.sum() - 1e-9 else mu


def solve_ub_dual_enumerative(g: TemporalFeedbackGraph, orders=None, tol=FEAS_TOL) -> UBDualSolution:
    return solve_ub_dual_over(g.horizon, _orders_for(g, orders), tol)


def solve_ub_primal_enumerative(g: TemporalFeedbackGraph, orders=None, tol=FEAS_TOL) -> UBPrimalSolution:
    orders = _orders_for(g, orders)
    T = g.horizon
    sizes = [len(o) for o in orders]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    rows = [t for o in orders for t in o]
    M = sp.csr_matrix((np.ones(len(rows)), (rows, np.arange(len(rows)))), shape=(T, len(rows)))
    lam = cp.Variable(len(rows), nonneg=True)
    obj = cp.sum(cp.hstack([cp.norm(lam[offsets[i]:offsets[i + 1]]) for i in range(len(orders))]))
    prob = cp.Problem(cp.Minimize(obj), [M @ lam == 1])
    singletons = UBPrimalSolution([((t,), np.ones(1)) for t in range(T)], T)
    _solve(prob, "upper bound primal", best=singletons)
    x = np.clip(lam.value, 0.0, None)
    plan = []
    for i, o in enumerate(orders):
        seg = x[offsets[i]:offsets[i + 1]]
        # interior-point leaves ~1e-10 mass on orders outside the optimal support
        if np.linalg.norm(seg) > 1e-7:
            plan.append((o, seg.copy()))
    return normalize_plan(UBPrimalSolution(plan, T))


def normalize_plan(sol: UBPrimalSolution, max_dev=1e-6) -> UBPrimalSolution:
    """Rescale shares so every round's total is exactly one.

    Rounds whose total is off by more than ``max_dev`` are an error.
    """
    tot = sol.round_totals()
    bad = np.flatnonzero(np.abs(tot - 1.0) > max_dev)
    if bad.size:
        raise InfeasibleError(f"round shares off by more than {max_dev} at rounds {bad.tolist()}")
    return UBPrimalSolution([(o, lam / tot[list(o)]) for o, lam in sol.plan], sol.horizon)


def solve_restricted_rho_lp(tight_orders, mu, tol=FEAS_TOL) -> RhoSolution:
    """Sparse order weights: min sum(rho) s.t. sum_{C ni t} rho_C = 1/mu_t.

    HiGHS returns a vertex, so at most ``T`` weights are nonzero.
    """
    mu = np.asarray(mu, dtype=float)
    orders = [tuple(o) for o in tight_orders]
    T = len(mu)
    covered = set(itertools.chain.from_iterable(orders))
    missing = sorted(set(range(T)) - covered)
    if missing:
        raise InfeasibleError(f"rounds {missing} are covered by no tight order")
    if np.any(mu < MU_FLOOR):
        raise InvalidArgumentError(f"mu below floor {MU_FLOOR} at rounds {np.flatnonzero(mu < MU_FLOOR).tolist()}")
    A = np.zeros((T, len(orders)))
    for j, o in enumerate(orders):
        A[list(o), j] = 1.0
    res = linprog(np.ones(len(orders)), A_eq=A, b_eq=1.0 / mu, bounds=(0, None), method="highs")
    if res.status != 0:
        raise InfeasibleError(f"restricted LP infeasible: {res.message}")
    rho = np.clip(res.x, 0.0, None)
    keep = rho > 0
    return RhoSolution([o for o, k in zip(orders, keep) if k], rho[keep])


# -- lower bounds ---------------------------------------------------------------


def solve_lb(g: TemporalFeedbackGraph, tol=FEAS_TOL) -> LBSolution:
    T = g.horizon
    eps = cp.Variable(T)
    cons = [eps >= 0, eps <= 1]
    cons += [cp.norm(eps[sorted(S)]) <= 1 for S in set(g.feedback) if S]
    prob = cp.Problem(cp.Maximize(cp.sum(eps)), cons)
    _solve(prob, "lower bound", best=LBSolution(np.zeros(T), 0.0))
    e = np.clip(eps.value, 0.0, 1.0)
    worst = max((float(e[sorted(S)] @ e[sorted(S)]) for S in g.feedback if S), default=0.0)
    if worst > 1.0:
        e = e / np.sqrt(worst)
    return LBSolution(e, float(e.sum()))


def _ilb_matrices(g, family):
    T, F = g.horizon, len(family)
    member = np.zeros((T, F))
    hits = np.zeros((T, F))
    for j, I in enumerate(family):
        member[list(I), j] = 1.0
        for t, S in enumerate(g.feedback):
            if I & S:
                hits[t, j] = 1.0
    return member, hits


def solve_ilb(g: TemporalFeedbackGraph, independent_sets, tol=FEAS_TOL) -> ILBSolution:
    family = [frozenset(I) for I in independent_sets]
    T = g.horizon
    if not family:
        return ILBSolution({}, T)
    member, hits = _ilb_matrices(g, family)
    v = cp.Variable(len(family), nonneg=True)
    rows = [t for t in range(T) if hits[t].any()]
    cons = [member @ v <= 1]
    if rows:
        cons.append(hits[rows] @ v <= 1)
    used = [t for t in range(T) if member[t].any()]
    prob = cp.Problem(cp.Maximize(cp.sum(cp.sqrt(member[used] @ v))), cons)
    _solve(prob, "independent set program", best=ILBSolution({}, T))
    x = np.clip(v.value, 0.0, None)
    worst = max(np.max(member @ x, initial=0.0), np.max(hits @ x, initial=0.0))
    if worst > 1.0:
        x = x / worst
    return ILBSolution({I: float(w) for I, w in zip(family, x) if w > 0}, T)


# -- verification ---------------------------------------------------------------


def verify_ub_dual(g: TemporalFeedbackGraph, sol, tol=FEAS_TOL, orders=None) -> VerificationReport:
    """Check a dual vector against every order constraint.

    Transitive graphs are checked with the longest-path oracle instead of
    enumeration, so they need no cap.
    """
    mu = np.asarray(getattr(sol, "mu", sol), dtype=float)
    rep = VerificationReport()
    for t in np.flatnonzero(mu < -tol):
        rep.violations.append(Violation(f"mu[{t}] >= 0", -float(mu[t]), 0.0))
    if orders is None and is_transitive(g):
        from .transitive import longest_path_oracle

        path, w = longest_path_oracle(g, mu**2)
        if w > 1.0 + tol:
            rep.violations.append(Violation(f"order {list(path)}", w, 1.0))
        return rep
    for o in _orders_for(g, orders):
        w = order_weight(mu, o)
        if w > 1.0 + tol:
            rep.violations.append(Violation(f"order {list(o)}", w, 1.0))
    return rep


def verify_ub_primal(g: TemporalFeedbackGraph, sol: UBPrimalSolution, tol=FEAS_TOL) -> VerificationReport:
    from .graph import is_order

    rep = VerificationReport()
    for order, lam in sol.plan:
        if not is_order(g, order):
            rep.violations.append(Violation(f"{list(order)} is an order", 1.0, 0.0))
        for t, x in zip(order, lam):
            if x < -tol:
                rep.violations.append(Violation(f"lambda[{list(order)},{t}] >= 0", -float(x), 0.0))
    tot = sol.round_totals()
    for t in range(g.horizon):
        if abs(tot[t] - 1.0) > tol:
            rep.violations.append(Violation(f"sum of shares at round {t} == 1", float(tot[t]), 1.0))
    return rep


def verify_lb(g: TemporalFeedbackGraph, sol, tol=FEAS_TOL) -> VerificationReport:
    eps = np.asarray(getattr(sol, "eps", sol), dtype=float)
    rep = VerificationReport()
    for t, e in enumerate(eps):
        if e < -tol or e > 1.0 + tol:
            rep.violations.append(Violation(f"0 <= eps[{t}] <= 1", float(e), 1.0))
    for t, S in enumerate(g.feedback):
        if S:
            w = float(sum(eps[s] ** 2 for s in S))
            if w > 1.0 + tol:
                rep.violations.append(Violation(f"neighborhood of round {t}", w, 1.0))
    return rep


def verify_ilb(g: TemporalFeedbackGraph, sol: ILBSolution, tol=FEAS_TOL) -> VerificationReport:
    from .graph import is_independent

    rep = VerificationReport()
    for I, v in sol.weights.items():
        if v < -tol:
            rep.violations.append(Violation(f"v[{sorted(I)}] >= 0", -float(v), 0.0))
        if not I or not is_independent(g, I):
            rep.violations.append(Violation(f"{sorted(I)} is a nonempty independent set", 1.0, 0.0))
    var = sol.variance()
    for t in range(g.horizon):
        if var[t] > 1.0 + tol:
            rep.violations.append(Violation(f"variance cap at round {t}", float(var[t]), 1.0))
        S = g.feedback[t]
        hit = float(sum(v for I, v in sol.weights.items() if I & S))
        if hit > 1.0 + tol:
            rep.violations.append(Violation(f"neighborhood of round {t}", hit, 1.0))
    return rep


# -- cover ratio -----------------------------------------------------------------


def neighborhood_order_cover(g: TemporalFeedbackGraph, t: int, orders=None) -> list:
    """Greedy cover of ``S_t`` by orders of ``g`` (each restricted to ``S_t``)."""
    orders = _orders_for(g, orders)
    remaining = set(g.feedback[t])
    cover = []
    while remaining:
        best = max(orders, key=lambda o: (len(remaining.intersection(o)), [-x for x in o]))
        gain = remaining.intersection(best)
        cover.append(tuple(s for s in best if s in g.feedback[t]))
        remaining -= gain
    return cover


def cover_ratio_bound(g: TemporalFeedbackGraph, orders=None) -> int:
    orders = _orders_for(g, orders)
    return max((len(neighborhood_order_cover(g, t, orders)) for t in range(g.horizon)), default=0) or 1
