"""Hedge, the order-decomposition learner, and the naive visible-loss baseline."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ContractViolationError, InvalidArgumentError
from .graph import TemporalFeedbackGraph
from .programs import UBPrimalSolution, normalize_plan

# Cumulative losses are summed and exponentiated in extended precision, then
# rounded to float64; on platforms without it this is plain float64.
_ACC = np.longdouble


def hedge_weights(cumulative, eta: float) -> np.ndarray:
    """Exponential weights for cumulative losses, shifted by the minimum."""
    c = np.asarray(cumulative, dtype=_ACC)
    w = np.exp(-_ACC(eta) * (c - c.min()))
    return (w / w.sum()).astype(np.float64)


@dataclass
class HedgeState:
    cumulative: np.ndarray
    eta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise InvalidArgumentError(f"learning rate must be positive, got {self.eta}")
        self.cumulative = np.asarray(self.cumulative, dtype=_ACC).copy()

    @classmethod
    def fresh(cls, K: int, eta: float) -> "HedgeState":
        return cls(np.zeros(K, dtype=_ACC), eta)


def hedge_action(state: HedgeState) -> np.ndarray:
    return hedge_weights(state.cumulative, state.eta)


def hedge_update(state: HedgeState, scaled_loss) -> HedgeState:
    loss = np.asarray(scaled_loss, dtype=_ACC)
    if loss.shape != state.cumulative.shape:
        raise InvalidArgumentError("loss dimension does not match the number of actions")
    if np.any(loss < 0):
        raise InvalidArgumentError("Hedge losses must be nonnegative")
    state.cumulative = state.cumulative + loss
    return state


def scaled_hedge_rate(scales, K: int) -> float:
    """Rate sqrt(log K / sum of squared per-round loss ranges)."""
    s = float(np.sum(np.square(np.asarray(scales, dtype=float))))
    if s <= 0:
        raise InvalidArgumentError("all loss scales are zero; no learning rate exists")
    if K < 2:
        raise InvalidArgumentError("need at least two actions")
    return float(np.sqrt(np.log(K) / s))


def run_hedge(losses, eta: float) -> np.ndarray:
    """Actions of full-information Hedge on a T x K loss matrix."""
    L = np.asarray(losses, dtype=float)
    state = HedgeState.fresh(L.shape[1], eta)
    out = np.empty_like(L)
    for t in range(L.shape[0]):
        out[t] = hedge_action(state)
        hedge_update(state, L[t])
    return out


def _gather(t, needed, visible_losses, K):
    rows = np.empty((len(needed), K), dtype=_ACC)
    for i, s in enumerate(needed):
        try:
            rows[i] = visible_losses[s]
        except KeyError:
            raise ContractViolationError(f"loss of round {s} is needed at round {t} but was not supplied") from None
    return rows


@dataclass
class _OrderHedge:
    rounds: tuple
    lam: np.ndarray
    eta: float
    position: dict = field(default_factory=dict)


class DecompositionLearner:
    """Run one Hedge per order of the plan and mix them with the plan's shares.

    Stateless between rounds: the action at ``t`` is recomputed from the
    losses supplied in that call, so it can only depend on rounds in S_t.
    """

    def __init__(self, graph: TemporalFeedbackGraph, plan: UBPrimalSolution, K: int = 2):
        if K < 2:
            raise InvalidArgumentError("need at least two actions")
        if plan.horizon != graph.horizon:
            raise InvalidArgumentError("plan horizon does not match the graph")
        self.graph, self.K = graph, K
        self.plan = normalize_plan(plan)
        self.instances: list[_OrderHedge] = []
        self.by_round: list[list[tuple[int, int]]] = [[] for _ in range(graph.horizon)]
        for order, lam in self.plan.plan:
            lam = np.asarray(lam, dtype=float)
            if not np.any(lam > 0):
                continue
            inst = _OrderHedge(tuple(order), lam, scaled_hedge_rate(lam, K))
            k = len(self.instances)
            self.instances.append(inst)
            for pos, t in enumerate(order):
                inst.position[t] = pos
                if lam[pos] > 0:
                    self.by_round[t].append((k, pos))
        # Order instances per round deterministically so float sums are reproducible.
        for lst in self.by_round:
            lst.sort()

    @property
    def objective(self) -> float:
        return self.plan.objective

    def order_action(self, k: int, pos: int, t: int, visible_losses) -> np.ndarray:
        inst = self.instances[k]
        prefix = inst.rounds[:pos]
        if not prefix:
            return np.full(self.K, 1.0 / self.K)
        rows = _gather(t, prefix, visible_losses, self.K)
        cumulative = inst.lam[:pos].astype(_ACC) @ rows
        return hedge_weights(cumulative, inst.eta)

    def act(self, t: int, visible_losses: Mapping[int, np.ndarray]) -> np.ndarray:
        if not 0 <= t < self.graph.horizon:
            raise InvalidArgumentError(f"round {t} outside the horizon")
        x = np.zeros(self.K, dtype=_ACC)
        for k, pos in self.by_round[t]:
            x += _ACC(self.instances[k].lam[pos]) * self.order_action(k, pos, t, visible_losses)
        x = np.asarray(x, dtype=np.float64)
        return x / x.sum()


class NaiveVisibleHedge:
    """Hedge with a fixed rate on the sum of every visible loss."""

    def __init__(self, graph: TemporalFeedbackGraph, eta: float, K: int = 2):
        if not eta > 0:
            raise InvalidArgumentError(f"learning rate must be positive, got {eta}")
        self.graph, self.eta, self.K = graph, eta, K

    def act(self, t: int, visible_losses: Mapping[int, np.ndarray]) -> np.ndarray:
        return naive_visible_hedge_act(self.graph, self.eta, t, visible_losses, self.K)


def naive_visible_hedge_act(g, eta, t, visible_losses, K=2) -> np.ndarray:
    seen = sorted(g.feedback[t])
    if not seen:
        return np.full(K, 1.0 / K)
    rows = _gather(t, seen, visible_losses, K)
    return hedge_weights(rows.sum(axis=0), eta)


def visible_losses_at(g: TemporalFeedbackGraph, losses: np.ndarray, t: int) -> dict:
    return {s: losses[s] for s in g.feedback[t]}


def play(learner, g: TemporalFeedbackGraph, losses) -> np.ndarray:
    """Run a learner round by round, passing only the losses visible at each round."""
    L = np.asarray(losses, dtype=float)
    if L.shape[0] != g.horizon:
        raise InvalidArgumentError(f"loss sequence has {L.shape[0]} rounds, graph has {g.horizon}")
    if np.any(L < 0) or np.any(L > 1):
        raise InvalidArgumentError("losses must lie in [0, 1]")
    return np.array([learner.act(t, visible_losses_at(g, L, t)) for t in range(g.horizon)])


def compute_regret(trace, losses) -> tuple[float, int]:
    X, L = np.asarray(trace, dtype=float), np.asarray(losses, dtype=float)
    if X.shape != L.shape:
        raise InvalidArgumentError(f"trace shape {X.shape} does not match losses {L.shape}")
    totals = L.sum(axis=0)
    best = int(np.argmin(totals))
    return float(np.sum(X * L) - totals[best]), best


def pseudo_regret(trace, losses, action: int) -> float:
    """Loss of the trace minus that of a fixed comparator action."""
    X, L = np.asarray(trace, dtype=float), np.asarray(losses, dtype=float)
    return float(np.sum(X * L) - L[:, action].sum())


lemma1_rate = scaled_hedge_rate  # interface name
