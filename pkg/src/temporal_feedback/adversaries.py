"""Two-action lower-bound adversaries and the interval to independent-set reduction.

Randomness uses named streams: every random object (the hidden sign, each
round's coin, each set's Gaussian, each Brownian increment) gets its own
uniform derived from ``(seed, label)``.  Adding rounds or sets therefore never
shifts the draws of the others.
"""

from __future__ import annotations

import csv
import hashlib
import io
import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import InfeasibleError, InvalidArgumentError, ContractViolationError
from .graph import TemporalFeedbackGraph, is_independent, topological_order
from .programs import ILBSolution, LBSolution
from .transitive import require_transitive

_TAG_SIGN, _TAG_COIN, _TAG_SET, _TAG_INCREMENT, _TAG_UNIFORM = 1, 2, 3, 4, 5


def stream_uniform(seed: int, *label: int) -> float:
    """A uniform in (0, 1) determined by ``seed`` and an integer label.

    BLAKE2b of the packed words, top 53 bits, centred in its cell.
    """
    if not 0 <= seed < 2**64:
        raise InvalidArgumentError("seeds must be integers in [0, 2**64)")
    digest = hashlib.blake2b(struct.pack(f"<{len(label) + 1}Q", seed, *label), digest_size=8).digest()
    return ((int.from_bytes(digest, "little") >> 11) + 0.5) / 2.0**53


def hidden_sign(seed: int) -> int:
    return 1 if stream_uniform(seed, _TAG_SIGN) < 0.5 else -1


def _float_words(x: float) -> tuple[int, int]:
    b = int(np.float64(x).view(np.uint64))
    return b & 0xFFFFFFFF, b >> 32


@dataclass
class AdversaryDraw:
    hidden_bit: int
    losses: np.ndarray
    optimal_action: int
    # P(X_t = 1 | hidden bit): the per-round bias actually realized
    p_one: np.ndarray | None = None

    def __post_init__(self):
        L = self.losses
        if L.ndim != 2 or L.shape[1] != 2 or not np.all(L[:, 1] == 0.5) or not np.all(np.isin(L[:, 0], (0.0, 1.0))):
            raise ContractViolationError("draw losses must be (X_t, 1/2) with X_t in {0, 1}")

    @property
    def bits(self) -> np.ndarray:
        return self.losses[:, 0].astype(int)

    def to_csv(self, reveal: bool = False) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["round", "x"] + (["hidden_bit"] if reveal else []))
        for t, x in enumerate(self.bits):
            w.writerow([t, int(x)] + ([self.hidden_bit] if reveal else []))
        return buf.getvalue()


def _draw(B, bits, p_one=None):
    losses = np.column_stack([np.asarray(bits, dtype=float), np.full(len(bits), 0.5)])
    return AdversaryDraw(B, losses, 0 if B == -1 else 1, p_one)


def scaled_bernoulli_adversary(eps, gamma: float = 0.1, seed: int = 0) -> AdversaryDraw:
    """X_t ~ Bernoulli(1/2 + B * gamma * eps_t), independent given the sign B."""
    e = np.asarray(eps.eps if isinstance(eps, LBSolution) else eps, dtype=float)
    if np.any(e < 0) or np.any(gamma * e > 0.5) or gamma < 0:
        raise InvalidArgumentError("bias out of range: need 0 <= gamma * eps_t <= 1/2")
    B = hidden_sign(seed)
    p = 0.5 + B * gamma * e
    bits = [1 if stream_uniform(seed, _TAG_COIN, t) < p[t] else 0 for t in range(len(e))]
    return _draw(B, bits, p)


def _set_label(I):
    return (_TAG_SET, len(I), *sorted(I))


def independent_set_adversary(weights: ILBSolution, gamma: float = 0.25, seed: int = 0) -> AdversaryDraw:
    """Y_I ~ N(gamma * B * v_I, v_I) per set; X_t = 1{sum of Y_I over sets holding t >= 0}."""
    if gamma < 0:
        raise InvalidArgumentError("gamma must be nonnegative")
    T = weights.horizon
    B = hidden_sign(seed)
    Z = np.zeros(T)
    for I in sorted(weights.weights, key=lambda s: (len(s), sorted(s))):
        v = float(weights.weights[I])
        if v < 0:
            raise InvalidArgumentError("set weights must be nonnegative")
        if v == 0:
            continue
        y = gamma * B * v + np.sqrt(v) * ndtri(stream_uniform(seed, *_set_label(I)))
        for t in sorted(I):
            Z[t] += y
    var = weights.variance()
    p_one = ndtr(gamma * B * np.sqrt(var))
    return _draw(B, (Z >= 0).astype(int), p_one)


@dataclass
class IntervalAssignment:
    q: np.ndarray
    p: np.ndarray

    @property
    def lengths(self) -> np.ndarray:
        return self.p - self.q

    def disjoint_on_edges(self, g: TemporalFeedbackGraph) -> bool:
        """Every visible pair occupies intervals with disjoint interiors."""
        return all(self.p[s] <= self.q[t] or self.p[t] <= self.q[s] for s, t in g.edges())

    def pieces(self) -> list:
        """Consecutive sub-intervals (lo, hi, covering rounds) of the endpoint partition."""
        if getattr(self, "_pieces", None) is None:
            ends = np.unique(np.concatenate([self.q, self.p]))
            self._pieces = [
                (float(lo), float(hi), frozenset(np.flatnonzero((self.q <= lo) & (self.p >= hi)).tolist()))
                for lo, hi in zip(ends[:-1], ends[1:])
            ]
        return self._pieces

    def to_dict(self):
        return {"q": self.q.tolist(), "p": self.p.tolist()}


def compute_intervals(g: TemporalFeedbackGraph, mu, feas_tol: float = 1e-6) -> IntervalAssignment:
    """q_t = max of p_s over visible s (0 if none); p_t = q_t + mu_t^2."""
    require_transitive(g)
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (g.horizon,) or np.any(mu < 0):
        raise InvalidArgumentError("mu must be a nonnegative vector of length T")
    q, p = np.zeros(g.horizon), np.zeros(g.horizon)
    for t in topological_order(g):
        q[t] = max((p[s] for s in g.feedback[t]), default=0.0)
        p[t] = q[t] + mu[t] ** 2
        if p[t] > 1 + feas_tol:
            raise InfeasibleError(f"infeasible mu: interval of round {t} ends at {p[t]:.9g} > 1")
    return IntervalAssignment(q, p)


def intervals_to_ilb(g: TemporalFeedbackGraph, assignment: IntervalAssignment, mu=None) -> ILBSolution:
    """Weight each covering set by the length of the sub-intervals it covers."""
    weights: dict = {}
    for lo, hi, label in assignment.pieces():
        if not label:
            continue
        if not is_independent(g, label):
            raise ContractViolationError(f"rounds {sorted(label)} share a sub-interval but see each other")
        weights[label] = weights.get(label, 0.0) + (hi - lo)
    sol = ILBSolution(weights, g.horizon)
    if mu is not None and abs(sol.objective - float(np.sum(mu))) > 1e-6:
        raise ContractViolationError(f"reduction objective {sol.objective} differs from sum of mu {np.sum(mu)}")
    return sol


def brownian_adversary(g: TemporalFeedbackGraph, mu, gamma: float = 0.25, seed: int = 0,
                       assignment: IntervalAssignment | None = None) -> AdversaryDraw:
    """X_t = 1{increment of a drifted Brownian motion over [q_t, p_t] >= 0}.

    Only the increments over the endpoint partition are sampled; they are
    exactly Gaussian, N(gamma B d, d) for a piece of length d.
    """
    if gamma < 0:
        raise InvalidArgumentError("gamma must be nonnegative")
    a = assignment if assignment is not None else compute_intervals(g, mu)
    B = hidden_sign(seed)
    Z = np.zeros(g.horizon)
    for lo, hi, label in a.pieces():
        if not label:
            continue
        d = hi - lo
        inc = gamma * B * d + np.sqrt(d) * ndtri(stream_uniform(seed, _TAG_INCREMENT, *_float_words(lo), *_float_words(hi)))
        for t in sorted(label):
            Z[t] += inc
    p_one = ndtr(gamma * B * np.sqrt(a.lengths))
    return _draw(B, (Z >= 0).astype(int), p_one)


def uniform_losses(T: int, K: int, seed: int) -> np.ndarray:
    """Independent uniform losses from the named streams (no hidden sign)."""
    return np.array([[stream_uniform(seed, _TAG_UNIFORM, t, i) for i in range(K)] for t in range(T)])


def bernoulli_kl(p: float, q: float) -> float:
    if not (0 < p < 1 and 0 < q < 1):
        raise InvalidArgumentError("Bernoulli parameters must lie strictly inside (0, 1)")
    return float(p * np.log(p / q) + (1 - p) * np.log((1 - p) / (1 - q)))


def gaussian_positive_bias(c: float) -> float:
    """P(Y >= 0) for Y ~ N(c, 1)."""
    if not np.isfinite(c) or c < 0:
        raise InvalidArgumentError("c must be a finite nonnegative number")
    return float(ndtr(c))
