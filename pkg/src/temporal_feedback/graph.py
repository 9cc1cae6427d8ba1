"""Temporal feedback graphs and the structural queries the solvers need.

Rounds are 0-indexed: round ``t`` here is round ``t + 1`` in 1-indexed
write-ups.  ``S_t`` (``g.feedback[t]``) is the set of rounds whose losses are
visible when acting at round ``t``.  An edge ``s -> t`` exists iff ``s in S_t``.
"""

from __future__ import annotations

import heapq
import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

from .errors import EnumerationLimitError, GraphFormatError, InvalidArgumentError

Order = tuple  # tuple[int, ...]: rounds in play order
IndependentSet = frozenset  # frozenset[int]

DEFAULT_ORDER_LIMIT = 100_000
DEFAULT_INDEPENDENT_SET_LIMIT = 1_000_000


@dataclass(frozen=True)
class TemporalFeedbackGraph:
    horizon: int
    feedback: tuple  # tuple[frozenset[int], ...], entry t is S_t

    def __post_init__(self):
        if not isinstance(self.horizon, (int, np.integer)) or self.horizon < 1:
            raise GraphFormatError(f"must be a positive integer, got {self.horizon!r}", "horizon")
        fb = tuple(frozenset(int(s) for s in S) for S in self.feedback)
        if len(fb) != self.horizon:
            raise GraphFormatError(f"expected {self.horizon} entries, got {len(fb)}", "feedback")
        for t, S in enumerate(fb):
            if t in S:
                raise GraphFormatError(f"round {t} cannot see itself", f"feedback[{t}]")
            bad = [s for s in S if not 0 <= s < self.horizon]
            if bad:
                raise GraphFormatError(f"index {bad[0]} outside [0, {self.horizon})", f"feedback[{t}]")
        object.__setattr__(self, "horizon", int(self.horizon))
        object.__setattr__(self, "feedback", fb)

    @classmethod
    def from_sets(cls, sets: Iterable[Iterable[int]]) -> "TemporalFeedbackGraph":
        fb = tuple(frozenset(S) for S in sets)
        return cls(len(fb), fb)

    def __len__(self):
        return self.horizon

    def sees(self, t: int, s: int) -> bool:
        """True iff the loss of round ``s`` is visible at round ``t``."""
        return s in self.feedback[t]

    def adjacent(self, s: int, t: int) -> bool:
        return s in self.feedback[t] or t in self.feedback[s]

    def edges(self):
        return [(s, t) for t in range(self.horizon) for s in sorted(self.feedback[t])]

    def with_edge(self, s: int, t: int) -> "TemporalFeedbackGraph":
        fb = list(self.feedback)
        fb[t] = fb[t] | {s}
        return TemporalFeedbackGraph(self.horizon, tuple(fb))

    def relabel(self, perm: Sequence[int]) -> "TemporalFeedbackGraph":
        """Graph with round ``t`` renamed ``perm[t]``."""
        fb = [frozenset()] * self.horizon
        for t, S in enumerate(self.feedback):
            fb[perm[t]] = frozenset(perm[s] for s in S)
        return TemporalFeedbackGraph(self.horizon, tuple(fb))


def is_order(g: TemporalFeedbackGraph, rounds: Sequence[int]) -> bool:
    if len(set(rounds)) != len(rounds):
        return False
    return all(rounds[u] in g.feedback[rounds[v]] for v in range(len(rounds)) for u in range(v))


def is_independent(g: TemporalFeedbackGraph, rounds: Iterable[int]) -> bool:
    rs = list(rounds)
    return all(not g.adjacent(a, b) for a, b in itertools.combinations(rs, 2))


# -- generators ---------------------------------------------------------------


def make_batched(batch_sizes: Sequence[int]) -> TemporalFeedbackGraph:
    """Each round sees every round of the strictly earlier batches."""
    sizes = [int(b) for b in batch_sizes]
    if not sizes:
        raise InvalidArgumentError("batch list is empty")
    if any(b < 1 for b in sizes):
        raise InvalidArgumentError(f"batch sizes must be positive, got {sizes}")
    fb, start = [], 0
    for b in sizes:
        fb.extend([frozenset(range(start))] * b)
        start += b
    return TemporalFeedbackGraph(start, tuple(fb))


def make_delayed(T: int, delay) -> TemporalFeedbackGraph:
    """Loss of round ``s`` becomes visible from round ``s + delay_s + 1`` on.

    ``delay`` is a nonnegative int or a per-round sequence of them.
    """
    if T < 1:
        raise InvalidArgumentError(f"T must be positive, got {T}")
    delays = [int(delay)] * T if np.isscalar(delay) else [int(d) for d in delay]
    if len(delays) != T:
        raise InvalidArgumentError(f"need {T} per-round delays, got {len(delays)}")
    if any(d < 0 for d in delays):
        raise InvalidArgumentError("delays must be nonnegative")
    return TemporalFeedbackGraph(
        T, tuple(frozenset(s for s in range(T) if s + delays[s] < t) for t in range(T))
    )


def make_bounded_recall(T: int, M: int) -> TemporalFeedbackGraph:
    if T < 1 or M < 1:
        raise InvalidArgumentError(f"need T >= 1 and M >= 1, got T={T}, M={M}")
    return TemporalFeedbackGraph(T, tuple(frozenset(range(max(0, t - M), t)) for t in range(T)))


def make_full_information(T: int) -> TemporalFeedbackGraph:
    if T < 1:
        raise InvalidArgumentError(f"T must be positive, got {T}")
    return TemporalFeedbackGraph(T, tuple(frozenset(range(t)) for t in range(T)))


def make_empty(T: int) -> TemporalFeedbackGraph:
    if T < 1:
        raise InvalidArgumentError(f"T must be positive, got {T}")
    return TemporalFeedbackGraph(T, (frozenset(),) * T)


def random_acyclic_graph(T: int, density: float, rng: np.random.Generator) -> TemporalFeedbackGraph:
    """Random DAG whose hidden time order is a random permutation of the rounds.

    Rounds may therefore see "future" indices; there are no cycles.
    """
    perm = rng.permutation(T)
    fb = [set() for _ in range(T)]
    for i in range(T):
        for j in range(i + 1, T):
            if rng.random() < density:
                fb[perm[j]].add(int(perm[i]))
    return TemporalFeedbackGraph.from_sets(fb)


def random_transitive_graph(T: int, density: float, rng: np.random.Generator) -> TemporalFeedbackGraph:
    """Transitive closure of a random forward DAG on rounds ``0..T-1``."""
    fb = [set() for _ in range(T)]
    for t in range(T):
        for s in range(t):
            if rng.random() < density:
                fb[t].add(s)
                fb[t] |= fb[s]
    return TemporalFeedbackGraph.from_sets(fb)


# -- structure ----------------------------------------------------------------


def topological_order(g: TemporalFeedbackGraph) -> list[int] | None:
    """Rounds sorted so every ``s in S_t`` precedes ``t``; None if cyclic.

    Ties are broken by ascending round index.
    """
    indeg = [len(S) for S in g.feedback]
    succ = [[] for _ in range(g.horizon)]
    for t, S in enumerate(g.feedback):
        for s in S:
            succ[s].append(t)
    heap = [t for t in range(g.horizon) if indeg[t] == 0]
    heapq.heapify(heap)
    out = []
    while heap:
        s = heapq.heappop(heap)
        out.append(s)
        for t in succ[s]:
            indeg[t] -= 1
            if indeg[t] == 0:
                heapq.heappush(heap, t)
    return out if len(out) == g.horizon else None


def is_acyclic(g: TemporalFeedbackGraph) -> bool:
    return topological_order(g) is not None


def is_transitive(g: TemporalFeedbackGraph) -> bool:
    if not is_acyclic(g):
        return False
    return all(g.feedback[s] <= S for S in g.feedback for s in S)


def undirected_adjacency(g: TemporalFeedbackGraph) -> list[set[int]]:
    adj = [set(S) for S in g.feedback]
    for t, S in enumerate(g.feedback):
        for s in S:
            adj[s].add(t)
    return adj


def sequence_rounds(g: TemporalFeedbackGraph, rounds: Iterable[int]) -> Order | None:
    """Arrange a round set into an order, or None if no arrangement exists.

    Pairs visible in only one direction are forced; mutually visible pairs
    go in ascending index order.
    """
    rs = sorted(rounds)
    if any(not g.adjacent(a, b) for a, b in itertools.combinations(rs, 2)):
        return None
    indeg = {t: 0 for t in rs}
    succ = {t: [] for t in rs}
    for a, b in itertools.permutations(rs, 2):
        if a in g.feedback[b] and b not in g.feedback[a]:
            succ[a].append(b)
            indeg[b] += 1
    heap = [t for t in rs if indeg[t] == 0]
    heapq.heapify(heap)
    out = []
    while heap:
        a = heapq.heappop(heap)
        out.append(a)
        for b in succ[a]:
            indeg[b] -= 1
            if indeg[b] == 0:
                heapq.heappush(heap, b)
    return tuple(out) if len(out) == len(rs) else None


def enumerate_maximal_orders(g: TemporalFeedbackGraph, limit: int = DEFAULT_ORDER_LIMIT) -> list[Order]:
    """Every maximal order of ``g`` exactly once, sorted lexicographically.

    Acyclic graphs: maximal orders are the maximal cliques of the undirected
    visibility graph.  Otherwise a Bron-Kerbosch style search runs over the
    hereditary family of orderable round sets.
    """
    topo = topological_order(g)
    found = []
    if topo is not None:
        rank = {t: i for i, t in enumerate(topo)}
        ug = nx.Graph()
        ug.add_nodes_from(range(g.horizon))
        ug.add_edges_from((s, t) for t, S in enumerate(g.feedback) for s in S)
        for clique in nx.find_cliques(ug):
            found.append(tuple(sorted(clique, key=rank.__getitem__)))
            if len(found) > limit:
                raise EnumerationLimitError("maximal orders", limit)
    else:
        found = _maximal_orders_general(g, limit)
    return sorted(found, key=lambda o: (sorted(o), o))


def _maximal_orders_general(g, limit):
    found = []

    def ok(rounds):
        return sequence_rounds(g, rounds) is not None

    def extend(R, P, X):
        if not P and not X:
            found.append(sequence_rounds(g, R))
            if len(found) > limit:
                raise EnumerationLimitError("maximal orders", limit)
            return
        P = list(P)
        while P:
            p = P.pop(0)
            Rp = R + [p]
            extend(Rp, [q for q in P if ok(Rp + [q])], [x for x in X if ok(Rp + [x])])
            X = X + [p]

    extend([], list(range(g.horizon)), [])
    return found


def enumerate_independent_sets(
    g: TemporalFeedbackGraph, limit: int = DEFAULT_INDEPENDENT_SET_LIMIT
) -> list[IndependentSet]:
    """All nonempty independent sets of the undirected visibility graph."""
    adj = undirected_adjacency(g)
    out = []

    def grow(current, candidates):
        for i, v in enumerate(candidates):
            nxt = current | {v}
            out.append(frozenset(nxt))
            if len(out) > limit:
                raise EnumerationLimitError("independent sets", limit)
            grow(nxt, [u for u in candidates[i + 1:] if u not in adj[v]])

    grow(frozenset(), list(range(g.horizon)))
    return out


# -- serialization ------------------------------------------------------------


def to_dict(g: TemporalFeedbackGraph) -> dict:
    return {"horizon": g.horizon, "feedback": [sorted(S) for S in g.feedback]}


def serialize(g: TemporalFeedbackGraph) -> str:
    return json.dumps(to_dict(g), separators=(",", ":"))


def from_dict(obj) -> TemporalFeedbackGraph:
    if not isinstance(obj, dict):
        raise GraphFormatError("top level must be a JSON object", "<root>")
    if "horizon" not in obj:
        raise GraphFormatError("missing", "horizon")
    if "feedback" not in obj:
        raise GraphFormatError("missing", "feedback")
    T, fb = obj["horizon"], obj["feedback"]
    if isinstance(T, bool) or not isinstance(T, int):
        raise GraphFormatError(f"must be an integer, got {T!r}", "horizon")
    if not isinstance(fb, list):
        raise GraphFormatError("must be an array of arrays", "feedback")
    sets = []
    for t, S in enumerate(fb):
        if not isinstance(S, list) or any(isinstance(s, bool) or not isinstance(s, int) for s in S):
            raise GraphFormatError("must be an array of integers", f"feedback[{t}]")
        if len(set(S)) != len(S):
            raise GraphFormatError("duplicate round index", f"feedback[{t}]")
        sets.append(frozenset(S))
    return TemporalFeedbackGraph(T, tuple(sets))


def parse(text: str) -> TemporalFeedbackGraph:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"invalid JSON ({exc.msg})", "<root>") from exc
    return from_dict(obj)
