import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from temporal_feedback.graph import TemporalFeedbackGraph

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@st.composite
def any_graphs(draw, max_T=5):
    """Arbitrary feedback sets, cycles and future references allowed."""
    T = draw(st.integers(1, max_T))
    fb = [draw(st.frozensets(st.sampled_from([s for s in range(T) if s != t]) if T > 1 else st.nothing()))
          for t in range(T)]
    return TemporalFeedbackGraph(T, tuple(fb))


@st.composite
def acyclic_graphs(draw, max_T=7, min_T=1):
    """Acyclic graphs whose hidden time order is a random permutation."""
    T = draw(st.integers(min_T, max_T))
    perm = draw(st.permutations(range(T)))
    fb = [set() for _ in range(T)]
    for i, j in itertools.combinations(range(T), 2):
        if draw(st.booleans()):
            fb[perm[j]].add(perm[i])
    return TemporalFeedbackGraph.from_sets(fb)


@st.composite
def transitive_graphs(draw, max_T=8, min_T=1):
    """Transitive closure of a random forward DAG."""
    T = draw(st.integers(min_T, max_T))
    fb = [set() for _ in range(T)]
    for t in range(T):
        for s in range(t):
            if draw(st.booleans()):
                fb[t].add(s)
                fb[t] |= fb[s]
    return TemporalFeedbackGraph.from_sets(fb)


def brute_force_orders(g):
    """Round sets admitting an order, maximal under inclusion (all subsets, all permutations)."""
    def orderable(sub):
        return any(all(p[u] in g.feedback[p[v]] for v in range(len(p)) for u in range(v))
                   for p in itertools.permutations(sub))
    ok = [frozenset(s) for r in range(1, g.horizon + 1)
          for s in itertools.combinations(range(g.horizon), r) if orderable(s)]
    return {s for s in ok if not any(s < o for o in ok)}


def brute_force_independent_sets(g):
    out = set()
    for r in range(1, g.horizon + 1):
        for s in itertools.combinations(range(g.horizon), r):
            if all(a not in g.feedback[b] and b not in g.feedback[a] for a, b in itertools.combinations(s, 2)):
                out.add(frozenset(s))
    return out


def all_paths(g):
    """Every directed path (as a round tuple) of an acyclic graph, exhaustively."""
    succ = {s: [t for t in range(g.horizon) if s in g.feedback[t]] for s in range(g.horizon)}
    out = []

    def walk(p):
        out.append(tuple(p))
        for t in succ[p[-1]]:
            walk(p + [t])

    for s in range(g.horizon):
        walk([s])
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
