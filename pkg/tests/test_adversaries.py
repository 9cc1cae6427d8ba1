import numpy as np
import pytest
from hypothesis import given, settings
from scipy.stats import chi2_contingency, norm

from conftest import transitive_graphs
from temporal_feedback.adversaries import (
    AdversaryDraw,
    IntervalAssignment,
    bernoulli_kl,
    brownian_adversary,
    compute_intervals,
    gaussian_positive_bias,
    hidden_sign,
    independent_set_adversary,
    intervals_to_ilb,
    scaled_bernoulli_adversary,
    stream_uniform,
)
from temporal_feedback.errors import ContractViolationError, InfeasibleError, InvalidArgumentError, NotTransitiveError
from temporal_feedback.graph import make_batched, make_bounded_recall, make_empty, make_full_information
from temporal_feedback.programs import ILBSolution, solve_lb, verify_ilb
from temporal_feedback.transitive import solve_ub_dual_transitive

R2, R3 = np.sqrt(2), np.sqrt(3)


def positive_seeds(n, start=0):
    """The first n seeds whose hidden sign is +1."""
    out, s = [], start
    while len(out) < n:
        if hidden_sign(s) == 1:
            out.append(s)
        s += 1
    return out


class TestStreams:
    def test_uniform_range_and_determinism(self):
        u = [stream_uniform(3, 2, t) for t in range(1000)]
        assert all(0 < x < 1 for x in u)
        assert u == [stream_uniform(3, 2, t) for t in range(1000)]
        assert stream_uniform(3, 2, 0) != stream_uniform(4, 2, 0)

    def test_sign_is_balanced(self):
        signs = [hidden_sign(s) for s in range(20_000)]
        assert abs(np.mean(signs)) < 4 / np.sqrt(20_000)

    def test_negative_seed(self):
        with pytest.raises(InvalidArgumentError):
            stream_uniform(-1)


class TestBernoulli:
    def test_biased_mean(self):
        bits = [scaled_bernoulli_adversary(np.ones(1), 0.1, s).bits[0] for s in positive_seeds(100_000)]
        assert np.mean(bits) == pytest.approx(0.6, abs=0.005)

    def test_zero_bias_is_fair(self):
        draws = [scaled_bernoulli_adversary(np.zeros(4), 0.1, s) for s in range(20_000)]
        plus = np.mean([d.bits.mean() for d in draws if d.hidden_bit == 1])
        minus = np.mean([d.bits.mean() for d in draws if d.hidden_bit == -1])
        assert plus == pytest.approx(0.5, abs=0.01) and minus == pytest.approx(0.5, abs=0.01)

    def test_same_seed_same_draw(self):
        a = scaled_bernoulli_adversary(np.ones(5), 0.1, 42)
        b = scaled_bernoulli_adversary(np.ones(5), 0.1, 42)
        assert np.array_equal(a.losses, b.losses) and a.hidden_bit == b.hidden_bit

    def test_adding_rounds_keeps_earlier_draws(self):
        a = scaled_bernoulli_adversary(np.ones(3), 0.1, 9)
        b = scaled_bernoulli_adversary(np.ones(8), 0.1, 9)
        assert np.array_equal(a.bits, b.bits[:3])

    def test_draw_shape(self):
        d = scaled_bernoulli_adversary(np.ones(6), 0.1, 1)
        assert np.all(d.losses[:, 1] == 0.5) and set(d.losses[:, 0]) <= {0.0, 1.0}
        assert d.optimal_action == (1 if d.hidden_bit == 1 else 0)

    def test_bias_out_of_range(self):
        with pytest.raises(InvalidArgumentError):
            scaled_bernoulli_adversary(np.ones(2), 0.6, 0)
        with pytest.raises(InvalidArgumentError):
            scaled_bernoulli_adversary(np.array([-0.1]), 0.1, 0)

    def test_per_round_bias_matches(self):
        eps = solve_lb(make_full_information(16)).eps
        seeds = positive_seeds(20_000)
        X = np.array([scaled_bernoulli_adversary(eps, 0.1, s).bits for s in seeds])
        measured = X.mean(axis=0) - 0.5
        se = 0.5 / np.sqrt(len(seeds))
        assert np.all(np.abs(measured - 0.1 * eps) <= 4 * se)

    def test_csv_withholds_sign(self):
        d = scaled_bernoulli_adversary(np.ones(3), 0.1, 5)
        hidden = d.to_csv()
        assert hidden.splitlines()[0] == "round,x" and "hidden" not in hidden
        shown = d.to_csv(reveal=True).splitlines()
        assert shown[0] == "round,x,hidden_bit" and shown[1].endswith(str(d.hidden_bit))

    def test_malformed_draw(self):
        with pytest.raises(ContractViolationError):
            AdversaryDraw(1, np.array([[0.5, 0.5]]), 1)


class TestIndependentSet:
    def test_zero_weights_tie_to_one(self):
        d = independent_set_adversary(ILBSolution({}, 4), 0.25, 3)
        assert np.all(d.bits == 1)

    def test_single_set_bias(self):
        sol = ILBSolution({frozenset({0}): 1.0}, 1)
        bits = [independent_set_adversary(sol, 0.25, s).bits[0] for s in positive_seeds(100_000)]
        assert norm.cdf(0.25) == pytest.approx(0.598706, abs=1e-6)
        assert np.mean(bits) == pytest.approx(norm.cdf(0.25), abs=0.005)

    def test_bias_lower_bound(self):
        g = make_batched([2, 2, 2])
        mu = solve_ub_dual_transitive(g).mu
        sol = intervals_to_ilb(g, compute_intervals(g, mu), mu)
        seeds = positive_seeds(20_000)
        X = np.array([independent_set_adversary(sol, 0.25, s).bits for s in seeds])
        bound = 0.25 * np.sqrt(sol.variance()) / (2 * np.pi)
        assert np.all(X.mean(axis=0) - 0.5 >= bound - 0.01)

    def test_shared_set_correlates_rounds(self):
        sol = ILBSolution({frozenset({0, 1}): 1.0}, 2)
        for s in range(200):
            b = independent_set_adversary(sol, 0.25, s).bits
            assert b[0] == b[1]

    def test_deterministic(self):
        sol = ILBSolution({frozenset({0}): 0.5, frozenset({1}): 0.5}, 2)
        a, b = (independent_set_adversary(sol, 0.25, 11) for _ in range(2))
        assert np.array_equal(a.losses, b.losses)


class TestIntervals:
    def test_chain(self):
        a = compute_intervals(make_full_information(3), np.full(3, 1 / R3))
        assert np.allclose(a.q, [0, 1 / 3, 2 / 3]) and np.allclose(a.p, [1 / 3, 2 / 3, 1])

    def test_empty(self):
        a = compute_intervals(make_empty(2), np.ones(2))
        assert np.array_equal(a.q, [0, 0]) and np.array_equal(a.p, [1, 1])

    def test_batched(self):
        a = compute_intervals(make_batched([2, 2]), np.full(4, 1 / R2))
        assert np.allclose(a.q, [0, 0, 0.5, 0.5]) and np.allclose(a.p, [0.5, 0.5, 1, 1])

    def test_infeasible_mu(self):
        with pytest.raises(InfeasibleError):
            compute_intervals(make_full_information(3), np.ones(3))

    def test_needs_transitive(self):
        with pytest.raises(NotTransitiveError):
            compute_intervals(make_bounded_recall(4, 2), np.full(4, 0.5))

    def test_reduction_chain(self):
        g, mu = make_full_information(3), np.full(3, 1 / R3)
        sol = intervals_to_ilb(g, compute_intervals(g, mu), mu)
        assert set(sol.weights) == {frozenset({t}) for t in range(3)}
        assert all(v == pytest.approx(1 / 3) for v in sol.weights.values())
        assert sol.objective == pytest.approx(R3)

    def test_reduction_empty(self):
        g, mu = make_empty(2), np.ones(2)
        sol = intervals_to_ilb(g, compute_intervals(g, mu), mu)
        assert sol.weights == {frozenset({0, 1}): 1.0} and sol.objective == 2.0

    def test_reduction_batched(self):
        g, mu = make_batched([2, 2]), np.full(4, 1 / R2)
        sol = intervals_to_ilb(g, compute_intervals(g, mu), mu)
        assert sol.weights.keys() == {frozenset({0, 1}), frozenset({2, 3})}
        assert sol.objective == pytest.approx(2 * R2)

    def test_overlap_on_edge_is_rejected(self):
        g = make_full_information(2)
        bad = IntervalAssignment(np.array([0.0, 0.0]), np.array([0.5, 0.5]))
        assert not bad.disjoint_on_edges(g)
        with pytest.raises(ContractViolationError):
            intervals_to_ilb(g, bad)

    @settings(max_examples=30)
    @given(transitive_graphs(max_T=9))
    def test_reduction_properties(self, g):
        mu = solve_ub_dual_transitive(g).mu
        a = compute_intervals(g, mu)
        assert np.all(a.p <= 1 + 1e-9)
        assert a.disjoint_on_edges(g)
        sol = intervals_to_ilb(g, a)
        assert verify_ilb(g, sol).feasible
        assert sol.objective == pytest.approx(mu.sum(), abs=1e-6)


class TestBrownian:
    def test_chain_rounds_independent(self):
        g, mu = make_full_information(3), np.full(3, 1 / R3)
        a = compute_intervals(g, mu)
        X = np.array([brownian_adversary(g, mu, 0.25, s, a).bits for s in positive_seeds(100_000)])
        for s, t in [(0, 1), (1, 2), (0, 2)]:
            table = np.array([[np.sum((X[:, s] == i) & (X[:, t] == j)) for j in (0, 1)] for i in (0, 1)])
            assert chi2_contingency(table)[1] > 1e-3

    def test_empty_rounds_coincide(self):
        g = make_empty(2)
        for s in range(300):
            b = brownian_adversary(g, np.ones(2), 0.25, s).bits
            assert b[0] == b[1]

    def test_zero_length_interval(self):
        g = make_full_information(2)
        for s in range(100):
            assert brownian_adversary(g, np.array([1.0, 0.0]), 0.25, s).bits[1] == 1

    def test_marginal_bias(self):
        g, mu = make_full_information(4), np.full(4, 0.5)
        X = np.array([brownian_adversary(g, mu, 0.25, s).bits for s in positive_seeds(40_000)])
        se = 0.5 / np.sqrt(len(X))
        assert np.all(np.abs(X.mean(axis=0) - norm.cdf(0.25 * 0.5)) <= 4 * se)

    def test_deterministic(self):
        g = make_batched([2, 3])
        mu = solve_ub_dual_transitive(g).mu
        assert np.array_equal(brownian_adversary(g, mu, seed=5).losses, brownian_adversary(g, mu, seed=5).losses)


class TestHelpers:
    @pytest.mark.parametrize("delta", [0.01, 0.05, 0.1, 0.15, 0.2, 0.25])
    def test_kl_bound(self, delta):
        assert bernoulli_kl(0.5 + delta, 0.5 - delta) <= 12 * delta**2

    def test_kl_exact(self):
        assert bernoulli_kl(0.3, 0.3) == 0.0
        assert bernoulli_kl(0.6, 0.4) == pytest.approx(0.2 * np.log(1.5))

    def test_bias_at_zero(self):
        assert gaussian_positive_bias(0.0) == 0.5

    @pytest.mark.parametrize("c", np.linspace(0.01, 1.0, 25))
    def test_bias_lower_bound(self, c):
        assert gaussian_positive_bias(c) >= 0.5 + c / (2 * np.pi)

    def test_domain_errors(self):
        for p, q in [(0.0, 0.5), (0.5, 1.0), (1.2, 0.5)]:
            with pytest.raises(InvalidArgumentError):
                bernoulli_kl(p, q)
        with pytest.raises(InvalidArgumentError):
            gaussian_positive_bias(-0.1)
