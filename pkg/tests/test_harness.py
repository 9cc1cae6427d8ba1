import json
import math

import numpy as np
import pytest

from temporal_feedback.errors import InvalidArgumentError
from temporal_feedback.graph import make_batched, make_bounded_recall, make_delayed, make_full_information, serialize
from temporal_feedback.harness import (
    ExperimentConfig,
    GapReport,
    RegretReport,
    brownian_certificate,
    compare_bounds,
    load_config,
    run_matchup,
    solve_dual,
    square_batched_gap,
)

CHAIN16 = {"generator": "chain", "T": 16}


def cfg(**kw):
    base = dict(graph=CHAIN16, trials=50, seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    def test_validation(self, tmp_path):
        with pytest.raises(InvalidArgumentError):
            cfg(trials=0)
        with pytest.raises(InvalidArgumentError):
            cfg(learner={"name": "oracle"})
        with pytest.raises(InvalidArgumentError):
            cfg(adversary={"name": "bernoulli"}, K=3)
        with pytest.raises(InvalidArgumentError):
            cfg(adversary={"name": "file", "path": "nope.json"})
        with pytest.raises(InvalidArgumentError):
            ExperimentConfig(graph={"file": "nope.json"})

    def test_bad_generator(self):
        with pytest.raises(InvalidArgumentError):
            run_matchup(cfg(graph={"generator": "chain"}))
        with pytest.raises(InvalidArgumentError):
            run_matchup(cfg(graph={"generator": "ring", "T": 3}))

    def test_toml_and_json_agree(self, tmp_path):
        (tmp_path / "c.toml").write_text('trials = 5\nseed = 1\n[graph]\ngenerator = "batched"\nbatch_sizes = [2, 2]\n')
        (tmp_path / "c.json").write_text(json.dumps({"trials": 5, "seed": 1, "graph": {"generator": "batched", "batch_sizes": [2, 2]}}))
        a, b = load_config(tmp_path / "c.toml"), load_config(tmp_path / "c.json")
        assert a.to_dict() == b.to_dict()
        assert run_matchup(a).regrets == run_matchup(b).regrets

    def test_missing_and_malformed(self, tmp_path):
        with pytest.raises(InvalidArgumentError):
            load_config(tmp_path / "missing.toml")
        (tmp_path / "bad.toml").write_text("trials = = 3")
        with pytest.raises(InvalidArgumentError):
            load_config(tmp_path / "bad.toml")
        (tmp_path / "extra.json").write_text(json.dumps({"graph": CHAIN16, "colour": "red"}))
        with pytest.raises(InvalidArgumentError):
            load_config(tmp_path / "extra.json")


class TestMatchup:
    def test_csv_is_byte_identical(self, tmp_path):
        for name in ("a.csv", "b.csv"):
            run_matchup(cfg(csv_path=str(tmp_path / name), adversary={"name": "brownian"}))
        a, b = (tmp_path / "a.csv").read_bytes(), (tmp_path / "b.csv").read_bytes()
        assert a == b
        header = a.decode().splitlines()[0]
        assert header == "trial,t,x_0,x_1,loss_0,loss_1,cumulative_regret"
        assert len(a.decode().splitlines()) == 1 + 50 * 16

    def test_csv_regret_column_matches_report(self, tmp_path):
        rep = run_matchup(cfg(csv_path=str(tmp_path / "t.csv")))
        rows = [r.split(",") for r in (tmp_path / "t.csv").read_text().splitlines()[1:]]
        last = [float(r[-1]) for r in rows if r[1] == "15"]
        assert np.allclose(last, rep.regrets, atol=1e-12)

    def test_report_arithmetic(self):
        rep = run_matchup(cfg(trials=200))
        x = np.asarray(rep.regrets)
        se = x.std(ddof=1) / math.sqrt(len(x))
        assert abs(rep.mean - x.mean()) <= 1e-12 and abs(rep.stderr - se) <= 1e-12
        lo, hi = rep.ci
        assert abs((hi - lo) / 2 - 1.96 * rep.stderr) <= 1e-12

    def test_verdicts_follow_stored_numbers(self):
        rep = run_matchup(cfg())
        assert rep.verdicts()["upper"]
        rep.regrets = [1e6] * len(rep.regrets)
        assert not rep.verdicts()["upper"]

    def test_report_round_trip(self, tmp_path):
        rep = run_matchup(cfg(report_path=str(tmp_path / "r.json")))
        d = json.loads((tmp_path / "r.json").read_text())
        assert d["schema"] == 1
        back = RegretReport.from_dict(d)
        assert back.mean == rep.mean and back.verdicts() == rep.verdicts()

    def test_lower_bound_on_chain(self):
        rep = run_matchup(cfg(trials=2000, learner={"name": "naive"}))
        assert rep.references["LB"] == pytest.approx(1 + math.sqrt(15), abs=1e-5)
        assert rep.pseudo_mean >= rep.references["LB"] / 100 - 3 * rep.pseudo_stderr

    def test_empty_graph_pays_the_bias(self):
        rep = run_matchup(ExperimentConfig(graph={"generator": "empty", "T": 8}, trials=4000, seed=1))
        # uniform play against (X_t, 1/2): expected per-round gap to the better action is gamma * eps / 2
        expected = 8 * 0.1 * 1.0 / 2
        assert abs(rep.pseudo_mean - expected) <= 4 * rep.pseudo_stderr

    def test_fixed_loss_replay(self, tmp_path):
        L = np.random.default_rng(0).random((16, 2))
        (tmp_path / "l.json").write_text(json.dumps({"losses": L.tolist()}))
        rep = run_matchup(cfg(trials=3, adversary={"name": "file", "path": "l.json"}, base_dir=tmp_path))
        assert len(set(rep.regrets)) == 1 and rep.pseudo_regrets is None

    def test_errors_carry_trial_index(self, tmp_path):
        (tmp_path / "l.csv").write_text("\n".join("2.0,0.0" for _ in range(16)))
        with pytest.raises(InvalidArgumentError, match="trial 0"):
            run_matchup(cfg(adversary={"name": "file", "path": "l.csv"}, base_dir=tmp_path))

    def test_graph_file(self, tmp_path):
        (tmp_path / "g.json").write_text(serialize(make_bounded_recall(6, 2)))
        rep = run_matchup(ExperimentConfig(graph={"file": "g.json"}, trials=5, adversary={"name": "independent-set"}, base_dir=tmp_path))
        assert rep.references["ILB"] > 0

    def test_uniform_losses_have_no_pseudo_regret(self):
        rep = run_matchup(cfg(adversary={"name": "uniform"}, K=3))
        assert rep.pseudo_regrets is None and "upper" in rep.verdicts()

    @pytest.mark.parametrize("graph", [CHAIN16, {"generator": "batched", "batch_sizes": [4] * 4}, {"generator": "delayed", "T": 16, "delay": 2}])
    def test_sandwich(self, graph):
        for adv in ("bernoulli", "independent-set", "brownian"):
            rep = run_matchup(ExperimentConfig(graph=graph, adversary={"name": adv}, trials=500, seed=2))
            assert rep.verdicts()["upper"]
            if adv == "bernoulli":
                assert rep.verdicts()["lower"]


class TestBounds:
    def test_bounded_recall(self):
        rep = compare_bounds(make_bounded_recall(4, 2))
        v = rep.values
        assert v["ub_dual"] == pytest.approx(math.sqrt(6), abs=1e-5)
        assert v["lb"] == pytest.approx(1 + math.sqrt(5), abs=1e-5)
        assert v["R"] == 1 and rep.verdicts()["ub_le_sqrtR_lb"]
        assert rep.passed

    def test_batched_eight(self):
        rep = compare_bounds(make_batched([8] * 8))
        d = rep.to_dict()
        assert d["ub_dual"] == pytest.approx(64 / math.sqrt(8), abs=1e-3)
        assert d["lb"] == pytest.approx(8 + math.sqrt(56), abs=1e-3)
        assert d["ratio_ub_lb"] == pytest.approx(1.4614, abs=1e-3)
        assert d["ilb_interval"] == pytest.approx(d["ub_dual"], abs=1e-6)
        assert "ilb" in d["errors"]  # 2040 independent sets exceed the default cap
        assert rep.passed

    def test_chain_flags_lb_above_ub(self):
        rep = compare_bounds(make_full_information(4))
        assert rep.flags()["lb_exceeds_ub"] and rep.passed

    def test_partial_report_on_cap(self):
        g = make_bounded_recall(10, 2).with_edge(0, 9)  # not transitive, few orders
        rep = compare_bounds(g, order_limit=2)
        assert "ub_dual" in rep.errors and "lb" in rep.values


class TestGap:
    def test_sixteen(self):
        rep = square_batched_gap(16)
        assert rep.ub == pytest.approx(8.0, abs=1e-6) and rep.lb == pytest.approx(4 + math.sqrt(12), abs=1e-5)
        assert rep.passed

    def test_sixty_four(self):
        rep = square_batched_gap(64)
        assert rep.ub == pytest.approx(22.627417, abs=1e-5) and rep.lb == pytest.approx(15.483315, abs=1e-5)
        assert rep.ratio >= 1.46 - 1e-2

    def test_four_reports(self):
        rep = square_batched_gap(4)
        assert rep.ub == pytest.approx(2 * math.sqrt(2), abs=1e-6)
        assert rep.to_dict()["T"] == 4

    def test_size_errors(self):
        for T in (0, 15, 289):
            with pytest.raises(InvalidArgumentError):
                square_batched_gap(T)

    def test_verdicts_recomputed(self):
        assert not GapReport(16, 1.0, 100.0).passed


@pytest.mark.parametrize("g", [make_full_information(16), make_batched([4] * 4), make_delayed(16, 3), make_batched([1, 3, 2, 5])])
def test_brownian_certificate(g):
    mu = solve_dual(g).mu
    cert = brownian_certificate(g, mu)
    assert cert["verdict"] == "PASS"
    assert cert["ilb_objective"] == pytest.approx(mu.sum(), abs=1e-6)
