"""Experiment orchestration: matchups, bound reports, and the batched-graph gap."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import graph as G
from .adversaries import (
    brownian_adversary,
    compute_intervals,
    independent_set_adversary,
    intervals_to_ilb,
    scaled_bernoulli_adversary,
    uniform_losses,
)
from .errors import FeedbackGraphError, InvalidArgumentError
from .learners import DecompositionLearner, NaiveVisibleHedge, compute_regret, play, pseudo_regret
from .programs import (
    OPT_TOL,
    ILBSolution,
    UBDualSolution,
    UBPrimalSolution,
    cover_ratio_bound,
    solve_ilb,
    solve_lb,
    solve_ub_dual_enumerative,
    solve_ub_primal_enumerative,
    verify_ilb,
)
from .transitive import greedy_cover_ratio, solve_ub_dual_transitive, solve_ub_primal_transitive

SCHEMA = 1
# Lower-bound constants: LB/100 for the coin adversary, /50 for the Gaussian ones.
LOWER_DIVISOR = {"bernoulli": 100.0, "independent-set": 50.0, "brownian": 50.0}


# -- solving helpers ---------------------------------------------------------------


def _method(g, method):
    if method == "auto":
        return "transitive" if G.is_transitive(g) else "enumerative"
    if method not in ("transitive", "enumerative"):
        raise InvalidArgumentError(f"unknown method {method!r}")
    return method


def solve_dual(g, method="auto", tol=1e-6) -> UBDualSolution:
    if _method(g, method) == "transitive":
        return solve_ub_dual_transitive(g, tol)
    return solve_ub_dual_enumerative(g, tol=tol)


def solve_plan(g, method="auto", tol=1e-6) -> UBPrimalSolution:
    if _method(g, method) == "transitive":
        return solve_ub_primal_transitive(g, tol).primal
    return solve_ub_primal_enumerative(g, tol=tol)


def interval_ilb(g, mu) -> ILBSolution:
    """ILB-feasible weights with objective sum(mu), via the interval reduction."""
    return intervals_to_ilb(g, compute_intervals(g, mu), mu)


def brownian_certificate(g, mu) -> dict:
    a = compute_intervals(g, mu)
    sol = intervals_to_ilb(g, a)
    rep = verify_ilb(g, sol)
    ok = rep.feasible and a.disjoint_on_edges(g) and abs(sol.objective - float(np.sum(mu))) <= 1e-6
    return {
        "intervals": a.to_dict(),
        "max_endpoint": float(a.p.max(initial=0.0)),
        "ilb_objective": sol.objective,
        "sum_mu": float(np.sum(mu)),
        "verdict": "PASS" if ok else "FAIL",
    }


# -- configuration -----------------------------------------------------------------

_GENERATORS = {
    "batched": lambda p: G.make_batched([int(b) for b in p["batch_sizes"]]),
    "delayed": lambda p: G.make_delayed(int(p["T"]), p["delay"]),
    "bounded-recall": lambda p: G.make_bounded_recall(int(p["T"]), int(p["M"])),
    "full-information": lambda p: G.make_full_information(int(p["T"])),
    "chain": lambda p: G.make_full_information(int(p["T"])),
    "empty": lambda p: G.make_empty(int(p["T"])),
    "random-acyclic": lambda p: G.random_acyclic_graph(int(p["T"]), float(p["density"]), np.random.default_rng(int(p.get("seed", 0)))),
    "random-transitive": lambda p: G.random_transitive_graph(int(p["T"]), float(p["density"]), np.random.default_rng(int(p.get("seed", 0)))),
}

LEARNERS = ("decomposition", "naive")
ADVERSARIES = ("bernoulli", "independent-set", "brownian", "uniform", "file")


def build_graph(spec: dict, base_dir: Path = Path(".")) -> G.TemporalFeedbackGraph:
    if "file" in spec:
        path = base_dir / spec["file"]
        if not path.exists():
            raise InvalidArgumentError(f"graph file {path} does not exist")
        return G.parse(path.read_text())
    name = spec.get("generator")
    if name not in _GENERATORS:
        raise InvalidArgumentError(f"unknown graph generator {name!r}; choose from {sorted(_GENERATORS)}")
    try:
        return _GENERATORS[name](spec)
    except KeyError as e:
        raise InvalidArgumentError(f"generator {name!r} needs parameter {e.args[0]!r}") from None


@dataclass
class ExperimentConfig:
    graph: dict
    learner: dict = field(default_factory=lambda: {"name": "decomposition"})
    adversary: dict = field(default_factory=lambda: {"name": "bernoulli"})
    trials: int = 10_000
    seed: int = 0
    K: int = 2
    csv_path: str | None = None
    report_path: str | None = None
    base_dir: Path = Path(".")

    def __post_init__(self):
        if not isinstance(self.trials, int) or self.trials < 1:
            raise InvalidArgumentError("trials must be an integer >= 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise InvalidArgumentError("seed must be a nonnegative integer")
        if self.learner.get("name") not in LEARNERS:
            raise InvalidArgumentError(f"learner name must be one of {LEARNERS}")
        adv = self.adversary.get("name")
        if adv not in ADVERSARIES:
            raise InvalidArgumentError(f"adversary name must be one of {ADVERSARIES}")
        if adv in ("bernoulli", "independent-set", "brownian") and self.K != 2:
            raise InvalidArgumentError(f"the {adv} adversary is defined for K=2 only")
        if adv == "file" and not (self.base_dir / self.adversary.get("path", "")).is_file():
            raise InvalidArgumentError(f"loss file {self.adversary.get('path')!r} does not exist")
        if "file" in self.graph and not (self.base_dir / self.graph["file"]).is_file():
            raise InvalidArgumentError(f"graph file {self.graph['file']!r} does not exist")

    @classmethod
    def from_mapping(cls, obj: dict, base_dir: Path = Path(".")) -> "ExperimentConfig":
        known = {"graph", "learner", "adversary", "trials", "seed", "K", "csv_path", "report_path"}
        extra = set(obj) - known
        if extra:
            raise InvalidArgumentError(f"unknown config keys {sorted(extra)}")
        if "graph" not in obj:
            raise InvalidArgumentError("config needs a [graph] section")
        return cls(**obj, base_dir=base_dir)

    def to_dict(self) -> dict:
        return {"graph": self.graph, "learner": self.learner, "adversary": self.adversary,
                "trials": self.trials, "seed": self.seed, "K": self.K}


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise InvalidArgumentError(f"config file {path} does not exist")
    text = path.read_text()
    try:
        obj = json.loads(text) if path.suffix == ".json" else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise InvalidArgumentError(f"cannot parse {path}: {e}") from None
    return ExperimentConfig.from_mapping(obj, path.parent)


def _load_loss_file(path: Path, T: int, K: int) -> np.ndarray:
    if path.suffix == ".json":
        L = np.asarray(json.loads(path.read_text())["losses"], dtype=float)
    else:
        L = np.loadtxt(path, delimiter=",", ndmin=2)
    if L.shape != (T, K):
        raise InvalidArgumentError(f"loss file has shape {L.shape}, expected {(T, K)}")
    return L


# -- regret report -----------------------------------------------------------------


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
    return float(x.mean()), se


@dataclass
class RegretReport:
    regrets: list
    pseudo_regrets: list | None
    references: dict
    K: int
    learner: str
    adversary: str
    config: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return _mean_se(self.regrets)[0]

    @property
    def stderr(self) -> float:
        return _mean_se(self.regrets)[1]

    @property
    def ci(self) -> tuple[float, float]:
        m, se = _mean_se(self.regrets)
        return m - 1.96 * se, m + 1.96 * se

    @property
    def pseudo_mean(self):
        return None if self.pseudo_regrets is None else _mean_se(self.pseudo_regrets)[0]

    @property
    def pseudo_stderr(self):
        return None if self.pseudo_regrets is None else _mean_se(self.pseudo_regrets)[1]

    def verdicts(self) -> dict:
        """Bound checks, recomputed from the stored per-trial numbers each call."""
        out = {}
        plan = self.references.get("plan_objective")
        if self.learner == "decomposition" and plan is not None:
            m, se = _mean_se(self.regrets)
            out["upper"] = m <= 2 * math.sqrt(math.log(self.K)) * plan + 3 * se
        ref_key = {"bernoulli": "LB", "independent-set": "ILB", "brownian": "UB"}.get(self.adversary)
        if ref_key and self.pseudo_regrets is not None and self.references.get(ref_key) is not None:
            m, se = _mean_se(self.pseudo_regrets)
            out["lower"] = m >= self.references[ref_key] / LOWER_DIVISOR[self.adversary] - 3 * se
        return out

    @property
    def passed(self) -> bool:
        return all(self.verdicts().values())

    def to_dict(self) -> dict:
        lo, hi = self.ci
        d = {
            "schema": SCHEMA,
            "config": self.config,
            "learner": self.learner,
            "adversary": self.adversary,
            "trials": len(self.regrets),
            "regrets": [float(r) for r in self.regrets],
            "mean": self.mean,
            "stderr": self.stderr,
            "ci95": [lo, hi],
            "references": self.references,
            "verdicts": {k: "PASS" if v else "FAIL" for k, v in self.verdicts().items()},
        }
        if self.pseudo_regrets is not None:
            d["pseudo_regrets"] = [float(r) for r in self.pseudo_regrets]
            d["pseudo_mean"] = self.pseudo_mean
            d["pseudo_stderr"] = self.pseudo_stderr
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RegretReport":
        if d.get("schema") != SCHEMA:
            raise InvalidArgumentError(f"unsupported report schema {d.get('schema')!r}")
        return cls(d["regrets"], d.get("pseudo_regrets"), d["references"], d["config"].get("K", 2),
                   d["learner"], d["adversary"], d["config"])


# -- matchups ----------------------------------------------------------------------


class _Matchup:
    """Everything a trial needs that does not depend on the seed."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.g = g = build_graph(cfg.graph, cfg.base_dir)
        T, K = g.horizon, cfg.K
        lp, ap = cfg.learner, cfg.adversary
        self.references: dict = {}
        self.plan = None
        if lp["name"] == "decomposition":
            self.plan = solve_plan(g, lp.get("method", "auto"))
            self.references["plan_objective"] = self.plan.objective
            self.learner = lambda: DecompositionLearner(g, self.plan, K)
        else:
            eta = float(lp.get("eta", math.sqrt(math.log(K) / T)))
            self.learner = lambda: NaiveVisibleHedge(g, eta, K)
        name = ap["name"]
        gamma = ap.get("gamma")
        if name == "bernoulli":
            eps = np.asarray(ap["eps"], dtype=float) if "eps" in ap else solve_lb(g).eps
            self.references["LB"] = float(eps.sum())
            gm = 0.1 if gamma is None else float(gamma)
            self.draw = lambda s: scaled_bernoulli_adversary(eps, gm, s)
        elif name == "independent-set":
            if G.is_transitive(g):
                mu = solve_dual(g).mu
                weights = interval_ilb(g, mu)
            else:
                weights = solve_ilb(g, G.enumerate_independent_sets(g))
            self.references["ILB"] = weights.objective
            gm = 0.25 if gamma is None else float(gamma)
            self.draw = lambda s: independent_set_adversary(weights, gm, s)
        elif name == "brownian":
            mu = solve_dual(g, "transitive").mu
            a = compute_intervals(g, mu)
            self.references["UB"] = float(mu.sum())
            gm = 0.25 if gamma is None else float(gamma)
            self.draw = lambda s: brownian_adversary(g, mu, gm, s, assignment=a)
        elif name == "uniform":
            self.draw = lambda s: uniform_losses(T, K, s)
        else:
            fixed = _load_loss_file(cfg.base_dir / ap["path"], T, K)
            self.draw = lambda s: fixed
        if self.plan is not None and "UB" not in self.references:
            self.references["UB"] = self.plan.objective

    def trial(self, i: int):
        seed = self.cfg.seed ^ i
        d = self.draw(seed)
        losses, opt = (d.losses, d.optimal_action) if hasattr(d, "losses") else (d, None)
        trace = play(self.learner(), self.g, losses)
        reg, _ = compute_regret(trace, losses)
        pr = None if opt is None else pseudo_regret(trace, losses, opt)
        return trace, losses, reg, pr


def _csv_rows(i, trace, losses):
    cum = np.cumsum(np.sum(trace * losses, axis=1))
    best = np.min(np.cumsum(losses, axis=0), axis=1)
    for t in range(len(trace)):
        yield [i, t, *map(repr, trace[t].tolist()), *map(repr, losses[t].tolist()), repr(float(cum[t] - best[t]))]


def run_matchup(config: ExperimentConfig) -> RegretReport:
    m = _Matchup(config)
    K = config.K
    regrets, pseudo = [], []
    fh = writer = None
    if config.csv_path:
        fh = open(config.base_dir / config.csv_path if not Path(config.csv_path).is_absolute() else config.csv_path,
                  "w", newline="")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["trial", "t", *(f"x_{k}" for k in range(K)), *(f"loss_{k}" for k in range(K)), "cumulative_regret"])
    try:
        for i in range(config.trials):
            try:
                trace, losses, reg, pr = m.trial(i)
            except FeedbackGraphError as e:
                e.args = (f"trial {i}: {e.args[0] if e.args else e}",) + e.args[1:]
                raise
            regrets.append(reg)
            pseudo.append(pr)
            if writer:
                writer.writerows(_csv_rows(i, trace, losses))
    finally:
        if fh:
            fh.close()
    has_pseudo = all(p is not None for p in pseudo)
    report = RegretReport(regrets, pseudo if has_pseudo else None, m.references, K,
                          config.learner["name"], config.adversary["name"], config.to_dict())
    if config.report_path:
        path = Path(config.report_path)
        path = path if path.is_absolute() else config.base_dir / path
        path.write_text(json.dumps(report.to_dict(), indent=2))
    return report


# -- bound comparison --------------------------------------------------------------


@dataclass
class BoundsReport:
    horizon: int
    transitive: bool
    values: dict
    errors: dict

    def verdicts(self) -> dict:
        v, out = self.values, {}
        ub = v.get("ub_dual", v.get("ub_primal"))
        if "ub_dual" in v and "ub_primal" in v:
            out["duality"] = abs(v["ub_primal"] - v["ub_dual"]) <= OPT_TOL * max(1.0, ub)
        if ub is not None and "lb" in v and "R" in v:
            out["ub_le_sqrtR_lb"] = ub <= math.sqrt(v["R"]) * v["lb"] + OPT_TOL
        return out

    def flags(self) -> dict:
        """Informational only; never a failure."""
        v = self.values
        ub = v.get("ub_dual", v.get("ub_primal"))
        return {"lb_exceeds_ub": bool(ub is not None and "lb" in v and v["lb"] > ub + OPT_TOL)}

    @property
    def passed(self) -> bool:
        return all(self.verdicts().values())

    def to_dict(self):
        v = self.values
        ub = v.get("ub_dual", v.get("ub_primal"))
        ratio = ub / v["lb"] if ub is not None and v.get("lb") else None
        return {
            "schema": SCHEMA,
            "horizon": self.horizon,
            "transitive": self.transitive,
            **v,
            "ratio_ub_lb": ratio,
            "verdicts": {k: "PASS" if b else "FAIL" for k, b in self.verdicts().items()},
            "flags": self.flags(),
            "errors": self.errors,
        }


def compare_bounds(g: G.TemporalFeedbackGraph, method: str = "auto", ilb_cap: int = 2000,
                   order_limit: int = G.DEFAULT_ORDER_LIMIT) -> BoundsReport:
    """UB (both forms), LB, ILB and the greedy cover number R, each solved independently."""
    method = _method(g, method)
    values, errors = {}, {}

    def attempt(name, fn):
        try:
            values[name] = fn()
        except FeedbackGraphError as e:
            errors[name] = f"{type(e).__name__}: {e}"

    orders = None
    if method == "transitive":
        cert = None

        def _primal():
            nonlocal cert
            cert = solve_ub_primal_transitive(g)
            return cert.primal.objective

        attempt("ub_dual", lambda: solve_ub_dual_transitive(g).objective)
        attempt("ub_primal", _primal)
        attempt("R", lambda: greedy_cover_ratio(g))
        if cert is not None:
            attempt("ilb_interval", lambda: interval_ilb(g, cert.dual.mu).objective)
    else:
        try:
            orders = G.enumerate_maximal_orders(g, order_limit)
        except FeedbackGraphError as e:
            for k in ("ub_dual", "ub_primal", "R"):
                errors[k] = f"{type(e).__name__}: {e}"
        if orders is not None:
            attempt("ub_dual", lambda: solve_ub_dual_enumerative(g, orders).objective)
            attempt("ub_primal", lambda: solve_ub_primal_enumerative(g, orders).objective)
            attempt("R", lambda: cover_ratio_bound(g, orders))
    attempt("lb", lambda: solve_lb(g).objective)

    def _ilb():
        fam = G.enumerate_independent_sets(g, limit=ilb_cap)
        return solve_ilb(g, fam).objective

    attempt("ilb", _ilb)
    return BoundsReport(g.horizon, G.is_transitive(g), values, errors)


# -- batched-graph gap ---------------------------------------------------------------


@dataclass
class GapReport:
    T: int
    ub: float
    lb: float

    @property
    def ub_floor(self) -> float:
        return self.T**0.75

    @property
    def lb_ceiling(self) -> float:
        return 2 * math.sqrt(self.T)

    @property
    def ratio(self) -> float:
        return self.ub / self.lb

    def verdicts(self) -> dict:
        return {"ub_ge_T^(3/4)": self.ub >= self.ub_floor - 1e-3, "lb_le_2sqrtT": self.lb <= self.lb_ceiling + 1e-3}

    @property
    def passed(self) -> bool:
        return all(self.verdicts().values())

    def to_dict(self):
        return {
            "schema": SCHEMA, "T": self.T, "ub": self.ub, "lb": self.lb, "ratio": self.ratio,
            "ub_floor": self.ub_floor, "lb_ceiling": self.lb_ceiling, "quarter_power_over_2": self.T**0.25 / 2,
            "verdicts": {k: "PASS" if v else "FAIL" for k, v in self.verdicts().items()},
        }


def square_batched_gap(T: int) -> GapReport:
    """Batched graph with sqrt(T) batches of sqrt(T) rounds: UB grows like T^(3/4), LB like sqrt(T)."""
    r = math.isqrt(T) if T >= 1 else 0
    if T < 1 or r * r != T:
        raise InvalidArgumentError(f"T={T} is not a positive perfect square")
    if T > 256:
        raise InvalidArgumentError(f"T={T} exceeds the supported size 256")
    g = G.make_batched([r] * r)
    ub = solve_ub_dual_transitive(g).objective
    lb = solve_lb(g).objective
    return GapReport(T, ub, lb)


reproduce_appendix_a = square_batched_gap  # interface name
