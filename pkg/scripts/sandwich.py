"""Empirical regret sandwich on the canonical transitive graphs.

For each graph, runs the decomposition learner against every adversary and
prints mean regret next to the upper reference 2*sqrt(log 2)*UB and, for the
Bernoulli adversary, the lower reference LB/100.
"""

import argparse
import json

from temporal_feedback.harness import ExperimentConfig, run_matchup

GRAPHS = {
    "chain16": {"generator": "chain", "T": 16},
    "batched4x4": {"generator": "batched", "batch_sizes": [4] * 4},
    "delayed16-2": {"generator": "delayed", "T": 16, "delay": 2},
    "batched8x8": {"generator": "batched", "batch_sizes": [8] * 8},
    "delayed64-4": {"generator": "delayed", "T": 64, "delay": 4},
}
ADVERSARIES = ["bernoulli", "independent-set", "brownian", "uniform"]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="write all reports here")
    a = ap.parse_args()
    out, failed = {}, False
    print(f"{'graph':<13}{'adversary':<17}{'mean':>9}{'pseudo':>9}{'upper':>9}{'lower':>9}  verdicts")
    for gname, spec in GRAPHS.items():
        for adv in ADVERSARIES:
            rep = run_matchup(ExperimentConfig(graph=spec, adversary={"name": adv}, trials=a.trials, seed=a.seed))
            ref = rep.references
            upper = 2 * (0.6931471805599453 ** 0.5) * ref["UB"]
            lower = ref.get("LB", float("nan")) / 100 if adv == "bernoulli" else float("nan")
            pseudo = rep.pseudo_mean if rep.pseudo_regrets is not None else float("nan")
            v = rep.verdicts()
            failed |= not all(v.values())
            print(f"{gname:<13}{adv:<17}{rep.mean:9.3f}{pseudo:9.3f}{upper:9.3f}{lower:9.3f}  {v}")
            out[f"{gname}/{adv}"] = rep.to_dict()
    if a.json:
        with open(a.json, "w") as fh:
            json.dump(out, fh, indent=2)
    raise SystemExit(1 if failed else 0)


if __name__ == "__main__":
    main()
