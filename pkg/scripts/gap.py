"""UB/LB gap on square batched graphs, against the T^(1/4)/2 growth."""

import argparse
import math

from temporal_feedback.harness import square_batched_gap


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[4, 16, 36, 64, 100, 144, 196, 256])
    ap.add_argument("--csv", help="write T,ub,lb,ratio,quarter_power rows here")
    a = ap.parse_args()
    rows = ["T,ub,lb,ratio,quarter_power"]
    for T in a.sizes:
        r = square_batched_gap(T)
        q = T ** 0.25 / 2
        rows.append(f"{T},{r.ub!r},{r.lb!r},{r.ratio!r},{q!r}")
        print(f"T={T:4d}  UB={r.ub:9.4f}  LB={r.lb:9.4f}  UB/LB={r.ratio:.4f}  T^(1/4)/2={q:.4f}  "
              f"UB>=T^(3/4) {r.ub >= T ** 0.75 - 1e-3}  LB<=2sqrtT {r.lb <= 2 * math.sqrt(T) + 1e-3}")
    if a.csv:
        with open(a.csv, "w") as fh:
            fh.write("\n".join(rows) + "\n")


if __name__ == "__main__":
    main()
