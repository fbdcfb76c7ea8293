"""Per-epoch training and inference time versus node count.

    python scripts/scaling_benchmark.py --sizes 1000 2000 4000 8000 --out bench.csv
"""

import argparse

import torch

from stripe_gad.bench import run_bench, summarize, write_bench_csv
from stripe_gad.config import RunConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 2000, 4000, 8000])
    ap.add_argument("--degree", type=int, default=10)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--out", default="bench.csv")
    args = ap.parse_args()
    torch.set_num_threads(1)
    rows = run_bench(RunConfig(bench_sizes=args.sizes, bench_degree=args.degree), args.repeats)
    write_bench_csv(rows, args.out)
    for r in rows:
        print(f"n={r.n:6d} train {r.train_s:.3f}s infer {r.infer_s:.3f}s")
    for key, fit in summarize(rows).items():
        print(key, "slope", f"{fit['slope']:.3e}", "ratios", [round(x, 2) for x in fit["ratios"]])


if __name__ == "__main__":
    main()
