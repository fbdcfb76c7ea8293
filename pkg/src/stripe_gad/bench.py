"""Wall-clock scaling of one training epoch and one scoring pass versus N."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .graph import window_ends
from .model import StripeModel
from .scoring import score_nodes
from .synthetic import SyntheticConfig, make_dynamic_graph
from .training import train


@dataclass
class BenchRow:
    n: int
    train_s: float
    infer_s: float


def _best_of(fn, repeats: int) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_one(n: int, rcfg: RunConfig, repeats: int = 5) -> BenchRow:
    """Time one epoch over the training windows and one scoring pass at size ``n``.

    Structure decoding is forced into sampled mode so both passes stay
    linear in the edge count; the dense decoder is quadratic by design.
    """
    graph = make_dynamic_graph(SyntheticConfig(
        num_nodes=n, num_snapshots=rcfg.tau + 1, avg_degree=rcfg.bench_degree, seed=rcfg.seed))
    mcfg = rcfg.model_config(graph.D)
    tcfg = rcfg.replace(epochs=1, dense_cap=0).train_config()
    train_ts = list(range(rcfg.tau))
    test_ts = [rcfg.tau]
    assert window_ends(train_ts, rcfg.tau)

    def fit():
        train(graph, mcfg, tcfg, train_ts, model=StripeModel(mcfg, seed=rcfg.seed))

    model = StripeModel(mcfg, seed=rcfg.seed)

    def infer():
        score_nodes(model, graph, test_ts, tcfg, rounds=1, seed=rcfg.seed,
                    attribution=rcfg.score_attribution)

    return BenchRow(n, _best_of(fit, repeats), _best_of(infer, repeats))


def run_bench(rcfg: RunConfig, repeats: int = 5) -> list:
    return [bench_one(int(n), rcfg, repeats) for n in rcfg.bench_sizes]


def linear_fit(ns, ts) -> tuple:
    """Least-squares ``t = a * n + b``; returns ``(a, b)``."""
    a, b = np.polyfit(np.asarray(ns, dtype=float), np.asarray(ts, dtype=float), 1)
    return float(a), float(b)


def doubling_ratios(rows, key: str) -> list:
    vals = [getattr(r, key) for r in rows]
    return [vals[i + 1] / vals[i] for i in range(len(vals) - 1)]


def summarize(rows) -> dict:
    ns = [r.n for r in rows]
    out = {}
    for key in ("train_s", "infer_s"):
        ts = [getattr(r, key) for r in rows]
        a, b = linear_fit(ns, ts) if len(rows) >= 2 else (float("nan"), float("nan"))
        out[key] = {"slope": a, "intercept": b, "ratios": doubling_ratios(rows, key)}
    return out


def write_bench_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "train_s", "infer_s"])
        for r in rows:
            w.writerow([r.n, repr(r.train_s), repr(r.infer_s)])
