"""Anomaly scoring on test windows and detection metrics."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import torch
from scipy.stats import rankdata

from .config import TrainConfig
from .graph import DynamicGraph, NodeLabels, dropout_edges, extract_window, normalize_adjacency
from .model import StripeModel
from .training import window_pairs


ATTRIBUTIONS = ("window-end", "last", "offset")


class MetricError(ValueError):
    pass


@dataclass
class ScoreTable:
    node: np.ndarray
    timestamp: np.ndarray
    rec_part: np.ndarray
    com_part: np.ndarray

    @property
    def score(self) -> np.ndarray:
        return self.rec_part + self.com_part

    def __len__(self) -> int:
        return len(self.node)

    def at(self, t: int) -> np.ndarray:
        """Scores of all nodes at timestamp ``t``, indexed by node."""
        sel = self.timestamp == t
        out = np.full(int(self.node.max()) + 1 if len(self) else 0, np.nan)
        out[self.node[sel]] = self.score[sel]
        return out

    def labels_for(self, labels: NodeLabels) -> np.ndarray:
        y = np.zeros(len(self), dtype=np.int64)
        for t in np.unique(self.timestamp):
            sel = self.timestamp == t
            y[sel] = labels.get(int(t))[self.node[sel]]
        return y

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node", "timestamp", "score", "rec_part", "com_part"])
            for row in zip(self.node, self.timestamp, self.score, self.rec_part, self.com_part):
                w.writerow([int(row[0]), int(row[1]), repr(float(row[2])), repr(float(row[3])), repr(float(row[4]))])

    @classmethod
    def read_csv(cls, path) -> "ScoreTable":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0].astype(np.int64), data[:, 1].astype(np.int64), data[:, 3], data[:, 4])


def scoring_window_ends(graph: DynamicGraph, test_timestamps, tau: int) -> list:
    """Ends of every window that overlaps a test timestamp."""
    first = min(test_timestamps)
    return [t for t in range(max(first, tau - 1), graph.T)]


@torch.no_grad()
def score_nodes(model: StripeModel, graph: DynamicGraph, test_timestamps, tcfg: TrainConfig,
                rounds: int = 1, edge_dropout: float = 0.0, seed: int = 0,
                attribution: str = "last") -> ScoreTable:
    """Per-(node, test timestamp) anomaly scores with frozen memory.

    With the default ``attribution="last"`` a node's score at ``t`` is its
    reconstruction plus compactness error at the final offset of the window
    ending at ``t``; no later snapshot is used. ``"window-end"`` sums the
    errors over every offset of that window. ``"offset"`` takes the offset
    holding ``t`` in every window covering ``t`` and averages. Rounds after
    the first drop each edge of the encoder input with probability
    ``edge_dropout``; without dropout the forward pass is deterministic and
    only one round is run.
    """
    if attribution not in ATTRIBUTIONS:
        raise ValueError(f"attribution must be one of {ATTRIBUTIONS}, got {attribution!r}")
    if not test_timestamps:
        raise ValueError("no test timestamps to score")
    tau = model.cfg.tau
    test = set(int(t) for t in test_timestamps)
    n = graph.num_nodes
    rec_sum = {t: np.zeros(n) for t in test}
    com_sum = {t: np.zeros(n) for t in test}
    counts = {t: 0 for t in test}
    if attribution in ("window-end", "last"):
        ends = [t for t in sorted(test) if t >= tau - 1]
    else:
        ends = scoring_window_ends(graph, test, tau)
    windows = [extract_window(graph, t, tau) for t in ends]
    effective_rounds = rounds if edge_dropout > 0 else 1
    pair_rng = np.random.default_rng([seed, 2])
    for r in range(effective_rounds):
        drop_rng = np.random.default_rng([seed, 3, r])
        for window in windows:
            adjs = None
            if r > 0:
                adjs = tuple(normalize_adjacency(dropout_edges(s, edge_dropout, drop_rng))
                             for s in window.snapshots)
            res = model(window, train=False, tcfg=tcfg, pairs=window_pairs(window, tcfg, pair_rng), adjs=adjs)
            if attribution == "window-end":
                t = window.end_t
                rec_sum[t] += res.loss.per_node_rec
                com_sum[t] += res.loss.per_node_com
                counts[t] += 1
                continue
            if attribution == "last":
                t = window.end_t
                rec_sum[t] += res.loss.offset_rec[-1]
                com_sum[t] += res.loss.offset_com[-1]
                counts[t] += 1
                continue
            for off, t in enumerate(window.timestamps):
                if t in test:
                    rec_sum[t] += res.loss.offset_rec[off]
                    com_sum[t] += res.loss.offset_com[off]
                    counts[t] += 1
    nodes, ts, rec, com = [], [], [], []
    for t in sorted(test):
        if counts[t] == 0:
            continue
        nodes.append(np.arange(n))
        ts.append(np.full(n, t))
        rec.append(rec_sum[t] / counts[t])
        com.append(com_sum[t] / counts[t])
    if not nodes:
        raise ValueError(f"no test timestamp is covered by a window of size tau={tau}")
    return ScoreTable(np.concatenate(nodes), np.concatenate(ts), np.concatenate(rec), np.concatenate(com))


# --- metrics --------------------------------------------------------------------------


def _check_binary(labels) -> np.ndarray:
    y = np.asarray(labels).astype(np.int64)
    if not set(np.unique(y)) <= {0, 1}:
        raise MetricError("labels must be 0/1")
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == len(y):
        raise MetricError("metric undefined: labels contain a single class")
    return y


def compute_auc(scores, labels) -> float:
    """ROC-AUC through the Mann-Whitney rank sum; tied pairs count one half."""
    y = _check_binary(labels)
    s = np.asarray(scores, dtype=np.float64)
    ranks = rankdata(s)  # average ranks, multiples of 0.5
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def confusion(pred, y) -> dict:
    pred = np.asarray(pred, dtype=bool)
    y = np.asarray(y, dtype=bool)
    return {
        "tp": int(np.sum(pred & y)),
        "fp": int(np.sum(pred & ~y)),
        "fn": int(np.sum(~pred & y)),
        "tn": int(np.sum(~pred & ~y)),
    }


def _f1(tp, fp, fn) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def metrics_from_counts(c: dict) -> tuple:
    precision = c["tp"] / (c["tp"] + c["fp"]) if c["tp"] + c["fp"] else 0.0
    f1_pos = _f1(c["tp"], c["fp"], c["fn"])
    f1_neg = _f1(c["tn"], c["fn"], c["fp"])
    return precision, (f1_pos + f1_neg) / 2.0


def top_k_predictions(scores, k: int) -> np.ndarray:
    """Flag the ``k`` highest scores; among equal scores the lower index wins."""
    s = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-s, kind="stable")
    pred = np.zeros(len(s), dtype=bool)
    pred[order[:k]] = True
    return pred


def compute_threshold_metrics(scores, labels, rule: str = "top-k") -> dict:
    """Precision of the abnormal class and macro-F1 after binarizing ``scores``.

    ``top-k`` flags as many nodes as there are true anomalies; ``best-f1``
    sweeps every distinct score as a threshold and keeps the best macro-F1.
    """
    y = _check_binary(labels)
    s = np.asarray(scores, dtype=np.float64)
    if rule == "top-k":
        pred = top_k_predictions(s, int(y.sum()))
        threshold = float(s[pred].min())
    elif rule == "best-f1":
        best = None
        for thr in np.unique(s):
            cand = s >= thr
            _, f1 = metrics_from_counts(confusion(cand, y))
            if best is None or f1 > best[0]:
                best = (f1, thr, cand)
        _, threshold, pred = best
        threshold = float(threshold)
    else:
        raise MetricError(f"unknown threshold rule {rule!r}")
    counts = confusion(pred, y)
    precision, macro_f1 = metrics_from_counts(counts)
    return {"precision": precision, "macro_f1": macro_f1, "threshold": threshold,
            "rule": rule, "counts": counts}


@dataclass
class EvalReport:
    auc: float
    precision: float
    macro_f1: float
    threshold_rule: str
    counts: dict
    best_f1: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "precision": self.precision,
            "macro_f1": self.macro_f1,
            "threshold_rule": self.threshold_rule,
            "counts": self.counts,
            "best_f1": self.best_f1,
            "timings": self.timings,
            "config": self.config,
        }


def evaluate(table: ScoreTable, labels: NodeLabels, rule: str = "top-k", timings=None,
             config=None) -> EvalReport:
    y = table.labels_for(labels)
    s = table.score
    primary = compute_threshold_metrics(s, y, rule)
    other = compute_threshold_metrics(s, y, "best-f1" if rule == "top-k" else "top-k")
    return EvalReport(
        auc=compute_auc(s, y),
        precision=primary["precision"],
        macro_f1=primary["macro_f1"],
        threshold_rule=rule,
        counts=primary["counts"],
        best_f1={k: other[k] for k in ("precision", "macro_f1", "threshold", "rule")},
        timings=dict(timings or {}),
        config=dict(config or {}),
    )
