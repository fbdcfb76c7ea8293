"""Dynamic graph container, on-disk format, temporal split and windowing.

A dataset directory looks like::

    manifest.json          {"name", "num_snapshots", "num_nodes", "feature_dim"}
    snapshots/t<k>.edges   "src,dst" per line, each undirected edge once
    features/t<k>.csv      num_nodes rows x feature_dim floats
    labels.csv             optional, header "node,timestamp,label"

All snapshots share one node universe; a node without edges at some
timestamp is simply isolated.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch


class DatasetError(ValueError):
    """Raised when a dataset directory or in-memory graph is malformed."""


def canonical_edges(pairs, num_nodes: int) -> np.ndarray:
    """Symmetrize and deduplicate an edge list.

    Returns an ``(M, 2)`` int64 array of undirected edges with ``src < dst``,
    sorted lexicographically. Self-loops are dropped.
    """
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if arr.size and (arr.min() < 0 or arr.max() >= num_nodes):
        raise DatasetError(f"out-of-range node index (num_nodes={num_nodes})")
    arr = arr[arr[:, 0] != arr[:, 1]]
    arr = np.sort(arr, axis=1)
    if len(arr) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(arr, axis=0)


@dataclass(frozen=True, eq=False)
class Snapshot:
    t: int
    edges: np.ndarray  # (M, 2) undirected, src < dst
    features: np.ndarray  # (N, D) float64

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise DatasetError(f"snapshot t={self.t}: features must be 2-D")
        if not np.all(np.isfinite(feats)):
            raise DatasetError(f"snapshot t={self.t}: non-finite attribute values")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "edges", canonical_edges(self.edges, feats.shape[0]))
        self.features.flags.writeable = False
        self.edges.flags.writeable = False

    @property
    def node_count(self) -> int:
        return self.features.shape[0]

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def edge_index(self) -> np.ndarray:
        """Both directions of every edge, shape ``(2, 2M)``."""
        e = self.edges
        return np.concatenate([e.T, e[:, ::-1].T], axis=1)

    def dense_adjacency(self) -> np.ndarray:
        a = np.zeros((self.node_count, self.node_count))
        a[self.edges[:, 0], self.edges[:, 1]] = 1.0
        a[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return a

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.node_count)

    def replace(self, *, edges=None, features=None) -> "Snapshot":
        return Snapshot(
            t=self.t,
            edges=self.edges if edges is None else edges,
            features=self.features if features is None else features,
        )


@dataclass(frozen=True, eq=False)
class DynamicGraph:
    snapshots: tuple
    name: str = "graph"

    def __post_init__(self):
        snaps = tuple(self.snapshots)
        object.__setattr__(self, "snapshots", snaps)
        if not snaps:
            raise DatasetError("a dynamic graph needs at least one snapshot")
        n, d = snaps[0].features.shape
        for k, s in enumerate(snaps):
            if s.t != k:
                raise DatasetError(f"timestamps must run 0..T-1, got t={s.t} at position {k}")
            if s.features.shape != (n, d):
                raise DatasetError(
                    f"snapshot t={k}: feature shape {s.features.shape} != {(n, d)}"
                )

    @property
    def T(self) -> int:
        return len(self.snapshots)

    @property
    def D(self) -> int:
        return self.snapshots[0].feature_dim

    @property
    def num_nodes(self) -> int:
        return self.snapshots[0].node_count

    def __getitem__(self, t: int) -> Snapshot:
        return self.snapshots[t]

    def with_snapshots(self, replacements: dict) -> "DynamicGraph":
        snaps = [replacements.get(s.t, s) for s in self.snapshots]
        return DynamicGraph(tuple(snaps), name=self.name)


@dataclass
class NodeLabels:
    """Binary anomaly flags per (node, timestamp); unlisted pairs are normal."""

    num_nodes: int
    flags: dict = field(default_factory=dict)  # t -> bool array (N,)

    def get(self, t: int) -> np.ndarray:
        if t in self.flags:
            return self.flags[t]
        return np.zeros(self.num_nodes, dtype=bool)

    def mark(self, t: int, nodes) -> None:
        row = self.flags.setdefault(t, np.zeros(self.num_nodes, dtype=bool))
        row[np.asarray(nodes, dtype=np.int64)] = True

    def union(self, other: "NodeLabels") -> "NodeLabels":
        out = NodeLabels(self.num_nodes, {t: v.copy() for t, v in self.flags.items()})
        for t, v in other.flags.items():
            out.flags[t] = out.get(t) | v
        return out

    def positives(self):
        """Sorted ``(node, t)`` pairs flagged abnormal."""
        rows = []
        for t in sorted(self.flags):
            rows.extend((int(i), t) for i in np.flatnonzero(self.flags[t]))
        return sorted(rows, key=lambda r: (r[1], r[0]))

    def count(self) -> int:
        return int(sum(v.sum() for v in self.flags.values()))


# --- adjacency normalization -------------------------------------------------


def normalize_adjacency(snapshot: Snapshot, dtype=torch.float64) -> torch.Tensor:
    """Sparse ``D^-1/2 (A + I) D^-1/2`` as a coalesced COO tensor."""
    n = snapshot.node_count
    ei = snapshot.edge_index()
    loops = np.arange(n, dtype=np.int64)
    rows = np.concatenate([ei[0], loops])
    cols = np.concatenate([ei[1], loops])
    deg = np.bincount(rows, minlength=n).astype(np.float64)
    inv_sqrt = 1.0 / np.sqrt(deg)
    vals = inv_sqrt[rows] * inv_sqrt[cols]
    idx = torch.from_numpy(np.stack([rows, cols]))
    adj = torch.sparse_coo_tensor(
        idx, torch.from_numpy(vals).to(dtype), (n, n), check_invariants=False
    )
    return adj.coalesce()


def dropout_edges(snapshot: Snapshot, p: float, rng: np.random.Generator) -> Snapshot:
    if p <= 0 or snapshot.edge_count == 0:
        return snapshot
    keep = rng.random(snapshot.edge_count) >= p
    return snapshot.replace(edges=snapshot.edges[keep])


# --- windows and splits -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GraphWindow:
    end_t: int
    snapshots: tuple
    norm_adjs: tuple

    @property
    def tau(self) -> int:
        return len(self.snapshots)

    @property
    def timestamps(self) -> list:
        return [s.t for s in self.snapshots]

    @property
    def num_nodes(self) -> int:
        return self.snapshots[0].node_count


def extract_window(graph: DynamicGraph, end_t: int, tau: int) -> GraphWindow:
    if tau < 1:
        raise DatasetError("tau must be >= 1")
    if end_t < tau - 1:
        raise DatasetError(f"insufficient history: end_t={end_t} < tau-1={tau - 1}")
    if end_t >= graph.T:
        raise DatasetError(f"end_t={end_t} beyond last snapshot {graph.T - 1}")
    snaps = tuple(graph[t] for t in range(end_t - tau + 1, end_t + 1))
    return GraphWindow(end_t, snaps, tuple(normalize_adjacency(s) for s in snaps))


def window_ends(timestamps, tau: int) -> list:
    """Timestamps from ``timestamps`` that can close a window of size ``tau``."""
    return [t for t in timestamps if t >= tau - 1]


def split_temporal(graph: DynamicGraph, train_ratio: float, tau: int = 1):
    """Earliest ``ceil(train_ratio * T)`` timestamps train, the rest test."""
    if not 0.0 < train_ratio < 1.0:
        raise DatasetError(f"train_ratio must lie in (0, 1), got {train_ratio}")
    # guard against 0.3 * 10 = 3.0000000000000004
    n_train = math.ceil(round(train_ratio * graph.T, 9))
    if n_train < tau:
        raise DatasetError(
            f"window cannot be formed: {n_train} training snapshots < tau={tau}"
        )
    return list(range(n_train)), list(range(n_train, graph.T))


# --- disk I/O -----------------------------------------------------------------


def load_dataset(path) -> DynamicGraph:
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise DatasetError(f"missing manifest: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    try:
        T = int(manifest["num_snapshots"])
        n = int(manifest["num_nodes"])
        d = int(manifest["feature_dim"])
    except KeyError as exc:
        raise DatasetError(f"manifest lacks field {exc}") from None
    snaps = []
    for t in range(T):
        feat_file = root / "features" / f"t{t}.csv"
        edge_file = root / "snapshots" / f"t{t}.edges"
        if not feat_file.is_file() or not edge_file.is_file():
            raise DatasetError(f"missing files for snapshot t={t}")
        feats = np.loadtxt(feat_file, delimiter=",", dtype=np.float64, ndmin=2)
        if feats.size == 0:
            feats = feats.reshape(0, d)
        if feats.shape[0] != n:
            raise DatasetError(
                f"row-count mismatch at t={t}: {feats.shape[0]} rows, manifest says {n}"
            )
        if feats.shape[1] != d:
            raise DatasetError(
                f"column-count mismatch at t={t}: {feats.shape[1]} columns, manifest says {d}"
            )
        text = edge_file.read_text().split()
        pairs = [tuple(int(v) for v in line.split(",")) for line in text]
        snaps.append(Snapshot(t=t, edges=np.array(pairs, dtype=np.int64), features=feats))
    return DynamicGraph(tuple(snaps), name=str(manifest.get("name", root.name)))


def _fmt(x: float) -> str:
    return repr(float(x))


def save_dataset(graph: DynamicGraph, path) -> None:
    root = Path(path)
    (root / "snapshots").mkdir(parents=True, exist_ok=True)
    (root / "features").mkdir(parents=True, exist_ok=True)
    manifest = {
        "name": graph.name,
        "num_snapshots": graph.T,
        "num_nodes": graph.num_nodes,
        "feature_dim": graph.D,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    for s in graph.snapshots:
        lines = [f"{i},{j}\n" for i, j in s.edges]
        (root / "snapshots" / f"t{s.t}.edges").write_text("".join(lines))
        rows = [",".join(_fmt(v) for v in row) + "\n" for row in s.features]
        (root / "features" / f"t{s.t}.csv").write_text("".join(rows))


def save_labels(labels: NodeLabels, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "timestamp", "label"])
        for node, t in labels.positives():
            w.writerow([node, t, 1])


def load_labels(path, num_nodes: int) -> NodeLabels:
    labels = NodeLabels(num_nodes)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["node", "timestamp", "label"]:
            raise DatasetError(f"labels header must be node,timestamp,label: {path}")
        for row in reader:
            node, t, lab = int(row["node"]), int(row["timestamp"]), int(row["label"])
            if not 0 <= node < num_nodes:
                raise DatasetError(f"label node {node} out of range")
            if lab not in (0, 1):
                raise DatasetError(f"label must be 0 or 1, got {lab}")
            row_flags = labels.flags.setdefault(t, np.zeros(num_nodes, dtype=bool))
            row_flags[node] = bool(lab)
    return labels
