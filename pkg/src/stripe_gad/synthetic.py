"""Synthetic dynamic graphs of normal behaviour for tests and benchmarks.

Nodes belong to fixed communities. Each snapshot keeps part of the previous
snapshot's edges and redraws the rest, mostly inside communities, so the
expected degree stays fixed. Features are community centroids plus a
persistent per-node offset, fresh noise and a slow drift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import DynamicGraph, Snapshot


@dataclass(frozen=True)
class SyntheticConfig:
    num_nodes: int = 500
    num_snapshots: int = 8
    avg_degree: float = 10.0
    feature_dim: int = 16
    communities: int = 5
    p_intra: float = 0.9
    persistence: float = 0.7
    centroid_scale: float = 1.0
    node_scale: float = 0.3
    noise: float = 0.1
    drift: float = 0.02
    seed: int = 0


def _draw_edges(m: int, membership: np.ndarray, members: list, p_intra: float, rng) -> np.ndarray:
    n = len(membership)
    src = rng.integers(0, n, size=m)
    intra = rng.random(m) < p_intra
    dst = rng.integers(0, n, size=m)
    for c, nodes in enumerate(members):
        sel = intra & (membership[src] == c)
        dst[sel] = nodes[rng.integers(0, len(nodes), size=int(sel.sum()))]
    return np.stack([src, dst], axis=1)


def make_dynamic_graph(cfg: SyntheticConfig) -> DynamicGraph:
    rng = np.random.default_rng(cfg.seed)
    n, d = cfg.num_nodes, cfg.feature_dim
    membership = rng.integers(0, cfg.communities, size=n)
    members = [np.flatnonzero(membership == c) for c in range(cfg.communities)]
    centroids = rng.normal(0.0, cfg.centroid_scale, size=(cfg.communities, d))
    drift_dir = rng.normal(0.0, 1.0, size=(cfg.communities, d))
    offsets = rng.normal(0.0, cfg.node_scale, size=(n, d))
    target_m = int(round(n * cfg.avg_degree / 2))

    snaps = []
    prev = None
    for t in range(cfg.num_snapshots):
        if prev is None:
            edges = _draw_edges(target_m, membership, members, cfg.p_intra, rng)
        else:
            keep = prev[rng.random(len(prev)) < cfg.persistence]
            fresh = _draw_edges(max(target_m - len(keep), 0), membership, members, cfg.p_intra, rng)
            edges = np.concatenate([keep, fresh])
        feats = (centroids[membership] + cfg.drift * t * drift_dir[membership]
                 + offsets + rng.normal(0.0, cfg.noise, size=(n, d)))
        snap = Snapshot(t=t, edges=edges, features=feats)
        snaps.append(snap)
        prev = snap.edges
    return DynamicGraph(tuple(snaps), name=f"synthetic-n{n}-s{cfg.seed}")
