"""Synthetic anomaly planting: dense cliques and far-feature swaps."""

from __future__ import annotations

import itertools

import numpy as np

from .config import InjectionConfig
from .graph import DynamicGraph, NodeLabels, Snapshot


class InjectionError(ValueError):
    pass


def _available(n: int, exclude) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    if exclude is not None and len(exclude):
        mask[np.asarray(list(exclude), dtype=np.int64)] = False
    return np.flatnonzero(mask)


def inject_structural(snapshot: Snapshot, cfg: InjectionConfig, rng, exclude=None):
    """Turn ``clique_count`` disjoint random groups of ``clique_size`` nodes into cliques.

    Returns the new snapshot, its labels and the list of planted groups.
    """
    pool = _available(snapshot.node_count, exclude)
    need = cfg.clique_size * cfg.clique_count
    if need > len(pool):
        raise InjectionError(
            f"injection capacity exceeded: {need} clique nodes requested, "
            f"{len(pool)} available"
        )
    chosen = rng.choice(pool, size=need, replace=False)
    groups = [np.sort(g) for g in chosen.reshape(cfg.clique_count, cfg.clique_size)]
    new_edges = [snapshot.edges]
    for g in groups:
        new_edges.append(np.array(list(itertools.combinations(g, 2)), dtype=np.int64))
    out = snapshot.replace(edges=np.concatenate(new_edges))
    labels = NodeLabels(snapshot.node_count)
    labels.mark(snapshot.t, chosen)
    return out, labels, groups


def farthest_candidate(x: np.ndarray, candidates: np.ndarray, features: np.ndarray) -> int:
    """Candidate index whose feature row is farthest from ``x``; ties go to the lowest index."""
    cand = np.sort(np.asarray(candidates, dtype=np.int64))
    dist = np.linalg.norm(features[cand] - x, axis=1)
    return int(cand[np.argmax(dist)])


def inject_attribute(snapshot: Snapshot, cfg: InjectionConfig, rng, exclude=None):
    """Replace target features with the farthest of ``candidates`` sampled nodes.

    Candidates are drawn from nodes that carry no label in this snapshot, and
    replacement values are always taken from the unmodified feature matrix.
    Returns the new snapshot, labels, and a ``{target: source}`` map.
    """
    n = snapshot.node_count
    pool = _available(n, exclude)
    need = cfg.targets_per_kind
    if need > len(pool):
        raise InjectionError(
            f"injection capacity exceeded: {need} attribute targets requested, "
            f"{len(pool)} available"
        )
    targets = np.sort(rng.choice(pool, size=need, replace=False))
    cand_pool = np.setdiff1d(pool, targets)
    if cfg.candidates > len(cand_pool):
        raise InjectionError(
            f"candidate pool too large: k={cfg.candidates} exceeds {len(cand_pool)} "
            "unlabeled candidate nodes"
        )
    src = snapshot.features
    feats = src.copy()
    sources = {}
    for i in targets:
        cand = rng.choice(cand_pool, size=cfg.candidates, replace=False)
        j = farthest_candidate(src[i], cand, src)
        feats[i] = src[j]
        sources[int(i)] = j
    labels = NodeLabels(n)
    labels.mark(snapshot.t, targets)
    return snapshot.replace(features=feats), labels, sources


def inject_snapshot(snapshot: Snapshot, cfg: InjectionConfig, rng):
    """Both injectors on one snapshot with disjoint targets.

    Returns ``(snapshot, structural_labels, attribute_labels)``.
    """
    if 2 * cfg.targets_per_kind > snapshot.node_count:
        raise InjectionError(
            f"injection capacity exceeded: 2*{cfg.targets_per_kind} targets for "
            f"{snapshot.node_count} nodes"
        )
    s1, lab_s, _ = inject_structural(snapshot, cfg, rng)
    taken = np.flatnonzero(lab_s.get(snapshot.t))
    s2, lab_a, _ = inject_attribute(s1, cfg, rng, exclude=taken)
    return s2, lab_s, lab_a


def inject_all(graph: DynamicGraph, test_timestamps, cfg: InjectionConfig):
    """Inject anomalies into every test snapshot.

    Each snapshot draws from its own stream seeded by ``(cfg.seed, t)`` so the
    result does not depend on iteration order.
    """
    labels = NodeLabels(graph.num_nodes)
    replaced = {}
    for t in test_timestamps:
        rng = np.random.default_rng([cfg.seed, int(t)])
        snap, lab_s, lab_a = inject_snapshot(graph[t], cfg, rng)
        replaced[t] = snap
        labels = labels.union(lab_s).union(lab_a)
    return graph.with_snapshots(replaced), labels
