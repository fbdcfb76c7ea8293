import numpy as np
import pytest
import torch

from stripe_gad.graph import DynamicGraph, Snapshot

torch.set_num_threads(1)


def random_snapshot(rng, n, d, p=0.2, t=0):
    upper = np.triu(rng.random((n, n)) < p, 1)
    edges = np.argwhere(upper)
    return Snapshot(t=t, edges=edges, features=rng.normal(size=(n, d)))


def random_graph(rng, n=6, d=3, T=3, p=0.4):
    return DynamicGraph(tuple(random_snapshot(rng, n, d, p, t) for t in range(T)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def write_toy_dataset(root, T=2, n=3, d=2):
    from stripe_gad.graph import save_dataset

    rng = np.random.default_rng(0)
    snaps = tuple(
        Snapshot(t=t, edges=[(0, 1), (1, 2)][: t + 1], features=rng.normal(size=(n, d)))
        for t in range(T)
    )
    g = DynamicGraph(snaps, name="toy")
    save_dataset(g, root)
    return g
