import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from stripe_gad.encoder import (
    conv1d_transpose,
    conv1d_valid,
    gcn_layer,
    glu,
    glu_temporal_layer,
    spatial_encode,
    temporal_encode,
)
from stripe_gad.graph import Snapshot, normalize_adjacency

from conftest import random_snapshot


def dense_gcn_oracle(a, x, w):
    # numpy reimplementation: D^-1/2 (A+I) D^-1/2 X W, then ReLU
    a_t = a + np.eye(len(a))
    d = 1.0 / np.sqrt(a_t.sum(1))
    return np.maximum((d[:, None] * a_t * d[None, :]) @ x @ w, 0.0)


def conv_oracle(x, kern):
    k, _, c_out = kern.shape
    s, n, _ = x.shape
    out = np.zeros((s - k + 1, n, c_out))
    for j in range(s - k + 1):
        for i in range(n):
            for q in range(k):
                out[j, i] += x[j + q, i] @ kern[q]
    return out


def test_gcn_two_node_hand_case():
    snap = Snapshot(t=0, edges=[(0, 1)], features=[[1.0], [3.0]])
    adj = normalize_adjacency(snap)
    out = gcn_layer(adj, torch.tensor([[1.0], [3.0]], dtype=torch.float64),
                    torch.eye(1, dtype=torch.float64))
    np.testing.assert_allclose(out.numpy(), [[2.0], [2.0]], atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 40), d=st.integers(1, 6), dh=st.integers(1, 6), seed=st.integers(0, 2**31))
def test_gcn_matches_dense_oracle(n, d, dh, seed):
    rng = np.random.default_rng(seed)
    snap = random_snapshot(rng, n, d, 0.2)
    w = rng.normal(size=(d, dh))
    got = gcn_layer(normalize_adjacency(snap), torch.from_numpy(snap.features.copy()), torch.from_numpy(w))
    want = dense_gcn_oracle(snap.dense_adjacency(), snap.features, w)
    np.testing.assert_allclose(got.numpy(), want, rtol=0, atol=1e-10)


def test_gcn_shape_mismatch():
    adj = normalize_adjacency(Snapshot(t=0, edges=[], features=np.zeros((3, 2))))
    with pytest.raises(ValueError, match="shape mismatch"):
        gcn_layer(adj, torch.zeros(3, 2, dtype=torch.float64), torch.zeros(4, 2, dtype=torch.float64))


def test_gcn_permutation_equivariance(rng):
    snap = random_snapshot(rng, 12, 3, 0.3)
    perm = rng.permutation(12)
    inv = np.argsort(perm)
    permuted = Snapshot(t=0, edges=inv[snap.edges], features=snap.features[perm])
    w = torch.from_numpy(rng.normal(size=(3, 4)))
    a = gcn_layer(normalize_adjacency(snap), torch.from_numpy(snap.features.copy()), w)
    b = gcn_layer(normalize_adjacency(permuted), torch.from_numpy(permuted.features.copy()), w)
    np.testing.assert_allclose(b.numpy(), a.numpy()[perm], atol=1e-12)


def test_glu_scalar():
    e = torch.tensor([[1.0, 0.0]], dtype=torch.float64)
    # tanh(1) * sigmoid(0)
    assert float(glu(e)) == pytest.approx(math.tanh(1.0) * 0.5, abs=1e-15)
    assert float(glu(e)) == pytest.approx(0.380797, abs=1e-6)


def test_conv_matches_loop_oracle(rng):
    x = rng.normal(size=(5, 4, 3))
    kern = rng.normal(size=(2, 3, 6))
    got = conv1d_valid(torch.from_numpy(x), torch.from_numpy(kern))
    np.testing.assert_allclose(got.numpy(), conv_oracle(x, kern), atol=1e-12)


def test_conv_sequence_too_short():
    with pytest.raises(ValueError, match="shorter than kernel"):
        conv1d_valid(torch.zeros(1, 2, 3), torch.zeros(2, 3, 4))


@settings(max_examples=30, deadline=None)
@given(s=st.integers(1, 6), k=st.integers(1, 3), seed=st.integers(0, 2**31))
def test_transpose_is_adjoint(s, k, seed):
    # <conv(x), y> == <x, conv^T(y)> for every x, y
    rng = np.random.default_rng(seed)
    if s < k:
        return
    x = torch.from_numpy(rng.normal(size=(s, 3, 2)))
    kern = torch.from_numpy(rng.normal(size=(k, 2, 5)))
    y = torch.from_numpy(rng.normal(size=(s - k + 1, 3, 5)))
    lhs = (conv1d_valid(x, kern) * y).sum()
    rhs = (x * conv1d_transpose(y, kern)).sum()
    assert float(lhs) == pytest.approx(float(rhs), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("tau,layers,k", [(3, 2, 2), (4, 1, 3), (6, 3, 2), (1, 0, 2)])
def test_temporal_output_length(tau, layers, k, rng):
    h = torch.from_numpy(rng.normal(size=(tau, 5, 4)))
    kernels = [torch.from_numpy(rng.normal(size=(k, 4, 8))) for _ in range(layers)]
    z = temporal_encode(h, kernels)
    assert z.shape == (tau - layers * (k - 1), 5, 4)


def test_glu_outputs_bounded(rng):
    z = glu_temporal_layer(torch.from_numpy(rng.normal(size=(3, 10, 4))),
                           torch.from_numpy(rng.normal(size=(2, 4, 8))))
    assert torch.all(z.abs() < 1)


def test_spatial_encode_stacks_snapshots(rng):
    snaps = [random_snapshot(rng, 8, 3, 0.3, t) for t in range(3)]
    adjs = [normalize_adjacency(s) for s in snaps]
    x = torch.from_numpy(np.stack([s.features for s in snaps]))
    w = [torch.from_numpy(rng.normal(size=(3, 4))), torch.from_numpy(rng.normal(size=(4, 4)))]
    h = spatial_encode(adjs, x, w)
    assert h.shape == (3, 8, 4)
    for t, s in enumerate(snaps):
        want = dense_gcn_oracle(s.dense_adjacency(), dense_gcn_oracle(s.dense_adjacency(), s.features, w[0].numpy()), w[1].numpy())
        np.testing.assert_allclose(h[t].numpy(), want, atol=1e-10)
    with pytest.raises(ValueError):
        spatial_encode(adjs[:2], x, w)
