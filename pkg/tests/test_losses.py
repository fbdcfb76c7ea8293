import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from stripe_gad.decoder import Reconstruction
from stripe_gad.graph import DynamicGraph, Snapshot, extract_window
from stripe_gad.losses import (
    hinge_terms,
    loss_compactness,
    loss_reconstruction,
    loss_separateness,
    nearest_two,
)


def t64(x):
    return torch.as_tensor(np.asarray(x, dtype=np.float64))


def one_node_window(x):
    g = DynamicGraph((Snapshot(t=0, edges=[], features=[x]),))
    return extract_window(g, 0, 1)


def test_reconstruction_345():
    # x = [3, 4], x_hat = 0, alpha = 1, isolated node (A_hat 0 matches A)
    w = one_node_window([3.0, 4.0])
    recon = Reconstruction(torch.zeros(1, 1, 2, dtype=torch.float64), [torch.zeros(1, 1, dtype=torch.float64)])
    value, per_node, per_off = loss_reconstruction(recon, w, alpha=1.0, normalize=False)
    assert float(value) == 5.0
    assert per_node[0] == 5.0 and per_off.shape == (1, 1)


def test_reconstruction_zero_when_exact():
    w = one_node_window([1.0, -2.0])
    recon = Reconstruction(t64([[[1.0, -2.0]]]), [torch.zeros(1, 1, dtype=torch.float64)])
    value, per_node, _ = loss_reconstruction(recon, w, alpha=0.3)
    assert float(value) == 0.0 and per_node[0] == 0.0


def test_reconstruction_alpha_weights():
    w = one_node_window([3.0, 4.0])
    recon = Reconstruction(torch.zeros(1, 1, 2, dtype=torch.float64), [t64([[2.0]])])
    value, _, _ = loss_reconstruction(recon, w, alpha=0.25, normalize=False)
    assert float(value) == pytest.approx(0.25 * 5.0 + 0.75 * 2.0, abs=1e-15)


def test_compactness_345():
    h = t64([[[3.0, 4.0]]])
    items = t64([[[0.0, 0.0], [10.0, 10.0]]])
    value, per_node, _ = loss_compactness(h, h[:0], items, None, normalize=False)
    assert float(value) == 5.0 and per_node[0] == 5.0


def test_separateness_hinge_case():
    # d1 = 1, d2 = 1.7, margin 1 -> 0.3
    h = t64([[[0.0]]])
    items = t64([[[1.0], [-1.7]]])
    value = loss_separateness(h, h[:0], items, None, margin=1.0, normalize=False)
    assert float(value) == pytest.approx(0.3, abs=1e-15)
    assert hinge_terms([1.0], [1.7], 1.0)[0] == pytest.approx(0.3)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 20), p=st.integers(2, 6), d=st.integers(1, 5), seed=st.integers(0, 2**31))
def test_separateness_zero_margin_is_exactly_zero(n, p, d, seed):
    rng = np.random.default_rng(seed)
    h = t64(rng.normal(size=(2, n, d)))
    z = t64(rng.normal(size=(1, n, d)))
    sp = t64(rng.normal(size=(2, p, d)))
    tp = t64(rng.normal(size=(p, d)))
    assert float(loss_separateness(h, z, sp, tp, margin=0.0)) == 0.0


def test_nearest_two_ordering(rng):
    feats, items = t64(rng.normal(size=(30, 3))), t64(rng.normal(size=(5, 3)))
    d1, d2 = nearest_two(feats, items)
    brute = np.sort(np.linalg.norm(feats.numpy()[:, None] - items.numpy()[None], axis=2), axis=1)
    np.testing.assert_allclose(d1.numpy(), brute[:, 0], atol=1e-12)
    np.testing.assert_allclose(d2.numpy(), brute[:, 1], atol=1e-12)
    assert torch.all(d1 <= d2)


def test_temporal_positions_attributed_to_newest_offset():
    h = torch.zeros(3, 2, 1, dtype=torch.float64)
    z = t64([[[2.0], [0.0]]])  # tau' = 1
    tp = t64([[0.0], [5.0]])
    _, per_node, per_off = loss_compactness(h, z, None, tp, normalize=False)
    np.testing.assert_array_equal(per_off, [[0, 0], [0, 0], [2.0, 0.0]])
    np.testing.assert_array_equal(per_node, [2.0, 0.0])


def test_separateness_needs_two_items():
    h = t64([[[0.0]]])
    with pytest.raises(ValueError):
        loss_separateness(h, h[:0], t64([[[1.0]]]), None, margin=1.0)


def test_feature_on_item_has_zero_compactness():
    items = t64([[[0.6, 0.8], [1.0, 0.0]]])
    h = t64([[[0.6, 0.8]]])
    value, per_node, _ = loss_compactness(h, h[:0], items, None)
    assert float(value) == 0.0 and per_node[0] == 0.0
