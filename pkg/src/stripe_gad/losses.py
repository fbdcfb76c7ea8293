"""Reconstruction, compactness and separateness objectives.

Besides the scalar losses, every function reports per-node contributions
attributed to window offsets; the anomaly scorer consumes those.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from .decoder import Reconstruction


@dataclass
class LossBreakdown:
    rec: torch.Tensor
    com: torch.Tensor
    sep: torch.Tensor
    total: torch.Tensor
    per_node_rec: np.ndarray  # (N,) summed over window offsets
    per_node_com: np.ndarray
    offset_rec: np.ndarray  # (tau, N)
    offset_com: np.ndarray

    def as_floats(self) -> dict:
        return {k: float(getattr(self, k).detach()) for k in ("rec", "com", "sep", "total")}


def dense_targets(window) -> list:
    return [torch.from_numpy(s.dense_adjacency()) for s in window.snapshots]


def structure_residuals(recon: Reconstruction, window):
    """Per timestamp: (flat residual vector, per-row squared error (N,))."""
    n = window.num_nodes
    out = []
    if recon.sampled:
        for a_hat, pairs, target in zip(recon.a_hat, recon.pairs, recon.pair_targets):
            diff = a_hat - target
            rows = torch.zeros(n, dtype=diff.dtype).index_add_(0, pairs[0], diff.detach() ** 2)
            out.append((diff, rows))
    else:
        for a_hat, target in zip(recon.a_hat, dense_targets(window)):
            diff = a_hat - target
            out.append((diff.reshape(-1), (diff.detach() ** 2).sum(1)))
    return out


def loss_reconstruction(recon: Reconstruction, window, alpha: float, normalize: bool = True,
                        last_only: bool = False):
    """Weighted Frobenius errors of attributes and structure, summed over the window.

    Returns ``(value, per_node (N,), per_offset (tau, N))``. The per-node
    vectors use row norms and never carry gradient.
    """
    tau, n = recon.x_hat.shape[0], window.num_nodes
    x = torch.from_numpy(np.stack([s.features for s in window.snapshots]))
    x_diff = recon.x_hat - x
    struct = structure_residuals(recon, window)
    offsets = [tau - 1] if last_only else range(tau)
    value = recon.x_hat.new_zeros(())
    per_offset = torch.zeros(tau, n, dtype=torch.float64)
    for r in offsets:
        a_diff, a_rows = struct[r]
        value = value + alpha * torch.linalg.vector_norm(x_diff[r].reshape(-1))
        value = value + (1 - alpha) * torch.linalg.vector_norm(a_diff)
        per_offset[r] = (alpha * torch.linalg.vector_norm(x_diff[r].detach(), dim=1)
                         + (1 - alpha) * torch.sqrt(a_rows))
    if normalize:
        # a Frobenius norm grows like sqrt(N); this keeps rec on a per-node scale
        value = value / (len(offsets) * math.sqrt(n))
    per_offset = per_offset.numpy()
    return value, per_offset.sum(0), per_offset


def nearest_two(feats: torch.Tensor, items: torch.Tensor):
    """Distances from each row of ``feats`` to its nearest and second-nearest item.

    The selection is made on detached values; gradients flow through the
    distances of the selected items only. With a single item the second
    distance is ``None``.
    """
    with torch.no_grad():
        dist = torch.cdist(feats, items, compute_mode="donot_use_mm_for_euclid_dist")
        order = dist.argsort(dim=1, stable=True)
    d1 = torch.linalg.vector_norm(feats - items[order[:, 0]], dim=1)
    if items.shape[0] == 1:
        return d1, None
    d2 = torch.linalg.vector_norm(feats - items[order[:, 1]], dim=1)
    # recomputed norms can disagree with cdist in the last ulp; keep d1 <= d2 exactly
    return torch.minimum(d1, d2), torch.maximum(d1, d2)


def _feature_sets(h, z, sp_items, tp_items):
    """Yield ``(features (s*N, D'), items, rows s, offset of first row)`` per active bank."""
    tau, n = h.shape[0], h.shape[1]
    sets = []
    if sp_items is not None:
        sets.extend((h[r : r + 1], sp_items[r], r) for r in range(tau))
    if tp_items is not None:
        sets.append((z, tp_items, tau - z.shape[0]))
    for feats, items, start in sets:
        flat = feats.reshape(feats.shape[0] * n, -1)
        yield flat, items, feats.shape[0], start


def loss_compactness(h, z, sp_items, tp_items, normalize: bool = True):
    """Distance of every spatial/temporal feature to its nearest item.

    Pass ``None`` for a disabled bank. Temporal position
    ``j`` is attributed to window offset ``j + tau - tau'``, its newest input
    timestamp.
    """
    tau, n = h.shape[0], h.shape[1]
    value = h.new_zeros(())
    per_offset = torch.zeros(tau, n, dtype=torch.float64)
    count = 0
    for feats, items, s, start in _feature_sets(h, z, sp_items, tp_items):
        d1, _ = nearest_two(feats, items)
        value = value + d1.sum()
        per_offset[start : start + s] += d1.detach().reshape(s, n)
        count += s * n
    if normalize and count:
        value = value / count
    per_offset = per_offset.numpy()
    return value, per_offset.sum(0), per_offset


def loss_separateness(h, z, sp_items, tp_items, margin: float, normalize: bool = True):
    """Hinge ``[d_nearest - d_second + margin]_+`` summed over all features."""
    n = h.shape[1]
    value = h.new_zeros(())
    count = 0
    for feats, items, s, _ in _feature_sets(h, z, sp_items, tp_items):
        if items.shape[0] < 2:
            raise ValueError("separateness loss needs at least 2 memory items")
        d1, d2 = nearest_two(feats, items)
        value = value + torch.relu(d1 - d2 + margin).sum()
        count += s * n
    if normalize and count:
        value = value / count
    return value


def hinge_terms(d_near, d_second, margin):
    return np.maximum(np.asarray(d_near) - np.asarray(d_second) + margin, 0.0)
