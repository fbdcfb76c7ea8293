"""Spatial (GCN) and gated temporal convolution encoders.

Tensors follow a ``(time, node, channel)`` layout throughout.
"""

from __future__ import annotations

import torch


def propagate(adj: torch.Tensor, h: torch.Tensor) -> torch.Tensor:
    if adj.is_sparse:
        return torch.sparse.mm(adj, h)
    return adj @ h


def gcn_layer(adj: torch.Tensor, h: torch.Tensor, weight: torch.Tensor, relu: bool = True):
    """``ReLU(adj @ h @ weight)`` with a sparse or dense normalized adjacency."""
    if h.shape[-1] != weight.shape[0]:
        raise ValueError(f"shape mismatch: features {tuple(h.shape)} vs weight {tuple(weight.shape)}")
    if adj.shape[0] != adj.shape[1] or adj.shape[1] != h.shape[0]:
        raise ValueError(f"shape mismatch: adjacency {tuple(adj.shape)} vs features {tuple(h.shape)}")
    # project first: weight usually shrinks the channel count
    out = propagate(adj, h @ weight)
    return torch.relu(out) if relu else out


def gcn_stack(adj, h, weights, final_relu: bool = True):
    last = len(weights) - 1
    for l, w in enumerate(weights):
        h = gcn_layer(adj, h, w, relu=final_relu or l < last)
    return h


def spatial_encode(adjs, features: torch.Tensor, weights) -> torch.Tensor:
    """Apply the same GCN stack to every snapshot of a window.

    ``features`` is ``(tau, N, D)``; returns ``(tau, N, D')``.
    """
    if len(adjs) != features.shape[0]:
        raise ValueError(f"{len(adjs)} adjacencies for {features.shape[0]} snapshots")
    return torch.stack([gcn_stack(a, x, weights) for a, x in zip(adjs, features)])


def conv1d_valid(x: torch.Tensor, kernel: torch.Tensor) -> torch.Tensor:
    """Unpadded convolution along time.

    ``x`` is ``(s, N, C_in)``, ``kernel`` is ``(K, C_in, C_out)``;
    ``out[j] = sum_k x[j + k] @ kernel[k]`` for ``j < s - K + 1``.
    """
    k_w = kernel.shape[0]
    s = x.shape[0]
    if s < k_w:
        raise ValueError(f"sequence shorter than kernel: length {s} < width {k_w}")
    out_len = s - k_w + 1
    out = x[0:out_len] @ kernel[0]
    for k in range(1, k_w):
        out = out + x[k : k + out_len] @ kernel[k]
    return out


def conv1d_transpose(y: torch.Tensor, kernel: torch.Tensor) -> torch.Tensor:
    """Adjoint of :func:`conv1d_valid` for the same kernel.

    ``y`` is ``(s, N, C_out)``; returns ``(s + K - 1, N, C_in)``.
    """
    k_w, c_in, _ = kernel.shape
    s = y.shape[0]
    pieces = []
    for k in range(k_w):
        contrib = y @ kernel[k].transpose(0, 1)
        pad_front = contrib.new_zeros((k,) + contrib.shape[1:])
        pad_back = contrib.new_zeros((k_w - 1 - k,) + contrib.shape[1:])
        pieces.append(torch.cat([pad_front, contrib, pad_back]))
    return torch.stack(pieces).sum(0)


def glu(e: torch.Tensor) -> torch.Tensor:
    d = e.shape[-1] // 2
    return torch.tanh(e[..., :d]) * torch.sigmoid(e[..., d:])


def glu_temporal_layer(z: torch.Tensor, kernel: torch.Tensor) -> torch.Tensor:
    """Valid time convolution to ``2d`` channels, then the tanh/sigmoid gate."""
    return glu(conv1d_valid(z, kernel))


def temporal_encode(h: torch.Tensor, kernels) -> torch.Tensor:
    z = h
    for kern in kernels:
        z = glu_temporal_layer(z, kern)
    return z
