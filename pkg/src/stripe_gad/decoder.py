"""Decoders: gated transposed temporal convolution, fusion MLP, GCN attribute
decoder and bilinear structure decoder."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .encoder import conv1d_transpose, gcn_stack, glu


class DenseCapExceeded(ValueError):
    pass


def temporal_decode(z, tp_readout, kernels, proj, proj_bias=None):
    """Grow ``(tau', N, D')`` back to ``(tau, N, D')``.

    The two inputs are concatenated to ``2D'`` channels; every kernel is a
    ``(K, 4D', 2D')`` transposed convolution followed by the gate, which keeps
    ``2D'`` channels. ``proj`` maps ``2D' -> D'`` at the end.
    """
    if z.shape != tp_readout.shape:
        raise ValueError(f"shape mismatch: {tuple(z.shape)} vs {tuple(tp_readout.shape)}")
    x = torch.cat([z, tp_readout], dim=-1)
    for kern in kernels:
        x = glu(conv1d_transpose(x, kern))
    out = x @ proj
    if proj_bias is not None:
        out = out + proj_bias
    return out


def fuse(sp_readout, z_hat, weight, bias=None):
    """One-layer MLP with ReLU over ``[spatial readout || decoded temporal]``."""
    if sp_readout.shape != z_hat.shape:
        raise ValueError(f"shape mismatch: {tuple(sp_readout.shape)} vs {tuple(z_hat.shape)}")
    out = torch.cat([sp_readout, z_hat], dim=-1) @ weight
    if bias is not None:
        out = out + bias
    return torch.relu(out)


def decode_attributes(adj, h_hat, weights):
    """GCN decoder; the last layer is linear so signed attributes are reachable."""
    return gcn_stack(adj, h_hat, weights, final_relu=False)


def symmetric(w: torch.Tensor) -> torch.Tensor:
    return 0.5 * (w + w.transpose(0, 1))


def structure_logits_dense(h_hat, w_de):
    logits = (h_hat @ symmetric(w_de)) @ h_hat.transpose(0, 1)
    # symmetric in exact arithmetic; averaging makes it so bit for bit
    return 0.5 * (logits + logits.transpose(0, 1))


PAIR_CHUNK = 8192


def structure_logits_pairs(h_hat, w_de, pairs):
    """Logits for the ``(2, E)`` index pairs only.

    Pairs are processed in fixed-size chunks so the gathered row blocks stay
    small; one ``E x D'`` gather would grow past cache and allocator reuse.
    """
    hs = h_hat @ symmetric(w_de)
    src, dst = pairs[0], pairs[1]
    parts = [
        (hs[src[i : i + PAIR_CHUNK]] * h_hat[dst[i : i + PAIR_CHUNK]]).sum(-1)
        for i in range(0, src.shape[0], PAIR_CHUNK)
    ]
    return torch.cat(parts) if parts else hs.new_zeros(0)


def decode_structure(h_hat, w_de, pairs=None, dense_cap: int = 20000):
    """``sigmoid(H S H^T)`` with ``S`` the symmetric part of ``w_de``.

    With ``pairs`` given, only those entries are evaluated (sampled mode);
    otherwise the full ``N x N`` matrix is built, refused above ``dense_cap``.
    """
    if pairs is not None:
        return torch.sigmoid(structure_logits_pairs(h_hat, w_de, pairs))
    n = h_hat.shape[0]
    if n > dense_cap:
        raise DenseCapExceeded(f"dense structure decoding refused: N={n} > cap {dense_cap}")
    return torch.sigmoid(structure_logits_dense(h_hat, w_de))


@dataclass
class Reconstruction:
    """Decoded window.

    ``a_hat`` holds ``tau`` dense ``N x N`` matrices in dense mode, or ``tau``
    value vectors aligned with ``pairs`` (one ``(2, E_t)`` index tensor and
    one 0/1 target vector per timestamp) in sampled mode.
    """

    x_hat: torch.Tensor
    a_hat: list
    pairs: list | None = None
    pair_targets: list | None = None

    @property
    def sampled(self) -> bool:
        return self.pairs is not None
