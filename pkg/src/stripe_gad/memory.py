"""Prototype memory banks with mutual-attention read and top-K write.

All functions here are pure: an update returns new item tensors and never
mutates the bank it was given. The trainer decides when to commit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch


@dataclass
class MemoryBank:
    """Prototype items plus key/query/value projections.

    ``items`` is ``(P, D')`` for a temporal bank and ``(tau, P, D')`` for a
    spatial bank (one sub-bank per window offset).
    """

    items: torch.Tensor
    w_k: torch.Tensor
    w_q: torch.Tensor
    w_v: torch.Tensor
    top_k: int = 32

    def sub_bank(self, r: int) -> "MemoryBank":
        return MemoryBank(self.items[r], self.w_k, self.w_q, self.w_v, self.top_k)

    @property
    def num_items(self) -> int:
        return self.items.shape[-2]


@dataclass
class ReadResult:
    readout: torch.Tensor
    weights: torch.Tensor


def attention_logits(queries, items, w_q, w_k):
    q = queries @ w_q
    k = items @ w_k
    return (q @ k.transpose(0, 1)) / math.sqrt(items.shape[-1])


def attention_read(queries: torch.Tensor, bank: MemoryBank) -> ReadResult:
    """Softmax over items of scaled query/key products; readout mixes raw items."""
    logits = attention_logits(queries, bank.items, bank.w_q, bank.w_k)
    w = torch.softmax(logits, dim=1)
    return ReadResult(w @ bank.items, w)


def topk_mask(weights: torch.Tensor, top_k: int) -> torch.Tensor:
    """0/1 mask keeping the ``top_k`` largest entries of every column.

    Ties keep the lowest query index.
    """
    q = weights.shape[0]
    k = min(top_k, q)
    if k == q:
        return torch.ones_like(weights)
    # stable descending sort so equal weights resolve to the lower row index
    order = torch.sort(weights.detach(), dim=0, descending=True, stable=True).indices[:k]
    mask = torch.zeros_like(weights)
    mask.scatter_(0, order, 1.0)
    return mask


def update_weights(features: torch.Tensor, bank: MemoryBank) -> torch.Tensor:
    """Per-item weights over queries after top-K selection, columns summing to 1."""
    logits = attention_logits(features, bank.items, bank.w_q, bank.w_k)
    return keep_top_k(torch.softmax(logits, dim=0), bank.top_k)


def keep_top_k(mu: torch.Tensor, top_k: int) -> torch.Tensor:
    """Zero all but each column's ``top_k`` largest weights and rescale to sum 1."""
    kept = mu * topk_mask(mu, top_k)
    return kept / kept.sum(dim=0, keepdim=True)


def memory_update(features: torch.Tensor, bank: MemoryBank, renorm: bool = True) -> torch.Tensor:
    """Move every item toward its top-K matching value vectors.

    Returns the new ``(P, D')`` item matrix. The top-K mask is a constant of
    the pass; gradients flow through the kept weights and value vectors.
    """
    if features.shape[0] < 1:
        raise ValueError("memory update needs at least one feature")
    mu = update_weights(features, bank)
    values = features @ bank.w_v
    items = bank.items + mu.transpose(0, 1) @ values
    if renorm:
        items = items / torch.linalg.vector_norm(items, dim=1, keepdim=True)
    return items


def spatial_memory_pass(h: torch.Tensor, bank: MemoryBank, train: bool, renorm: bool = True):
    """Read (and optionally write) sub-bank ``r`` with the offset-``r`` embeddings.

    Returns ``(readout (tau, N, D'), new_items or None, read weights (tau, N, P))``.
    """
    tau = h.shape[0]
    if bank.items.dim() != 3 or bank.items.shape[0] != tau:
        raise ValueError(f"spatial bank has {bank.items.shape[0]} sub-banks, window has {tau}")
    readouts, weights, new_items = [], [], []
    for r in range(tau):
        sub = bank.sub_bank(r)
        res = attention_read(h[r], sub)
        readouts.append(res.readout)
        weights.append(res.weights)
        if train:
            new_items.append(memory_update(h[r], sub, renorm))
    items = torch.stack(new_items) if train else None
    return torch.stack(readouts), items, torch.stack(weights)


def temporal_memory_pass(z: torch.Tensor, bank: MemoryBank, train: bool, renorm: bool = True):
    """Flatten ``(tau', N, D')`` to ``tau' * N`` queries against one bank."""
    s, n, d = z.shape
    flat = z.reshape(s * n, d)
    res = attention_read(flat, bank)
    items = memory_update(flat, bank, renorm) if train else None
    return res.readout.reshape(s, n, d), items, res.weights.reshape(s, n, -1)


def random_unit_items(shape, generator: torch.Generator, dtype=torch.float64) -> torch.Tensor:
    x = torch.randn(shape, generator=generator, dtype=dtype)
    return x / torch.linalg.vector_norm(x, dim=-1, keepdim=True)
