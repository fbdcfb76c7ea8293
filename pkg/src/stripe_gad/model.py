"""The memory-augmented spatial-temporal graph autoencoder."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from . import decoder, encoder, losses
from .config import ModelConfig, TrainConfig
from .decoder import Reconstruction
from .memory import MemoryBank, random_unit_items, spatial_memory_pass, temporal_memory_pass


def _uniform(shape, fan_in, gen):
    bound = 1.0 / math.sqrt(fan_in)
    return (torch.rand(shape, generator=gen, dtype=torch.float64) * 2 - 1) * bound


@dataclass
class ForwardResult:
    recon: Reconstruction
    loss: losses.LossBreakdown
    h: torch.Tensor
    z: torch.Tensor
    sp_readout: torch.Tensor
    tp_readout: torch.Tensor
    z_hat: torch.Tensor
    h_hat: torch.Tensor
    new_sp_items: torch.Tensor | None
    new_tp_items: torch.Tensor | None


class StripeModel(nn.Module):
    """All trainable tensors, registered in a fixed order.

    ``named_parameters()`` order is the flat order used by gradient checks
    and checkpoints.
    """

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        super().__init__()
        self.cfg = cfg
        gen = torch.Generator().manual_seed(seed)
        d, dh, kt = cfg.in_dim, cfg.hidden_dim, cfg.kernel_width

        def add(name, tensor):
            self.register_parameter(name, nn.Parameter(tensor))

        for l in range(cfg.spatial_layers):
            fan = d if l == 0 else dh
            add(f"enc_gcn_{l}", _uniform((fan, dh), fan, gen))
        for l in range(cfg.temporal_layers):
            add(f"enc_tconv_{l}", _uniform((kt, dh, 2 * dh), kt * dh, gen))
        add("sp_items", random_unit_items((cfg.tau, cfg.spatial_items, dh), gen))
        for w in ("w_k", "w_q", "w_v"):
            add(f"sp_{w}", _uniform((dh, dh), dh, gen))
        add("tp_items", random_unit_items((cfg.temporal_items, dh), gen))
        for w in ("w_k", "w_q", "w_v"):
            add(f"tp_{w}", _uniform((dh, dh), dh, gen))
        for l in range(cfg.temporal_layers):
            add(f"dec_tconv_{l}", _uniform((kt, 4 * dh, 2 * dh), kt * 2 * dh, gen))
        add("dec_proj", _uniform((2 * dh, dh), 2 * dh, gen))
        add("fuse_w", _uniform((2 * dh, dh), 2 * dh, gen))
        if cfg.use_bias:
            add("dec_proj_b", torch.zeros(dh, dtype=torch.float64))
            add("fuse_b", torch.zeros(dh, dtype=torch.float64))
        for l in range(cfg.spatial_layers):
            out = d if l == cfg.spatial_layers - 1 else dh
            add(f"dec_gcn_{l}", _uniform((dh, out), dh, gen))
        add("w_de", _uniform((dh, dh), dh, gen))

    # --- parameter groups -------------------------------------------------

    def _list(self, prefix, count):
        return [getattr(self, f"{prefix}_{l}") for l in range(count)]

    @property
    def enc_gcn(self):
        return self._list("enc_gcn", self.cfg.spatial_layers)

    @property
    def enc_tconv(self):
        return self._list("enc_tconv", self.cfg.temporal_layers)

    @property
    def dec_tconv(self):
        return self._list("dec_tconv", self.cfg.temporal_layers)

    @property
    def dec_gcn(self):
        return self._list("dec_gcn", self.cfg.spatial_layers)

    def spatial_bank(self, item_grad: bool = True) -> MemoryBank:
        items = self.sp_items if item_grad else self.sp_items.detach()
        return MemoryBank(items, self.sp_w_k, self.sp_w_q, self.sp_w_v, self.cfg.top_k)

    def temporal_bank(self, item_grad: bool = True) -> MemoryBank:
        items = self.tp_items if item_grad else self.tp_items.detach()
        return MemoryBank(items, self.tp_w_k, self.tp_w_q, self.tp_w_v, self.cfg.top_k)

    def flat_layout(self):
        """``[(name, shape, offset)]`` over every trainable tensor."""
        layout, offset = [], 0
        for name, p in self.named_parameters():
            layout.append((name, tuple(p.shape), offset))
            offset += p.numel()
        return layout

    def flat_vector(self) -> torch.Tensor:
        return torch.cat([p.detach().reshape(-1) for p in self.parameters()])

    def load_flat_vector(self, vec: torch.Tensor) -> None:
        with torch.no_grad():
            for name, shape, off in self.flat_layout():
                p = getattr(self, name)
                p.copy_(vec[off : off + p.numel()].reshape(shape))

    # --- forward ------------------------------------------------------------

    def forward(self, window, train: bool, tcfg: TrainConfig, pairs=None, adjs=None):
        """Encode, read/write memory, decode and score one window.

        ``pairs`` switches the structure decoder to sampled mode: a list of
        ``(index (2, E), target (E,))`` per timestamp. ``adjs`` overrides the
        window's normalized adjacencies (used for edge dropout at scoring).
        Memory writes are returned, never applied here.
        """
        cfg = self.cfg
        if window.tau != cfg.tau:
            raise ValueError(f"window length {window.tau} != model tau {cfg.tau}")
        adjs = window.norm_adjs if adjs is None else adjs
        x = torch.from_numpy(np.stack([s.features for s in window.snapshots]))
        n = x.shape[1]

        h = encoder.spatial_encode(adjs, x, self.enc_gcn)
        z = encoder.temporal_encode(h, self.enc_tconv)

        new_sp = new_tp = None
        sp_items = tp_items = None
        if cfg.spatial_memory:
            bank = self.spatial_bank(tcfg.item_grad)
            sp_read, new_sp, _ = spatial_memory_pass(h, bank, train, cfg.mem_renorm)
            sp_items = new_sp if train else bank.items
        else:
            sp_read = torch.zeros_like(h)
        if cfg.temporal_memory:
            bank = self.temporal_bank(tcfg.item_grad)
            tp_read, new_tp, _ = temporal_memory_pass(z, bank, train, cfg.mem_renorm)
            tp_items = new_tp if train else bank.items
        else:
            tp_read = torch.zeros_like(z)

        bias = cfg.use_bias
        z_hat = decoder.temporal_decode(
            z, tp_read, self.dec_tconv, self.dec_proj, self.dec_proj_b if bias else None
        )
        h_hat = decoder.fuse(sp_read, z_hat, self.fuse_w, self.fuse_b if bias else None)
        x_hat = torch.stack(
            [decoder.decode_attributes(a, hh, self.dec_gcn) for a, hh in zip(adjs, h_hat)]
        )
        if pairs is None:
            a_hat = [decoder.decode_structure(hh, self.w_de, dense_cap=tcfg.dense_cap) for hh in h_hat]
            recon = Reconstruction(x_hat, a_hat)
        else:
            a_hat = [decoder.decode_structure(hh, self.w_de, pairs=p[0]) for hh, p in zip(h_hat, pairs)]
            recon = Reconstruction(x_hat, a_hat, [p[0] for p in pairs], [p[1] for p in pairs])

        rec, node_rec, off_rec = losses.loss_reconstruction(
            recon, window, tcfg.alpha, tcfg.normalize_loss, tcfg.last_only
        )
        com, node_com, off_com = losses.loss_compactness(
            h, z, sp_items, tp_items, tcfg.normalize_loss
        )
        if sp_items is None and tp_items is None:
            sep = h.new_zeros(())
        else:
            sep = losses.loss_separateness(
                h, z, sp_items, tp_items, tcfg.margin, tcfg.normalize_loss
            )
        breakdown = losses.LossBreakdown(
            rec=rec, com=com, sep=sep, total=rec + com + sep,
            per_node_rec=node_rec, per_node_com=node_com,
            offset_rec=off_rec, offset_com=off_com,
        )
        assert breakdown.offset_rec.shape == (cfg.tau, n)
        return ForwardResult(recon, breakdown, h, z, sp_read, tp_read, z_hat, h_hat, new_sp, new_tp)

    def commit_memory(self, result: ForwardResult) -> None:
        """Write the memory updates computed by a training forward pass."""
        with torch.no_grad():
            if result.new_sp_items is not None:
                self.sp_items.copy_(result.new_sp_items.detach())
            if result.new_tp_items is not None:
                self.tp_items.copy_(result.new_tp_items.detach())
