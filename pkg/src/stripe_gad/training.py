"""Optimization loop, gradient access and checkpoint I/O."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .config import ModelConfig, TrainConfig
from .graph import DynamicGraph, extract_window, window_ends
from .model import StripeModel

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


class NumericError(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


# --- sampled structure targets -------------------------------------------------


def sample_pairs(snapshot, rng: np.random.Generator):
    """All directed edges plus as many uniformly drawn off-diagonal pairs.

    Returns ``(index (2, E), target (E,))`` torch tensors. A drawn negative
    that happens to be an edge keeps target 1.
    """
    n = snapshot.node_count
    pos = snapshot.edge_index()
    m = pos.shape[1]
    src = rng.integers(0, n, size=m)
    # shift by 1..n-1 so a pair never lands on the diagonal
    dst = (src + rng.integers(1, n, size=m)) % n if n > 1 else src
    codes = np.sort(pos[0] * n + pos[1])
    neg_codes = src * n + dst
    hit = np.isin(neg_codes, codes, assume_unique=False)
    idx = np.concatenate([pos, np.stack([src, dst])], axis=1)
    target = np.concatenate([np.ones(m), hit.astype(np.float64)])
    return torch.from_numpy(idx), torch.from_numpy(target)


def window_pairs(window, tcfg: TrainConfig, rng):
    """Sampled pairs when the window exceeds the dense cap, else ``None``."""
    if window.num_nodes <= tcfg.dense_cap:
        return None
    return [sample_pairs(s, rng) for s in window.snapshots]


# --- gradients -------------------------------------------------------------------


def flat_grad(model: StripeModel) -> torch.Tensor:
    parts = []
    for p in model.parameters():
        g = p.grad if p.grad is not None else torch.zeros_like(p)
        parts.append(g.reshape(-1))
    return torch.cat(parts)


def check_finite_grads(model: StripeModel) -> None:
    for name, p in model.named_parameters():
        if p.grad is not None and not torch.isfinite(p.grad).all():
            raise NumericError(f"non-finite gradient in tensor {name!r}")


def gradients(model: StripeModel, window, tcfg: TrainConfig, pairs=None) -> torch.Tensor:
    """Gradient of the training-mode total loss, flattened in parameter order.

    Memory writes computed by the pass are discarded.
    """
    model.zero_grad(set_to_none=True)
    res = model(window, train=True, tcfg=tcfg, pairs=pairs)
    res.loss.total.backward()
    check_finite_grads(model)
    grad = flat_grad(model)
    model.zero_grad(set_to_none=True)
    return grad


def total_loss_at(model: StripeModel, vec: torch.Tensor, window, tcfg, pairs=None) -> float:
    saved = model.flat_vector()
    model.load_flat_vector(vec)
    try:
        with torch.no_grad():
            return float(model(window, train=True, tcfg=tcfg, pairs=pairs).loss.total)
    finally:
        model.load_flat_vector(saved)


def numerical_gradient(model: StripeModel, window, tcfg, step: float = 1e-5, pairs=None) -> torch.Tensor:
    """Central finite differences of the total loss, one coordinate at a time."""
    vec = model.flat_vector()
    out = torch.zeros_like(vec)
    for i in range(len(vec)):
        hi, lo = vec.clone(), vec.clone()
        hi[i] += step
        lo[i] -= step
        f_hi = total_loss_at(model, hi, window, tcfg, pairs)
        f_lo = total_loss_at(model, lo, window, tcfg, pairs)
        out[i] = (f_hi - f_lo) / (2 * step)
    return out


def per_tensor_relative_error(model: StripeModel, a: torch.Tensor, b: torch.Tensor) -> dict:
    """``|a - b| / max(|a|, |b|)`` per named tensor of the flat layout."""
    errs = {}
    for name, shape, off in model.flat_layout():
        k = int(np.prod(shape))
        ga, gb = a[off : off + k], b[off : off + k]
        denom = max(float(ga.norm()), float(gb.norm()), 1e-300)
        errs[name] = float((ga - gb).norm()) / denom
    return errs


# --- training loop -----------------------------------------------------------------


@dataclass
class TrainResult:
    model: StripeModel
    history: list = field(default_factory=list)  # dicts: epoch, window_end_t, rec, com, sep, total


def make_optimizer(model: StripeModel, tcfg: TrainConfig):
    return torch.optim.Adam(
        model.parameters(), lr=tcfg.lr, betas=(tcfg.beta1, tcfg.beta2), eps=tcfg.adam_eps
    )


def train_step(model, opt, window, tcfg, pairs=None):
    opt.zero_grad(set_to_none=True)
    res = model(window, train=True, tcfg=tcfg, pairs=pairs)
    losses = res.loss.as_floats()
    if not all(np.isfinite(v) for v in losses.values()):
        raise NumericError(f"non-finite loss at window ending t={window.end_t}: {losses}")
    res.loss.total.backward()
    check_finite_grads(model)
    model.commit_memory(res)
    opt.step()
    return losses


def train(graph: DynamicGraph, model_cfg: ModelConfig, tcfg: TrainConfig,
          timestamps=None, model: StripeModel | None = None) -> TrainResult:
    """Fit on the windows ending at ``timestamps`` (default: all), in time order.

    One optimizer step per window; memory writes are committed before the
    gradient step.
    """
    if timestamps is None:
        timestamps = range(graph.T)
    ends = window_ends(sorted(timestamps), model_cfg.tau)
    if not ends:
        raise ValueError(f"no training window of size tau={model_cfg.tau} fits")
    if model is None:
        model = StripeModel(model_cfg, seed=tcfg.seed)
    windows = [extract_window(graph, t, model_cfg.tau) for t in ends]
    rng = np.random.default_rng([tcfg.seed, 1])
    opt = make_optimizer(model, tcfg)
    result = TrainResult(model)
    for epoch in range(tcfg.epochs):
        for window in windows:
            losses = train_step(model, opt, window, tcfg, window_pairs(window, tcfg, rng))
            result.history.append({"epoch": epoch, "window_end_t": window.end_t, **losses})
        last = result.history[-len(windows):]
        log.info("epoch %d mean total loss %.6f", epoch, np.mean([r["total"] for r in last]))
    return result


def write_history(history, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "window_end_t", "rec", "com", "sep", "total"])
        for r in history:
            w.writerow([r["epoch"], r["window_end_t"]] + [repr(r[k]) for k in ("rec", "com", "sep", "total")])


# --- checkpoints -------------------------------------------------------------------
#
# layout: <u64 little-endian header length> <UTF-8 JSON header> <raw tensor bytes>

_DTYPES = {"float32": np.dtype("<f4"), "float64": np.dtype("<f8")}


def save_checkpoint(model: StripeModel, path, extra_config: dict | None = None,
                    dtype: str = "float32") -> None:
    if dtype not in _DTYPES:
        raise CheckpointError(f"unsupported checkpoint dtype {dtype!r}")
    np_dtype = _DTYPES[dtype]
    tensors, blobs, offset = [], [], 0
    for name, p in model.named_parameters():
        blob = p.detach().numpy().astype(np_dtype).tobytes()
        tensors.append({"name": name, "shape": list(p.shape), "dtype": dtype, "byte_offset": offset})
        blobs.append(blob)
        offset += len(blob)
    header = {
        "version": CHECKPOINT_VERSION,
        "config": {"model": dataclasses.asdict(model.cfg), "run": extra_config or {}},
        "tensors": tensors,
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    Path(path).write_bytes(struct.pack("<Q", len(head)) + head + b"".join(blobs))


def read_checkpoint_header(path) -> tuple:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise CheckpointError(f"truncated checkpoint {path}: no header length")
    (hlen,) = struct.unpack("<Q", raw[:8])
    if len(raw) < 8 + hlen:
        raise CheckpointError(f"truncated checkpoint {path}: header cut short")
    try:
        header = json.loads(raw[8 : 8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header in {path}: {exc}") from None
    return header, raw[8 + hlen :]


def load_checkpoint(path) -> tuple:
    """Returns ``(model, header)``; raises :class:`CheckpointError` before touching state."""
    header, body = read_checkpoint_header(path)
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"checkpoint version {header.get('version')} != {CHECKPOINT_VERSION}")
    model = StripeModel(ModelConfig(**header["config"]["model"]))
    layout = model.flat_layout()
    entries = header["tensors"]
    if [(e["name"], tuple(e["shape"])) for e in entries] != [(n, s) for n, s, _ in layout]:
        raise CheckpointError("checkpoint tensor list does not match the model layout")
    arrays = []
    for e in entries:
        dt = _DTYPES.get(e["dtype"])
        if dt is None:
            raise CheckpointError(f"unsupported tensor dtype {e['dtype']!r}")
        nbytes = int(np.prod(e["shape"], dtype=np.int64)) * dt.itemsize
        start = e["byte_offset"]
        if start + nbytes > len(body):
            raise CheckpointError(f"truncated checkpoint {path}: tensor {e['name']!r} incomplete")
        arr = np.frombuffer(body, dtype=dt, count=nbytes // dt.itemsize, offset=start)
        arrays.append(arr.astype(np.float64).reshape(e["shape"]))
    with torch.no_grad():
        for (name, _, _), arr in zip(layout, arrays):
            getattr(model, name).copy_(torch.from_numpy(arr))
    return model, header
