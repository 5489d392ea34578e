"""Global fusion: weigh original group embeddings and interactive outputs into one vector.

The slot list is fixed, in this order: the item vector, the masked mean of the
behavior rows, the mean user row, the mean context row, then the three
interactive outputs each mapped 2d -> d by one shared projection. Per-slot
scores tanh(r_l . w_l + b_l) are softmaxed and the slots are summed with those
weights. Ablation variants drop slots; the remaining ones keep this order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .embedding import EmbeddedBatch, EmbeddedInstance
from .errors import ShapeMismatchError
from .numerics import Tensor

SLOT_LABELS = ("e_i", "e_b_mean", "e_u_mean", "e_c_mean", "R_ibim", "R_iuim", "R_icim")
INTERACTIVE_SLOTS = ("R_ibim", "R_iuim", "R_icim")


@dataclass
class GlobalParams:
    """Shared 2d->d projection for interactive slots plus stacked per-slot score maps."""

    proj_w: Tensor | np.ndarray  # (2d, d)
    score_w: Tensor | np.ndarray  # (L, d)
    score_b: Tensor | np.ndarray  # (L,)
    labels: tuple[str, ...] = SLOT_LABELS


def mean_pool_rows(x, weights: np.ndarray):
    """Constant-weight pooling (B, J, d) -> (B, d); weights (B, J) are data, not parameters."""
    return nm.attn_pool(weights, x)


def masked_mean_weights(mask: np.ndarray) -> np.ndarray:
    """Per-instance uniform weights over valid positions; all-zero row when none are valid."""
    counts = mask.sum(axis=1, keepdims=True)
    return mask.astype(np.float64) / np.maximum(counts, 1)


def assemble_slots_batch(
    emb: EmbeddedBatch,
    interactive: dict[str, Tensor | None],
    proj_w,
    labels: tuple[str, ...] = SLOT_LABELS,
):
    """Build the (B, L, d) slot stack for `labels`, a subsequence of SLOT_LABELS."""
    b = emb.size
    d = emb.e_i.data.shape[1] if isinstance(emb.e_i, Tensor) else emb.e_i.shape[1]
    parts = []
    for label in labels:
        if label == "e_i":
            parts.append(emb.e_i)
        elif label == "e_b_mean":
            parts.append(mean_pool_rows(emb.e_b, masked_mean_weights(emb.behavior_mask)))
        elif label == "e_u_mean":
            j = emb.e_u.data.shape[1]
            parts.append(mean_pool_rows(emb.e_u, np.full((b, j), 1.0 / j)))
        elif label == "e_c_mean":
            k = emb.e_c.data.shape[1]
            parts.append(mean_pool_rows(emb.e_c, np.full((b, k), 1.0 / k)))
        elif label in INTERACTIVE_SLOTS:
            r = interactive.get(label)
            if r is None:
                raise ShapeMismatchError(f"slot {label} requested but not computed")
            parts.append(nm.matmul(r, proj_w))
        else:
            raise ValueError(f"unknown slot label {label!r}")
    stacked = nm.concat_cols(parts) if len(parts) > 1 else parts[0]
    return nm.reshape(stacked, (b, len(labels), d))


def gim_batch(slots, p: GlobalParams):
    """Attention over the slot stack: (B, L, d) -> (fused (B, d), weights (B, L))."""
    shape = slots.data.shape if isinstance(slots, Tensor) else np.asarray(slots).shape
    if len(shape) != 3 or shape[1] != len(p.labels):
        raise ShapeMismatchError(
            f"slot stack {shape} does not match {len(p.labels)} slot parameters"
        )
    scores = nm.tanh(nm.field_scores(slots, p.score_w, p.score_b))
    alpha = nm.masked_softmax_last(scores, None)
    fused = nm.attn_pool(alpha, slots)
    return fused, alpha


# -- single-instance wrappers --


def assemble_slots(
    emb: EmbeddedInstance,
    r_ibim: np.ndarray,
    r_iuim: np.ndarray,
    r_icim: np.ndarray,
    p: GlobalParams,
) -> list[np.ndarray]:
    """Slot vectors for one instance, in the fixed full order (7 slots of length d)."""
    batch = EmbeddedBatch(
        e_i=Tensor(np.asarray(emb.e_i)[None, :]),
        e_b=Tensor(np.asarray(emb.e_b)[None, :, :]),
        e_u=Tensor(np.asarray(emb.e_u)[None, :, :]),
        e_c=Tensor(np.asarray(emb.e_c)[None, :, :]),
        behavior_mask=np.asarray(emb.behavior_mask, dtype=bool)[None, :],
    )
    interactive = {
        "R_ibim": Tensor(np.asarray(r_ibim)[None, :]),
        "R_iuim": Tensor(np.asarray(r_iuim)[None, :]),
        "R_icim": Tensor(np.asarray(r_icim)[None, :]),
    }
    slots = assemble_slots_batch(batch, interactive, p.proj_w, SLOT_LABELS)
    return [row.copy() for row in slots.data[0]]


def gim(slots: list[np.ndarray], p: GlobalParams) -> tuple[np.ndarray, np.ndarray]:
    """Fuse one instance's slot list; the count must match the slot parameters (7 for the full model)."""
    if len(slots) != len(p.labels):
        raise ShapeMismatchError(
            f"expected {len(p.labels)} slots, got {len(slots)}"
        )
    stack = Tensor(np.stack([np.asarray(s) for s in slots])[None, :, :])
    fused, alpha = gim_batch(stack, p)
    return fused.data[0], alpha.data[0]
