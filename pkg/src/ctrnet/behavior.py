"""Behavior-sequence encoder and item-behavior attention pooling.

One transformer block runs over the embedded behavior sequence. The default
ordering normalizes before each sublayer (attention, then feed-forward), with
residual connections around both; the post-norm ordering is kept as a variant
for convergence comparisons, and the block can be skipped entirely. Padded
positions are excluded from attention keys and from the pooled output.

The pooled representation concatenates the candidate item vector with the
attention-weighted sum of encoded behavior rows. Because the per-step score
inputs all share the candidate prefix and the weights sum to one, this equals
the weighted sum of the concatenated per-step vectors, and it degrades to
(candidate, zeros) with all-zero weights when an instance has no behaviors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .errors import AllMaskedError, ShapeMismatchError
from .numerics import Tensor


@dataclass
class TransformerParams:
    """One block's tensors. Per-head query/key/value maps are the column blocks of wq/wk/wv."""

    wq: Tensor | np.ndarray  # (d, d)
    wk: Tensor | np.ndarray  # (d, d)
    wv: Tensor | np.ndarray  # (d, d)
    wo: Tensor | np.ndarray  # (d, d)
    w1: Tensor | np.ndarray  # (d, d_ff)
    b1: Tensor | np.ndarray  # (d_ff,)
    w2: Tensor | np.ndarray  # (d_ff, d)
    b2: Tensor | np.ndarray  # (d,)
    ln1_gamma: Tensor | np.ndarray  # (d,)
    ln1_beta: Tensor | np.ndarray  # (d,)
    ln2_gamma: Tensor | np.ndarray  # (d,)
    ln2_beta: Tensor | np.ndarray  # (d,)
    n_heads: int = 1
    ln_eps: float = 1e-6


@dataclass
class IbimParams:
    """Score map for item-behavior attention: one shared (2d, 1) weight and a scalar bias."""

    score_w: Tensor | np.ndarray  # (2d, 1)
    score_b: Tensor | np.ndarray  # (1,)


def _dims_of(x) -> tuple[int, int, int]:
    shape = x.data.shape if isinstance(x, Tensor) else np.asarray(x).shape
    if len(shape) != 3:
        raise ShapeMismatchError(f"expected (B, T, d), got {shape}")
    return shape


def multi_head_self_attention_batch(x, valid: np.ndarray, p: TransformerParams):
    """Scaled dot-product self-attention over (B, T, d), h heads, masked keys excluded.

    Per head, queries/keys/values are column blocks of the d x d maps; scores
    use scale 1/sqrt(d/h); masked key positions get probability exactly zero.
    Rows of all-masked instances come out zero.
    """
    b, t, d = _dims_of(x)
    h = p.n_heads
    if d % h != 0:
        raise ShapeMismatchError(f"model width {d} not divisible by {h} heads")
    dh = d // h

    x2 = nm.reshape(x, (b * t, d))
    q = _split_heads(nm.matmul(x2, p.wq), b, t, h, dh)
    k = _split_heads(nm.matmul(x2, p.wk), b, t, h, dh)
    v = _split_heads(nm.matmul(x2, p.wv), b, t, h, dh)

    scores = nm.scale(nm.bmm_nt(q, k), 1.0 / np.sqrt(dh))
    key_mask = np.repeat(valid, h, axis=0)[:, None, :]  # (B*h, 1, T)
    attn = nm.masked_softmax_last(scores, key_mask)
    ctx = nm.bmm(attn, v)  # (B*h, T, dh)

    merged = nm.reshape(
        nm.transpose(nm.reshape(ctx, (b, h, t, dh)), (0, 2, 1, 3)), (b * t, d)
    )
    out = nm.matmul(merged, p.wo)
    return nm.reshape(out, (b, t, d))


def _split_heads(x2, b: int, t: int, h: int, dh: int):
    return nm.reshape(nm.transpose(nm.reshape(x2, (b, t, h, dh)), (0, 2, 1, 3)), (b * h, t, dh))


def _ffn(x2, p: TransformerParams):
    hidden = nm.relu(nm.add_bias(nm.matmul(x2, p.w1), p.b1))
    return nm.add_bias(nm.matmul(hidden, p.w2), p.b2)


def encode_behaviors_batch(e_b, valid: np.ndarray, p: TransformerParams | None, ordering: str):
    """Run the transformer block over (B, T, d) behavior embeddings.

    ordering: "pre_ln" normalizes before each sublayer, "post_ln" after, and
    "none" returns the input unchanged (no block).
    """
    if ordering == "none":
        return e_b
    if p is None:
        raise ValueError("transformer parameters required unless ordering is 'none'")
    b, t, d = _dims_of(e_b)
    if ordering == "pre_ln":
        normed = nm.reshape(
            nm.layer_norm_rows(nm.reshape(e_b, (b * t, d)), p.ln1_gamma, p.ln1_beta, p.ln_eps),
            (b, t, d),
        )
        x1 = nm.add(e_b, multi_head_self_attention_batch(normed, valid, p))
        x1_flat = nm.reshape(x1, (b * t, d))
        normed2 = nm.layer_norm_rows(x1_flat, p.ln2_gamma, p.ln2_beta, p.ln_eps)
        return nm.add(x1, nm.reshape(_ffn(normed2, p), (b, t, d)))
    if ordering == "post_ln":
        attn = multi_head_self_attention_batch(e_b, valid, p)
        x1_flat = nm.layer_norm_rows(
            nm.reshape(nm.add(e_b, attn), (b * t, d)), p.ln1_gamma, p.ln1_beta, p.ln_eps
        )
        x1 = nm.reshape(x1_flat, (b, t, d))
        out_flat = nm.layer_norm_rows(
            nm.add(x1_flat, _ffn(x1_flat, p)), p.ln2_gamma, p.ln2_beta, p.ln_eps
        )
        return nm.reshape(out_flat, (b, t, d))
    raise ValueError(f"unknown transformer ordering {ordering!r}")


def ibim_attention_batch(e_i, h_b, valid: np.ndarray, p: IbimParams):
    """Candidate-conditioned pooling of encoded behaviors.

    Scores tanh(concat(e_i, h_t) . w + b) are softmaxed over valid steps only.
    Returns (pooled (B, 2d), weights (B, T)); weights are exactly zero at padded
    steps, and an all-padded instance gets all-zero weights with a zero second
    half, the "no history" representation.
    """
    b, t, d = _dims_of(h_b)
    e_rep = nm.repeat_rows(e_i, t)  # (B*T, d)
    v = nm.concat_cols([e_rep, nm.reshape(h_b, (b * t, d))])  # (B*T, 2d)
    s = nm.tanh(nm.add_bias(nm.matmul(v, p.score_w), p.score_b))
    alpha = nm.masked_softmax_last(nm.reshape(s, (b, t)), valid)
    pooled = nm.attn_pool(alpha, h_b)  # (B, d)
    return nm.concat_cols([e_i, pooled]), alpha


# -- single-instance wrappers (evaluation path; raise on empty sequences) --


def multi_head_self_attention(l_b: np.ndarray, mask: np.ndarray, p: TransformerParams) -> np.ndarray:
    """Self-attention over one (T, d) sequence; requires at least one valid position."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise AllMaskedError("self-attention requires at least one valid position")
    out = multi_head_self_attention_batch(
        Tensor(np.asarray(l_b)[None, :, :]), mask[None, :], p
    )
    return out.data[0]


def pre_ln_transformer(e_b: np.ndarray, mask: np.ndarray, p: TransformerParams) -> np.ndarray:
    """Pre-norm block over one (T, d) sequence."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise AllMaskedError("transformer block requires at least one valid position")
    out = encode_behaviors_batch(
        Tensor(np.asarray(e_b)[None, :, :]), mask[None, :], p, "pre_ln"
    )
    return out.data[0]


def post_ln_transformer(e_b: np.ndarray, mask: np.ndarray, p: TransformerParams) -> np.ndarray:
    """Post-norm block over one (T, d) sequence (convergence-comparison variant)."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise AllMaskedError("transformer block requires at least one valid position")
    out = encode_behaviors_batch(
        Tensor(np.asarray(e_b)[None, :, :]), mask[None, :], p, "post_ln"
    )
    return out.data[0]


def ibim_attention(
    e_i: np.ndarray, h_b: np.ndarray, mask: np.ndarray, p: IbimParams
) -> tuple[np.ndarray, np.ndarray]:
    """Pool one (T, d) encoded sequence against a (d,) candidate; returns (vector(2d), weights(T))."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise AllMaskedError("item-behavior attention requires at least one valid position")
    pooled, alpha = ibim_attention_batch(
        Tensor(np.asarray(e_i)[None, :]), Tensor(np.asarray(h_b)[None, :, :]), mask[None, :], p
    )
    return pooled.data[0], alpha.data[0]
